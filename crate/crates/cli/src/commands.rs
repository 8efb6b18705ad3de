use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use chrono::{DateTime, Utc};
use inspect_core::analytics::{
    all_stats, compute_stats, percentage_chart_data, render_bar_chart, trend_flags,
    yearly_comment_totals, GroupStats,
};
use inspect_core::bridge::{self, ImportContext, Signature, SyncParams, SyncReport};
use inspect_core::classifier::{
    evaluate, examples, train, training_set, MultiLabelModel, DEFAULT_SEED,
};
use inspect_core::corpus::{export_csv, import_csv, CorpusDir};
use inspect_core::{Category, CommentId, Corpus, Labeler};

use crate::backend::Backend;
use crate::config::ServiceConfig;

/// How a command ended when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PartialFailure,
}

/// Everything a command needs besides its own arguments.
#[derive(Debug, Clone)]
pub struct Env {
    pub config: ServiceConfig,
    /// Fixed clock for reproducible runs.
    pub now: Option<DateTime<Utc>>,
}

impl Env {
    pub fn now(&self) -> DateTime<Utc> {
        self.now.unwrap_or_else(Utc::now)
    }

    pub fn corpus_dir(&self) -> Result<CorpusDir> {
        Ok(CorpusDir::open(&self.config.corpus_dir)?)
    }

    fn load(&self) -> Result<(CorpusDir, Corpus)> {
        let dir = self.corpus_dir()?;
        let corpus = dir.load()?;
        Ok((dir, corpus))
    }
}

pub struct SyncArgs {
    pub project: String,
    pub repo: String,
    pub pr: u64,
    pub group: String,
    pub year: Option<i32>,
}

pub fn print_report(report: &SyncReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{:<9}{:<11}{:<8}{:<9}{}", "fetched", "published", "posted", "skipped", "failed")?;
    writeln!(
        out,
        "{:<9}{:<11}{:<8}{:<9}{}",
        report.fetched,
        report.published_images,
        report.posted_comments,
        report.skipped_duplicates,
        report.failures.len()
    )?;
    for f in &report.failures {
        writeln!(out, "failed {}: {}", f.remote_id, f.reason)?;
    }
    Ok(())
}

/// Mirrors the design project into the PR, then pulls the whole PR
/// conversation into the corpus.
pub fn sync(env: &Env, args: &SyncArgs, out: &mut dyn Write) -> Result<Outcome> {
    let backend = Backend::from_config(&env.config, env.now)?;
    let store = backend.store(&args.repo)?;
    let params = SyncParams {
        project_id: &args.project,
        repo: &args.repo,
        pr_number: args.pr,
        ref_name: &env.config.image_ref_name,
        signature: Signature {
            name: "inspect bridge".to_string(),
            email: "bridge@inspect.invalid".to_string(),
            when: env.now(),
        },
    };
    let report = bridge::sync(&params, backend.design(), backend.code_host(), store.as_ref())?;
    print_report(&report, out)?;

    let ctx = ImportContext {
        group: args.group.clone(),
        year: args.year,
        ..ImportContext::default()
    };
    let imported = bridge::fetch_code_host_comments(&args.repo, args.pr, backend.code_host(), &ctx)?;
    for w in &imported.warnings {
        log::warn!("{w}");
    }
    let dir = env.corpus_dir()?;
    let lock = dir.try_lock()?;
    let mut corpus = dir.load()?;
    let ingest = corpus.ingest(imported.comments);
    dir.save(&corpus, &lock)?;
    writeln!(
        out,
        "corpus: {} added, {} updated, {} unchanged, {} rejected",
        ingest.added,
        ingest.updated,
        ingest.unchanged,
        ingest.rejected.len()
    )?;
    for (id, violations) in &ingest.rejected {
        let reasons: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        log::warn!("rejected {id}: {}", reasons.join(", "));
    }
    Ok(if report.failures.is_empty() {
        Outcome::Success
    } else {
        Outcome::PartialFailure
    })
}

/// Merges a CSV file (the export format) into the corpus.
pub fn import(env: &Env, path: &Path, out: &mut dyn Write) -> Result<Outcome> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let incoming = import_csv(std::io::BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    let dir = env.corpus_dir()?;
    let lock = dir.try_lock()?;
    let mut corpus = dir.load()?;
    let report = corpus.ingest(incoming.comments().cloned());
    let mut recorded = 0;
    for a in incoming.assignments() {
        if corpus.get(&a.comment_id).is_some() && corpus.effective_assignment(&a.comment_id) != Some(a) {
            corpus.record(a.clone())?;
            recorded += 1;
        }
    }
    dir.save(&corpus, &lock)?;
    writeln!(
        out,
        "imported {}: {} added, {} updated, {} unchanged, {} rejected, {} label assignments",
        path.display(),
        report.added,
        report.updated,
        report.unchanged,
        report.rejected.len(),
        recorded
    )?;
    Ok(if report.rejected.is_empty() {
        Outcome::Success
    } else {
        Outcome::PartialFailure
    })
}

/// `-` writes to stdout.
pub fn export(env: &Env, dest: &Path, out: &mut dyn Write) -> Result<Outcome> {
    let (_, corpus) = env.load()?;
    if dest == Path::new("-") {
        export_csv(&corpus, &mut *out)?;
    } else {
        let mut buf = Vec::new();
        let n = export_csv(&corpus, &mut buf)?;
        fs::write(dest, buf).with_context(|| format!("writing {}", dest.display()))?;
        writeln!(out, "wrote {n} comments to {}", dest.display())?;
    }
    Ok(Outcome::Success)
}

pub struct StatsArgs {
    pub year: Option<i32>,
    pub group: Option<String>,
    pub svg: Option<PathBuf>,
    pub json: bool,
}

fn select_stats(corpus: &Corpus, year: Option<i32>, group: Option<&str>) -> Vec<GroupStats> {
    match (year, group) {
        (Some(y), Some(g)) => vec![compute_stats(corpus, y, g)],
        _ => all_stats(corpus)
            .into_iter()
            .filter(|s| year.is_none_or(|y| s.year == y) && group.is_none_or(|g| s.group == g))
            .collect(),
    }
}

pub fn stats(env: &Env, args: &StatsArgs, out: &mut dyn Write) -> Result<Outcome> {
    env.config.check_thresholds()?;
    let (_, corpus) = env.load()?;
    let stats = select_stats(&corpus, args.year, args.group.as_deref());
    let flags = trend_flags(&stats, &env.config.trend_thresholds)?;

    if let Some(path) = &args.svg {
        let series: Vec<_> = percentage_chart_data(&corpus)
            .into_iter()
            .filter(|s| stats.iter().any(|g| g.year == s.year && g.group == s.group))
            .collect();
        fs::write(path, render_bar_chart(&series))
            .with_context(|| format!("writing {}", path.display()))?;
    }

    if args.json {
        let body = serde_json::json!({
            "groups": stats,
            "yearly_totals": yearly_comment_totals(&corpus),
            "flags": flags,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&body)?)?;
        return Ok(Outcome::Success);
    }

    if stats.is_empty() {
        writeln!(out, "no comments match")?;
        return Ok(Outcome::Success);
    }
    write!(out, "{:<20}", "category")?;
    for s in &stats {
        write!(out, "{:>9}", s.key().to_string())?;
    }
    writeln!(out)?;
    for c in Category::ALL {
        write!(out, "{:<20}", c.slug())?;
        for s in &stats {
            write!(out, "{:>9}", s.count(c))?;
        }
        writeln!(out)?;
    }
    let mut row = |name: &str, f: &dyn Fn(&GroupStats) -> String| -> Result<()> {
        write!(out, "{name:<20}")?;
        for s in &stats {
            write!(out, "{:>9}", f(s))?;
        }
        writeln!(out)?;
        Ok(())
    };
    row("label-total", &|s| s.label_total.to_string())?;
    row("comments", &|s| s.comment_total.to_string())?;
    row("presentation-share", &|s| {
        s.share(Category::Presentation)
            .map(|p| format!("{:.4}", p))
            .unwrap_or_else(|| "-".into())
    })?;
    if args.year.is_none() && args.group.is_none() {
        let totals: Vec<String> = yearly_comment_totals(&corpus)
            .iter()
            .rev()
            .map(|(y, n)| format!("{y}={n}"))
            .collect();
        writeln!(out, "comments per year: {}", totals.join(" "))?;
    }
    for f in &flags {
        writeln!(out, "flag: {}", f.message)?;
    }
    Ok(Outcome::Success)
}

pub fn label(env: &Env, id: &str, slugs: &str, by: &str, out: &mut dyn Write) -> Result<Outcome> {
    let parts: Vec<&str> = slugs.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let dir = env.corpus_dir()?;
    let lock = dir.try_lock()?;
    let mut corpus = dir.load()?;
    let a = corpus.assign_label_slugs(&CommentId::from(id), &parts, Labeler::Human(by.to_string()), env.now())?;
    dir.save(&corpus, &lock)?;
    writeln!(out, "{id}: {} ({})", a.labels.join(";"), a.labeler)?;
    Ok(Outcome::Success)
}

pub const MIN_TRAINING_COMMENTS: usize = 2;

pub struct TrainArgs {
    pub out: Option<PathBuf>,
    pub folds: usize,
    pub version: Option<String>,
}

pub fn train_model(env: &Env, args: &TrainArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (dir, corpus) = env.load()?;
    let set = training_set(&corpus);
    if set.len() < MIN_TRAINING_COMMENTS {
        bail!(
            "need at least {MIN_TRAINING_COMMENTS} labeled comments to train, found {}",
            set.len()
        );
    }
    let ex = examples(&set);
    let mut model = train(&ex, "")?;
    model.version = match &args.version {
        Some(v) => v.clone(),
        None => format!("nb-{}", &model.fingerprint()[..12]),
    };
    model.save(&dir.model_path())?;
    if let Some(path) = &args.out {
        model.save(path)?;
    }
    writeln!(
        out,
        "trained {} on {} labeled comments, vocabulary {}",
        model.version,
        set.len(),
        model.vocabulary.len()
    )?;
    if args.folds >= 2 && set.len() >= args.folds {
        let eval = evaluate(&ex, args.folds, DEFAULT_SEED)?;
        match eval.macro_f1 {
            Some(f) => writeln!(out, "{}-fold macro-F1: {f:.4}", eval.folds)?,
            None => writeln!(out, "{}-fold macro-F1: undefined", eval.folds)?,
        }
        for (c, m) in &eval.per_category {
            match m {
                Some(m) => writeln!(
                    out,
                    "  {:<20} p={:.3} r={:.3} f1={:.3} support={}",
                    c.slug(),
                    m.precision,
                    m.recall,
                    m.f1,
                    m.support
                )?,
                None => writeln!(out, "  {:<20} no support", c.slug())?,
            }
        }
    } else {
        writeln!(out, "skipping cross-validation: {} comments for {} folds", set.len(), args.folds)?;
    }
    Ok(Outcome::Success)
}

pub fn load_model(dir: &CorpusDir) -> Result<Option<MultiLabelModel>> {
    let path = dir.model_path();
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(MultiLabelModel::load(&path)?))
}

pub fn suggest(env: &Env, id: &str, record: bool, out: &mut dyn Write) -> Result<Outcome> {
    let (dir, corpus) = env.load()?;
    let model = load_model(&dir)?.ok_or_else(|| anyhow!("no model"))?;
    let id = CommentId::from(id);
    let comment = corpus.get(&id).ok_or_else(|| anyhow!("unknown comment `{id}`"))?;
    let a = model.predict_assignment(comment, env.now())?;
    let scores = a.scores.as_ref().expect("model assignments carry scores");
    for c in Category::ALL {
        let mark = if a.labels.contains(c) { "*" } else { "" };
        writeln!(out, "{:<20} {:.4} {mark}", c.slug(), scores[&c])?;
    }
    writeln!(out, "suggested: {}", a.labels.join(";"))?;
    if record {
        let lock = dir.try_lock()?;
        let mut corpus = dir.load()?;
        corpus.record(a)?;
        dir.save(&corpus, &lock)?;
    }
    Ok(Outcome::Success)
}
