mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{demo_fixtures, survey_csv, NOW};

fn inspect(corpus: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inspect"))
        .arg("--corpus")
        .arg(corpus)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Values row of the sync report: fetched, published, posted, skipped, failed.
fn report_row(out: &str) -> Vec<usize> {
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("fetched"));
    lines
        .next()
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect()
}

fn sync_args<'a>(fixtures: &'a str) -> Vec<&'a str> {
    vec![
        "--fixtures", fixtures, "--now", NOW, "sync", "--project", "demo-app", "--repo", "team/app", "--pr", "7",
    ]
}

#[test]
fn sync_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let fixtures = demo_fixtures(tmp.path());
    let f = fixtures.to_str().unwrap();

    let first = inspect(&corpus, &sync_args(f));
    assert!(first.status.success(), "{}", stderr(&first));
    assert_eq!(report_row(&stdout(&first)), [4, 4, 4, 0, 0]);
    assert!(stdout(&first).contains("corpus: 5 added"));

    let second = inspect(&corpus, &sync_args(f));
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(report_row(&stdout(&second)), [4, 0, 0, 4, 0]);
    assert!(stdout(&second).contains("0 added, 0 updated, 5 unchanged"));
}

#[test]
fn missing_frame_is_a_partial_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let fixtures = demo_fixtures(tmp.path());
    std::fs::remove_file(fixtures.join("project/demo-app/frames/search.png")).unwrap();

    let o = inspect(&corpus, &sync_args(fixtures.to_str().unwrap()));
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report_row(&stdout(&o)), [4, 3, 3, 0, 1]);
    assert!(stdout(&o).contains("failed 104: missing frame image"));
}

#[test]
fn unreachable_fixtures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let gone = tmp.path().join("nowhere");
    let o = inspect(&tmp.path().join("corpus"), &sync_args(gone.to_str().unwrap()));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    assert!(!tmp.path().join("corpus/comments.csv").exists());
}

#[test]
fn unknown_pr_aborts() {
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = demo_fixtures(tmp.path());
    let mut args = sync_args(fixtures.to_str().unwrap());
    *args.last_mut().unwrap() = "999";
    let o = inspect(&tmp.path().join("corpus"), &args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("PR not found"), "{}", stderr(&o));
}

#[test]
fn stats_on_the_survey_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    assert!(inspect(&corpus, &["import", survey_csv().to_str().unwrap()]).status.success());

    let o = inspect(&corpus, &["stats", "--year", "2022", "--group", "G1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let row = |name: &str| {
        out.lines()
            .find(|l| l.split_whitespace().next() == Some(name))
            .unwrap_or_else(|| panic!("no {name} row in\n{out}"))
            .split_whitespace()
            .nth(1)
            .unwrap()
            .to_string()
    };
    assert_eq!(row("presentation"), "57");
    assert_eq!(row("short-description"), "50");
    assert_eq!(row("label-total"), "269");
    assert_eq!(row("comments"), "264");

    let svg = tmp.path().join("chart.svg");
    let o = inspect(&corpus, &["stats", "--svg", svg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("comments per year: 2022=264 2021=117 2020=171"));
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
}

#[test]
fn label_then_export() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let fixtures = demo_fixtures(tmp.path());
    assert!(inspect(&corpus, &sync_args(fixtures.to_str().unwrap())).status.success());

    let o = inspect(&corpus, &["label", "figma-102", "format,mistake", "--by", "ta-2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bad = inspect(&corpus, &["label", "figma-102", "typo"]);
    assert_eq!(bad.status.code(), Some(1));

    let out = tmp.path().join("out.csv");
    assert!(inspect(&corpus, &["export", "--out", out.to_str().unwrap()]).status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    let line = csv.split("\r\n").find(|l| l.starts_with("figma-102,")).unwrap();
    assert!(line.contains(",mistake;format,human:ta-2,"), "{line}");

    let piped = inspect(&corpus, &["export"]);
    assert_eq!(stdout(&piped), csv);
}

#[test]
fn suggest_requires_a_trained_model() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    assert!(inspect(&corpus, &["import", survey_csv().to_str().unwrap()]).status.success());

    let o = inspect(&corpus, &["suggest", "s2022g1-001"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no model"), "{}", stderr(&o));

    let o = inspect(&corpus, &["train", "--folds", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("3-fold macro-F1"));
    let o = inspect(&corpus, &["suggest", "s2022g1-001"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("suggested: ")));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = inspect(tmp.path(), &["sync", "--project", "p"]);
    assert_eq!(o.status.code(), Some(2));
    let o = inspect(tmp.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}
