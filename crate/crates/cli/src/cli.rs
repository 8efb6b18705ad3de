use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};

use crate::commands::{self, Env, Outcome, StatsArgs, SyncArgs, TrainArgs};
use crate::config::ServiceConfig;
use crate::service;

#[derive(Debug, Parser)]
#[command(name = "inspect", version, about = "Collect, classify and summarize inspection comments")]
pub struct Cli {
    /// TOML settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus directory (overrides the config file).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Fixture directory to use instead of the hosted services.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// Use the hosted services; tokens come from the environment.
    #[arg(long, global = true)]
    pub live: bool,
    /// Pretend the current time is this RFC 3339 timestamp.
    #[arg(long, global = true)]
    pub now: Option<DateTime<Utc>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mirror design comments into a pull request and import the PR conversation.
    Sync {
        #[arg(long)]
        project: String,
        #[arg(long)]
        repo: String,
        #[arg(long)]
        pr: u64,
        /// Team the imported comments belong to.
        #[arg(long, default_value = "G1")]
        group: String,
        /// Course year; defaults to each comment's creation year.
        #[arg(long)]
        year: Option<i32>,
        /// Ref that receives pin images.
        #[arg(long = "ref")]
        image_ref: Option<String>,
    },
    /// Merge a CSV file in the export format into the corpus.
    Import { csv: PathBuf },
    /// Write the corpus as CSV.
    Export {
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Per-group category counts and shares.
    Stats {
        #[arg(long)]
        year: Option<i32>,
        #[arg(long)]
        group: Option<String>,
        /// Also write a grouped bar chart of the shares.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Record a human label assignment.
    Label {
        comment_id: String,
        /// Comma-separated category slugs.
        slugs: String,
        #[arg(long, default_value = "cli")]
        by: String,
    },
    /// Train the classifier on the current labels.
    Train {
        /// Extra copy of the model file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long = "model-version")]
        model_version: Option<String>,
    },
    /// Score a comment with the trained classifier.
    Suggest {
        comment_id: String,
        /// Store the prediction as a machine assignment.
        #[arg(long)]
        record: bool,
    },
    /// Start the HTTP API.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
}

impl Cli {
    pub fn env(&self) -> Result<Env> {
        let mut config = match &self.config {
            Some(path) => ServiceConfig::load(path)?,
            None => ServiceConfig::default(),
        };
        if let Some(c) = &self.corpus {
            config.corpus_dir = c.clone();
        }
        if let Some(f) = &self.fixtures {
            config.fixture_dir = Some(f.clone());
            config.live_mode = false;
        }
        if self.live {
            config.live_mode = true;
            config.fixture_dir = None;
        }
        if let Command::Sync { image_ref: Some(r), .. } = &self.command {
            config.image_ref_name = r.clone();
        }
        if let Command::Serve { listen: Some(l) } = &self.command {
            config.listen_address = l.clone();
        }
        Ok(Env {
            config,
            now: self.now,
        })
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Outcome> {
    let env = cli.env()?;
    match cli.command {
        Command::Sync {
            project,
            repo,
            pr,
            group,
            year,
            ..
        } => commands::sync(
            &env,
            &SyncArgs {
                project,
                repo,
                pr,
                group,
                year,
            },
            out,
        ),
        Command::Import { csv } => commands::import(&env, &csv, out),
        Command::Export { out: dest } => commands::export(&env, &dest, out),
        Command::Stats {
            year,
            group,
            svg,
            json,
        } => commands::stats(
            &env,
            &StatsArgs {
                year,
                group,
                svg,
                json,
            },
            out,
        ),
        Command::Label {
            comment_id,
            slugs,
            by,
        } => commands::label(&env, &comment_id, &slugs, &by, out),
        Command::Train {
            out: model_out,
            folds,
            model_version,
        } => commands::train_model(
            &env,
            &TrainArgs {
                out: model_out,
                folds,
                version: model_version,
            },
            out,
        ),
        Command::Suggest { comment_id, record } => commands::suggest(&env, &comment_id, record, out),
        Command::Serve { .. } => {
            let listen = env.config.listen_address.clone();
            let state = service::AppState::new(env.config, env.now)?;
            tokio::runtime::Runtime::new()?.block_on(service::serve(state, &listen))?;
            Ok(Outcome::Success)
        }
    }
}
