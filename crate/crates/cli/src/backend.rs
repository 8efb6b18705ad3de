//! Transport selection: fixture directories or the hosted services.

use anyhow::{Context as _, Result};
use chrono::{DateTime, Utc};
use inspect_core::bridge::git::DirStore;
use inspect_core::bridge::transport::FixtureTransport;
use inspect_core::bridge::{CodeHost, DesignTool, ObjectStore};

use crate::config::ServiceConfig;

pub enum Backend {
    Fixture(FixtureTransport),
    #[cfg(feature = "live")]
    Live {
        design: inspect_core::bridge::transport::live::DesignToolClient,
        code_host: inspect_core::bridge::transport::live::CodeHostClient,
    },
}

impl Backend {
    /// Builds the configured backend. `now`, when given, stamps comments
    /// posted to fixtures.
    pub fn from_config(config: &ServiceConfig, now: Option<DateTime<Utc>>) -> Result<Backend> {
        config.check_transports()?;
        if let Some(dir) = &config.fixture_dir {
            let mut t = FixtureTransport::new(dir);
            if let Some(at) = now {
                t = t.with_clock(move || at);
            }
            return Ok(Backend::Fixture(t));
        }
        live(config)
    }

    pub fn design(&self) -> &dyn DesignTool {
        match self {
            Backend::Fixture(t) => t,
            #[cfg(feature = "live")]
            Backend::Live { design, .. } => design,
        }
    }

    pub fn code_host(&self) -> &dyn CodeHost {
        match self {
            Backend::Fixture(t) => t,
            #[cfg(feature = "live")]
            Backend::Live { code_host, .. } => code_host,
        }
    }

    /// Image store of `repo`, creating it if needed.
    pub fn store(&self, repo: &str) -> Result<Box<dyn ObjectStore>> {
        match self {
            Backend::Fixture(t) => Ok(Box::new(
                t.object_store(repo)
                    .with_context(|| format!("opening object store for {repo}"))?,
            )),
            #[cfg(feature = "live")]
            Backend::Live { code_host, .. } => Ok(Box::new(code_host.object_store(repo))),
        }
    }

    /// Image store of `repo` if it already exists; never creates anything.
    pub fn existing_store(&self, repo: &str) -> Option<Box<dyn ObjectStore>> {
        match self {
            Backend::Fixture(t) => {
                let root = t.root().join("repo").join(repo).join("git");
                if root.join("objects").is_dir() && !repo.split('/').any(|p| p == ".." || p.is_empty()) {
                    DirStore::open(root).ok().map(|s| Box::new(s) as Box<dyn ObjectStore>)
                } else {
                    None
                }
            }
            #[cfg(feature = "live")]
            Backend::Live { code_host, .. } => Some(Box::new(code_host.object_store(repo))),
        }
    }
}

#[cfg(feature = "live")]
fn live(_config: &ServiceConfig) -> Result<Backend> {
    use inspect_core::bridge::transport::live::{CodeHostClient, DesignToolClient};
    Ok(Backend::Live {
        design: DesignToolClient::from_env()?,
        code_host: CodeHostClient::from_env()?,
    })
}

#[cfg(not(feature = "live"))]
fn live(_config: &ServiceConfig) -> Result<Backend> {
    anyhow::bail!("this build has no live transport support; rebuild with the `live` feature")
}
