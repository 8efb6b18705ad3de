use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use inspect_core::bridge::DEFAULT_IMAGE_REF;
use inspect_core::Category;
use serde::{Deserialize, Serialize};

pub const DESIGN_TOKEN_ENV: &str = "BRIDGE_DESIGN_TOKEN";
pub const CODEHOST_TOKEN_ENV: &str = "BRIDGE_CODEHOST_TOKEN";

/// Settings shared by the commands and the HTTP service. Loaded from the
/// TOML file given with `--config`; command-line flags win over the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub corpus_dir: PathBuf,
    pub fixture_dir: Option<PathBuf>,
    pub live_mode: bool,
    pub listen_address: String,
    pub image_ref_name: String,
    /// Share of a group's labels at which a category is called out.
    pub trend_thresholds: BTreeMap<Category, f64>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            corpus_dir: PathBuf::from("corpus"),
            fixture_dir: None,
            live_mode: false,
            listen_address: "127.0.0.1:8080".to_string(),
            image_ref_name: DEFAULT_IMAGE_REF.to_string(),
            trend_thresholds: [(Category::Presentation, 0.15), (Category::Inconsistent, 0.10)].into(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Checks the settings a transport-using command depends on.
    pub fn check_transports(&self) -> Result<()> {
        match (self.live_mode, &self.fixture_dir) {
            (true, Some(_)) => bail!("configure either fixture_dir or live_mode, not both"),
            (false, None) => bail!("no transport configured: pass --fixtures <dir> or enable live_mode"),
            (true, None) => {
                for var in [DESIGN_TOKEN_ENV, CODEHOST_TOKEN_ENV] {
                    if std::env::var_os(var).is_none_or(|v| v.is_empty()) {
                        bail!("live mode needs {var} in the environment");
                    }
                }
                Ok(())
            }
            (false, Some(_)) => Ok(()),
        }
    }

    pub fn check_thresholds(&self) -> Result<()> {
        for (slug, t) in &self.trend_thresholds {
            if !(0.0..=1.0).contains(t) {
                bail!("trend threshold for {slug} must lie in [0, 1], got {t}");
            }
        }
        Ok(())
    }
}
