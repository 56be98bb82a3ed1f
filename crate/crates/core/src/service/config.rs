use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::techniques::TechniqueKind;

pub const ENV_PREFIX: &str = "TICKETSIM_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    /// Fitted model artifact; its technique is the one served.
    pub model: PathBuf,
    /// Tickets registered at bootstrap.
    pub corpus: PathBuf,
    /// Snapshot, manifest and journal live here.
    pub data_dir: PathBuf,
    /// When set, must match the artifact's technique.
    #[serde(default)]
    pub technique: Option<TechniqueKind>,
    #[serde(default = "default_window")]
    pub candidate_window: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_listen")]
    pub listen: String,
}

fn default_window() -> usize {
    100
}

fn default_k() -> usize {
    crate::DEFAULT_K
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

impl ServiceConfig {
    pub fn new(model: impl Into<PathBuf>, corpus: impl Into<PathBuf>, data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            model: model.into(),
            corpus: corpus.into(),
            data_dir: data_dir.into(),
            technique: None,
            candidate_window: default_window(),
            k: default_k(),
            listen: default_listen(),
        }
    }

    /// Reads a TOML file, applies `TICKETSIM_*` overrides from the process
    /// environment and validates. Relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env<I>(path: &Path, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ServiceConfig =
            toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        cfg.apply_env(env)?;
        if let Some(base) = path.parent() {
            for p in [&mut cfg.model, &mut cfg.corpus, &mut cfg.data_dir] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env<I>(&mut self, env: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (key, value) in env {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let bad = |what: &str| Error::Config(format!("{key}: invalid {what} `{value}`"));
            match name {
                "MODEL" => self.model = value.clone().into(),
                "CORPUS" => self.corpus = value.clone().into(),
                "DATA_DIR" => self.data_dir = value.clone().into(),
                "TECHNIQUE" => self.technique = Some(value.parse()?),
                "CANDIDATE_WINDOW" => self.candidate_window = value.parse().map_err(|_| bad("integer"))?,
                "K" => self.k = value.parse().map_err(|_| bad("integer"))?,
                "LISTEN" => self.listen = value.clone(),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.candidate_window < self.k {
            return Err(Error::Config(format!(
                "need candidate_window >= k >= 1 (window {}, k {})",
                self.candidate_window, self.k
            )));
        }
        Ok(())
    }
}
