//! TOML configuration. Every key is optional; see `morai.example.toml`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use morai_core::agents::LstmConfig;
use morai_core::cnn::{CnnConfig, Head, TrainConfig};
use morai_core::dataset::CreditConfig;
use morai_core::nn::AdamConfig;
use morai_core::session::SessionConfig;
use serde::{Deserialize, Serialize};

/// Environment variable naming the corpus and log directory.
pub const DATA_DIR_ENV: &str = "MORAI_DATA_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Overridden by `MORAI_DATA_DIR` when set.
    pub data_dir: Option<PathBuf>,
    pub server: ServerSection,
    pub models: ModelPaths,
    pub cnn: CnnSection,
    pub lstm: LstmSection,
    pub credit: CreditSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub bind: String,
    pub level_width: usize,
    pub time_limit_secs: u64,
    pub seed: u64,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection { bind: "127.0.0.1:8080".into(), level_width: 100, time_limit_secs: 15 * 60, seed: 0 }
    }
}

/// Trained partners offered by the server. `random` is always available.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPaths {
    pub markov: Option<PathBuf>,
    pub shape: Option<PathBuf>,
    pub lstm: Option<PathBuf>,
    pub cnn: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnSection {
    /// Rank of the output head; 0 keeps only the per-cell map.
    pub rank: usize,
    pub slope: f64,
    pub threshold: f64,
    pub cap: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience_window: usize,
    pub improvement_floor: f64,
    pub target_loss: Option<f64>,
    pub learning_rate: f64,
    pub active_learning_rate: f64,
}

impl Default for CnnSection {
    fn default() -> Self {
        let (c, t) = (CnnConfig::default(), TrainConfig::default());
        let rank = match c.head {
            Head::Structured { rank } => rank,
            Head::Dense => 0,
        };
        CnnSection {
            rank,
            slope: c.slope,
            threshold: t.threshold,
            cap: t.cap,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience_window: t.window,
            improvement_floor: t.floor,
            target_loss: t.target_loss,
            learning_rate: t.adam.lr,
            active_learning_rate: t.active_lr,
        }
    }
}

impl CnnSection {
    pub fn model_config(&self) -> CnnConfig {
        CnnConfig { slope: self.slope, head: Head::Structured { rank: self.rank }, ..CnnConfig::default() }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            window: self.patience_window,
            floor: self.improvement_floor,
            target_loss: self.target_loss,
            threshold: self.threshold,
            cap: self.cap,
            adam: AdamConfig { lr: self.learning_rate, ..AdamConfig::default() },
            active_lr: self.active_learning_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmSection {
    pub hidden: usize,
    pub threshold: f64,
    pub train_columns: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
}

impl Default for LstmSection {
    fn default() -> Self {
        let c = LstmConfig::default();
        LstmSection {
            hidden: c.hidden,
            threshold: c.threshold,
            train_columns: c.train_columns,
            epochs: c.epochs,
            learning_rate: c.adam.lr,
            clip_norm: c.clip_norm,
        }
    }
}

impl LstmSection {
    pub fn config(&self) -> LstmConfig {
        LstmConfig {
            hidden: self.hidden,
            threshold: self.threshold,
            train_columns: self.train_columns,
            epochs: self.epochs,
            adam: AdamConfig { lr: self.learning_rate, ..AdamConfig::default() },
            clip_norm: self.clip_norm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreditSection {
    pub gamma: f64,
    pub deletion_penalty: f64,
}

impl Default for CreditSection {
    fn default() -> Self {
        let c = CreditConfig::default();
        CreditSection { gamma: c.gamma, deletion_penalty: c.deletion_penalty }
    }
}

impl CreditSection {
    pub fn config(&self) -> CreditConfig {
        CreditConfig { gamma: self.gamma, deletion_penalty: self.deletion_penalty }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads the file (if any), then applies `MORAI_DATA_DIR`.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.into(), source })?;
                Self::from_toml(&text).map_err(|source| ConfigError::Parse { path: p.into(), source })?
            }
            None => ServiceConfig::default(),
        };
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            cfg.data_dir = Some(PathBuf::from(dir));
        }
        Ok(cfg)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| PathBuf::from("morai-data"))
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            level_width: self.server.level_width,
            time_limit: Duration::from_secs(self.server.time_limit_secs),
            data_dir: Some(self.data_dir().join("logs")),
            seed: self.server.seed,
        }
    }
}
