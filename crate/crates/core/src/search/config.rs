use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::constraint::{CompressionCoefficients, Constraint};
use crate::acquisition::AcquisitionWeights;
use crate::env::TrainerConfig;
use crate::error::{Error, Result};
use crate::proposal::ContextSizes;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub generations: u64,
    pub parents_per_round: usize,
    /// Candidates generated per parent.
    pub population: usize,
    pub trainer: TrainerConfig,
    pub acquisition: AcquisitionWeights,
    pub context: ContextSizes,
    pub constraint: Constraint,
    pub compression: CompressionCoefficients,
    pub seed: u64,
    pub archive_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            generations: 3,
            parents_per_round: 3,
            population: 4,
            trainer: TrainerConfig::default(),
            acquisition: AcquisitionWeights::default(),
            context: ContextSizes::default(),
            constraint: Constraint::None,
            compression: CompressionCoefficients::default(),
            seed: 0,
            archive_path: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.generations < 1 {
            return Err(Error::config("generations", "must be at least 1"));
        }
        if self.parents_per_round < 1 {
            return Err(Error::config("parents_per_round", "must be at least 1"));
        }
        if self.population < 1 {
            return Err(Error::config("population", "must be at least 1"));
        }
        self.trainer.validate()?;
        self.acquisition.validate()?;
        self.compression.validate()
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json(&text, path)
    }
}
