//! Training configuration files and command-line overrides.

use std::path::Path;

use thiserror::Error;
use ttc_core::head::HeadError;
use ttc_core::train::TrainError;
use ttc_core::{LossWeights, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad --pi value {0:?}: expected comma-separated numbers")]
    PiSyntax(String),
    #[error("bad --pi value: {0}")]
    PiValue(#[from] HeadError),
    #[error(transparent)]
    Invalid(#[from] TrainError),
}

/// Values given on the command line; each one present replaces the file's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub pi: Option<LossWeights>,
    pub detach_chain: bool,
    pub max_epochs: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(tau) = self.tau {
            cfg.tau = tau;
        }
        if let Some(pi) = &self.pi {
            cfg.pi = Some(pi.clone());
        }
        if self.detach_chain {
            cfg.detach_chain = true;
        }
        if let Some(n) = self.max_epochs {
            cfg.max_epochs = n;
        }
    }
}

/// Parses `"1,0.5,2"` into loss weights.
pub fn parse_pi(text: &str) -> Result<LossWeights, ConfigError> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| ConfigError::PiSyntax(text.to_string()))?;
    Ok(LossWeights::new(values)?)
}

pub fn parse_config(text: &str) -> Result<TrainConfig, ConfigError> {
    Ok(serde_json::from_str(text)?)
}

/// Defaults, then the file at `path` if given, then `overrides`; the result
/// is validated.
pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<TrainConfig, ConfigError> {
    let mut cfg = match path {
        Some(p) => parse_config(&std::fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}
