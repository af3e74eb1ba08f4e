//! Trained head parameters on disk.
//!
//! ```json
//! {"feature_dim": 2, "levels": [{"W": [..row-major..], "b": [..]}],
//!  "tau": 1.0, "taxonomy_hash": "…", "mode": "ttc"}
//! ```
//!
//! `normalization` is present when the head was trained on standardized
//! features; the same shift and scale must then be applied before predicting.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use ttc_core::data::FeatureStats;
use ttc_core::head::{HeadError, LevelParams};
use ttc_core::numeric::Matrix;
use ttc_core::{HeadMode, HeadParameters, Model, Taxonomy};

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed checkpoint: {0}")]
    Shape(String),
    #[error("taxonomy/checkpoint mismatch")]
    TaxonomyMismatch,
    #[error(transparent)]
    Head(#[from] HeadError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    #[serde(rename = "W")]
    pub weights: Vec<f64>,
    #[serde(rename = "b")]
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub feature_dim: usize,
    pub levels: Vec<LevelRecord>,
    pub tau: f64,
    pub taxonomy_hash: String,
    #[serde(default)]
    pub mode: HeadMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<FeatureStats>,
}

impl Checkpoint {
    pub fn new(
        params: &HeadParameters,
        tau: f64,
        taxonomy: &Taxonomy,
        mode: HeadMode,
        normalization: Option<FeatureStats>,
    ) -> Self {
        Self {
            feature_dim: params.feature_dim(),
            levels: params
                .levels()
                .iter()
                .map(|l| LevelRecord {
                    weights: l.weights.as_slice().to_vec(),
                    bias: l.bias.clone(),
                })
                .collect(),
            tau,
            taxonomy_hash: taxonomy.fingerprint(),
            mode,
            normalization,
        }
    }

    /// Rebuilds the parameters, checking every level's shape.
    pub fn params(&self) -> Result<HeadParameters, CheckpointError> {
        let d = self.feature_dim;
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let rows = l.bias.len();
                if l.weights.len() != rows * d {
                    return Err(CheckpointError::Shape(format!(
                        "level {} has {} weights, expected {} x {}",
                        i + 1,
                        l.weights.len(),
                        rows,
                        d
                    )));
                }
                let weights = Matrix::new(rows, d, l.weights.clone()).map_err(HeadError::from)?;
                Ok(LevelParams {
                    weights,
                    bias: l.bias.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(HeadParameters::new(d, levels)?)
    }

    /// Model bound to `taxonomy`; fails with [`CheckpointError::TaxonomyMismatch`]
    /// unless the taxonomy hashes agree.
    pub fn model(&self, taxonomy: &Taxonomy) -> Result<Model, CheckpointError> {
        if self.taxonomy_hash != taxonomy.fingerprint() {
            return Err(CheckpointError::TaxonomyMismatch);
        }
        if let Some(stats) = &self.normalization {
            if stats.mean.len() != self.feature_dim || stats.std.len() != self.feature_dim {
                return Err(CheckpointError::Shape(
                    "normalization length differs from feature_dim".into(),
                ));
            }
        }
        Ok(Model::new(self.params()?, taxonomy, self.mode, self.tau)?)
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
