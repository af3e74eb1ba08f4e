//! Taxonomy-based transitional classification head.
//!
//! A multi-level classifier over a fixed feature vector where the
//! probabilities of each level gate the logits of the level below through the
//! taxonomy's transition matrix. The crate is `no_std` (it needs `alloc`) and
//! contains everything except I/O:
//!
//! - [`taxonomy`]: tree validation, transition matrices, path queries
//! - [`numeric`]: the handful of dense kernels the head needs
//! - [`head`]: TTC and flat forward passes, weighted loss, analytic gradients
//! - [`optim`] and [`train`]: AdamW and the deterministic training loop
//! - [`metrics`]: hierarchical precision/recall/F1, consistency, exact match
//! - [`data`]: datasets, splitting, normalisation, synthetic generator

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod data;
pub mod head;
pub mod metrics;
pub mod numeric;
pub mod optim;
pub mod taxonomy;
pub mod train;

pub use data::{Dataset, Instance, SyntheticSpec};
pub use head::{HeadMode, HeadParameters, LossWeights, Model};
pub use metrics::{EvaluationReport, PredictionRecord};
pub use taxonomy::{ClassId, Taxonomy, TaxonomyDraft, TransitionMatrix};
pub use train::{TrainConfig, TrainOutcome};
