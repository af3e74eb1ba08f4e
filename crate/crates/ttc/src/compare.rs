//! Flat-versus-TTC comparison over several seeds.
//!
//! Every seed re-splits the data and re-initialises both heads, so the spread
//! across seeds covers both sources of variation. Both heads of one seed see
//! the same split.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use ttc_core::data::{normalize_features, split, DataError};
use ttc_core::metrics::{evaluate, MetricsError};
use ttc_core::train::{assess, train, TrainError};
use ttc_core::{Dataset, EvaluationReport, HeadMode, Taxonomy, TrainConfig};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("at least one seed is required")]
    NoSeeds,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// `ttc − flat` for every metric of an [`EvaluationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub hf1: f64,
    pub h_precision: f64,
    pub h_recall: f64,
    pub consistency: f64,
    pub exact_match: f64,
    pub level_accuracy: Vec<f64>,
    pub rescue: Vec<f64>,
}

impl MetricDelta {
    pub fn between(flat: &EvaluationReport, ttc: &EvaluationReport) -> Self {
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(t, f)| t - f).collect();
        Self {
            hf1: ttc.hf1 - flat.hf1,
            h_precision: ttc.h_precision - flat.h_precision,
            h_recall: ttc.h_recall - flat.h_recall,
            consistency: ttc.consistency - flat.consistency,
            exact_match: ttc.exact_match - flat.exact_match,
            level_accuracy: diff(&ttc.level_accuracy, &flat.level_accuracy),
            rescue: diff(&ttc.rescue, &flat.rescue),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub flat: EvaluationReport,
    pub ttc: EvaluationReport,
    pub flat_epochs: usize,
    pub ttc_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    /// Mean over seeds of the held-out flat-head metrics.
    pub flat: EvaluationReport,
    /// Mean over seeds of the held-out TTC metrics.
    pub ttc: EvaluationReport,
    pub delta: MetricDelta,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
    pub normalize: bool,
    pub runs: Vec<SeedRun>,
}

/// Metric-wise mean of `reports`, which must be non-empty and share a level count.
pub fn mean_report(reports: &[&EvaluationReport]) -> EvaluationReport {
    let k = reports.len() as f64;
    let mean = |f: &dyn Fn(&EvaluationReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / k;
    let mean_vec = |f: &dyn Fn(&EvaluationReport) -> &Vec<f64>| {
        let n = f(reports[0]).len();
        (0..n)
            .map(|i| reports.iter().map(|r| f(r)[i]).sum::<f64>() / k)
            .collect()
    };
    EvaluationReport {
        hf1: mean(&|r| r.hf1),
        h_precision: mean(&|r| r.h_precision),
        h_recall: mean(&|r| r.h_recall),
        consistency: mean(&|r| r.consistency),
        exact_match: mean(&|r| r.exact_match),
        level_accuracy: mean_vec(&|r| &r.level_accuracy),
        rescue: mean_vec(&|r| &r.rescue),
        instance_count: reports[0].instance_count,
    }
}

fn held_out(
    train_set: &Dataset,
    test_set: &Dataset,
    taxonomy: &Taxonomy,
    cfg: &TrainConfig,
    mode: HeadMode,
) -> Result<(EvaluationReport, usize), CompareError> {
    let outcome = train(train_set, taxonomy, cfg, mode)?;
    let weights = cfg.loss_weights(taxonomy.num_levels())?;
    let mats = taxonomy.transition_matrices();
    let (_, records) = assess(&outcome.params, test_set, &mats, cfg.tau, mode, &weights)?;
    log::info!(
        "seed {} {mode}: {} epochs, best epoch {:?}",
        cfg.seed,
        outcome.history.len(),
        outcome.best_epoch
    );
    Ok((evaluate(&records, taxonomy)?, outcome.history.len()))
}

/// Trains and evaluates both heads for every seed in order. `cfg.seed` is
/// replaced by each seed in turn.
pub fn run_compare(
    ds: &Dataset,
    taxonomy: &Taxonomy,
    cfg: &TrainConfig,
    seeds: &[u64],
    train_fraction: f64,
    normalize: bool,
) -> Result<CompareReport, CompareError> {
    if seeds.is_empty() {
        return Err(CompareError::NoSeeds);
    }
    cfg.validate()?;
    ds.check_taxonomy(taxonomy)?;
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (mut train_set, mut test_set) = split(ds, train_fraction, seed)?;
        if normalize {
            let (scaled, stats) = normalize_features(&train_set)?;
            test_set = stats.apply(&test_set)?;
            train_set = scaled;
        }
        let seed_cfg = TrainConfig {
            seed,
            ..cfg.clone()
        };
        let (flat, flat_epochs) =
            held_out(&train_set, &test_set, taxonomy, &seed_cfg, HeadMode::Flat)?;
        let (ttc, ttc_epochs) =
            held_out(&train_set, &test_set, taxonomy, &seed_cfg, HeadMode::Ttc)?;
        runs.push(SeedRun {
            seed,
            flat,
            ttc,
            flat_epochs,
            ttc_epochs,
        });
    }
    let flat = mean_report(&runs.iter().map(|r| &r.flat).collect::<Vec<_>>());
    let ttc = mean_report(&runs.iter().map(|r| &r.ttc).collect::<Vec<_>>());
    Ok(CompareReport {
        delta: MetricDelta::between(&flat, &ttc),
        flat,
        ttc,
        config: cfg.clone(),
        seeds: seeds.to_vec(),
        train_fraction,
        normalize,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(v: f64, n: usize) -> EvaluationReport {
        EvaluationReport {
            hf1: v,
            h_precision: v,
            h_recall: v,
            consistency: v,
            exact_match: v,
            level_accuracy: vec![v; n],
            rescue: vec![v / 2.0; n],
            instance_count: 10,
        }
    }

    #[test]
    fn mean_and_delta() {
        let m = mean_report(&[&report(0.2, 2), &report(0.6, 2)]);
        assert!((m.hf1 - 0.4).abs() < 1e-15);
        assert_eq!(m.level_accuracy.len(), 2);
        assert!((m.rescue[1] - 0.2).abs() < 1e-15);
        let d = MetricDelta::between(&report(0.5, 3), &m);
        assert!((d.consistency + 0.1).abs() < 1e-15);
        assert_eq!(d.level_accuracy.len(), 2);
    }

    #[test]
    fn no_seeds_is_an_error() {
        let t = Taxonomy::balanced(&[1, 2]).unwrap();
        let spec = ttc_core::SyntheticSpec {
            feature_dim: 2,
            radii: vec![2.0, 1.0],
            noise_sigma: 0.0,
            instances_per_leaf: 5,
        };
        let ds = ttc_core::data::generate_synthetic(&t, &spec, 0).unwrap();
        let err = run_compare(&ds, &t, &TrainConfig::default(), &[], 0.8, false).unwrap_err();
        assert!(matches!(err, CompareError::NoSeeds));
    }
}
