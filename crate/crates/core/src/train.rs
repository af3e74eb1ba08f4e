//! Mini-batch training of the head over fixed features.

use alloc::borrow::Cow;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::head::{
    backward_batch, forward, loss_batch, predict, HeadError, HeadMode, HeadParameters, LossWeights,
};
use crate::metrics::PredictionRecord;
use crate::optim::{adamw_step, AdamW, OptimizerState};
use crate::taxonomy::{Taxonomy, TransitionMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(&'static str),
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Head(#[from] HeadError),
}

pub type Result<T> = core::result::Result<T, TrainError>;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Inverted dropout on the input feature, training only.
    pub dropout: f64,
    pub tau: f64,
    /// Per-level loss weights; `None` means all ones.
    pub pi: Option<LossWeights>,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub detach_chain: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 32,
            weight_decay: 0.01,
            dropout: 0.0,
            tau: 1.0,
            pi: None,
            max_epochs: 100,
            early_stop_patience: 3,
            seed: 0,
            detach_chain: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(TrainError::Config("weight_decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TrainError::Config("dropout must lie in [0, 1)"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(TrainError::Config("tau must be positive"));
        }
        if self.early_stop_patience == 0 {
            return Err(TrainError::Config("early_stop_patience must be at least 1"));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdamW {
        AdamW::new(self.learning_rate, self.weight_decay)
    }

    /// Loss weights for an `levels`-level taxonomy.
    pub fn loss_weights(&self, levels: usize) -> Result<LossWeights> {
        match &self.pi {
            None => Ok(LossWeights::ones(levels)),
            Some(w) if w.len() == levels => Ok(w.clone()),
            Some(_) => Err(TrainError::Config("pi must have one weight per level")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub level_accuracy: Vec<f64>,
    pub exact_match: f64,
    pub seconds: f64,
}

impl EpochRecord {
    pub fn mean_accuracy(&self) -> f64 {
        if self.level_accuracy.is_empty() {
            return 0.0;
        }
        self.level_accuracy.iter().sum::<f64>() / self.level_accuracy.len() as f64
    }
}

pub type TrainHistory = Vec<EpochRecord>;

/// Source of elapsed seconds for the history.
pub trait Clock {
    fn seconds(&mut self) -> f64;
}

/// Always reports zero; keeps histories reproducible.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: HeadParameters,
    pub history: TrainHistory,
    /// Epoch of the returned snapshot, `None` if no epoch ran.
    pub best_epoch: Option<usize>,
}

/// True once the mean per-level accuracy has not beaten its running best for
/// `patience` consecutive epochs.
pub fn early_stop_check(history: &[EpochRecord], patience: usize) -> bool {
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    for rec in history {
        let acc = rec.mean_accuracy();
        if acc > best {
            best = acc;
            stale = 0;
        } else {
            stale += 1;
        }
    }
    stale >= patience
}

/// Loss and per-instance predictions of `params` over `ds`, no dropout.
pub fn assess(
    params: &HeadParameters,
    ds: &Dataset,
    mats: &[TransitionMatrix],
    tau: f64,
    mode: HeadMode,
    weights: &LossWeights,
) -> Result<(f64, Vec<PredictionRecord>)> {
    if ds.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let traces = ds
        .instances()
        .iter()
        .map(|inst| forward(params, &inst.feature, mats, tau, mode))
        .collect::<core::result::Result<Vec<_>, _>>()?;
    let labels: Vec<&[usize]> = ds.instances().iter().map(|i| i.labels.as_slice()).collect();
    let loss = loss_batch(&traces, &labels, weights)?;
    let records = traces
        .iter()
        .zip(ds.instances())
        .map(|(t, inst)| PredictionRecord::new(predict(t), inst.labels.clone()))
        .collect();
    Ok((loss, records))
}

fn epoch_summary(records: &[PredictionRecord], levels: usize) -> (Vec<f64>, f64) {
    let m = records.len() as f64;
    let acc = (0..levels)
        .map(|i| {
            records
                .iter()
                .filter(|r| r.predicted[i] == r.truth[i])
                .count() as f64
                / m
        })
        .collect();
    let exact = records.iter().filter(|r| r.predicted == r.truth).count() as f64 / m;
    (acc, exact)
}

fn apply_dropout<R: Rng>(feature: &[f64], rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 - rate;
    feature
        .iter()
        .map(|&v| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                v / keep
            }
        })
        .collect()
}

pub fn train(
    dataset: &Dataset,
    taxonomy: &Taxonomy,
    cfg: &TrainConfig,
    mode: HeadMode,
) -> Result<TrainOutcome> {
    train_with_clock(dataset, taxonomy, cfg, mode, &mut NoClock)
}

/// Trains a head from a seeded initialisation. Returns the snapshot with the
/// best mean per-level training accuracy together with the full history.
pub fn train_with_clock(
    dataset: &Dataset,
    taxonomy: &Taxonomy,
    cfg: &TrainConfig,
    mode: HeadMode,
    clock: &mut dyn Clock,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    dataset.check_taxonomy(taxonomy)?;
    let levels = taxonomy.num_levels();
    let weights = cfg.loss_weights(levels)?;
    let mats = taxonomy.transition_matrices();
    let optimizer = cfg.optimizer();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params =
        HeadParameters::init_uniform(&taxonomy.level_sizes(), dataset.feature_dim(), &mut rng);
    let mut state = OptimizerState::new(&params);
    let mut best = params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = None;
    let mut history = TrainHistory::new();
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let start = clock.seconds();
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let features: Vec<Cow<'_, [f64]>> = batch
                .iter()
                .map(|&i| {
                    let f = &dataset.instances()[i].feature;
                    if cfg.dropout > 0.0 {
                        Cow::Owned(apply_dropout(f, cfg.dropout, &mut rng))
                    } else {
                        Cow::Borrowed(f.as_slice())
                    }
                })
                .collect();
            let labels: Vec<&[usize]> = batch
                .iter()
                .map(|&i| dataset.instances()[i].labels.as_slice())
                .collect();
            let traces = features
                .iter()
                .map(|a| forward(&params, a, &mats, cfg.tau, mode))
                .collect::<core::result::Result<Vec<_>, _>>()?;
            let grads = backward_batch(
                &params,
                &features,
                &traces,
                &labels,
                &weights,
                &mats,
                cfg.tau,
                cfg.detach_chain,
            )?;
            adamw_step(&mut params, &grads, &mut state, &optimizer)?;
        }

        let (loss, records) = assess(&params, dataset, &mats, cfg.tau, mode, &weights)?;
        let (level_accuracy, exact_match) = epoch_summary(&records, levels);
        let record = EpochRecord {
            epoch,
            loss,
            level_accuracy,
            exact_match,
            seconds: clock.seconds() - start,
        };
        let acc = record.mean_accuracy();
        history.push(record);
        if acc > best_acc {
            best_acc = acc;
            best = params.clone();
            best_epoch = Some(epoch);
        }
        if early_stop_check(&history, cfg.early_stop_patience) {
            break;
        }
    }

    Ok(TrainOutcome {
        params: best,
        history,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn history(acc: &[f64]) -> TrainHistory {
        acc.iter()
            .enumerate()
            .map(|(i, &a)| EpochRecord {
                epoch: i + 1,
                loss: 0.0,
                level_accuracy: vec![a, a],
                exact_match: 0.0,
                seconds: 0.0,
            })
            .collect()
    }

    #[test]
    fn stops_after_three_flat_epochs() {
        let h = history(&[0.5, 0.6, 0.6, 0.6, 0.6]);
        assert!(!early_stop_check(&h[..4], 3));
        assert!(early_stop_check(&h, 3));
    }

    #[test]
    fn never_stops_while_improving() {
        let h = history(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        for k in 1..=h.len() {
            assert!(!early_stop_check(&h[..k], 3));
        }
    }

    #[test]
    fn late_improvement_resets_patience() {
        let h = history(&[0.5, 0.4, 0.6, 0.5, 0.5]);
        for k in 1..=h.len() {
            assert!(!early_stop_check(&h[..k], 3), "epoch {k}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                dropout: 1.0,
                ..Default::default()
            },
            TrainConfig {
                early_stop_patience: 0,
                ..Default::default()
            },
            TrainConfig {
                tau: -1.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        let cfg = TrainConfig {
            pi: Some(LossWeights::ones(2)),
            ..Default::default()
        };
        assert!(cfg.loss_weights(3).is_err());
        assert_eq!(cfg.loss_weights(2).unwrap(), LossWeights::ones(2));
    }
}
