//! Hierarchical evaluation metrics.
//!
//! Each record holds one predicted and one true class per level. The
//! hierarchical precision/recall treat the per-level predictions of an
//! instance as a set of `(level, class)` pairs and micro-average over the
//! batch.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no prediction records")]
    Empty,
    #[error("level {level} out of range (records have {levels} levels)")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("record {index} has {found} levels, expected {expected}")]
    RecordLength {
        index: usize,
        expected: usize,
        found: usize,
    },
}

pub type Result<T> = core::result::Result<T, MetricsError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub predicted: Vec<usize>,
    pub truth: Vec<usize>,
}

impl PredictionRecord {
    pub fn new(predicted: Vec<usize>, truth: Vec<usize>) -> Self {
        Self { predicted, truth }
    }

    fn correct_at(&self, level: usize) -> bool {
        self.predicted[level] == self.truth[level]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvaluationReport {
    pub hf1: f64,
    pub h_precision: f64,
    pub h_recall: f64,
    pub consistency: f64,
    pub exact_match: f64,
    pub level_accuracy: Vec<f64>,
    pub rescue: Vec<f64>,
    pub instance_count: usize,
}

/// Level count shared by all records.
fn levels(records: &[PredictionRecord]) -> Result<usize> {
    let first = records.first().ok_or(MetricsError::Empty)?;
    let n = first.truth.len();
    for (index, r) in records.iter().enumerate() {
        for found in [r.predicted.len(), r.truth.len()] {
            if found != n {
                return Err(MetricsError::RecordLength {
                    index,
                    expected: n,
                    found,
                });
            }
        }
    }
    Ok(n)
}

fn as_set(path: &[usize]) -> BTreeSet<(usize, usize)> {
    path.iter().copied().enumerate().collect()
}

/// Micro-averaged `(H-precision, H-recall)`.
pub fn hierarchical_precision_recall(records: &[PredictionRecord]) -> Result<(f64, f64)> {
    levels(records)?;
    let (mut hit, mut predicted, mut actual) = (0usize, 0usize, 0usize);
    for r in records {
        let p = as_set(&r.predicted);
        let t = as_set(&r.truth);
        hit += p.intersection(&t).count();
        predicted += p.len();
        actual += t.len();
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    Ok((ratio(hit, predicted), ratio(hit, actual)))
}

/// Harmonic mean of hierarchical precision and recall; 0 when both are 0.
pub fn hf1(hp: f64, hr: f64) -> f64 {
    if hp + hr == 0.0 {
        0.0
    } else {
        2.0 * hp * hr / (hp + hr)
    }
}

/// Fraction of predicted paths that follow parent-child edges.
pub fn consistency(records: &[PredictionRecord], taxonomy: &Taxonomy) -> Result<f64> {
    levels(records)?;
    let ok = records
        .iter()
        .filter(|r| taxonomy.is_consistent_indices(&r.predicted) == Ok(true))
        .count();
    Ok(ok as f64 / records.len() as f64)
}

/// Fraction of instances correct at every level.
pub fn exact_match(records: &[PredictionRecord]) -> Result<f64> {
    levels(records)?;
    let ok = records.iter().filter(|r| r.predicted == r.truth).count();
    Ok(ok as f64 / records.len() as f64)
}

/// Accuracy at `level` (1-based).
pub fn level_accuracy(records: &[PredictionRecord], level: usize) -> Result<f64> {
    let n = levels(records)?;
    if level == 0 || level > n {
        return Err(MetricsError::LevelOutOfRange { level, levels: n });
    }
    let ok = records.iter().filter(|r| r.correct_at(level - 1)).count();
    Ok(ok as f64 / records.len() as f64)
}

/// Per level, the fraction of all instances that are wrong there but right
/// at some other level.
pub fn cross_level_rescue(records: &[PredictionRecord]) -> Result<Vec<f64>> {
    let n = levels(records)?;
    let mut counts = vec![0usize; n];
    for r in records {
        let correct = (0..n).filter(|&i| r.correct_at(i)).count();
        for (i, c) in counts.iter_mut().enumerate() {
            if !r.correct_at(i) && correct > 0 {
                *c += 1;
            }
        }
    }
    let m = records.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / m).collect())
}

/// Every metric at once.
pub fn evaluate(records: &[PredictionRecord], taxonomy: &Taxonomy) -> Result<EvaluationReport> {
    let n = levels(records)?;
    let (h_precision, h_recall) = hierarchical_precision_recall(records)?;
    Ok(EvaluationReport {
        hf1: hf1(h_precision, h_recall),
        h_precision,
        h_recall,
        consistency: consistency(records, taxonomy)?,
        exact_match: exact_match(records)?,
        level_accuracy: (1..=n)
            .map(|l| level_accuracy(records, l))
            .collect::<Result<_>>()?,
        rescue: cross_level_rescue(records)?,
        instance_count: records.len(),
    })
}
