//! The multi-level classification head.
//!
//! Every level `i` owns an affine classifier `z_i = W_i·a + b_i` over the
//! shared feature `a`. In TTC mode the probabilities of level `i` are pushed
//! through the transition matrix to get an attention mask for level `i + 1`:
//!
//! ```text
//! m_1     = 1
//! m_{i+1} = ŷ_i × M_{i,i+1}          (entry j is ŷ_i[parent(j)])
//! ŷ_i     = softmax((z_i ∘ m_i) / τ)
//! ```
//!
//! Flat mode drops the chain and uses `ŷ_i = softmax(z_i / τ)` for every level.
//! The loss is the π-weighted sum of per-level cross-entropies averaged over the
//! batch, and [`backward_batch`] returns its exact gradient, optionally treating
//! the masks as constants.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::numeric::{
    self, affine, cross_entropy_at, elementwise_product, row_times_matrix, softmax_temperature,
    Matrix, NumericError, ProbabilityVector,
};
use crate::taxonomy::{Taxonomy, TransitionMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeadError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("label {index} out of range for level {level} with {size} classes")]
    LabelOutOfRange {
        level: usize,
        index: usize,
        size: usize,
    },
    #[error("invalid loss weights: {0}")]
    InvalidWeights(&'static str),
}

pub type Result<T> = core::result::Result<T, HeadError>;

fn shape(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(HeadError::Shape {
            what,
            expected,
            found,
        })
    }
}

/// Which head architecture to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum HeadMode {
    #[default]
    Ttc,
    Flat,
}

impl HeadMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadMode::Ttc => "ttc",
            HeadMode::Flat => "flat",
        }
    }
}

impl fmt::Display for HeadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown head mode {0:?} (expected \"ttc\" or \"flat\")")]
pub struct ParseModeError(pub alloc::string::String);

impl FromStr for HeadMode {
    type Err = ParseModeError;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "ttc" => Ok(HeadMode::Ttc),
            "flat" => Ok(HeadMode::Flat),
            other => Err(ParseModeError(other.into())),
        }
    }
}

/// Weights and bias of one level's classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelParams {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LevelParams {
    pub fn zeros(classes: usize, feature_dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(classes, feature_dim),
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }
}

/// Per-level classifier parameters over a shared feature of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParameters {
    feature_dim: usize,
    levels: Vec<LevelParams>,
}

/// Gradients share the parameter layout.
pub type Gradients = HeadParameters;

impl HeadParameters {
    pub fn new(feature_dim: usize, levels: Vec<LevelParams>) -> Result<Self> {
        if levels.is_empty() {
            return Err(HeadError::Shape {
                what: "level count",
                expected: 1,
                found: 0,
            });
        }
        for level in &levels {
            shape("weight columns", feature_dim, level.weights.cols())?;
            shape("bias length", level.weights.rows(), level.bias.len())?;
            numeric::check_finite(level.weights.as_slice())?;
            numeric::check_finite(&level.bias)?;
        }
        Ok(Self {
            feature_dim,
            levels,
        })
    }

    pub fn zeros(level_sizes: &[usize], feature_dim: usize) -> Self {
        Self {
            feature_dim,
            levels: level_sizes
                .iter()
                .map(|&k| LevelParams::zeros(k, feature_dim))
                .collect(),
        }
    }

    /// Weights uniform in `[-√(1/d), √(1/d)]`, biases zero.
    pub fn init_uniform<R: Rng + ?Sized>(
        level_sizes: &[usize],
        feature_dim: usize,
        rng: &mut R,
    ) -> Self {
        let bound = libm::sqrt(1.0 / feature_dim as f64);
        let mut p = Self::zeros(level_sizes, feature_dim);
        for level in &mut p.levels {
            for w in level.weights.as_mut_slice() {
                *w = rng.random_range(-bound..=bound);
            }
        }
        p
    }

    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    #[inline]
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[LevelParams] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut [LevelParams] {
        &mut self.levels
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(LevelParams::classes).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.levels
            .iter()
            .map(|l| l.bias.len() * (self.feature_dim + 1))
            .sum()
    }

    /// Checks that level sizes match the taxonomy.
    pub fn check_taxonomy(&self, taxonomy: &Taxonomy) -> Result<()> {
        let sizes = taxonomy.level_sizes();
        shape("level count", sizes.len(), self.levels.len())?;
        for (level, &k) in self.levels.iter().zip(&sizes) {
            shape("level classes", k, level.classes())?;
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.feature_dim == other.feature_dim && self.level_sizes() == other.level_sizes()
    }

    /// Visits every scalar parameter (weights row-major, then bias) level by level.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for level in &mut self.levels {
            level.weights.as_mut_slice().iter_mut().for_each(&mut f);
            level.bias.iter_mut().for_each(&mut f);
        }
    }

    /// Flattened view in the same order as [`HeadParameters::for_each_mut`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for level in &self.levels {
            out.extend_from_slice(level.weights.as_slice());
            out.extend_from_slice(&level.bias);
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.levels.iter().all(|l| {
            l.weights.as_slice().iter().all(|v| v.is_finite())
                && l.bias.iter().all(|v| v.is_finite())
        })
    }
}

/// Non-negative per-level loss weights π, not all zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct LossWeights(Vec<f64>);

impl LossWeights {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() {
            return Err(HeadError::InvalidWeights("no levels"));
        }
        if pi.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(HeadError::InvalidWeights(
                "weights must be finite and non-negative",
            ));
        }
        if pi.iter().all(|&p| p == 0.0) {
            return Err(HeadError::InvalidWeights("weights are all zero"));
        }
        Ok(Self(pi))
    }

    pub fn ones(levels: usize) -> Self {
        Self(vec![1.0; levels])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for LossWeights {
    type Error = HeadError;

    fn try_from(pi: Vec<f64>) -> Result<Self> {
        Self::new(pi)
    }
}

impl From<LossWeights> for Vec<f64> {
    fn from(w: LossWeights) -> Self {
        w.0
    }
}

/// Intermediate values of one level in a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTrace {
    pub logits: Vec<f64>,
    pub mask: Vec<f64>,
    pub masked_logits: Vec<f64>,
    pub probs: ProbabilityVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub mode: HeadMode,
    pub levels: Vec<LevelTrace>,
}

impl ForwardTrace {
    pub fn probabilities(&self) -> impl Iterator<Item = &ProbabilityVector> {
        self.levels.iter().map(|l| &l.probs)
    }
}

fn check_inputs(p: &HeadParameters, a: &[f64]) -> Result<()> {
    shape("feature length", p.feature_dim, a.len())
}

fn check_matrices(p: &HeadParameters, mats: &[TransitionMatrix]) -> Result<()> {
    shape("transition matrix count", p.num_levels() - 1, mats.len())?;
    for (i, m) in mats.iter().enumerate() {
        shape("transition matrix rows", p.levels[i].classes(), m.rows())?;
        shape(
            "transition matrix cols",
            p.levels[i + 1].classes(),
            m.cols(),
        )?;
    }
    Ok(())
}

/// Runs the attention-chained head and records every intermediate.
pub fn forward_ttc(
    p: &HeadParameters,
    a: &[f64],
    mats: &[TransitionMatrix],
    tau: f64,
) -> Result<ForwardTrace> {
    check_inputs(p, a)?;
    check_matrices(p, mats)?;
    let mut levels: Vec<LevelTrace> = Vec::with_capacity(p.num_levels());
    for (i, lp) in p.levels.iter().enumerate() {
        let logits = affine(&lp.weights, a, &lp.bias)?;
        let mask = match levels.last() {
            None => vec![1.0; logits.len()],
            Some(prev) => row_times_matrix(&prev.probs, mats[i - 1].as_matrix())?,
        };
        let masked_logits = elementwise_product(&logits, &mask)?;
        let probs = softmax_temperature(&masked_logits, tau)?;
        levels.push(LevelTrace {
            logits,
            mask,
            masked_logits,
            probs,
        });
    }
    Ok(ForwardTrace {
        mode: HeadMode::Ttc,
        levels,
    })
}

/// Independent per-level softmax, no cross-level information.
pub fn forward_flat(p: &HeadParameters, a: &[f64], tau: f64) -> Result<Vec<ProbabilityVector>> {
    Ok(flat_trace(p, a, tau)?
        .levels
        .into_iter()
        .map(|l| l.probs)
        .collect())
}

fn flat_trace(p: &HeadParameters, a: &[f64], tau: f64) -> Result<ForwardTrace> {
    check_inputs(p, a)?;
    let levels = p
        .levels
        .iter()
        .map(|lp| {
            let logits = affine(&lp.weights, a, &lp.bias)?;
            let probs = softmax_temperature(&logits, tau)?;
            Ok(LevelTrace {
                mask: vec![1.0; logits.len()],
                masked_logits: logits.clone(),
                logits,
                probs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForwardTrace {
        mode: HeadMode::Flat,
        levels,
    })
}

/// Forward pass in either mode. Flat traces carry all-ones masks.
pub fn forward(
    p: &HeadParameters,
    a: &[f64],
    mats: &[TransitionMatrix],
    tau: f64,
    mode: HeadMode,
) -> Result<ForwardTrace> {
    match mode {
        HeadMode::Ttc => forward_ttc(p, a, mats, tau),
        HeadMode::Flat => flat_trace(p, a, tau),
    }
}

fn check_labels(trace: &ForwardTrace, labels: &[usize]) -> Result<()> {
    shape("label path length", trace.levels.len(), labels.len())?;
    for (i, (level, &y)) in trace.levels.iter().zip(labels).enumerate() {
        if y >= level.probs.len() {
            return Err(HeadError::LabelOutOfRange {
                level: i + 1,
                index: y,
                size: level.probs.len(),
            });
        }
    }
    Ok(())
}

/// `(1/m) Σ_j Σ_i π_i · CE(y_ij, ŷ_ij)`.
pub fn loss_batch<L: AsRef<[usize]>>(
    traces: &[ForwardTrace],
    labels: &[L],
    w: &LossWeights,
) -> Result<f64> {
    if traces.is_empty() {
        return Err(HeadError::EmptyBatch);
    }
    shape("label count", traces.len(), labels.len())?;
    let mut total = 0.0;
    for (trace, path) in traces.iter().zip(labels) {
        let path = path.as_ref();
        check_labels(trace, path)?;
        shape("loss weight count", trace.levels.len(), w.len())?;
        for ((level, &y), &pi) in trace.levels.iter().zip(path).zip(w.as_slice()) {
            total += pi * cross_entropy_at(y, &level.probs);
        }
    }
    Ok(total / traces.len() as f64)
}

/// Exact gradient of [`loss_batch`] with respect to every weight and bias.
///
/// With `detach_chain` the masks are treated as constants; otherwise the
/// gradient also flows from level `i + 1` back into `ŷ_i` through the mask.
/// Flat traces have no chain and ignore the flag.
#[allow(clippy::too_many_arguments)]
pub fn backward_batch<F, L>(
    p: &HeadParameters,
    features: &[F],
    traces: &[ForwardTrace],
    labels: &[L],
    w: &LossWeights,
    mats: &[TransitionMatrix],
    tau: f64,
    detach_chain: bool,
) -> Result<Gradients>
where
    F: AsRef<[f64]>,
    L: AsRef<[usize]>,
{
    if traces.is_empty() {
        return Err(HeadError::EmptyBatch);
    }
    shape("feature count", traces.len(), features.len())?;
    shape("label count", traces.len(), labels.len())?;
    shape("loss weight count", p.num_levels(), w.len())?;
    check_matrices(p, mats)?;

    let n = p.num_levels();
    let scale = 1.0 / traces.len() as f64;
    let mut grads = Gradients::zeros(&p.level_sizes(), p.feature_dim);

    for ((trace, a), path) in traces.iter().zip(features).zip(labels) {
        let a = a.as_ref();
        let path = path.as_ref();
        check_inputs(p, a)?;
        shape("trace level count", n, trace.levels.len())?;
        for (level, lp) in trace.levels.iter().zip(&p.levels) {
            shape("trace level classes", lp.classes(), level.probs.len())?;
        }
        check_labels(trace, path)?;

        let chain = trace.mode == HeadMode::Ttc && !detach_chain;
        // gradient w.r.t. the masked logits of the level below the current one
        let mut below: Option<Vec<f64>> = None;
        for i in (0..n).rev() {
            let level = &trace.levels[i];
            let probs: &[f64] = &level.probs;
            let pi = w.as_slice()[i] * scale / tau;
            let mut g_u: Vec<f64> = probs.iter().map(|&q| pi * q).collect();
            g_u[path[i]] -= pi;

            if let (true, Some(g_next)) = (chain, below.as_ref()) {
                let next = &trace.levels[i + 1];
                let mut g_probs = vec![0.0; probs.len()];
                for (j, &k) in mats[i].parents().iter().enumerate() {
                    g_probs[k] += g_next[j] * next.logits[j];
                }
                let dot: f64 = g_probs.iter().zip(probs).map(|(g, q)| g * q).sum();
                for ((g, &gp), &q) in g_u.iter_mut().zip(&g_probs).zip(probs) {
                    *g += q * (gp - dot) / tau;
                }
            }

            let lg = &mut grads.levels[i];
            for (r, (&gu, &m)) in g_u.iter().zip(&level.mask).enumerate() {
                let gz = gu * m;
                lg.bias[r] += gz;
                let row = r * p.feature_dim;
                for (dw, &ak) in lg.weights.as_mut_slice()[row..row + p.feature_dim]
                    .iter_mut()
                    .zip(a)
                {
                    *dw += gz * ak;
                }
            }
            below = Some(g_u);
        }
    }
    Ok(grads)
}

/// Per-level argmax of the trace probabilities, lowest index on ties.
pub fn predict(trace: &ForwardTrace) -> Vec<usize> {
    trace.levels.iter().map(|l| l.probs.argmax()).collect()
}

/// Parameters bound to a taxonomy's transition matrices, ready for inference.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: HeadParameters,
    pub mode: HeadMode,
    pub tau: f64,
    mats: Vec<TransitionMatrix>,
}

impl Model {
    pub fn new(
        params: HeadParameters,
        taxonomy: &Taxonomy,
        mode: HeadMode,
        tau: f64,
    ) -> Result<Self> {
        params.check_taxonomy(taxonomy)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(NumericError::InvalidTemperature(tau).into());
        }
        Ok(Self {
            params,
            mode,
            tau,
            mats: taxonomy.transition_matrices(),
        })
    }

    pub fn matrices(&self) -> &[TransitionMatrix] {
        &self.mats
    }

    pub fn forward(&self, a: &[f64]) -> Result<ForwardTrace> {
        forward(&self.params, a, &self.mats, self.tau, self.mode)
    }

    pub fn predict(&self, a: &[f64]) -> Result<Vec<usize>> {
        Ok(predict(&self.forward(a)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn example() -> (HeadParameters, Vec<TransitionMatrix>) {
        // two levels: {Jewel, Fruit} -> {K gold, Pearl, Apple, Pear}
        let top = LevelParams {
            weights: Matrix::zeros(2, 3),
            bias: vec![libm::log(0.9), libm::log(0.1)],
        };
        let bottom = LevelParams {
            weights: Matrix::zeros(4, 3),
            bias: vec![-0.2, 0.5, 1.3, 0.3],
        };
        let p = HeadParameters::new(3, vec![top, bottom]).unwrap();
        let mats = vec![TransitionMatrix::from_parents(2, vec![0, 0, 1, 1])];
        (p, mats)
    }

    #[test]
    fn worked_example_trace() {
        let (p, mats) = example();
        let trace = forward_ttc(&p, &[0.3, -1.0, 2.0], &mats, 1.0).unwrap();
        let top = &trace.levels[0].probs;
        assert!((top[0] - 0.9).abs() < 1e-15 && (top[1] - 0.1).abs() < 1e-15);
        let mask = &trace.levels[1].mask;
        for (m, e) in mask.iter().zip([0.9, 0.9, 0.1, 0.1]) {
            assert!((m - e).abs() < 1e-15);
        }
        let probs = &trace.levels[1].probs;
        for (q, e) in probs.iter().zip([0.1827, 0.3430, 0.2490, 0.2253]) {
            assert!((q - e).abs() < 5e-5, "{probs:?}");
        }
        assert_eq!(predict(&trace), vec![0, 1]);
    }

    #[test]
    fn flat_example_prefers_apple() {
        let (p, _) = example();
        let flat = forward_flat(&p, &[0.0; 3], 1.0).unwrap();
        // numpy: exp(z) / exp(z).sum() for z = (-0.2, 0.5, 1.3, 0.3)
        let expected = [0.10935938, 0.22022275, 0.49011474, 0.18030314];
        for (q, e) in flat[1].iter().zip(expected) {
            assert!((q - e).abs() < 1e-8, "{:?}", flat[1]);
        }
        assert!((flat[0][0] - 0.9).abs() < 1e-15);
        assert_eq!(flat[1].argmax(), 2);
    }

    #[test]
    fn zero_parameters_give_uniform_levels() {
        let p = HeadParameters::zeros(&[2, 4], 3);
        let mats = vec![TransitionMatrix::from_parents(2, vec![0, 0, 1, 1])];
        let trace = forward_ttc(&p, &[1.0, 2.0, 3.0], &mats, 1.0).unwrap();
        assert_eq!(trace.levels[1].mask, vec![0.5; 4]);
        for level in &trace.levels {
            let k = level.probs.len() as f64;
            assert!(level.probs.iter().all(|&q| (q - 1.0 / k).abs() < 1e-15));
        }
        assert_eq!(predict(&trace), vec![0, 0]);
        for level in forward_flat(&p, &[1.0, 2.0, 3.0], 1.0).unwrap() {
            let k = level.len() as f64;
            assert!(level.iter().all(|&q| (q - 1.0 / k).abs() < 1e-15));
        }
    }

    #[test]
    fn forward_rejects_mismatched_shapes() {
        let (p, mats) = example();
        assert!(matches!(
            forward_ttc(&p, &[1.0], &mats, 1.0),
            Err(HeadError::Shape { .. })
        ));
        assert!(forward_ttc(&p, &[0.0; 3], &[], 1.0).is_err());
        let wrong = vec![TransitionMatrix::from_parents(3, vec![0, 1, 2, 2])];
        assert!(forward_ttc(&p, &[0.0; 3], &wrong, 1.0).is_err());
        assert!(forward_ttc(&p, &[0.0; 3], &mats, 0.0).is_err());
    }

    #[test]
    fn loss_examples() {
        let p = HeadParameters::zeros(&[2, 4], 1);
        let mats = vec![TransitionMatrix::from_parents(2, vec![0, 0, 1, 1])];
        let trace = forward_ttc(&p, &[0.0], &mats, 1.0).unwrap();
        let w = LossWeights::ones(2);
        let l = loss_batch(core::slice::from_ref(&trace), &[vec![1, 3]], &w).unwrap();
        assert!((l - (libm::log(2.0) + libm::log(4.0))).abs() < 1e-12);

        let doubled = LossWeights::new(vec![2.0, 2.0]).unwrap();
        let l2 = loss_batch(core::slice::from_ref(&trace), &[vec![1, 3]], &doubled).unwrap();
        assert!((l2 - 2.0 * l).abs() < 1e-12);

        let (p, mats) = example();
        let trace = forward_ttc(&p, &[0.0; 3], &mats, 1.0).unwrap();
        let only_bottom = LossWeights::new(vec![0.0, 1.0]).unwrap();
        let l = loss_batch(&[trace], &[vec![1, 2]], &only_bottom).unwrap();
        assert!((l - 1.3904).abs() < 5e-4, "{l}");
    }

    #[test]
    fn loss_errors() {
        let w = LossWeights::ones(2);
        assert_eq!(
            loss_batch::<Vec<usize>>(&[], &[], &w),
            Err(HeadError::EmptyBatch)
        );
        let (p, mats) = example();
        let trace = forward_ttc(&p, &[0.0; 3], &mats, 1.0).unwrap();
        assert!(matches!(
            loss_batch(&[trace], &[vec![0, 4]], &w),
            Err(HeadError::LabelOutOfRange { level: 2, .. })
        ));
    }

    #[test]
    fn loss_weights_validation() {
        assert!(LossWeights::new(vec![]).is_err());
        assert!(LossWeights::new(vec![0.0, 0.0]).is_err());
        assert!(LossWeights::new(vec![1.0, -0.1]).is_err());
        assert!(LossWeights::new(vec![0.0, 0.5]).is_ok());
    }

    #[test]
    fn detached_gradient_matches_softmax_identity() {
        // d loss / d z_i = π_i (ŷ_i - onehot) ∘ m_i / τ
        let (mut p, mats) = example();
        p.levels_mut()[1].weights.set(2, 0, 0.4);
        let a = [0.5, -1.0, 2.0];
        let tau = 1.7;
        let trace = forward_ttc(&p, &a, &mats, tau).unwrap();
        let w = LossWeights::new(vec![0.3, 1.5]).unwrap();
        let labels = [vec![1usize, 2]];
        let g = backward_batch(
            &p,
            &[a.to_vec()],
            core::slice::from_ref(&trace),
            &labels,
            &w,
            &mats,
            tau,
            true,
        )
        .unwrap();
        for (i, level) in trace.levels.iter().enumerate() {
            for r in 0..level.probs.len() {
                let onehot = if r == labels[0][i] { 1.0 } else { 0.0 };
                let expected = w.as_slice()[i] * (level.probs[r] - onehot) * level.mask[r] / tau;
                assert!((g.levels()[i].bias[r] - expected).abs() < 1e-15);
                for (k, &ak) in a.iter().enumerate() {
                    let dw = g.levels()[i].weights.get(r, k);
                    assert!((dw - expected * ak).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn one_hot_predictions_have_zero_gradient() {
        let big = 800.0;
        let top = LevelParams {
            weights: Matrix::zeros(2, 1),
            bias: vec![big, -big],
        };
        let bottom = LevelParams {
            weights: Matrix::zeros(4, 1),
            bias: vec![big, -big, -big, -big],
        };
        let p = HeadParameters::new(1, vec![top, bottom]).unwrap();
        let mats = vec![TransitionMatrix::from_parents(2, vec![0, 0, 1, 1])];
        let trace = forward_ttc(&p, &[1.0], &mats, 1.0).unwrap();
        assert_eq!(&*trace.levels[1].probs, &[1.0, 0.0, 0.0, 0.0]);
        for detach in [true, false] {
            let g = backward_batch(
                &p,
                &[vec![1.0]],
                core::slice::from_ref(&trace),
                &[vec![0usize, 0]],
                &LossWeights::ones(2),
                &mats,
                1.0,
                detach,
            )
            .unwrap();
            assert!(g.to_flat().iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn predict_ties_and_one_hot() {
        let uniform = forward_ttc(
            &HeadParameters::zeros(&[3, 3], 2),
            &[0.0, 0.0],
            &[TransitionMatrix::from_parents(3, vec![0, 1, 2])],
            1.0,
        )
        .unwrap();
        assert_eq!(predict(&uniform), vec![0, 0]);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("ttc".parse::<HeadMode>().unwrap(), HeadMode::Ttc);
        assert_eq!("flat".parse::<HeadMode>().unwrap(), HeadMode::Flat);
        assert!("deep".parse::<HeadMode>().is_err());
        assert_eq!(HeadMode::Flat.to_string(), "flat");
    }
}
