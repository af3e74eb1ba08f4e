//! Dense kernels used by the classification head.
//!
//! Everything here works on `f64` slices and a small row-major [`Matrix`].
//! Nothing is vectorised; the head is small enough that clarity wins.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use thiserror::Error;

/// Floor applied to probabilities before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-300;

/// Tolerance used when checking that a probability vector sums to one.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("empty vector passed to {0}")]
    Empty(&'static str),
    #[error("target distribution is not one-hot")]
    NotOneHot,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("not a probability vector: {0}")]
    NotProbability(&'static str),
}

pub type Result<T> = core::result::Result<T, NumericError>;

fn check_len(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(NumericError::DimensionMismatch {
            op,
            expected,
            found,
        })
    }
}

/// Returns an error naming the first non-finite entry, if any.
pub fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(NumericError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(NumericError::Empty("Matrix::new"));
        }
        check_len("Matrix::new", rows * cols, data.len())?;
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_len("Matrix::from_rows", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(r)) {
                *s += v;
            }
        }
        sums
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).iter().sum()).collect()
    }
}

/// A vector of non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Checks the simplex invariant before wrapping.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(NumericError::Empty("ProbabilityVector::new"));
        }
        check_finite(&entries)?;
        if entries.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(NumericError::NotProbability("entry outside [0, 1]"));
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(NumericError::NotProbability("entries do not sum to 1"));
        }
        Ok(Self(entries))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, index: usize) -> Self {
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        Self(v)
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbabilityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Index of the largest value, lowest index on ties. Returns 0 for an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `W·a + b`.
pub fn affine(w: &Matrix, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_len("affine (feature)", w.cols, a.len())?;
    check_len("affine (bias)", w.rows, b.len())?;
    Ok((0..w.rows)
        .map(|r| {
            w.row(r)
                .iter()
                .zip(a)
                .fold(b[r], |acc, (wi, ai)| acc + wi * ai)
        })
        .collect())
}

/// Softmax of `z / tau`, computed after subtracting the maximum.
pub fn softmax_temperature(z: &[f64], tau: f64) -> Result<ProbabilityVector> {
    if z.is_empty() {
        return Err(NumericError::Empty("softmax_temperature"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(NumericError::InvalidTemperature(tau));
    }
    check_finite(z)?;
    let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v / tau));
    let mut out: Vec<f64> = z.iter().map(|&v| libm::exp(v / tau - max)).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    Ok(ProbabilityVector(out))
}

/// Row vector times matrix: `y × M`.
pub fn row_times_matrix(y: &[f64], m: &Matrix) -> Result<Vec<f64>> {
    check_len("row_times_matrix", m.rows, y.len())?;
    let mut out = vec![0.0; m.cols];
    for (r, &yr) in y.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(m.row(r)) {
            *o += yr * v;
        }
    }
    Ok(out)
}

/// Hadamard product.
pub fn elementwise_product(z: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    check_len("elementwise_product", z.len(), m.len())?;
    Ok(z.iter().zip(m).map(|(a, b)| a * b).collect())
}

/// Cross-entropy of a one-hot target against a predicted distribution.
pub fn cross_entropy(y_true: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_len("cross_entropy", y_true.len(), y_hat.len())?;
    let mut hot = None;
    for (i, &t) in y_true.iter().enumerate() {
        if t == 1.0 && hot.is_none() {
            hot = Some(i);
        } else if t != 0.0 {
            return Err(NumericError::NotOneHot);
        }
    }
    let index = hot.ok_or(NumericError::NotOneHot)?;
    Ok(cross_entropy_at(index, y_hat))
}

/// `-ln(y_hat[index])` with the probability clamped at [`PROB_FLOOR`].
#[inline]
pub fn cross_entropy_at(index: usize, y_hat: &[f64]) -> f64 {
    -libm::log(y_hat[index].max(PROB_FLOOR))
}
