//! AdamW with decoupled weight decay.
//!
//! ```text
//! p ← p − lr·wd·p
//! m ← β1·m + (1 − β1)·g
//! v ← β2·v + (1 − β2)·g²
//! p ← p − lr · (m / (1 − β1^t)) / (√(v / (1 − β2^t)) + ε)
//! ```
//!
//! Decay applies to weights and biases alike.

use alloc::vec::Vec;

use crate::head::{Gradients, HeadError, HeadParameters};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            weight_decay,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
        }
    }
}

/// First and second moments, flattened in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &HeadParameters) -> Self {
        let n = params.parameter_count();
        Self {
            first_moment: alloc::vec![0.0; n],
            second_moment: alloc::vec![0.0; n],
            step: 0,
        }
    }
}

/// Applies one AdamW update in place.
pub fn adamw_step(
    params: &mut HeadParameters,
    grads: &Gradients,
    state: &mut OptimizerState,
    opt: &AdamW,
) -> Result<(), HeadError> {
    if !params.same_shape(grads) {
        return Err(HeadError::Shape {
            what: "gradient layout",
            expected: params.parameter_count(),
            found: grads.parameter_count(),
        });
    }
    let n = params.parameter_count();
    if state.first_moment.len() != n || state.second_moment.len() != n {
        return Err(HeadError::Shape {
            what: "optimizer state",
            expected: n,
            found: state.first_moment.len(),
        });
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - libm::pow(opt.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(opt.beta2, t as f64);
    let decay = 1.0 - opt.learning_rate * opt.weight_decay;
    let g = grads.to_flat();

    let mut i = 0;
    params.for_each_mut(|p| {
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = opt.beta1 * *m + (1.0 - opt.beta1) * g[i];
        *v = opt.beta2 * *v + (1.0 - opt.beta2) * g[i] * g[i];
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p *= decay;
        *p -= opt.learning_rate * m_hat / (libm::sqrt(v_hat) + opt.epsilon);
        i += 1;
    });
    Ok(())
}
