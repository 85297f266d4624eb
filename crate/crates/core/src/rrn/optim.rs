//! Adam with global gradient-norm clipping.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{RrnError, Rrn, Scalar};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub step: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(len: usize) -> Self {
        Self { m: alloc::vec![F::zero(); len], v: alloc::vec![F::zero(); len], step: 0 }
    }
}

/// Rescales `grads` in place so their Euclidean norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm<F: Scalar>(grads: &mut [F], max_norm: F) -> F {
    let norm = grads.iter().fold(F::zero(), |acc, &g| acc + g * g).sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// One Adam update with the model's learning rate, after clipping the
/// gradient to the model's `clip_norm`. Non-finite gradients are rejected
/// before anything is modified.
pub fn optimizer_step<F: Scalar>(
    state: &mut AdamState<F>,
    model: &mut Rrn<F>,
    grads: &mut [F],
) -> Result<(), RrnError> {
    let (lr, clip) = (F::of(model.hp.learning_rate), F::of(model.hp.clip_norm));
    adam_update(state, &mut model.params, grads, lr, clip).map_err(|e| match e {
        AdamError::Shape { expected, got } => RrnError::ShapeMismatch { expected, got },
        AdamError::NonFinite(i) => {
            RrnError::NonFinite(model.layout().tensor_at(i).map(|t| t.name.clone()).unwrap_or_default())
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdamError {
    Shape { expected: usize, got: usize },
    /// Index of the first non-finite gradient entry.
    NonFinite(usize),
}

/// Adam on a bare parameter slice.
pub fn adam_update<F: Scalar>(
    state: &mut AdamState<F>,
    params: &mut [F],
    grads: &mut [F],
    lr: F,
    clip: F,
) -> Result<(), AdamError> {
    let len = params.len();
    for got in [grads.len(), state.m.len(), state.v.len()] {
        if got != len {
            return Err(AdamError::Shape { expected: len, got });
        }
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(AdamError::NonFinite(i));
    }
    clip_global_norm(grads, clip);
    state.step += 1;
    let (b1, b2) = (F::of(BETA1), F::of(BETA2));
    let t = state.step.min(u32::MAX as u64) as usize;
    let c1 = F::one() - num_traits::pow(b1, t);
    let c2 = F::one() - num_traits::pow(b2, t);
    let eps = F::of(EPS);
    for (((p, &g), m), v) in params.iter_mut().zip(grads.iter()).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (F::one() - b1) * g;
        *v = b2 * *v + (F::one() - b2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    }
    Ok(())
}
