//! Hand-rolled neural-network primitives: dense layers, a GRU cell, masked
//! categorical distributions, Adam, global-norm gradient clipping and a
//! central-difference gradient checker.
//!
//! Everything is `f64` and single-sample; batching is a loop at the call site.
//! Backward passes accumulate into each parameter's `grad` buffer, so a
//! minibatch is "zero grads, backprop every sample, then step".

mod adam;
mod categorical;
mod dense;
mod gradcheck;
mod gru;
mod network;

pub use adam::AdamState;
pub use categorical::MaskedCategorical;
pub use dense::{DenseCache, DenseLayer};
pub use gradcheck::{finite_diff_check, grad_snapshot};
pub use gru::{GruCell, GruStepCache};
pub use network::{clip_global_norm, ForwardCache, GruSlot, Network, StepCache};

use crate::tensor::Tensor2;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative as a function of the pre-activation.
    #[inline]
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fan-in scaled uniform init: entries from `U(-limit, limit)` with
/// `limit = gain * sqrt(3 / fan_in)`, so the entry standard deviation is
/// `gain / sqrt(fan_in)`.
pub fn uniform_fanin<R: Rng>(rng: &mut R, rows: usize, cols: usize, gain: f64) -> Tensor2 {
    assert!(cols > 0, "uniform_fanin: fan-in must be positive");
    let limit = gain * (3.0 / cols as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor2::from_flat(rows, cols, data)
}
