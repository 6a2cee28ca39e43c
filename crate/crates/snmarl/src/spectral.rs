//! Spectral normalization via power iteration.
//!
//! Each normalized layer keeps a persistent estimate `u` of the dominant
//! right singular vector of its weight and a scalar `sigma_hat = ‖W u‖`.
//! One iteration step is `u ← normalize(Wᵀ W u)`, after which `sigma_hat` is
//! a lower bound on the true spectral norm (it is the square root of a
//! Rayleigh quotient of `WᵀW`), and it converges monotonically upward.
//!
//! Normalization divides the weight by `sigma_hat` (plain mode) or by
//! `max(sigma_hat, k)` (floor mode). Training treats the divisor as a
//! constant: gradients flow through the scaled weight only, never through
//! `sigma_hat` itself.

use crate::tensor::{norm2, Tensor2};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stopping tolerance for [`converged_power_iteration`].
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// Iteration cap for [`converged_power_iteration`].
pub const CONVERGENCE_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SnMode {
    /// Divide by `sigma_hat` (a zero matrix is left unchanged).
    Plain,
    /// Divide by `max(sigma_hat, k)`.
    KFloor { k: f64 },
}

/// Persistent power-iteration state for one weight matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralState {
    /// Dominant right singular vector estimate, unit length, `cols(W)` long.
    pub u: Vec<f64>,
    pub sigma_hat: f64,
    pub mode: SnMode,
}

fn unit_gaussian(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..len)
        .map(|_| {
            // Box-Muller; the uniform draw is bounded away from zero.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    let n = norm2(&v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    } else {
        v[0] = 1.0;
    }
    v
}

impl SpectralState {
    /// `layer_index` only seeds the initial direction; runs started with the
    /// same architecture always begin from identical vectors.
    pub fn new(cols: usize, mode: SnMode, layer_index: usize) -> Self {
        assert!(cols > 0, "spectral state for an empty matrix");
        if let SnMode::KFloor { k } = mode {
            assert!(k > 0.0, "k_floor requires a positive k");
        }
        SpectralState {
            u: unit_gaussian(cols, 0x5ec7_ba5e ^ (layer_index as u64)),
            sigma_hat: 0.0,
            mode,
        }
    }

    /// Divisor applied to the weight under the configured mode.
    pub fn divisor(&self) -> f64 {
        match self.mode {
            SnMode::Plain => {
                if self.sigma_hat > 0.0 {
                    self.sigma_hat
                } else {
                    1.0
                }
            }
            SnMode::KFloor { k } => self.sigma_hat.max(k),
        }
    }

    /// Multiplier the forward pass applies to the raw weight.
    pub fn scale(&self) -> f64 {
        1.0 / self.divisor()
    }
}

fn check_weight(weight: &Tensor2, state: &SpectralState) -> Result<()> {
    if weight.rows == 0 || weight.cols == 0 {
        return Err(Error::Usage("power iteration on an empty matrix".into()));
    }
    if state.u.len() != weight.cols {
        return Err(Error::Usage(format!(
            "spectral state length {} does not match weight columns {}",
            state.u.len(),
            weight.cols
        )));
    }
    if !weight.all_finite() {
        return Err(Error::Numeric("non-finite weight entries in power iteration".into()));
    }
    Ok(())
}

/// One power-iteration update: `u ← normalize(WᵀWu)`, `sigma_hat ← ‖Wu‖`.
pub fn power_iteration_step(weight: &Tensor2, state: &mut SpectralState) -> Result<()> {
    check_weight(weight, state)?;
    let mut wu = vec![0.0; weight.rows];
    weight.matvec(&state.u, &mut wu);
    let mut next = vec![0.0; weight.cols];
    weight.matvec_transpose(&wu, &mut next);
    let n = norm2(&next);
    if n > 0.0 {
        for x in next.iter_mut() {
            *x /= n;
        }
        state.u = next;
    } else {
        // Either the matrix is zero or u fell into its null space. Restart
        // from a fixed direction so the iteration cannot stay stuck.
        let dim = weight.cols;
        let uniform = 1.0 / (dim as f64).sqrt();
        state.u = vec![uniform; dim];
    }
    weight.matvec(&state.u, &mut wu);
    state.sigma_hat = norm2(&wu);
    Ok(())
}

/// Iterates until `sigma_hat` stagnates (relative change below
/// [`CONVERGENCE_TOL`]) or [`CONVERGENCE_CAP`] is hit. Returns the number of
/// steps taken.
pub fn converged_power_iteration(weight: &Tensor2, state: &mut SpectralState) -> Result<usize> {
    let mut prev = f64::NEG_INFINITY;
    for it in 1..=CONVERGENCE_CAP {
        power_iteration_step(weight, state)?;
        if (state.sigma_hat - prev).abs() <= CONVERGENCE_TOL * state.sigma_hat.max(1.0) {
            return Ok(it);
        }
        prev = state.sigma_hat;
    }
    Ok(CONVERGENCE_CAP)
}

/// Convenience: converged spectral norm of a weight, fresh state.
pub fn spectral_norm(weight: &Tensor2) -> Result<f64> {
    let mut state = SpectralState::new(weight.cols.max(1), SnMode::Plain, 0);
    converged_power_iteration(weight, &mut state)?;
    Ok(state.sigma_hat)
}

/// Returns a scaled copy `W / divisor`; the raw weight is untouched.
pub fn normalize_weight(weight: &Tensor2, state: &SpectralState) -> Tensor2 {
    let s = state.scale();
    let mut out = weight.clone();
    out.grad = None;
    for x in out.data.iter_mut() {
        *x *= s;
    }
    out
}

/// Dense forward through the normalized weight: `act((W/divisor) x + b)`.
pub fn sn_dense_forward(
    layer: &crate::nn::DenseLayer,
    state: &SpectralState,
    x: &[f64],
    out: &mut [f64],
) {
    layer.forward_nograd(x, out, state.scale());
}

/// Gradient of the spectral norm with respect to the weight: the outer
/// product of the dominant left and right singular vectors. Only used by the
/// analysis fault injection that deliberately differentiates through the
/// divisor; `state` must be converged for this to be meaningful.
pub fn sigma_gradient(weight: &Tensor2, state: &SpectralState) -> Result<Tensor2> {
    check_weight(weight, state)?;
    let mut wu = vec![0.0; weight.rows];
    weight.matvec(&state.u, &mut wu);
    let n = norm2(&wu);
    if n == 0.0 {
        return Ok(Tensor2::zeros(weight.rows, weight.cols));
    }
    let mut out = Tensor2::zeros(weight.rows, weight.cols);
    for r in 0..weight.rows {
        let left = wu[r] / n;
        for c in 0..weight.cols {
            out.data[r * weight.cols + c] = left * state.u[c];
        }
    }
    Ok(out)
}

/// Product of per-layer Lipschitz constants. Callers pass the spectral norm
/// of each effective (already normalized) linear map; 1-Lipschitz
/// nonlinearities contribute nothing.
pub fn composite_lipschitz_bound(layer_constants: &[f64]) -> f64 {
    layer_constants.iter().product()
}
