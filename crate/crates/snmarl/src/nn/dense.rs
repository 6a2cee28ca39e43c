use super::Activation;
use crate::tensor::Tensor2;
use serde::{Deserialize, Serialize};

/// Fully connected layer `a = act(scale * (W x) + b)`.
///
/// `scale` is supplied by the caller at forward/backward time; it is how
/// spectral normalization divides the weight without copying it. The stored
/// weight stays raw, gradients are taken with respect to the raw weight with
/// the scale treated as a constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Tensor2, // out × in
    pub bias: Tensor2,   // out × 1
    pub activation: Activation,
}

/// Per-sample values the backward pass needs.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: Tensor2, bias: Tensor2, activation: Activation) -> Self {
        assert_eq!(bias.rows, weight.rows, "dense: bias rows != weight rows");
        assert_eq!(bias.cols, 1, "dense: bias must be a column");
        DenseLayer { weight, bias, activation }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols
    }

    /// Writes the activated output and returns the cache for backward.
    pub fn forward(&self, x: &[f64], out: &mut [f64], scale: f64) -> DenseCache {
        assert_eq!(out.len(), self.out_dim(), "dense: output length mismatch");
        let mut pre = vec![0.0; self.out_dim()];
        self.weight.matvec_scaled(x, &mut pre, scale);
        for (p, b) in pre.iter_mut().zip(&self.bias.data) {
            *p += b;
        }
        for (o, p) in out.iter_mut().zip(&pre) {
            *o = self.activation.apply(*p);
        }
        DenseCache { input: x.to_vec(), pre }
    }

    /// Forward without retaining a cache.
    pub fn forward_nograd(&self, x: &[f64], out: &mut [f64], scale: f64) {
        assert_eq!(out.len(), self.out_dim(), "dense: output length mismatch");
        self.weight.matvec_scaled(x, out, scale);
        for (o, b) in out.iter_mut().zip(&self.bias.data) {
            *o = self.activation.apply(*o + b);
        }
    }

    /// Accumulates parameter gradients for one sample and optionally emits the
    /// gradient with respect to the layer input (overwritten, not accumulated).
    pub fn backward(
        &mut self,
        cache: &DenseCache,
        d_out: &[f64],
        d_input: Option<&mut [f64]>,
        scale: f64,
    ) {
        assert_eq!(d_out.len(), self.out_dim(), "dense: d_out length mismatch");
        let mut dz = vec![0.0; self.out_dim()];
        for i in 0..dz.len() {
            dz[i] = d_out[i] * self.activation.deriv(cache.pre[i]);
        }
        self.weight.grad_add_outer(&dz, &cache.input, scale);
        let bg = self.bias.grad_mut();
        for (g, d) in bg.iter_mut().zip(&dz) {
            *g += d;
        }
        if let Some(di) = d_input {
            self.weight.matvec_transpose_scaled(&dz, di, scale);
        }
    }
}
