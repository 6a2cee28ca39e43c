use super::{DenseCache, DenseLayer, GruCell, GruStepCache};
use crate::spectral::SpectralState;
use crate::tensor::Tensor2;
use serde::{Deserialize, Serialize};

/// Recurrent slot: the GRU runs after `layers[..position]` and before
/// `layers[position..]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GruSlot {
    pub position: usize,
    pub cell: GruCell,
}

/// A fixed-topology network: an ordered stack of dense layers with an
/// optional GRU in the middle, plus an optional spectral state per dense
/// layer. A layer with a spectral state forwards and backprops through
/// `W / divisor` while storing the raw `W`; the divisor is never
/// differentiated through.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
    pub gru: Option<GruSlot>,
    pub spectral: Vec<Option<SpectralState>>,
}

/// Caches from a feed-forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub dense: Vec<DenseCache>,
}

/// Caches from one recurrent step.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub dense: Vec<DenseCache>,
    pub gru: GruStepCache,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, gru: Option<GruSlot>) -> Self {
        assert!(!layers.is_empty(), "network must have at least one layer");
        for w in layers.windows(2) {
            let compatible = w[0].out_dim() == w[1].in_dim();
            // A GRU between two layers relaxes the adjacency requirement; its
            // own dims are checked below.
            assert!(compatible || gru.is_some(), "network: adjacent layer shapes disagree");
        }
        if let Some(slot) = &gru {
            assert!(slot.position > 0 && slot.position <= layers.len());
            assert_eq!(
                slot.cell.input_dim(),
                layers[slot.position - 1].out_dim(),
                "network: gru input dim mismatch"
            );
            if slot.position < layers.len() {
                assert_eq!(
                    slot.cell.hidden_dim(),
                    layers[slot.position].in_dim(),
                    "network: gru output dim mismatch"
                );
            }
        }
        let n = layers.len();
        Network { layers, gru, spectral: vec![None; n] }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.gru.as_ref().map(|g| g.cell.hidden_dim()).unwrap_or(0)
    }

    #[inline]
    fn scale(&self, layer: usize) -> f64 {
        self.spectral[layer].as_ref().map(|s| s.scale()).unwrap_or(1.0)
    }

    /// Feed-forward pass without caches. Panics if the network is recurrent.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert!(self.gru.is_none(), "recurrent network needs step()");
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.out_dim()];
            layer.forward_nograd(&cur, &mut out, self.scale(i));
            cur = out;
        }
        cur
    }

    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, ForwardCache) {
        assert!(self.gru.is_none(), "recurrent network needs step()");
        let mut cur = x.to_vec();
        let mut dense = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.out_dim()];
            dense.push(layer.forward(&cur, &mut out, self.scale(i)));
            cur = out;
        }
        (cur, ForwardCache { dense })
    }

    /// Accumulates parameter gradients for one feed-forward sample.
    pub fn backward(&mut self, cache: &ForwardCache, d_out: &[f64]) {
        assert!(self.gru.is_none(), "recurrent network needs backward_sequence()");
        let mut d = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let scale = self.scale(i);
            let mut d_in = vec![0.0; self.layers[i].in_dim()];
            let want_input = i > 0;
            self.layers[i].backward(
                &cache.dense[i],
                &d,
                if want_input { Some(&mut d_in) } else { None },
                scale,
            );
            d = d_in;
        }
    }

    /// One recurrent step; `h_prev` and `h_new` are the GRU hidden state.
    pub fn step(&self, x: &[f64], h_prev: &[f64], h_new: &mut [f64]) -> Vec<f64> {
        let (out, _) = self.step_cached(x, h_prev, h_new);
        out
    }

    pub fn step_cached(&self, x: &[f64], h_prev: &[f64], h_new: &mut [f64]) -> (Vec<f64>, StepCache) {
        let slot = self.gru.as_ref().expect("step() on a feed-forward network");
        let mut cur = x.to_vec();
        let mut dense = Vec::with_capacity(self.layers.len());
        for i in 0..slot.position {
            let mut out = vec![0.0; self.layers[i].out_dim()];
            dense.push(self.layers[i].forward(&cur, &mut out, self.scale(i)));
            cur = out;
        }
        let gru_cache = slot.cell.step(&cur, h_prev, h_new);
        cur = h_new.to_vec();
        for i in slot.position..self.layers.len() {
            let mut out = vec![0.0; self.layers[i].out_dim()];
            dense.push(self.layers[i].forward(&cur, &mut out, self.scale(i)));
            cur = out;
        }
        (cur, StepCache { dense, gru: gru_cache })
    }

    /// Backpropagation through time over one contiguous chunk of steps.
    ///
    /// `d_outs[t]` is the loss gradient at the network output of step `t`.
    /// `reset[t]` marks steps whose hidden input was a constant (episode
    /// start or stored chunk-boundary snapshot): no gradient flows from such
    /// a step into the preceding one.
    pub fn backward_sequence(
        &mut self,
        caches: &[StepCache],
        d_outs: &[Vec<f64>],
        reset: &[bool],
    ) {
        let slot_pos = self.gru.as_ref().expect("backward_sequence() needs a GRU").position;
        let hidden = self.hidden_dim();
        assert_eq!(caches.len(), d_outs.len());
        assert_eq!(caches.len(), reset.len());
        let n_layers = self.layers.len();
        let mut dh_carry = vec![0.0; hidden];
        for t in (0..caches.len()).rev() {
            let mut d = d_outs[t].clone();
            for i in (slot_pos..n_layers).rev() {
                let scale = self.scale(i);
                let mut d_in = vec![0.0; self.layers[i].in_dim()];
                self.layers[i].backward(&caches[t].dense[i], &d, Some(&mut d_in), scale);
                d = d_in;
            }
            // d is now the gradient w.r.t. the new hidden state of step t.
            for (a, b) in d.iter_mut().zip(&dh_carry) {
                *a += b;
            }
            let mut dx = vec![0.0; self.gru.as_ref().unwrap().cell.input_dim()];
            let mut dh_prev = vec![0.0; hidden];
            self.gru.as_mut().unwrap().cell.backward_step(&caches[t].gru, &d, &mut dx, &mut dh_prev);
            dh_carry = if reset[t] { vec![0.0; hidden] } else { dh_prev };
            let mut d = dx;
            for i in (0..slot_pos).rev() {
                let scale = self.scale(i);
                let mut d_in = vec![0.0; self.layers[i].in_dim()];
                let want_input = i > 0;
                self.layers[i].backward(
                    &caches[t].dense[i],
                    &d,
                    if want_input { Some(&mut d_in) } else { None },
                    scale,
                );
                d = d_in;
            }
        }
    }

    /// Smallest |pre-activation| over all ReLU units in the cache; small
    /// values flag unreliable finite-difference points.
    pub fn relu_kink_margin(&self, cache: &ForwardCache) -> f64 {
        let mut margin = f64::INFINITY;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.activation == super::Activation::Relu {
                for z in &cache.dense[i].pre {
                    margin = margin.min(z.abs());
                }
            }
        }
        margin
    }

    /// Stable parameter enumeration: per dense layer weight then bias, then
    /// the nine GRU tensors. Optimizer state and gradient clipping rely on
    /// this order.
    pub fn params(&self) -> Vec<&Tensor2> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        if let Some(slot) = &self.gru {
            out.extend(slot.cell.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out: Vec<&mut Tensor2> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        if let Some(slot) = &mut self.gru {
            out.extend(slot.cell.params_mut());
        }
        out
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.all_finite())
    }
}

/// Scales gradients so their global L2 norm does not exceed `max_norm`;
/// returns the pre-clip norm. Idempotent: re-clipping clipped gradients is a
/// no-op (up to the exact scalar multiply already applied).
pub fn clip_global_norm(params: &mut [&mut Tensor2], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "clip_global_norm: max_norm must be positive");
    let mut sq = 0.0;
    for p in params.iter() {
        if let Some(g) = p.grad.as_ref() {
            sq += crate::tensor::dot(g, g);
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for p in params.iter_mut() {
            if let Some(g) = p.grad.as_mut() {
                for x in g.iter_mut() {
                    *x *= s;
                }
            }
        }
    }
    norm
}
