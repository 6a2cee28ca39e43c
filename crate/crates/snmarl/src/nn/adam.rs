use crate::tensor::Tensor2;
use serde::{Deserialize, Serialize};

/// Adam with bias correction. Moment buffers are kept per parameter tensor in
/// the same order the owning network enumerates its parameters, so the state
/// can be checkpointed and restored exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, params: &[&Tensor2]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            m: params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
        }
    }

    /// Applies one update using each tensor's `grad` buffer (missing buffers
    /// are treated as all-zero gradients).
    pub fn step(&mut self, params: &mut [&mut Tensor2]) {
        assert_eq!(params.len(), self.m.len(), "adam: parameter count changed");
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (pi, p) in params.iter_mut().enumerate() {
            assert_eq!(p.data.len(), self.m[pi].len(), "adam: parameter shape changed");
            let Some(grad) = p.grad.as_ref() else { continue };
            let m = &mut self.m[pi];
            let v = &mut self.v[pi];
            for i in 0..grad.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
