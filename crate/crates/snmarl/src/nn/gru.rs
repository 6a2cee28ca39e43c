use super::sigmoid;
use crate::tensor::{axpy, Tensor2};
use serde::{Deserialize, Serialize};

/// Single-bias GRU cell:
///
/// ```text
/// r  = σ(W_r x + U_r h + b_r)
/// z  = σ(W_z x + U_z h + b_z)
/// n  = tanh(W_n x + r ∘ (U_n h) + b_n)
/// h' = (1 − z) ∘ n + z ∘ h
/// ```
///
/// With all-zero parameters this gives `h' = 0.5 h`, which the tests pin down.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GruCell {
    pub w_reset: Tensor2,
    pub u_reset: Tensor2,
    pub b_reset: Tensor2,
    pub w_update: Tensor2,
    pub u_update: Tensor2,
    pub b_update: Tensor2,
    pub w_cand: Tensor2,
    pub u_cand: Tensor2,
    pub b_cand: Tensor2,
}

/// Everything the backward step needs from the forward step.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub n: Vec<f64>,
    /// `U_n h_prev`, needed for the reset-gate gradient.
    pub c: Vec<f64>,
}

impl GruCell {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Tensor2::zeros(hidden_dim, input_dim);
        let u = || Tensor2::zeros(hidden_dim, hidden_dim);
        let b = || Tensor2::zeros(hidden_dim, 1);
        GruCell {
            w_reset: w(),
            u_reset: u(),
            b_reset: b(),
            w_update: w(),
            u_update: u(),
            b_update: b(),
            w_cand: w(),
            u_cand: u(),
            b_cand: b(),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_reset.rows
    }

    pub fn input_dim(&self) -> usize {
        self.w_reset.cols
    }

    fn gate_pre(&self, w: &Tensor2, u: &Tensor2, b: &Tensor2, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut pre = vec![0.0; self.hidden_dim()];
        w.matvec(x, &mut pre);
        let mut uh = vec![0.0; self.hidden_dim()];
        u.matvec(h, &mut uh);
        for i in 0..pre.len() {
            pre[i] += uh[i] + b.data[i];
        }
        pre
    }

    /// One recurrent step. Writes the new hidden state and returns the cache.
    pub fn step(&self, x: &[f64], h_prev: &[f64], h_new: &mut [f64]) -> GruStepCache {
        assert_eq!(x.len(), self.input_dim(), "gru: input length mismatch");
        assert_eq!(h_prev.len(), self.hidden_dim(), "gru: hidden length mismatch");
        assert_eq!(h_new.len(), self.hidden_dim(), "gru: output length mismatch");
        let hd = self.hidden_dim();

        let r: Vec<f64> = self
            .gate_pre(&self.w_reset, &self.u_reset, &self.b_reset, x, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let z: Vec<f64> = self
            .gate_pre(&self.w_update, &self.u_update, &self.b_update, x, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();

        let mut c = vec![0.0; hd];
        self.u_cand.matvec(h_prev, &mut c);
        let mut n = vec![0.0; hd];
        self.w_cand.matvec(x, &mut n);
        for i in 0..hd {
            n[i] = (n[i] + r[i] * c[i] + self.b_cand.data[i]).tanh();
        }

        for i in 0..hd {
            h_new[i] = (1.0 - z[i]) * n[i] + z[i] * h_prev[i];
        }
        GruStepCache { x: x.to_vec(), h_prev: h_prev.to_vec(), r, z, n, c }
    }

    /// Step without building a cache (rollout collection, evaluation).
    pub fn step_nograd(&self, x: &[f64], h_prev: &[f64], h_new: &mut [f64]) {
        // The cache allocation cost is dominated by the matvecs; reuse `step`.
        let _ = self.step(x, h_prev, h_new);
    }

    /// Backward through one step. `gh` is ∂loss/∂h'. Parameter gradients are
    /// accumulated; `dx` and `dh_prev` are overwritten.
    pub fn backward_step(
        &mut self,
        cache: &GruStepCache,
        gh: &[f64],
        dx: &mut [f64],
        dh_prev: &mut [f64],
    ) {
        let hd = self.hidden_dim();
        assert_eq!(gh.len(), hd, "gru backward: gh length mismatch");
        assert_eq!(dx.len(), self.input_dim(), "gru backward: dx length mismatch");
        assert_eq!(dh_prev.len(), hd, "gru backward: dh length mismatch");

        let mut dn_pre = vec![0.0; hd];
        let mut dz_pre = vec![0.0; hd];
        let mut dr_pre = vec![0.0; hd];
        let mut dn_pre_r = vec![0.0; hd];
        for i in 0..hd {
            let (r, z, n) = (cache.r[i], cache.z[i], cache.n[i]);
            dn_pre[i] = gh[i] * (1.0 - z) * (1.0 - n * n);
            dz_pre[i] = gh[i] * (cache.h_prev[i] - n) * z * (1.0 - z);
            dr_pre[i] = dn_pre[i] * cache.c[i] * r * (1.0 - r);
            dn_pre_r[i] = dn_pre[i] * r;
        }

        self.w_cand.grad_add_outer(&dn_pre, &cache.x, 1.0);
        self.u_cand.grad_add_outer(&dn_pre_r, &cache.h_prev, 1.0);
        axpy(self.b_cand.grad_mut(), 1.0, &dn_pre);
        self.w_update.grad_add_outer(&dz_pre, &cache.x, 1.0);
        self.u_update.grad_add_outer(&dz_pre, &cache.h_prev, 1.0);
        axpy(self.b_update.grad_mut(), 1.0, &dz_pre);
        self.w_reset.grad_add_outer(&dr_pre, &cache.x, 1.0);
        self.u_reset.grad_add_outer(&dr_pre, &cache.h_prev, 1.0);
        axpy(self.b_reset.grad_mut(), 1.0, &dr_pre);

        let mut tmp = vec![0.0; self.input_dim()];
        self.w_cand.matvec_transpose(&dn_pre, dx);
        self.w_update.matvec_transpose(&dz_pre, &mut tmp);
        axpy(dx, 1.0, &tmp);
        self.w_reset.matvec_transpose(&dr_pre, &mut tmp);
        axpy(dx, 1.0, &tmp);

        let mut tmp_h = vec![0.0; hd];
        self.u_cand.matvec_transpose(&dn_pre_r, dh_prev);
        self.u_update.matvec_transpose(&dz_pre, &mut tmp_h);
        axpy(dh_prev, 1.0, &tmp_h);
        self.u_reset.matvec_transpose(&dr_pre, &mut tmp_h);
        axpy(dh_prev, 1.0, &tmp_h);
        for i in 0..hd {
            dh_prev[i] += gh[i] * cache.z[i];
        }
    }

    pub fn params(&self) -> Vec<&Tensor2> {
        vec![
            &self.w_reset,
            &self.u_reset,
            &self.b_reset,
            &self.w_update,
            &self.u_update,
            &self.b_update,
            &self.w_cand,
            &self.u_cand,
            &self.b_cand,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![
            &mut self.w_reset,
            &mut self.u_reset,
            &mut self.b_reset,
            &mut self.w_update,
            &mut self.u_update,
            &mut self.b_update,
            &mut self.w_cand,
            &mut self.u_cand,
            &mut self.b_cand,
        ]
    }
}
