//! Dense row-major `f64` matrices and the few vector kernels the crate needs.
//!
//! Summation order inside every kernel is fixed (8-lane partial sums, then a
//! fixed reduction tree), so results are bit-reproducible for a given build
//! while still auto-vectorizing well.

use serde::{Deserialize, Serialize};

/// Dot product with eight independent accumulators.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch {} vs {}", a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let pa = &a[i * 8..i * 8 + 8];
        let pb = &b[i * 8..i * 8 + 8];
        for l in 0..8 {
            acc[l] += pa[l] * pb[l];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}

/// `y += s * x`, elementwise.
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    assert_eq!(y.len(), x.len(), "axpy: length mismatch");
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Euclidean norm with the same fixed accumulation order as [`dot`].
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Row-major 2-D tensor with an optional gradient buffer of the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 { rows, cols, data: vec![0.0; rows * cols], grad: None }
    }

    /// Builds from a flat row-major buffer. Panics on a shape mismatch.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "from_flat: buffer does not match shape");
        Tensor2 { rows, cols, data, grad: None }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "from_rows: ragged rows");
            data.extend_from_slice(row);
        }
        Tensor2 { rows: r, cols: c, data, grad: None }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = scale * (W x)`. `x` must have `cols` entries, `out` `rows`.
    pub fn matvec_scaled(&self, x: &[f64], out: &mut [f64], scale: f64) {
        assert_eq!(x.len(), self.cols, "matvec: input length != cols");
        assert_eq!(out.len(), self.rows, "matvec: output length != rows");
        for r in 0..self.rows {
            out[r] = scale * dot(self.row(r), x);
        }
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_scaled(x, out, 1.0);
    }

    /// `out = scale * (W^T y)`. `y` must have `rows` entries, `out` `cols`.
    pub fn matvec_transpose_scaled(&self, y: &[f64], out: &mut [f64], scale: f64) {
        assert_eq!(y.len(), self.rows, "matvec_t: input length != rows");
        assert_eq!(out.len(), self.cols, "matvec_t: output length != cols");
        out.fill(0.0);
        for r in 0..self.rows {
            axpy(out, scale * y[r], self.row(r));
        }
    }

    pub fn matvec_transpose(&self, y: &[f64], out: &mut [f64]) {
        self.matvec_transpose_scaled(y, out, 1.0);
    }

    /// Lazily allocates the gradient buffer and returns it.
    pub fn grad_mut(&mut self) -> &mut [f64] {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.rows * self.cols]);
        }
        self.grad.as_mut().unwrap()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.fill(0.0);
        }
    }

    /// Rank-1 accumulation into the gradient: `grad += scale * d ⊗ a`.
    pub fn grad_add_outer(&mut self, d: &[f64], a: &[f64], scale: f64) {
        assert_eq!(d.len(), self.rows, "grad_add_outer: d length != rows");
        assert_eq!(a.len(), self.cols, "grad_add_outer: a length != cols");
        let cols = self.cols;
        let g = self.grad_mut();
        for r in 0..d.len() {
            axpy(&mut g[r * cols..(r + 1) * cols], scale * d[r], a);
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
