//! Centered, unitary multi-dimensional FFT.
//!
//! Image index `j` maps to coordinate `j - n/2` and k-space index `m` to frequency
//! `m - n/2` on every axis. The centering is done by pre/post modulation, so any
//! length supported by `rustfft` works (odd lengths included).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use super::LinOp;
use crate::error::{Error, Result};
use crate::grid::{GridShape, Image};

struct AxisPlan {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    // forward: pre[j] = e^{i2pi c j/n}, post[m] = e^{i2pi (m c - c^2)/n}
    fwd_pre: Vec<C64>,
    fwd_post: Vec<C64>,
    inv_pre: Vec<C64>,
    inv_post: Vec<C64>,
}

fn phase(num: i64, n: usize) -> C64 {
    let r = num.rem_euclid(n as i64) as f64;
    C64::from_polar(1.0, 2.0 * PI * r / n as f64)
}

impl AxisPlan {
    fn new(n: usize, planner: &mut FftPlanner<f64>) -> Self {
        let c = (n / 2) as i64;
        let nn = n as i64;
        let c2 = (c * c) % nn;
        let fwd_pre = (0..nn).map(|j| phase(c * j, n)).collect();
        let fwd_post = (0..nn).map(|m| phase(m * c - c2, n)).collect();
        let inv_pre = (0..nn).map(|m| phase(-m * c, n)).collect();
        let inv_post = (0..nn).map(|j| phase(-c * j + c2, n)).collect();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd_pre,
            fwd_post,
            inv_pre,
            inv_post,
        }
    }
}

/// Reusable plan for the centered FFT on one grid.
pub struct CenteredFft {
    dims: Vec<usize>,
    axes: Vec<AxisPlan>,
    size: usize,
}

impl CenteredFft {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let axes = dims.iter().map(|&n| AxisPlan::new(n, &mut planner)).collect();
        Self {
            dims: dims.to_vec(),
            axes,
            size: dims.iter().product(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// In-place unnormalised centered transform, `X[f] = sum_r x[r] e^{-i2pi f.r/n}`
    /// (or `e^{+...}` when `inverse`).
    pub fn transform_inplace(&self, data: &mut [C64], inverse: bool) {
        assert_eq!(data.len(), self.size, "fft buffer length");
        let nd = self.dims.len();
        let mut stride = 1;
        let mut line = Vec::new();
        let mut scratch = Vec::new();
        for a in (0..nd).rev() {
            let plan = &self.axes[a];
            let n = plan.n;
            let (fft, pre, post) = if inverse {
                (&plan.inv, &plan.inv_pre, &plan.inv_post)
            } else {
                (&plan.fwd, &plan.fwd_pre, &plan.fwd_post)
            };
            let need = fft.get_inplace_scratch_len();
            if scratch.len() < need {
                scratch.resize(need, C64::new(0.0, 0.0));
            }
            let block = n * stride;
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    for (v, p) in chunk.iter_mut().zip(pre) {
                        *v *= p;
                    }
                    fft.process_with_scratch(chunk, &mut scratch[..need]);
                    for (v, p) in chunk.iter_mut().zip(post) {
                        *v *= p;
                    }
                }
            } else {
                line.resize(n, C64::new(0.0, 0.0));
                for outer in data.chunks_exact_mut(block) {
                    for inner in 0..stride {
                        for (k, l) in line.iter_mut().enumerate() {
                            *l = outer[k * stride + inner] * pre[k];
                        }
                        fft.process_with_scratch(&mut line, &mut scratch[..need]);
                        for (k, l) in line.iter().enumerate() {
                            outer[k * stride + inner] = l * post[k];
                        }
                    }
                }
            }
            stride *= n;
        }
    }

    /// Unitary forward transform (scaled by `1/sqrt(D)`).
    pub fn forward_unitary(&self, data: &mut [C64]) {
        self.transform_inplace(data, false);
        let s = 1.0 / (self.size as f64).sqrt();
        data.iter_mut().for_each(|v| *v *= s);
    }

    /// Unitary inverse transform (scaled by `1/sqrt(D)`).
    pub fn inverse_unitary(&self, data: &mut [C64]) {
        self.transform_inplace(data, true);
        let s = 1.0 / (self.size as f64).sqrt();
        data.iter_mut().for_each(|v| *v *= s);
    }
}

impl LinOp for CenteredFft {
    fn in_dim(&self) -> usize {
        self.size
    }
    fn out_dim(&self) -> usize {
        self.size
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        out.copy_from_slice(x);
        self.forward_unitary(out);
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        out.copy_from_slice(y);
        self.inverse_unitary(out);
    }
}

/// Unitary centered FFT of an image; DC lands at index `dim/2` of every axis.
pub fn fft_centered(img: &Image) -> Result<Vec<C64>> {
    if img.values.len() != img.shape.size() {
        return Err(Error::dims("image values", img.shape.size(), img.values.len()));
    }
    let plan = CenteredFft::new(img.shape.dims());
    let mut out = img.values.clone();
    plan.forward_unitary(&mut out);
    Ok(out)
}

/// Inverse of [`fft_centered`].
pub fn ifft_centered(shape: &GridShape, kspace: &[C64]) -> Result<Image> {
    if kspace.len() != shape.size() {
        return Err(Error::dims("k-space values", shape.size(), kspace.len()));
    }
    let plan = CenteredFft::new(shape.dims());
    let mut out = kspace.to_vec();
    plan.inverse_unitary(&mut out);
    Image::new(shape.clone(), out)
}
