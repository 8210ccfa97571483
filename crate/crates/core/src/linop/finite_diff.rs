//! Periodic first-order finite differences, stacked over axes.

use num_complex::Complex64 as C64;

use super::{Cost, CostCounter, LinOp};
use crate::grid::GridShape;

/// `T x = [x(r + e_a) - x(r)]_a`, output length `ndim * D`.
#[derive(Clone, Debug)]
pub struct FiniteDiff {
    dims: Vec<usize>,
    counter: CostCounter,
}

impl FiniteDiff {
    pub fn new(shape: &GridShape) -> Self {
        Self::from_dims(shape.dims())
    }

    pub fn from_dims(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            counter: CostCounter::new(),
        }
    }

    /// `||T||^2 = 4 * ndim` for periodic differences on even grids (upper bound otherwise).
    pub fn norm_sq_bound(&self) -> f64 {
        4.0 * self.dims.len() as f64
    }

    fn stride(&self, a: usize) -> usize {
        self.dims[a + 1..].iter().product()
    }

    /// Flat index of the periodic neighbour `idx + shift * e_a`.
    #[inline]
    fn neighbour(&self, idx: usize, a: usize, stride: usize, forward: bool) -> usize {
        let n = self.dims[a];
        let coord = (idx / stride) % n;
        if forward {
            if coord + 1 == n {
                idx + stride - n * stride
            } else {
                idx + stride
            }
        } else if coord == 0 {
            idx + (n - 1) * stride
        } else {
            idx - stride
        }
    }
}

impl LinOp for FiniteDiff {
    fn in_dim(&self) -> usize {
        self.dims.iter().product()
    }
    fn out_dim(&self) -> usize {
        self.dims.len() * self.in_dim()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        self.counter.add(1);
        let d = self.in_dim();
        for a in 0..self.dims.len() {
            let s = self.stride(a);
            let o = &mut out[a * d..(a + 1) * d];
            for (i, oi) in o.iter_mut().enumerate() {
                *oi = x[self.neighbour(i, a, s, true)] - x[i];
            }
        }
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        // negative periodic divergence: sum_a y_a(r - e_a) - y_a(r)
        self.counter.add(1);
        let d = self.in_dim();
        out.fill(C64::new(0.0, 0.0));
        for a in 0..self.dims.len() {
            let s = self.stride(a);
            let ya = &y[a * d..(a + 1) * d];
            for (i, oi) in out.iter_mut().enumerate() {
                *oi += ya[self.neighbour(i, a, s, false)] - ya[i];
            }
        }
    }
    fn cost(&self) -> Cost {
        Cost {
            coil_transforms: 0,
            transforms: self.counter.get(),
        }
    }
}
