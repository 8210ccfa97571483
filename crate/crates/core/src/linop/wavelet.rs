//! Orthogonal multilevel Daubechies-4 (8-tap) wavelet transform with periodic
//! boundaries, separable over the grid axes (Mallat layout).

use num_complex::Complex64 as C64;

use super::{Cost, CostCounter, LinOp};
use crate::error::{Error, Result};
use crate::grid::GridShape;

/// Daubechies-4 scaling filter (4 vanishing moments).
pub const DB4_LO: [f64; 8] = [
    0.230_377_813_308_896_495_2,
    0.714_846_570_552_915_646_7,
    0.630_880_767_929_858_910_8,
    -0.027_983_769_416_859_850_05,
    -0.187_034_811_719_093_083_7,
    0.030_841_381_835_560_762_09,
    0.032_883_011_666_885_199_62,
    -0.010_597_401_785_069_031_81,
];

fn db4_hi() -> [f64; 8] {
    std::array::from_fn(|j| {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        s * DB4_LO[7 - j]
    })
}

/// Largest level count `L <= 4` with every dim divisible by `2^L`.
pub fn default_levels(dims: &[usize]) -> usize {
    (0..=4)
        .rev()
        .find(|&l| dims.iter().all(|d| d % (1 << l) == 0))
        .unwrap_or(0)
}

/// Single-level periodic analysis of one line: low half then high half.
pub fn analyze_line(x: &[C64], out: &mut [C64]) {
    let n = x.len();
    let half = n / 2;
    let hi = db4_hi();
    for k in 0..half {
        let mut a = C64::new(0.0, 0.0);
        let mut d = C64::new(0.0, 0.0);
        for j in 0..8 {
            let v = x[(2 * k + j) % n];
            a += v * DB4_LO[j];
            d += v * hi[j];
        }
        out[k] = a;
        out[half + k] = d;
    }
}

/// Transpose of [`analyze_line`] (and its inverse).
pub fn synthesize_line(c: &[C64], out: &mut [C64]) {
    let n = c.len();
    let half = n / 2;
    let hi = db4_hi();
    out.fill(C64::new(0.0, 0.0));
    for k in 0..half {
        let a = c[k];
        let d = c[half + k];
        for j in 0..8 {
            out[(2 * k + j) % n] += a * DB4_LO[j] + d * hi[j];
        }
    }
}

/// Multilevel separable wavelet transform `Psi` on a grid; unitary.
#[derive(Clone, Debug)]
pub struct Wavelet {
    dims: Vec<usize>,
    levels: usize,
    counter: CostCounter,
}

impl Wavelet {
    pub fn new(shape: &GridShape, levels: usize) -> Result<Self> {
        let dims = shape.dims().to_vec();
        if dims.iter().any(|d| d % (1 << levels) != 0) {
            return Err(Error::WaveletDims { dims, levels });
        }
        Ok(Self {
            dims,
            levels,
            counter: CostCounter::new(),
        })
    }

    /// Uses [`default_levels`]; fails when no level divides every dim.
    pub fn with_default_levels(shape: &GridShape) -> Result<Self> {
        let l = default_levels(shape.dims());
        if l == 0 {
            return Err(Error::WaveletDims {
                dims: shape.dims().to_vec(),
                levels: 1,
            });
        }
        Self::new(shape, l)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    fn apply(&self, data: &mut [C64], inverse: bool) {
        let nd = self.dims.len();
        let strides: Vec<usize> = (0..nd)
            .map(|a| self.dims[a + 1..].iter().product())
            .collect();
        let level_order: Vec<usize> = if inverse {
            (0..self.levels).rev().collect()
        } else {
            (0..self.levels).collect()
        };
        let mut line = Vec::new();
        let mut tmp = Vec::new();
        for l in level_order {
            let block: Vec<usize> = self.dims.iter().map(|d| d >> l).collect();
            let axes: Vec<usize> = if inverse {
                (0..nd).rev().collect()
            } else {
                (0..nd).collect()
            };
            for a in axes {
                let n = block[a];
                line.resize(n, C64::new(0.0, 0.0));
                tmp.resize(n, C64::new(0.0, 0.0));
                // iterate over all positions in the block with coordinate a fixed at 0
                let others: Vec<usize> = (0..nd).filter(|&b| b != a).collect();
                let count: usize = others.iter().map(|&b| block[b]).product();
                for flat in 0..count {
                    let mut rem = flat;
                    let mut base = 0;
                    for &b in others.iter().rev() {
                        base += (rem % block[b]) * strides[b];
                        rem /= block[b];
                    }
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = data[base + k * strides[a]];
                    }
                    if inverse {
                        synthesize_line(&line, &mut tmp);
                    } else {
                        analyze_line(&line, &mut tmp);
                    }
                    for (k, v) in tmp.iter().enumerate() {
                        data[base + k * strides[a]] = *v;
                    }
                }
            }
        }
    }
}

impl LinOp for Wavelet {
    fn in_dim(&self) -> usize {
        self.dims.iter().product()
    }
    fn out_dim(&self) -> usize {
        self.in_dim()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        self.counter.add(1);
        out.copy_from_slice(x);
        self.apply(out, false);
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        self.counter.add(1);
        out.copy_from_slice(y);
        self.apply(out, true);
    }
    fn cost(&self) -> Cost {
        Cost {
            coil_transforms: 0,
            transforms: self.counter.get(),
        }
    }
}
