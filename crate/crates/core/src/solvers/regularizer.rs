use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{pdhg, Monitor, PdhgSteps, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::GridShape;
use crate::linop::{FiniteDiff, Identity, LinOp, Wavelet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegKind {
    L2,
    L1Wavelet,
    L1Tv,
}

impl RegKind {
    /// Default weight for full-coil reconstructions.
    pub fn default_lambda(self) -> f64 {
        match self {
            RegKind::L2 => 0.01,
            RegKind::L1Wavelet => 0.02,
            RegKind::L1Tv => 0.01,
        }
    }

    /// Default weight after aggressive coil compression.
    pub fn default_compressed_lambda(self) -> f64 {
        match self {
            RegKind::L2 => 0.01,
            RegKind::L1Wavelet => 0.01,
            RegKind::L1Tv => 0.005,
        }
    }
}

/// `g(x)`: `lambda/2 ||x||^2`, `lambda ||Psi x||_1` or `lambda ||T x||_1`.
#[derive(Clone)]
pub struct Regularizer {
    pub kind: RegKind,
    pub lambda: f64,
    pub transform: Arc<dyn LinOp>,
    /// Dual iterations used by the TV proximal map.
    pub tv_prox_iters: usize,
    transform_norm_sq: f64,
}

impl std::fmt::Debug for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Regularizer")
            .field("kind", &self.kind)
            .field("lambda", &self.lambda)
            .finish()
    }
}

/// Complex soft-thresholding `v max(|v| - t, 0) / |v|`.
pub fn prox_l1(v: &[C64], thresh: f64) -> Vec<C64> {
    v.iter()
        .map(|z| {
            let n = z.norm();
            if n > thresh {
                z * ((n - thresh) / n)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

fn project_ball(p: &mut [C64], radius: f64) {
    for v in p.iter_mut() {
        let n = v.norm();
        if n > radius {
            *v *= radius / n;
        }
    }
}

impl Regularizer {
    pub fn new(kind: RegKind, lambda: f64, shape: &GridShape) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be nonnegative, got {lambda}")));
        }
        let (transform, norm_sq): (Arc<dyn LinOp>, f64) = match kind {
            RegKind::L2 => (Arc::new(Identity { dim: shape.size() }), 1.0),
            RegKind::L1Wavelet => (Arc::new(Wavelet::with_default_levels(shape)?), 1.0),
            RegKind::L1Tv => {
                let t = FiniteDiff::new(shape);
                let n = t.norm_sq_bound();
                (Arc::new(t), n)
            }
        };
        Ok(Self {
            kind,
            lambda,
            transform,
            tv_prox_iters: 20,
            transform_norm_sq: norm_sq,
        })
    }

    /// Upper bound on `||transform||^2`.
    pub fn transform_norm_sq(&self) -> f64 {
        self.transform_norm_sq
    }

    /// Regularizer transform applications so far.
    pub fn transforms(&self) -> u64 {
        self.transform.cost().transforms
    }

    pub fn value(&self, x: &[C64]) -> f64 {
        match self.kind {
            RegKind::L2 => 0.5 * self.lambda * crate::vecops::norm_sq(x),
            _ => self.lambda * self.transform.forward(x).iter().map(|v| v.norm()).sum::<f64>(),
        }
    }

    /// Replaces `v` by `prox_{step g}(v)`. The TV map is evaluated by a fixed
    /// number of primal-dual iterations.
    pub fn prox(&self, v: &mut [C64], step: f64) {
        let t = step * self.lambda;
        match self.kind {
            RegKind::L2 => {
                let s = 1.0 / (1.0 + t);
                v.iter_mut().for_each(|z| *z *= s);
            }
            RegKind::L1Wavelet => {
                let c = prox_l1(&self.transform.forward(v), t);
                self.transform.adjoint_into(&c, v);
            }
            RegKind::L1Tv => {
                if t == 0.0 {
                    return;
                }
                let b = v.to_vec();
                let l = self.transform_norm_sq;
                let r = pdhg(
                    self.transform.as_ref(),
                    l,
                    PdhgSteps::from_ratio(l, 1.0),
                    |p, _| project_ball(p, t),
                    |u, tau, x| {
                        for ((xi, ui), bi) in x.iter_mut().zip(u).zip(&b) {
                            *xi = (ui + bi * tau) / (1.0 + tau);
                        }
                    },
                    &b,
                    None,
                    &SolverConfig::fixed(self.tv_prox_iters),
                    &mut Monitor::default(),
                )
                .expect("steps satisfy the bound by construction");
                v.copy_from_slice(&r.x);
            }
        }
    }

    /// Projection onto the dual ball of `lambda ||K x||_1` (the `prox_{sigma F*}` of PDHG).
    pub fn dual_projection(&self, p: &mut [C64]) {
        project_ball(p, self.lambda);
    }
}
