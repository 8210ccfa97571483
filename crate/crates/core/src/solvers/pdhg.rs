use num_complex::Complex64 as C64;

use super::{should_stop, Monitor, SolveResult, SolverConfig, Tracker};
use crate::error::{Error, Result};
use crate::linop::LinOp;
use crate::vecops;

/// Primal and dual step sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdhgSteps {
    pub sigma: f64,
    pub tau: f64,
}

impl PdhgSteps {
    /// `sigma tau ||K||^2 = 1` with `sigma / tau = ratio`.
    pub fn from_ratio(k_norm_sq: f64, ratio: f64) -> Self {
        let tau = 1.0 / (k_norm_sq * ratio).sqrt();
        Self {
            sigma: ratio * tau,
            tau,
        }
    }
}

/// Chambolle-Pock iteration for `min_x g(x) + F(K x)` with `theta = 1`.
///
/// `prox_fdual(p, sigma)` applies `prox_{sigma F*}` in place. `prox_g(v, tau, x)`
/// writes `prox_{tau g}(v)` into `x`, which holds the previous iterate on entry.
#[allow(clippy::too_many_arguments)]
pub fn pdhg<PF, PG>(
    k: &dyn LinOp,
    k_norm_sq: f64,
    steps: PdhgSteps,
    mut prox_fdual: PF,
    mut prox_g: PG,
    x0: &[C64],
    p0: Option<&[C64]>,
    cfg: &SolverConfig,
    monitor: &mut Monitor<'_>,
) -> Result<SolveResult>
where
    PF: FnMut(&mut [C64], f64),
    PG: FnMut(&[C64], f64, &mut [C64]),
{
    let product = steps.sigma * steps.tau * k_norm_sq;
    if !(steps.sigma > 0.0 && steps.tau > 0.0) || product > 1.0 + 1e-12 {
        return Err(Error::StepSizeBound(product));
    }
    let PdhgSteps { sigma, tau } = steps;
    let mut tracker = Tracker::new(monitor, cfg);
    let mut x = x0.to_vec();
    let mut xbar = x.clone();
    let mut p = p0.map_or_else(|| vecops::zeros(k.out_dim()), |p| p.to_vec());
    let mut kx = vecops::zeros(k.out_dim());
    let mut ktp = vecops::zeros(x.len());
    let mut iters = 0;
    for it in 0..cfg.max_iters {
        k.forward_into(&xbar, &mut kx);
        vecops::axpy(C64::new(sigma, 0.0), &kx, &mut p);
        prox_fdual(&mut p, sigma);
        k.adjoint_into(&p, &mut ktp);
        let v: Vec<C64> = x.iter().zip(&ktp).map(|(a, b)| a - b * tau).collect();
        let mut x_new = x.clone();
        prox_g(&v, tau, &mut x_new);
        for ((xb, xn), xo) in xbar.iter_mut().zip(&x_new).zip(&x) {
            *xb = xn * 2.0 - xo;
        }
        let stop = should_stop(cfg, &x_new, &x);
        x = x_new;
        iters = it + 1;
        tracker.step(it, &x);
        if stop || x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    let mut out = tracker.finish(x, iters);
    out.dual = p;
    Ok(out)
}
