use num_complex::Complex64 as C64;

use super::{extrapolate, next_momentum, should_stop, Monitor, SolveResult, SolverConfig, Tracker};
use crate::error::{Error, Result};
use crate::vecops;

/// Extrapolated point and momentum parameter carried between FISTA calls.
#[derive(Clone, Debug, PartialEq)]
pub struct FistaMomentum {
    pub y: Option<Vec<C64>>,
    pub t: f64,
}

impl Default for FistaMomentum {
    fn default() -> Self {
        Self { y: None, t: 1.0 }
    }
}

/// FISTA with step `cfg.step_scale / lipschitz`.
///
/// `grad(x, out)` writes the gradient of the smooth term; `prox(v, step)` replaces
/// `v` by `prox_{step g}(v)`.
pub fn fista<G, P>(
    grad: G,
    prox: P,
    lipschitz: f64,
    x0: &[C64],
    cfg: &SolverConfig,
    monitor: &mut Monitor<'_>,
) -> Result<SolveResult>
where
    G: FnMut(&[C64], &mut [C64]),
    P: FnMut(&mut [C64], f64),
{
    fista_resume(grad, prox, lipschitz, x0, &mut FistaMomentum::default(), cfg, monitor)
}

/// FISTA continuing from `momentum`, which is updated in place. With a default
/// momentum this is plain [`fista`]; passing the state left by a previous call whose
/// last iterate is `x0` continues that run as if uninterrupted.
pub fn fista_resume<G, P>(
    mut grad: G,
    mut prox: P,
    lipschitz: f64,
    x0: &[C64],
    momentum: &mut FistaMomentum,
    cfg: &SolverConfig,
    monitor: &mut Monitor<'_>,
) -> Result<SolveResult>
where
    G: FnMut(&[C64], &mut [C64]),
    P: FnMut(&mut [C64], f64),
{
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::param(format!("Lipschitz constant must be positive, got {lipschitz}")));
    }
    if momentum.y.as_ref().is_some_and(|y| y.len() != x0.len()) {
        return Err(Error::dims("momentum point", x0.len(), momentum.y.as_ref().map_or(0, |y| y.len())));
    }
    let step = cfg.step_scale / lipschitz;
    let mut tracker = Tracker::new(monitor, cfg);
    let mut x = x0.to_vec();
    let mut y = momentum.y.take().unwrap_or_else(|| x.clone());
    let mut g = vecops::zeros(x.len());
    let mut t = momentum.t;
    let mut iters = 0;
    for k in 0..cfg.max_iters {
        grad(&y, &mut g);
        let mut x_new: Vec<C64> = y.iter().zip(&g).map(|(a, b)| a - b * step).collect();
        prox(&mut x_new, step);
        let t_new = next_momentum(t);
        y = extrapolate(&x_new, &x, t, t_new);
        t = t_new;
        let stop = should_stop(cfg, &x_new, &x);
        x = x_new;
        iters = k + 1;
        tracker.step(k, &x);
        if stop || x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    momentum.y = Some(y);
    momentum.t = t;
    Ok(tracker.finish(x, iters))
}
