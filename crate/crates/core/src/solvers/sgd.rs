use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{extrapolate, next_momentum, should_stop, Monitor, Regularizer, SolveResult, SolverConfig, Tracker};
use crate::error::{Error, Result};
use crate::sense::SenseOperator;
use crate::vecops;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdParams {
    /// Coils per iteration.
    pub batch: usize,
    pub alpha0: f64,
    pub beta: f64,
    pub beta_min: f64,
    pub seed: u64,
}

impl SgdParams {
    /// `alpha0 = 1 / L`, `beta = 0.95`, `beta_min = 0.1 alpha0`.
    pub fn with_defaults(batch: usize, lipschitz: f64, seed: u64) -> Self {
        let alpha0 = 1.0 / lipschitz;
        Self {
            batch,
            alpha0,
            beta: 0.95,
            beta_min: 0.1 * alpha0,
            seed,
        }
    }

    /// `alpha_t = max(beta^t alpha0, beta_min)`.
    pub fn step(&self, t: usize) -> f64 {
        (self.beta.powi(t as i32) * self.alpha0).max(self.beta_min)
    }
}

/// `(C / |B|) sum_{c in B} A_c^H (A_c x - y_c)`.
pub fn sgd_gradient_estimate(op: &SenseOperator, x: &[C64], y: &[C64], coils: &[usize]) -> Vec<C64> {
    let n = op.nsamples();
    let mut g = vecops::zeros(x.len());
    let mut r = vecops::zeros(n);
    for &c in coils {
        op.forward_coil(c, x, &mut r);
        for (ri, yi) in r.iter_mut().zip(&y[c * n..(c + 1) * n]) {
            *ri -= yi;
        }
        op.adjoint_coil_acc(c, &r, &mut g);
    }
    let s = op.ncoils() as f64 / coils.len() as f64;
    g.iter_mut().for_each(|v| *v *= s);
    g
}

/// Accelerated proximal SGD over random coil batches.
///
/// Each iteration draws `batch` distinct coils, costing `2 batch` coil transforms.
pub fn accproxsgd(
    op: &SenseOperator,
    y: &[C64],
    reg: &Regularizer,
    params: &SgdParams,
    x0: &[C64],
    cfg: &SolverConfig,
    monitor: &mut Monitor<'_>,
) -> Result<SolveResult> {
    let c = op.ncoils();
    if params.batch == 0 || params.batch > c {
        return Err(Error::param(format!("batch {} outside 1..={c}", params.batch)));
    }
    if y.len() != op.ncoils() * op.nsamples() {
        return Err(Error::dims("stacked k-space", op.ncoils() * op.nsamples(), y.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut tracker = Tracker::new(monitor, cfg);
    let mut x = x0.to_vec();
    let mut z = x.clone();
    let mut t = 1.0;
    let mut iters = 0;
    for k in 0..cfg.max_iters {
        let mut coils = rand::seq::index::sample(&mut rng, c, params.batch).into_vec();
        coils.sort_unstable();
        let g = sgd_gradient_estimate(op, &z, y, &coils);
        let alpha = params.step(k);
        let mut x_new: Vec<C64> = z.iter().zip(&g).map(|(a, b)| a - b * alpha).collect();
        reg.prox(&mut x_new, alpha);
        let t_new = next_momentum(t);
        z = extrapolate(&x_new, &x, t, t_new);
        t = t_new;
        let stop = should_stop(cfg, &x_new, &x);
        x = x_new;
        iters = k + 1;
        tracker.step(k, &x);
        if stop || x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Ok(tracker.finish(x, iters))
}
