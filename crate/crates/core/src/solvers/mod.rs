//! Iterative solvers (CG, FISTA, PDHG, accelerated proximal SGD) and the
//! regularizers they share.
//!
//! Solvers work on flat complex vectors. Smooth terms and proximal maps are passed
//! in as closures so the same code serves the full problem and the sketched
//! sub-problems.

mod cg;
mod fista;
mod pdhg;
mod regularizer;
mod sgd;

use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::linop::CostCounter;
use crate::vecops;

pub use cg::{cg, cg_normal, CgOutcome};
pub use fista::{fista, fista_resume, FistaMomentum};
pub use pdhg::{pdhg, PdhgSteps};
pub use regularizer::{prox_l1, RegKind, Regularizer};
pub use sgd::{accproxsgd, sgd_gradient_estimate, SgdParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when `||x_{k+1} - x_k|| / ||x_k|| < tol`; `0` runs exactly `max_iters`.
    pub tol: f64,
    /// Gradient step is `step_scale / L`.
    pub step_scale: f64,
    /// `sigma / tau` for PDHG.
    pub pdhg_sigma_tau_ratio: f64,
    /// CG steps inside the PDHG data-consistency prox.
    pub inner_cg_iters: usize,
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
            step_scale: 0.9,
            pdhg_sigma_tau_ratio: 1.0,
            inner_cg_iters: 8,
            record_history: true,
        }
    }
}

impl SolverConfig {
    /// Fixed iteration count, no early stopping.
    pub fn fixed(iters: usize) -> Self {
        Self {
            max_iters: iters,
            tol: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveResult {
    pub x: Vec<C64>,
    pub iterations_run: usize,
    pub objective_history: Vec<f64>,
    pub coil_transform_count: u64,
    pub wall_time: f64,
    /// Final dual variable (PDHG only).
    pub dual: Vec<C64>,
    /// Set when a non-finite iterate was produced.
    pub diverged: bool,
}

/// Optional observers for a solver run.
#[derive(Default)]
pub struct Monitor<'a> {
    /// Objective evaluated after every iteration when history is recorded.
    pub objective: Option<&'a dyn Fn(&[C64]) -> f64>,
    /// Called with `(iteration, x)` after every iteration.
    pub on_iter: Option<&'a mut dyn FnMut(usize, &[C64])>,
    /// Coil-transform counter whose increase is reported in the result.
    pub counter: Option<&'a CostCounter>,
}

struct Tracker<'m, 'a> {
    monitor: &'m mut Monitor<'a>,
    record: bool,
    start: Instant,
    count0: u64,
    history: Vec<f64>,
}

impl<'m, 'a> Tracker<'m, 'a> {
    fn new(monitor: &'m mut Monitor<'a>, cfg: &SolverConfig) -> Self {
        let count0 = monitor.counter.map_or(0, |c| c.get());
        Self {
            record: cfg.record_history && monitor.objective.is_some(),
            monitor,
            start: Instant::now(),
            count0,
            history: Vec::new(),
        }
    }

    fn step(&mut self, k: usize, x: &[C64]) {
        if self.record {
            if let Some(f) = self.monitor.objective {
                self.history.push(f(x));
            }
        }
        if let Some(cb) = self.monitor.on_iter.as_mut() {
            cb(k, x);
        }
    }

    fn finish(self, x: Vec<C64>, iterations_run: usize) -> SolveResult {
        let diverged = x.iter().any(|v| !v.is_finite());
        SolveResult {
            x,
            iterations_run,
            objective_history: self.history,
            coil_transform_count: self.monitor.counter.map_or(0, |c| c.get()) - self.count0,
            wall_time: self.start.elapsed().as_secs_f64(),
            dual: Vec::new(),
            diverged,
        }
    }
}

/// `||new - old|| / ||old||` (absolute when `old` is zero).
fn relative_update(new: &[C64], old: &[C64]) -> f64 {
    let d = vecops::norm(&vecops::sub(new, old));
    let n = vecops::norm(old);
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

fn should_stop(cfg: &SolverConfig, new: &[C64], old: &[C64]) -> bool {
    cfg.tol > 0.0 && relative_update(new, old) < cfg.tol
}

/// Nesterov momentum sequence `t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`.
fn next_momentum(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// `y = x_new + ((t - 1) / t_new) (x_new - x_old)`.
fn extrapolate(x_new: &[C64], x_old: &[C64], t: f64, t_new: f64) -> Vec<C64> {
    let w = (t - 1.0) / t_new;
    x_new
        .iter()
        .zip(x_old)
        .map(|(a, b)| a + (a - b) * w)
        .collect()
}
