//! Coil sketching: an iterative-Hessian-sketch outer loop whose sub-problems use a
//! randomly sketched, reduced-coil encoding operator anchored by the exact gradient.

use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridShape, Image};
use crate::linop::{max_eig_power, CostCounter, LinOp, Normal, DEFAULT_POWER_ITERS};
use crate::metrics::convergence_distance;
use crate::sense::{
    build_sense_with, CoilCompression, DensityWeights, FourierMode, KSpaceData, SenseOperator,
    SensitivityMaps,
};
use crate::sketch::{build_sketched_operator, gen_sketch_matrix_with, seed_stream, SketchConfig, SketchMatrix};
use crate::solvers::{cg, fista_resume, pdhg, FistaMomentum, Monitor, PdhgSteps, RegKind, Regularizer, SolveResult, SolverConfig};
use crate::vecops;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Cg,
    Fista,
    Pdhg,
}

impl SolverKind {
    /// Encoding-operator applications per iteration, in units of the coil count.
    pub fn coil_factor(self, inner_cg_iters: usize) -> u64 {
        match self {
            SolverKind::Cg | SolverKind::Fista => 2,
            SolverKind::Pdhg => 2 * (inner_cg_iters as u64 + 1),
        }
    }

    /// Natural pairing with a regularizer.
    pub fn for_reg(kind: RegKind) -> Self {
        match kind {
            RegKind::L2 => SolverKind::Cg,
            RegKind::L1Wavelet => SolverKind::Fista,
            RegKind::L1Tv => SolverKind::Pdhg,
        }
    }

    /// Default sub-problem iteration count.
    pub fn default_inner_iters(self) -> usize {
        match self {
            SolverKind::Pdhg => 40,
            _ => 20,
        }
    }
}

/// The measured data, coil maps, density weights and Fourier evaluation mode.
#[derive(Clone, Debug)]
pub struct ReconProblem {
    pub data: KSpaceData,
    pub maps: SensitivityMaps,
    pub weights: Option<DensityWeights>,
    pub fourier: FourierMode,
}

impl ReconProblem {
    pub fn shape(&self) -> &GridShape {
        &self.maps.shape
    }

    pub fn ncoils(&self) -> usize {
        self.maps.ncoils()
    }

    /// Fresh encoding operator with its own counter.
    pub fn operator(&self) -> Result<SenseOperator> {
        build_sense_with(&self.maps, &self.data.traj, self.weights.as_ref(), self.fourier)
    }

    /// `y = W^{1/2} k`, coil-major.
    pub fn y(&self) -> Vec<C64> {
        self.data.weighted(self.weights.as_ref())
    }

    /// SVD-compresses data and maps to `keep` energy-ordered virtual coils.
    pub fn compressed(&self, keep: usize) -> Result<ReconProblem> {
        let cc = CoilCompression::from_data(&self.data, keep)?;
        Ok(ReconProblem {
            data: cc.apply_data(&self.data)?,
            maps: cc.apply_maps(&self.maps)?,
            weights: self.weights.clone(),
            fourier: self.fourier,
        })
    }
}

/// Smallest coil count keeping 95% (2D) or 98% (3D) of the data energy.
pub fn default_c_hat0(problem: &ReconProblem) -> Result<usize> {
    let cc = CoilCompression::from_data(&problem.data, problem.ncoils())?;
    let frac = if problem.shape().ndim() == 3 { 0.98 } else { 0.95 };
    Ok(CoilCompression::keep_for_energy(&cc.singular_values, frac))
}

#[derive(Clone, Debug)]
pub struct CoilSketchConfig {
    pub c_hat0: usize,
    pub sketch: SketchConfig,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub use_init: bool,
    pub reuse_step_size: bool,
    /// Continue FISTA momentum from one sub-problem to the next instead of restarting.
    pub carry_momentum: bool,
    pub solver: SolverKind,
    pub reg: Regularizer,
    /// Step scale, PDHG ratio and inner CG steps for the sub-problem solver.
    pub solver_cfg: SolverConfig,
}

impl CoilSketchConfig {
    pub fn validate(&self, ncoils: usize) -> Result<()> {
        self.sketch.validate()?;
        if self.c_hat0 == 0 || self.c_hat0 > ncoils {
            return Err(Error::param(format!("c_hat0 = {} outside 1..={ncoils}", self.c_hat0)));
        }
        if self.sketch.c_hat > self.c_hat0 {
            return Err(Error::param(format!(
                "sketch size {} exceeds c_hat0 = {}",
                self.sketch.c_hat, self.c_hat0
            )));
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return Err(Error::param("outer and inner iteration counts must be positive"));
        }
        check_pairing(self.solver, self.reg.kind)
    }

    /// Closed-form coil-transform count of a run that does not diverge:
    /// `init + T (2 c_hat0 + inner k c_hat)`.
    pub fn closed_form_coil_transforms(&self) -> u64 {
        let k = self.solver.coil_factor(self.solver_cfg.inner_cg_iters);
        let c_hat = self.sketch.c_hat as u64;
        let inner = self.inner_iters as u64;
        let init = if self.use_init {
            let setup = if self.solver == SolverKind::Fista { 0 } else { c_hat };
            setup + inner * k * c_hat
        } else {
            0
        };
        init + self.outer_iters as u64 * (2 * self.c_hat0 as u64 + inner * k * c_hat)
    }
}

fn check_pairing(solver: SolverKind, reg: RegKind) -> Result<()> {
    match (solver, reg) {
        (SolverKind::Cg, RegKind::L2) | (SolverKind::Fista, _) => Ok(()),
        (SolverKind::Pdhg, RegKind::L1Wavelet | RegKind::L1Tv) => Ok(()),
        (s, r) => Err(Error::param(format!("solver {s:?} cannot handle {r:?} regularization"))),
    }
}

/// Frozen state of one outer iteration.
pub struct SketchSubproblem {
    pub anchor: Vec<C64>,
    pub true_grad: Vec<C64>,
    pub sketched_op: SenseOperator,
    pub reg: Regularizer,
}

impl SketchSubproblem {
    /// `f_S(x) = 1/2 ||A_S (x - x^t)||^2 + Re <x, d>`.
    pub fn objective(&self, x: &[C64]) -> f64 {
        let r = self.sketched_op.forward(&vecops::sub(x, &self.anchor));
        0.5 * vecops::norm_sq(&r) + vecops::dot_re(x, &self.true_grad)
    }
}

/// `A_S^H A_S (x - x^t) + d`.
pub fn sketched_objective_grad(sub: &SketchSubproblem, x: &[C64]) -> Vec<C64> {
    let mut g = vecops::zeros(x.len());
    sketched_grad_into(sub, x, &mut g);
    g
}

fn sketched_grad_into(sub: &SketchSubproblem, x: &[C64], out: &mut [C64]) {
    let r = sub.sketched_op.forward(&vecops::sub(x, &sub.anchor));
    sub.sketched_op.adjoint_into(&r, out);
    for (o, d) in out.iter_mut().zip(&sub.true_grad) {
        *o += d;
    }
}

/// `d = A^H (A x - y)`.
pub fn true_gradient(a: &SenseOperator, x: &[C64], y: &[C64]) -> Result<Vec<C64>> {
    if x.len() != a.in_dim() {
        return Err(Error::dims("image length", a.in_dim(), x.len()));
    }
    if y.len() != a.out_dim() {
        return Err(Error::dims("stacked k-space", a.out_dim(), y.len()));
    }
    Ok(a.adjoint(&vecops::sub(&a.forward(x), y)))
}

/// Copy of `op` on a private counter, for bookkeeping that must not be charged.
pub fn uncounted(op: &SenseOperator) -> SenseOperator {
    op.clone().with_counter(CostCounter::new())
}

/// `lambda_max(A^H A)` by power iteration on an uncounted copy.
pub fn lipschitz(op: &SenseOperator) -> f64 {
    max_eig_power(
        &Normal {
            op: uncounted(op),
            shift: 0.0,
        },
        DEFAULT_POWER_ITERS,
        0,
    )
}

/// `1/2 ||A x - y||^2 + g(x)`, evaluated without charging the counter.
pub fn full_objective(op: &SenseOperator, y: &[C64], reg: &Regularizer, x: &[C64]) -> f64 {
    let r = vecops::sub(&uncounted(op).forward(x), y);
    0.5 * vecops::norm_sq(&r) + reg.value(x)
}

/// Smooth part of a (sub-)problem.
pub enum Smooth<'a> {
    /// `1/2 ||A x - y||^2`.
    LeastSquares { op: &'a SenseOperator, y: &'a [C64] },
    /// Sketched quadratic around an anchor.
    Sketched(&'a SketchSubproblem),
}

impl Smooth<'_> {
    fn op(&self) -> &SenseOperator {
        match self {
            Smooth::LeastSquares { op, .. } => op,
            Smooth::Sketched(s) => &s.sketched_op,
        }
    }

    fn grad_into(&self, x: &[C64], out: &mut [C64]) {
        match self {
            Smooth::LeastSquares { op, y } => {
                let r = vecops::sub(&op.forward(x), y);
                op.adjoint_into(&r, out);
            }
            Smooth::Sketched(s) => sketched_grad_into(s, x, out),
        }
    }
}

/// Warm-start state and step information carried between solves.
#[derive(Clone, Debug, Default)]
pub struct SolveState {
    pub lipschitz: Option<f64>,
    pub dual: Option<Vec<C64>>,
    pub momentum: FistaMomentum,
}

/// Runs `iters` iterations of `solver` on `smooth + reg` from `x0`, calling `trace`
/// after every iterate.
#[allow(clippy::too_many_arguments)]
pub fn solve_smooth_plus_reg(
    smooth: &Smooth<'_>,
    reg: &Regularizer,
    solver: SolverKind,
    iters: usize,
    scfg: &SolverConfig,
    x0: &[C64],
    state: &mut SolveState,
    trace: &mut dyn FnMut(&[C64]),
) -> Result<SolveResult> {
    check_pairing(solver, reg.kind)?;
    let op = smooth.op();
    let cfg = SolverConfig {
        max_iters: iters,
        tol: 0.0,
        record_history: false,
        ..*scfg
    };
    let mut monitor = Monitor {
        objective: None,
        on_iter: None,
        counter: Some(op.counter()),
    };
    match solver {
        SolverKind::Fista => {
            let l = match state.lipschitz {
                Some(l) => l,
                None => {
                    let l = lipschitz(op);
                    state.lipschitz = Some(l);
                    l
                }
            };
            let mut cb = |_: usize, x: &[C64]| trace(x);
            monitor.on_iter = Some(&mut cb);
            fista_resume(
                |x, out| smooth.grad_into(x, out),
                |v, step| reg.prox(v, step),
                l,
                x0,
                &mut state.momentum,
                &cfg,
                &mut monitor,
            )
        }
        SolverKind::Cg => {
            let lambda = reg.lambda;
            let normal = Normal { op, shift: lambda };
            let start = Instant::now();
            let count0 = op.coil_transforms();
            let (b, base, warm): (Vec<C64>, Vec<C64>, bool) = match smooth {
                Smooth::LeastSquares { op, y } => (op.adjoint(y), vecops::zeros(x0.len()), x0.iter().any(|v| v.norm() != 0.0)),
                Smooth::Sketched(s) => {
                    let b = s
                        .true_grad
                        .iter()
                        .zip(&s.anchor)
                        .map(|(d, a)| -d - a * lambda)
                        .collect();
                    (b, s.anchor.clone(), false)
                }
            };
            let start_vec = if warm { Some(x0) } else { None };
            let out = cg(
                |v, o| normal.forward_into(v, o),
                &b,
                start_vec,
                iters,
                0.0,
                |_, v| trace(&vecops::add(&base, v)),
            );
            Ok(SolveResult {
                x: vecops::add(&base, &out.x),
                iterations_run: out.iterations,
                coil_transform_count: op.coil_transforms() - count0,
                wall_time: start.elapsed().as_secs_f64(),
                diverged: out.x.iter().any(|v| !v.is_finite()),
                ..SolveResult::default()
            })
        }
        SolverKind::Pdhg => {
            let inner = cfg.inner_cg_iters;
            let knorm = reg.transform_norm_sq();
            let steps = PdhgSteps::from_ratio(knorm, cfg.pdhg_sigma_tau_ratio);
            let normal_op = op.clone();
            // rhs of the data prox: c + v / tau with the constant c fixed per solve
            let (center, constant): (Vec<C64>, Vec<C64>) = match smooth {
                Smooth::LeastSquares { op, y } => (vecops::zeros(x0.len()), op.adjoint(y)),
                Smooth::Sketched(s) => (s.anchor.clone(), vecops::scale(&s.true_grad, -1.0)),
            };
            let mut cb = |_: usize, x: &[C64]| trace(x);
            monitor.on_iter = Some(&mut cb);
            let dual0 = state.dual.take();
            let res = pdhg(
                reg.transform.as_ref(),
                knorm,
                steps,
                |p, _| reg.dual_projection(p),
                |v, tau, x| {
                    let normal = Normal {
                        op: &normal_op,
                        shift: 1.0 / tau,
                    };
                    let b: Vec<C64> = constant
                        .iter()
                        .zip(v.iter().zip(&center))
                        .map(|(c, (vi, ci))| c + (vi - ci) / tau)
                        .collect();
                    let start = vecops::sub(x, &center);
                    let out = cg(|u, o| normal.forward_into(u, o), &b, Some(&start), inner, 0.0, |_, _| {});
                    for ((xi, di), ci) in x.iter_mut().zip(&out.x).zip(&center) {
                        *xi = ci + di;
                    }
                },
                x0,
                dual0.as_deref(),
                &cfg,
                &mut monitor,
            )?;
            state.dual = Some(res.dual.clone());
            Ok(res)
        }
    }
}

/// Solves the classical-sketch problem `min 1/2 ||S A x - S y||^2 + g(x)`.
pub fn classical_sketch_solve(
    a: &SenseOperator,
    y: &[C64],
    sk: &SketchMatrix,
    reg: &Regularizer,
    solver: SolverKind,
    iters: usize,
    scfg: &SolverConfig,
) -> Result<SolveResult> {
    let a_s = build_sketched_operator(a, sk)?;
    let y_s = sk.apply_stacked(y)?;
    solve_smooth_plus_reg(
        &Smooth::LeastSquares { op: &a_s, y: &y_s },
        reg,
        solver,
        iters,
        scfg,
        &vecops::zeros(a.in_dim()),
        &mut SolveState::default(),
        &mut |_| {},
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct OuterRecord {
    pub iteration: usize,
    pub distance: Option<f64>,
    pub objective: f64,
    pub coil_transforms: u64,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct ReconReport {
    pub x_final: Image,
    pub x_init: Vec<C64>,
    pub per_outer: Vec<OuterRecord>,
    /// Coil transforms spent by the classical-sketch initialisation.
    pub init_coil_transforms: u64,
    pub coil_transforms: u64,
    pub transforms: u64,
    /// Objective of the full problem at the initial iterate.
    pub initial_objective: f64,
    /// Iterates after each outer iteration, when requested.
    pub snapshots: Vec<Vec<C64>>,
    pub diverged: bool,
    pub wall_time: f64,
}

impl ReconReport {
    /// Divergence as an error, for callers that want to abort.
    pub fn check_diverged(&self) -> Result<()> {
        if self.diverged {
            let last = self.per_outer.last();
            return Err(Error::Diverged {
                iteration: last.map_or(0, |r| r.iteration),
                objective: last.map_or(f64::NAN, |r| r.objective),
                initial: self.initial_objective,
            });
        }
        Ok(())
    }
}

/// Optional observers of a coil-sketching run.
#[derive(Default)]
pub struct Observer<'a> {
    /// Reference for the per-outer distance.
    pub reference: Option<&'a [C64]>,
    /// Called after every inner iterate with `(x, coil transforms so far)`.
    pub on_inner: Option<&'a mut dyn FnMut(&[C64], u64)>,
    /// Keep the iterate after every outer iteration.
    pub snapshots: bool,
}

/// Algorithm: compress to `c_hat0` coils, optionally initialise with a classical
/// sketch, then for `t = 1..T` compute the exact gradient, draw a fresh sketch and
/// solve the anchored sketched sub-problem warm-started at `x^t`.
pub fn coil_sketching_recon(
    problem: &ReconProblem,
    cfg: &CoilSketchConfig,
    observer: &mut Observer<'_>,
) -> Result<ReconReport> {
    cfg.validate(problem.ncoils())?;
    let start = Instant::now();
    let comp = problem.compressed(cfg.c_hat0)?;
    let a = comp.operator()?;
    let y = comp.y();
    let reg = &cfg.reg;
    let transforms0 = reg.transforms();
    let d = a.in_dim();
    let mut on_inner = observer.on_inner.take();
    let mut emit = |x: &[C64], count: u64| {
        if let Some(f) = on_inner.as_mut() {
            f(x, count);
        }
    };

    let mut x = vecops::zeros(d);
    if cfg.use_init {
        let sk0 = gen_sketch_matrix_with(&cfg.sketch, cfg.c_hat0, &mut seed_stream(cfg.sketch.seed, 0))?;
        let res = classical_sketch_solve(&a, &y, &sk0, reg, cfg.solver, cfg.inner_iters, &cfg.solver_cfg)?;
        x = res.x;
        emit(&x, a.coil_transforms());
    }
    let x_init = x.clone();
    let init_coil_transforms = a.coil_transforms();
    let f0 = full_objective(&a, &y, reg, &x);
    let mut state = SolveState::default();
    let mut per_outer = Vec::with_capacity(cfg.outer_iters);
    let mut snapshots = Vec::new();
    let mut diverged = false;
    for t in 1..=cfg.outer_iters {
        let grad = true_gradient(&a, &x, &y)?;
        let sk = gen_sketch_matrix_with(&cfg.sketch, cfg.c_hat0, &mut seed_stream(cfg.sketch.seed, t as u64))?;
        let sub = SketchSubproblem {
            anchor: x.clone(),
            true_grad: grad,
            sketched_op: build_sketched_operator(&a, &sk)?,
            reg: reg.clone(),
        };
        if !cfg.reuse_step_size {
            state.lipschitz = None;
        }
        if !cfg.carry_momentum {
            state.momentum = FistaMomentum::default();
        }
        let counter = a.counter().clone();
        let res = solve_smooth_plus_reg(
            &Smooth::Sketched(&sub),
            reg,
            cfg.solver,
            cfg.inner_iters,
            &cfg.solver_cfg,
            &x,
            &mut state,
            &mut |xi| emit(xi, counter.get()),
        )?;
        x = res.x;
        if observer.snapshots {
            snapshots.push(x.clone());
        }
        let objective = full_objective(&a, &y, reg, &x);
        let distance = match observer.reference {
            Some(r) => Some(convergence_distance(&x, r)?),
            None => None,
        };
        per_outer.push(OuterRecord {
            iteration: t,
            distance,
            objective,
            coil_transforms: a.coil_transforms(),
            wall_time: start.elapsed().as_secs_f64(),
        });
        if !objective.is_finite() || objective > 10.0 * f0 {
            diverged = true;
            break;
        }
    }
    Ok(ReconReport {
        x_final: Image {
            shape: comp.shape().clone(),
            values: x,
        },
        x_init,
        per_outer,
        init_coil_transforms,
        coil_transforms: a.coil_transforms(),
        transforms: reg.transforms() - transforms0,
        initial_objective: f0,
        snapshots,
        diverged,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
