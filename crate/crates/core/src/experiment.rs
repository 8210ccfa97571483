//! Synthetic testbeds, the four compared reconstruction methods, and the benchmark,
//! ablation and g-factor drivers built on them.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coil_sketch::{
    coil_sketching_recon, full_objective, lipschitz, solve_smooth_plus_reg, CoilSketchConfig, Observer,
    OuterRecord, ReconProblem, Smooth, SolveState, SolverKind,
};
use crate::error::{Error, Result};
use crate::grid::{GridShape, Image};
use crate::linop::{CostCounter, LinOp};
use crate::metrics::{convergence_distance, gfactor_montecarlo_with, GFactorMap, MetricReport, CONVERGED_DISTANCE};
use crate::sense::{build_sense_with, radial_density_weights, FourierMode, KSpaceData, SenseOperator};
use crate::simulate::{
    acquire, cartesian_mask, make_coil_maps, make_phantom, mask_lines, noise_for_snr, radial_traj, support,
    AcquisitionSpec, MaskKind, PhantomKind, PhantomSpec,
};
use crate::sketch::{SketchConfig, SketchDistribution};
use crate::solvers::{accproxsgd, Monitor, RegKind, Regularizer, SgdParams, SolverConfig};
use crate::vecops;
use crate::linop::GriddingParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Radial,
    Cartesian,
}

/// Phantom, coils, sampling and noise of a synthetic experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestbedSpec {
    pub shape: Vec<usize>,
    pub coils: usize,
    pub sampling: Sampling,
    pub spokes: usize,
    pub readout: usize,
    pub golden: bool,
    /// Cartesian acceleration.
    pub accel: f64,
    pub mask: MaskKind,
    pub acs: usize,
    /// SNR of the clean k-space in dB; ignored when `noise_sigma` is set.
    pub snr_db: f64,
    pub noise_sigma: Option<f64>,
    pub density_compensation: bool,
    /// Kaiser-Bessel gridding instead of the exact non-uniform DFT.
    pub gridding: bool,
    pub seed: u64,
}

impl Default for TestbedSpec {
    fn default() -> Self {
        Self {
            shape: vec![64, 64],
            coils: 8,
            sampling: Sampling::Radial,
            spokes: 48,
            readout: 128,
            golden: true,
            accel: 3.0,
            mask: MaskKind::Regular,
            acs: 0,
            snr_db: 30.0,
            noise_sigma: None,
            density_compensation: true,
            gridding: true,
            seed: 0,
        }
    }
}

impl TestbedSpec {
    /// 2D golden-angle radial phantom with density compensation.
    pub fn radial_2d(n: usize, coils: usize) -> Self {
        Self {
            shape: vec![n, n],
            coils,
            spokes: 3 * n / 4,
            readout: 2 * n,
            ..Self::default()
        }
    }

    /// 2D Cartesian phase-encode undersampling.
    pub fn cartesian_2d(n: usize, coils: usize, accel: f64, mask: MaskKind) -> Self {
        Self {
            shape: vec![n, n],
            coils,
            sampling: Sampling::Cartesian,
            accel,
            mask,
            density_compensation: false,
            gridding: false,
            ..Self::default()
        }
    }

    /// Stack-of-radial 3D phantom.
    pub fn radial_3d() -> Self {
        Self {
            shape: vec![16, 32, 32],
            coils: 12,
            spokes: 24,
            readout: 64,
            ..Self::default()
        }
    }

    pub fn grid(&self) -> Result<GridShape> {
        GridShape::new(&self.shape)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.grid()?;
        if !(2..=3).contains(&g.ndim()) {
            return Err(Error::Config(format!("testbed must be 2D or 3D, got {:?}", self.shape)));
        }
        if self.coils == 0 {
            return Err(Error::Config("coils must be positive".into()));
        }
        if self.sampling == Sampling::Radial && (self.spokes == 0 || self.readout == 0) {
            return Err(Error::Config("radial sampling needs spokes and readout".into()));
        }
        if self.sampling == Sampling::Cartesian && !(self.accel >= 1.0) {
            return Err(Error::Config(format!("acceleration must be >= 1, got {}", self.accel)));
        }
        if let Some(s) = self.noise_sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("noise_sigma must be finite and >= 0, got {s}")));
            }
        }
        Ok(())
    }

    fn fourier(&self) -> FourierMode {
        if self.gridding && self.sampling == Sampling::Radial {
            FourierMode::Gridded(GriddingParams::default())
        } else {
            FourierMode::Direct
        }
    }

    fn traj(&self, shape: &GridShape, accel: f64) -> Result<crate::grid::Trajectory> {
        match self.sampling {
            Sampling::Radial => radial_traj(shape, self.spokes, self.readout, self.golden),
            Sampling::Cartesian => cartesian_mask(shape, accel, self.mask, self.acs, self.seed.wrapping_add(1)),
        }
    }
}

/// A simulated acquisition together with its ground truth.
#[derive(Clone, Debug)]
pub struct Testbed {
    pub spec: TestbedSpec,
    pub truth: Image,
    pub support: Vec<bool>,
    pub problem: ReconProblem,
    pub noise_sigma: f64,
    /// Nyquist samples over acquired samples along the undersampled dimension.
    pub realized_r: f64,
}

impl Testbed {
    pub fn shape(&self) -> &GridShape {
        &self.truth.shape
    }

    /// Fully sampled Cartesian encoding of the same phantom and coils.
    pub fn full_operator(&self) -> Result<SenseOperator> {
        let shape = self.shape();
        let traj = cartesian_mask(shape, 1.0, MaskKind::Regular, 0, 0)?;
        build_sense_with(&self.problem.maps, &traj, None, FourierMode::Direct)
    }
}

pub fn build_testbed(spec: &TestbedSpec) -> Result<Testbed> {
    spec.validate()?;
    let shape = spec.grid()?;
    let kind = if shape.ndim() == 3 {
        PhantomKind::Ellipsoids3d
    } else {
        PhantomKind::SheppLogan2d
    };
    let truth = make_phantom(&PhantomSpec {
        kind,
        shape: shape.clone(),
        contrast: 1.0,
    })?;
    let maps = make_coil_maps(spec.coils, &shape, spec.seed)?;
    let traj = spec.traj(&shape, spec.accel)?;
    let weights = (spec.sampling == Sampling::Radial && spec.density_compensation).then(|| radial_density_weights(&traj));
    let fourier = spec.fourier();
    let op = build_sense_with(&maps, &traj, weights.as_ref(), fourier)?;
    let noise_sigma = match spec.noise_sigma {
        Some(s) => s,
        None => {
            let clean = op.unweighted().with_counter(CostCounter::new()).forward(&truth.values);
            noise_for_snr(&clean, spec.snr_db)
        }
    };
    let data = acquire(
        &truth,
        &op,
        &AcquisitionSpec {
            noise_sigma,
            seed: spec.seed.wrapping_add(2),
        },
    )?;
    let realized_r = match spec.sampling {
        Sampling::Cartesian => shape.dims()[0] as f64 / mask_lines(&traj) as f64,
        Sampling::Radial => {
            let d = shape.dims();
            let n = d[d.len() - 1].max(d[d.len() - 2]) as f64;
            std::f64::consts::FRAC_PI_2 * n / spec.spokes as f64
        }
    };
    Ok(Testbed {
        spec: spec.clone(),
        support: support(&truth),
        truth,
        problem: ReconProblem {
            data,
            maps,
            weights,
            fourier,
        },
        noise_sigma,
        realized_r,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Baseline,
    CoilCompression,
    Accproxsgd,
    CoilSketching,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Baseline, Method::CoilCompression, Method::Accproxsgd, Method::CoilSketching];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::CoilCompression => "coil-compression",
            Method::Accproxsgd => "accproxsgd",
            Method::CoilSketching => "coil-sketching",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Regularization, solver and sketch settings shared by all methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodParams {
    pub reg: RegKind,
    /// Defaults to the regularizer's standard value.
    pub lambda: Option<f64>,
    /// Lambda of the coil-compression method.
    pub compressed_lambda: Option<f64>,
    /// Defaults to CG for l2, FISTA for wavelets and PDHG for TV.
    pub solver: Option<SolverKind>,
    /// Iterations of the baseline, compression and AccProxSGD runs.
    pub iters: usize,
    pub step_scale: f64,
    pub pdhg_sigma_tau_ratio: f64,
    pub inner_cg_iters: usize,
    /// Virtual coils kept by the coil-compression method.
    pub compress_to: usize,
    /// Initial compression of coil sketching; all coils when unset.
    pub c_hat0: Option<usize>,
    pub c_hat: usize,
    /// High-energy coils kept verbatim; `c_hat - 1` when unset.
    pub v: Option<usize>,
    pub distribution: SketchDistribution,
    pub sketch_seed: u64,
    pub outer_iters: usize,
    /// Sub-problem iterations; solver default when unset.
    pub inner_iters: Option<usize>,
    pub use_init: bool,
    pub reuse_step_size: bool,
    pub carry_momentum: bool,
    /// Coils per AccProxSGD iteration; `c_hat` when unset.
    pub sgd_batch: Option<usize>,
    pub sgd_seed: u64,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            reg: RegKind::L1Wavelet,
            lambda: None,
            compressed_lambda: None,
            solver: None,
            iters: 100,
            step_scale: 0.9,
            pdhg_sigma_tau_ratio: 1.0,
            inner_cg_iters: 8,
            compress_to: 3,
            c_hat0: None,
            c_hat: 4,
            v: None,
            distribution: SketchDistribution::Rademacher,
            sketch_seed: 0,
            outer_iters: 10,
            inner_iters: None,
            use_init: false,
            reuse_step_size: true,
            carry_momentum: true,
            sgd_batch: None,
            sgd_seed: 0,
        }
    }
}

impl MethodParams {
    pub fn solver_kind(&self) -> SolverKind {
        self.solver.unwrap_or_else(|| SolverKind::for_reg(self.reg))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or_else(|| self.reg.default_lambda())
    }

    pub fn compressed_lambda(&self) -> f64 {
        self.compressed_lambda.unwrap_or_else(|| self.reg.default_compressed_lambda())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.iters,
            tol: 0.0,
            step_scale: self.step_scale,
            pdhg_sigma_tau_ratio: self.pdhg_sigma_tau_ratio,
            inner_cg_iters: self.inner_cg_iters,
            record_history: false,
        }
    }

    pub fn sketch_config(&self) -> SketchConfig {
        let v = self.v.unwrap_or(self.c_hat.saturating_sub(1));
        SketchConfig {
            c_hat: self.c_hat,
            v,
            s: self.c_hat.saturating_sub(v),
            distribution: self.distribution,
            seed: self.sketch_seed,
        }
    }

    pub fn coil_sketch_config(&self, shape: &GridShape, ncoils: usize) -> Result<CoilSketchConfig> {
        let solver = self.solver_kind();
        Ok(CoilSketchConfig {
            c_hat0: self.c_hat0.unwrap_or(ncoils),
            sketch: self.sketch_config(),
            outer_iters: self.outer_iters,
            inner_iters: self.inner_iters.unwrap_or_else(|| solver.default_inner_iters()),
            use_init: self.use_init,
            reuse_step_size: self.reuse_step_size,
            carry_momentum: self.carry_momentum,
            solver,
            reg: Regularizer::new(self.reg, self.lambda(), shape)?,
            solver_cfg: self.solver_config(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("compressed_lambda", self.compressed_lambda)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
                }
            }
        }
        if !(self.step_scale > 0.0 && self.pdhg_sigma_tau_ratio > 0.0) {
            return Err(Error::Config("step_scale and pdhg_sigma_tau_ratio must be positive".into()));
        }
        if self.iters == 0 || self.outer_iters == 0 || self.compress_to == 0 || self.c_hat == 0 {
            return Err(Error::Config("iteration and coil counts must be positive".into()));
        }
        self.sketch_config().validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// One recorded iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub coil_transforms: u64,
    pub wall_time: f64,
    pub distance: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: Method,
    pub x: Image,
    pub coil_transforms: u64,
    pub transforms: u64,
    pub wall_time: f64,
    pub trace: Vec<TracePoint>,
    pub per_outer: Vec<OuterRecord>,
    /// Coil-sketching iterates after each outer iteration.
    pub outer_snapshots: Vec<Vec<C64>>,
    /// `(budget, first iterate whose coil-transform count reached it)`.
    pub checkpoints: Vec<(u64, Vec<C64>)>,
    pub diverged: bool,
}

/// What to record while running a method.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions<'a> {
    /// Reference for the per-iterate distance.
    pub reference: Option<&'a [C64]>,
    /// Coil-transform budgets at which iterates are kept.
    pub checkpoints: &'a [u64],
    pub outer_snapshots: bool,
}

impl<'a> RunOptions<'a> {
    pub fn with_reference(reference: &'a [C64]) -> Self {
        Self {
            reference: Some(reference),
            ..Self::default()
        }
    }
}

impl MethodRun {
    /// First trace point within [`CONVERGED_DISTANCE`] of the reference.
    pub fn converged_at(&self) -> Option<&TracePoint> {
        self.trace
            .iter()
            .find(|p| p.distance.is_some_and(|d| d < CONVERGED_DISTANCE))
    }

    pub fn metrics(&self, reference: &Image) -> Result<MetricReport> {
        MetricReport::compute(&self.x.values, &reference.values, &reference.shape)
    }
}

struct TraceRecorder<'a> {
    reference: Option<&'a [C64]>,
    budgets: &'a [u64],
    start: Instant,
    points: Vec<TracePoint>,
    checkpoints: Vec<(u64, Vec<C64>)>,
}

impl<'a> TraceRecorder<'a> {
    fn new(opts: &RunOptions<'a>) -> Self {
        Self {
            reference: opts.reference,
            budgets: opts.checkpoints,
            start: Instant::now(),
            points: Vec::new(),
            checkpoints: Vec::new(),
        }
    }

    fn push(&mut self, x: &[C64], count: u64) {
        for &b in self.budgets {
            if count >= b && !self.checkpoints.iter().any(|(c, _)| *c == b) {
                self.checkpoints.push((b, x.to_vec()));
            }
        }
        let distance = self.reference.and_then(|r| convergence_distance(x, r).ok());
        self.points.push(TracePoint {
            iteration: self.points.len() + 1,
            coil_transforms: count,
            wall_time: self.start.elapsed().as_secs_f64(),
            distance,
        });
    }
}

fn plain_solve(
    problem: &ReconProblem,
    reg: &Regularizer,
    params: &MethodParams,
    rec: &mut TraceRecorder<'_>,
) -> Result<(Vec<C64>, u64)> {
    let op = problem.operator()?;
    let y = problem.y();
    let counter = op.counter().clone();
    let res = solve_smooth_plus_reg(
        &Smooth::LeastSquares { op: &op, y: &y },
        reg,
        params.solver_kind(),
        params.iters,
        &params.solver_config(),
        &vecops::zeros(op.in_dim()),
        &mut SolveState::default(),
        &mut |x| rec.push(x, counter.get()),
    )?;
    Ok((res.x, op.coil_transforms()))
}

/// Runs `method` on `problem`, recording what `opts` asks for.
pub fn run_method(problem: &ReconProblem, method: Method, params: &MethodParams, opts: &RunOptions<'_>) -> Result<MethodRun> {
    params.validate()?;
    let shape = problem.shape().clone();
    let start = Instant::now();
    let mut rec = TraceRecorder::new(opts);
    let mut per_outer = Vec::new();
    let mut outer_snapshots = Vec::new();
    let mut diverged = false;
    let (x, coil_transforms, transforms) = match method {
        Method::Baseline => {
            let reg = Regularizer::new(params.reg, params.lambda(), &shape)?;
            let (x, count) = plain_solve(problem, &reg, params, &mut rec)?;
            (x, count, reg.transforms())
        }
        Method::CoilCompression => {
            let keep = params.compress_to.min(problem.ncoils());
            let reg = Regularizer::new(params.reg, params.compressed_lambda(), &shape)?;
            let (x, count) = plain_solve(&problem.compressed(keep)?, &reg, params, &mut rec)?;
            (x, count, reg.transforms())
        }
        Method::Accproxsgd => {
            let reg = Regularizer::new(params.reg, params.lambda(), &shape)?;
            let op = problem.operator()?;
            let y = problem.y();
            let batch = params.sgd_batch.unwrap_or(params.c_hat).min(problem.ncoils());
            let sgd = SgdParams::with_defaults(batch, lipschitz(&op), params.sgd_seed);
            let counter = op.counter().clone();
            let mut cb = |_: usize, x: &[C64]| rec.push(x, counter.get());
            let res = accproxsgd(
                &op,
                &y,
                &reg,
                &sgd,
                &vecops::zeros(op.in_dim()),
                &params.solver_config(),
                &mut Monitor {
                    objective: None,
                    on_iter: Some(&mut cb),
                    counter: Some(op.counter()),
                },
            )?;
            diverged = res.diverged;
            (res.x, op.coil_transforms(), reg.transforms())
        }
        Method::CoilSketching => {
            let cfg = params.coil_sketch_config(&shape, problem.ncoils())?;
            let mut cb = |x: &[C64], count: u64| rec.push(x, count);
            let report = coil_sketching_recon(
                problem,
                &cfg,
                &mut Observer {
                    reference: opts.reference,
                    on_inner: Some(&mut cb),
                    snapshots: opts.outer_snapshots,
                },
            )?;
            per_outer = report.per_outer;
            outer_snapshots = report.snapshots;
            diverged = report.diverged;
            (report.x_final.values, report.coil_transforms, report.transforms)
        }
    };
    Ok(MethodRun {
        method,
        x: Image { shape, values: x },
        coil_transforms,
        transforms,
        wall_time: start.elapsed().as_secs_f64(),
        trace: rec.points,
        per_outer,
        outer_snapshots,
        checkpoints: rec.checkpoints,
        diverged,
    })
}

/// Long baseline run used as the converged reference `x^inf`.
pub fn reference_solution(problem: &ReconProblem, params: &MethodParams, iters: usize) -> Result<Image> {
    let p = MethodParams {
        iters,
        ..params.clone()
    };
    Ok(run_method(problem, Method::Baseline, &p, &RunOptions::default())?.x)
}

/// `1/2 ||A x - y||^2 + g(x)` of the full problem with the baseline lambda.
pub fn objective(problem: &ReconProblem, params: &MethodParams, x: &[C64]) -> Result<f64> {
    let op = problem.operator()?;
    let reg = Regularizer::new(params.reg, params.lambda(), problem.shape())?;
    Ok(full_objective(&op, &problem.y(), &reg, x))
}

/// One row of the benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub method: Method,
    pub duration_s: f64,
    pub coil_transforms: u64,
    pub transforms: u64,
    pub nrmse: f64,
    pub ssim: f64,
    pub hfen: f64,
    pub converged_at_s: Option<f64>,
    pub converged_at_transforms: Option<u64>,
    pub diverged: bool,
}

impl BenchRecord {
    pub fn from_run(run: &MethodRun, truth: &Image) -> Result<Self> {
        let m = run.metrics(truth)?;
        let conv = run.converged_at();
        Ok(Self {
            method: run.method,
            duration_s: run.wall_time,
            coil_transforms: run.coil_transforms,
            transforms: run.transforms,
            nrmse: m.nrmse,
            ssim: m.ssim,
            hfen: m.hfen,
            converged_at_s: conv.map(|p| p.wall_time),
            converged_at_transforms: conv.map(|p| p.coil_transforms),
            diverged: run.diverged,
        })
    }
}

/// Runs every method in `methods` against `reference`.
pub fn bench(tb: &Testbed, params: &MethodParams, methods: &[Method], reference: &Image) -> Result<Vec<(MethodRun, BenchRecord)>> {
    methods
        .iter()
        .map(|&m| {
            let run = run_method(&tb.problem, m, params, &RunOptions::with_reference(&reference.values))?;
            let rec = BenchRecord::from_run(&run, &tb.truth)?;
            Ok((run, rec))
        })
        .collect()
}

/// Sketch settings swept by [`ablate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSweep {
    pub v_values: Vec<usize>,
    pub distributions: Vec<SketchDistribution>,
    pub seeds: usize,
    pub first_seed: u64,
}

impl Default for AblationSweep {
    fn default() -> Self {
        Self {
            v_values: vec![0, 1, 2, 3, 4],
            distributions: vec![SketchDistribution::Rademacher, SketchDistribution::Gaussian],
            seeds: 50,
            first_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub v: usize,
    pub s: usize,
    pub distribution: SketchDistribution,
    pub seed: u64,
    /// Final objective divided by the baseline objective.
    pub normalized_objective: f64,
    pub nrmse: f64,
    pub ssim: f64,
    pub hfen: f64,
    pub diverged: bool,
}

/// Coil sketching over every `(V, distribution, seed)` cell, normalised by the
/// baseline objective.
pub fn ablate(tb: &Testbed, params: &MethodParams, sweep: &AblationSweep) -> Result<Vec<AblationRow>> {
    let base = run_method(&tb.problem, Method::Baseline, params, &RunOptions::default())?;
    let f_base = objective(&tb.problem, params, &base.x.values)?;
    let mut rows = Vec::new();
    for &v in &sweep.v_values {
        if v > params.c_hat {
            return Err(Error::Config(format!("V = {v} exceeds c_hat = {}", params.c_hat)));
        }
        let dists: &[SketchDistribution] = if v == params.c_hat {
            &sweep.distributions[..sweep.distributions.len().min(1)]
        } else {
            &sweep.distributions
        };
        for &distribution in dists {
            for i in 0..sweep.seeds as u64 {
                let seed = sweep.first_seed + i;
                let p = MethodParams {
                    v: Some(v),
                    distribution,
                    sketch_seed: seed,
                    ..params.clone()
                };
                let run = run_method(&tb.problem, Method::CoilSketching, &p, &RunOptions::default())?;
                let f = objective(&tb.problem, params, &run.x.values)?;
                let m = MetricReport::compute(&run.x.values, &tb.truth.values, tb.shape())
                    .unwrap_or(MetricReport { nrmse: f64::NAN, ssim: f64::NAN, hfen: f64::NAN });
                rows.push(AblationRow {
                    v,
                    s: params.c_hat - v,
                    distribution,
                    seed,
                    normalized_objective: f / f_base,
                    nrmse: m.nrmse,
                    ssim: m.ssim,
                    hfen: m.hfen,
                    diverged: run.diverged || !f.is_finite(),
                });
            }
        }
    }
    Ok(rows)
}

/// Sample variance of the normalised objective over rows matching `pred`; infinite when any of them diverged.
pub fn objective_variance(rows: &[AblationRow], pred: impl Fn(&AblationRow) -> bool) -> f64 {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| pred(r))
        .map(|r| if r.diverged || !r.normalized_objective.is_finite() { f64::INFINITY } else { r.normalized_objective })
        .collect();
    if vals.len() < 2 {
        return f64::NAN;
    }
    if vals.iter().any(|v| v.is_infinite()) {
        return f64::INFINITY;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GFactorSummary {
    pub method: String,
    pub mean_inverse_g: f64,
    pub trials: usize,
    pub r: f64,
}

/// Monte-Carlo inverse g-factor of baseline, coil compression and coil sketching.
///
/// The fully sampled reference is always reconstructed with the baseline method.
pub fn gfactor(tb: &Testbed, params: &MethodParams, trials: usize, seed: u64) -> Result<Vec<(String, GFactorMap)>> {
    let a_full = tb.full_operator()?;
    let a_under = tb.problem.operator()?;
    let recon_with = |method: Method| {
        let weights = tb.problem.weights.clone();
        let fourier = tb.problem.fourier;
        move |op: &SenseOperator, data: &KSpaceData| -> Result<Vec<C64>> {
            let prob = ReconProblem {
                data: data.clone(),
                maps: op.maps().clone(),
                weights: if op.weights().is_some() { weights.clone() } else { None },
                fourier: if op.weights().is_some() { fourier } else { FourierMode::Direct },
            };
            Ok(run_method(&prob, method, params, &RunOptions::default())?.x.values)
        }
    };
    let full = recon_with(Method::Baseline);
    let mut out = Vec::new();
    for method in [Method::Baseline, Method::CoilCompression, Method::CoilSketching] {
        let under = recon_with(method);
        let map = gfactor_montecarlo_with(
            &full,
            &under,
            &a_full,
            &a_under,
            &tb.truth.values,
            &tb.support,
            tb.noise_sigma,
            trials,
            tb.realized_r,
            seed,
        )?;
        out.push((method.name().to_string(), map));
    }
    Ok(out)
}
