//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always printed.
//! `cargo test --test acceptance -- 3 7` runs only criteria 3 and 7.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sketchrecon::cli::config::RunConfig;
use sketchrecon::coil_sketch::{
    coil_sketching_recon, sketched_objective_grad, solve_smooth_plus_reg, true_gradient, CoilSketchConfig, Observer, ReconProblem,
    Smooth, SketchSubproblem, SolveState, SolverKind,
};
use sketchrecon::experiment::{
    ablate, build_testbed, gfactor, objective_variance, reference_solution, run_method, AblationRow, Method, MethodParams, MethodRun,
    RunOptions, Testbed,
};
use sketchrecon::linop::{
    adjoint_mismatch, compose, random_vector, CenteredFft, Dense, Diagonal, DirectNudft, FiniteDiff, GriddedNufft, GriddingParams,
    Identity, LinOp, Normal, Scaled, Stack, Wavelet,
};
use sketchrecon::metrics::MetricReport;
use sketchrecon::sense::{build_sense_with, radial_density_weights, FourierMode, SensitivityMaps};
use sketchrecon::simulate::{acquire, cartesian_mask, make_coil_maps, radial_traj, AcquisitionSpec, MaskKind};
use sketchrecon::sketch::{build_sketched_operator, gen_sketch_matrix, SketchConfig, SketchDistribution};
use sketchrecon::solvers::{RegKind, Regularizer, SolverConfig};
use sketchrecon::{vecops, GridShape, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn testbed(cfg: &RunConfig) -> Testbed {
    build_testbed(&cfg.testbed).expect("testbed")
}

fn ratio(run: &MethodRun, base: &MethodRun) -> f64 {
    match (run.converged_at(), base.converged_at()) {
        (Some(r), Some(b)) => r.coil_transforms as f64 / b.coil_transforms as f64,
        _ => f64::INFINITY,
    }
}

fn metrics(run: &MethodRun, tb: &Testbed) -> MetricReport {
    run.metrics(&tb.truth).expect("metrics")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst_unitary: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let check = |name: &str, op: &dyn LinOp, worst: &mut f64| {
        for seed in 0..5 {
            let m = adjoint_mismatch(op, seed);
            assert!(m.is_finite(), "{name}");
            *worst = worst.max(m);
        }
    };

    let s2 = GridShape::new(&[32, 32]).unwrap();
    let s3 = GridShape::new(&[8, 12, 16]).unwrap();
    let radial = radial_traj(&s2, 24, 64, true).unwrap();
    let maps = make_coil_maps(4, &s2, 2).unwrap();
    let w = radial_density_weights(&radial);
    let cart = cartesian_mask(&s2, 2.0, MaskKind::Regular, 4, 0).unwrap();

    let direct_sense = build_sense_with(&maps, &radial, Some(&w), FourierMode::Direct).unwrap();
    let gridded_sense = build_sense_with(&maps, &radial, Some(&w), FourierMode::Gridded(GriddingParams::default())).unwrap();
    let cart_sense = build_sense_with(&maps, &cart, None, FourierMode::Direct).unwrap();
    let sk = gen_sketch_matrix(&SketchConfig::recommended(3, 4), 4).unwrap();
    let sketched = build_sketched_operator(&direct_sense, &sk).unwrap();
    let dense = Dense {
        mat: DMatrix::from_fn(7, 5, |i, j| C64::new((i * 3 + j) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0 - 1.0)),
    };
    let diag: Vec<C64> = random_vector(64, &mut rng);

    let mut worst_exact: f64 = 0.0;
    let worst = &mut worst_exact;
    check("fft2", &CenteredFft::new(&[32, 32]), worst);
    check("fft3", &CenteredFft::new(&[8, 12, 16]), worst);
    check("finite-diff2", &FiniteDiff::new(&s2), worst);
    check("finite-diff3", &FiniteDiff::new(&s3), worst);
    check("wavelet2", &Wavelet::with_default_levels(&s2).unwrap(), worst);
    check("wavelet3", &Wavelet::with_default_levels(&GridShape::new(&[16, 16, 8]).unwrap()).unwrap(), worst);
    check("nudft", &DirectNudft::new(&s2, &radial).unwrap(), worst);
    check("gridded-nufft", &GriddedNufft::new(&s2, &radial, GriddingParams::default()).unwrap(), worst);
    check("sense-direct", &direct_sense, worst);
    check("sense-gridded", &gridded_sense, worst);
    check("sense-cartesian", &cart_sense, worst);
    check("sense-sketched", &sketched, worst);
    check("identity", &Identity { dim: 9 }, worst);
    check("diagonal", &Diagonal { diag }, worst);
    check("dense", &dense, worst);
    check("compose", &compose(FiniteDiff::new(&s2), CenteredFft::new(&[32, 32])), worst);
    check(
        "stack",
        &Stack::new(vec![Box::new(Identity { dim: 1024 }), Box::new(FiniteDiff::new(&s2))]),
        worst,
    );
    check("scaled", &Scaled { op: FiniteDiff::new(&s2), scale: -2.5 }, worst);
    check("normal", &Normal { op: direct_sense.clone(), shift: 0.3 }, worst);

    for op in [
        Box::new(CenteredFft::new(&[32, 32])) as Box<dyn LinOp>,
        Box::new(CenteredFft::new(&[8, 12, 16])),
        Box::new(Wavelet::with_default_levels(&s2).unwrap()),
        Box::new(Wavelet::with_default_levels(&GridShape::new(&[16, 16, 8]).unwrap()).unwrap()),
    ] {
        let x = random_vector(op.in_dim(), &mut rng);
        let y = op.forward(&x);
        let norm_err = (vecops::norm(&y) - vecops::norm(&x)).abs() / vecops::norm(&x);
        let back = op.adjoint(&y);
        worst_unitary = worst_unitary.max(norm_err).max(vecops::rel_diff(&back, &x));
    }

    let exact = DirectNudft::new(&s2, &radial).unwrap();
    let grid = GriddedNufft::new(&s2, &radial, GriddingParams::default()).unwrap();
    let x = random_vector(s2.size(), &mut rng);
    let k = random_vector(radial.len(), &mut rng);
    let nufft_err = vecops::rel_diff(&grid.forward(&x), &exact.forward(&x)).max(vecops::rel_diff(&grid.adjoint(&k), &exact.adjoint(&k)));

    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_exact <= 1e-10 && worst_unitary <= 1e-10 && nufft_err <= 1e-3 && secs < 60.0,
        format!("adjoint {worst_exact:.1e} (<=1e-10), unitarity {worst_unitary:.1e} (<=1e-10), gridding vs DFT {nufft_err:.1e} (<=1e-3), {secs:.1}s (<60s)"),
    )
}

/// `(S (x) I_N) y` with explicit loops over the sketch entries.
fn kron_apply(mat: &DMatrix<f64>, y: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); mat.nrows() * n];
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            for s in 0..n {
                out[i * n + s] += y[j * n + s] * mat[(i, j)];
            }
        }
    }
    out
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for draw in 0..20u64 {
        let n = [4usize, 6, 8][draw as usize % 3];
        let shape = GridShape::new(&[n, n]).unwrap();
        let c = rng.random_range(2..=4usize);
        let coils: Vec<Vec<C64>> = (0..c).map(|_| random_vector(shape.size(), &mut rng)).collect();
        let maps = SensitivityMaps::new(shape.clone(), coils).unwrap();
        let traj = if draw % 2 == 0 {
            cartesian_mask(&shape, 2.0, MaskKind::Regular, 0, draw).unwrap()
        } else {
            radial_traj(&shape, n, 2 * n, true).unwrap()
        };
        let w = (draw % 2 == 1).then(|| radial_density_weights(&traj));
        let a = build_sense_with(&maps, &traj, w.as_ref(), FourierMode::Direct).unwrap();
        let c_hat = rng.random_range(1..=c);
        let v = rng.random_range(0..=c_hat);
        let distribution = if rng.random::<bool>() { SketchDistribution::Gaussian } else { SketchDistribution::Rademacher };
        let sk = gen_sketch_matrix(&SketchConfig { c_hat, v, s: c_hat - v, distribution, seed: draw }, c).unwrap();
        let a_s = build_sketched_operator(&a, &sk).unwrap();
        let m = a.nsamples();
        let x = random_vector(shape.size(), &mut rng);
        let fwd_oracle = kron_apply(&sk.mat, &a.forward(&x), m);
        let yk = random_vector(c_hat * m, &mut rng);
        let adj_oracle = a.adjoint(&kron_apply(&sk.mat.transpose(), &yk, m));
        worst = worst
            .max(vecops::rel_diff(&a_s.forward(&x), &fwd_oracle))
            .max(vecops::rel_diff(&a_s.adjoint(&yk), &adj_oracle));
    }
    outcome(worst <= 1e-10, format!("max relative deviation {worst:.1e} over 20 draws (<=1e-10)"))
}

fn criterion_3() -> Outcome {
    // S~ = I on the radial testbed against plain FISTA.
    let cfg = config("radial_wavelet.toml");
    let tb = testbed(&cfg);
    let c = tb.problem.ncoils();
    let shape = tb.shape().clone();
    let reg = Regularizer::new(RegKind::L1Wavelet, cfg.params.lambda(), &shape).unwrap();
    let (outer, inner) = (3, 20);
    let sk_cfg = CoilSketchConfig {
        c_hat0: c,
        sketch: SketchConfig { c_hat: c, v: c, s: 0, distribution: SketchDistribution::Rademacher, seed: 0 },
        outer_iters: outer,
        inner_iters: inner,
        use_init: false,
        reuse_step_size: true,
        carry_momentum: true,
        solver: SolverKind::Fista,
        reg: reg.clone(),
        solver_cfg: cfg.params.solver_config(),
    };
    let mut sk_hist = Vec::new();
    let mut rec = |x: &[C64], _: u64| sk_hist.push(x.to_vec());
    coil_sketching_recon(&tb.problem, &sk_cfg, &mut Observer { on_inner: Some(&mut rec), ..Observer::default() }).unwrap();
    let a = tb.problem.operator().unwrap();
    let y = tb.problem.y();
    let mut base_hist = Vec::new();
    solve_smooth_plus_reg(
        &Smooth::LeastSquares { op: &a, y: &y },
        &reg,
        SolverKind::Fista,
        outer * inner,
        &cfg.params.solver_config(),
        &vecops::zeros(shape.size()),
        &mut SolveState::default(),
        &mut |x| base_hist.push(x.to_vec()),
    )
    .unwrap();
    let history_dev = if sk_hist.len() == base_hist.len() {
        sk_hist.iter().zip(&base_hist).map(|(s, b)| vecops::rel_diff(s, b)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };

    // g = 0, exact inner solve, one outer iteration on an 8x8 system.
    let small = GridShape::new(&[8, 8]).unwrap();
    let maps = make_coil_maps(3, &small, 5).unwrap();
    let traj = radial_traj(&small, 6, 16, true).unwrap();
    let op = build_sense_with(&maps, &traj, None, FourierMode::Direct).unwrap();
    let truth = sketchrecon::Image::new(small.clone(), random_vector(64, &mut ChaCha8Rng::seed_from_u64(3))).unwrap();
    let data = acquire(&truth, &op, &AcquisitionSpec { noise_sigma: 0.05, seed: 4 }).unwrap();
    let problem = ReconProblem { data, maps, weights: None, fourier: FourierMode::Direct };
    let ls_cfg = CoilSketchConfig {
        c_hat0: 3,
        sketch: SketchConfig { c_hat: 3, v: 3, s: 0, distribution: SketchDistribution::Rademacher, seed: 0 },
        outer_iters: 1,
        inner_iters: 200,
        use_init: false,
        reuse_step_size: true,
        carry_momentum: false,
        solver: SolverKind::Cg,
        reg: Regularizer::new(RegKind::L2, 0.0, &small).unwrap(),
        solver_cfg: SolverConfig::fixed(200),
    };
    let x1 = coil_sketching_recon(&problem, &ls_cfg, &mut Observer::default()).unwrap().x_final.values;
    let a = problem.operator().unwrap();
    let cols: Vec<Vec<C64>> = (0..64)
        .map(|j| {
            let mut e = vecops::zeros(64);
            e[j] = C64::new(1.0, 0.0);
            a.forward(&e)
        })
        .collect();
    let dense = DMatrix::from_fn(a.out_dim(), 64, |i, j| cols[j][i]);
    let rhs = DVector::from_vec(problem.y());
    let ls = dense.svd(true, true).solve(&rhs, 1e-14).expect("svd solve");
    let ls_dev = vecops::rel_diff(&x1, ls.as_slice());

    outcome(
        history_dev <= 1e-6 && ls_dev <= 1e-8,
        format!(
            "identity-sketch history deviation {history_dev:.1e} over {} iterates (<=1e-6), one-step LS deviation {ls_dev:.1e} (<=1e-8)",
            base_hist.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let cfg = config("radial_wavelet.toml");
    let tb = testbed(&cfg);
    let a = tb.problem.operator().unwrap();
    let y = tb.problem.y();
    let c = tb.problem.ncoils();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for draw in 0..50u64 {
        let x = random_vector(tb.shape().size(), &mut rng);
        let d = true_gradient(&a, &x, &y).unwrap();
        let c_hat = rng.random_range(1..=c);
        let v = rng.random_range(0..=c_hat);
        let distribution = if draw % 2 == 0 { SketchDistribution::Rademacher } else { SketchDistribution::Gaussian };
        let sk = gen_sketch_matrix(&SketchConfig { c_hat, v, s: c_hat - v, distribution, seed: draw }, c).unwrap();
        let sub = SketchSubproblem {
            anchor: x.clone(),
            true_grad: d.clone(),
            sketched_op: build_sketched_operator(&a, &sk).unwrap(),
            reg: Regularizer::new(RegKind::L2, 0.0, tb.shape()).unwrap(),
        };
        worst = worst.max(vecops::rel_diff(&sketched_objective_grad(&sub, &x), &d));
    }
    outcome(worst <= 1e-12, format!("max relative deviation {worst:.1e} over 50 draws (<=1e-12)"))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cfg = config("ablate_wavelet.toml");
    let tb = testbed(&cfg);
    let c_hat = cfg.params.c_hat;
    let rows = ablate(&tb, &cfg.params, &cfg.ablate).expect("ablation");
    let var = |v: usize, d: SketchDistribution| objective_variance(&rows, |r: &AblationRow| r.v == v && r.distribution == d);
    let mut table = Vec::new();
    let mut monotone = true;
    let mut rademacher_le = true;
    for d in [SketchDistribution::Rademacher, SketchDistribution::Gaussian] {
        let vars: Vec<f64> = (0..c_hat).map(|v| var(v, d)).collect();
        monotone &= vars.windows(2).all(|w| w[1] <= w[0]);
        table.push(format!("{d:?} {}", vars.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>().join(" ")));
    }
    for v in 0..c_hat {
        rademacher_le &= var(v, SketchDistribution::Rademacher) <= var(v, SketchDistribution::Gaussian);
    }
    let full: Vec<&AblationRow> = rows.iter().filter(|r| r.v == c_hat).collect();
    let flagged = full.iter().filter(|r| r.diverged).count();
    let diverges = !full.is_empty() && flagged == full.len();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        monotone && rademacher_le && diverges && secs < 900.0,
        format!(
            "(a) nonincreasing {monotone} (b) rademacher<=gaussian {rademacher_le} (c) V=C^ diverged {flagged}/{}; variances by V: {}; {secs:.0}s (<900s)",
            full.len(),
            table.join(" | ")
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let cfg = config("cartesian_gfactor.toml");
    let tb = testbed(&cfg);
    let maps: BTreeMap<String, f64> = gfactor(&tb, &cfg.params, cfg.gfactor.trials, cfg.gfactor.seed)
        .expect("g-factor")
        .into_iter()
        .map(|(m, g)| (m, g.mean_over_support()))
        .collect();
    let (b, cc, sk) = (maps["baseline"], maps["coil-compression"], maps["coil-sketching"]);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (sk - b).abs() <= 0.05 && cc < b && cc < sk && secs < 900.0,
        format!(
            "mean 1/g over {} trials: baseline {b:.4}, sketching {sk:.4} (|diff| {:.4} <= 0.05), compression {cc:.4} (< both); R={:.2}; {secs:.0}s (<900s)",
            cfg.gfactor.trials,
            (sk - b).abs(),
            tb.realized_r
        ),
    )
}

struct Bench {
    tb: Testbed,
    params: MethodParams,
    runs: BTreeMap<Method, MethodRun>,
}

fn run_bench(name: &str, methods: &[Method]) -> Bench {
    let cfg = config(name);
    let tb = testbed(&cfg);
    let reference = reference_solution(&tb.problem, &cfg.params, cfg.bench.reference_iters).expect("reference");
    let runs = methods
        .iter()
        .map(|&m| (m, run_method(&tb.problem, m, &cfg.params, &RunOptions::with_reference(&reference.values)).expect("run")))
        .collect();
    Bench { tb, params: cfg.params, runs }
}

fn criterion_7(bench: &Bench) -> Outcome {
    let base = &bench.runs[&Method::Baseline];
    let sk = &bench.runs[&Method::CoilSketching];
    let cc = &bench.runs[&Method::CoilCompression];
    let r = ratio(sk, base);
    let (mb, ms, mc) = (metrics(base, &bench.tb), metrics(sk, &bench.tb), metrics(cc, &bench.tb));
    let (dn, ds, dh) = ((ms.nrmse - mb.nrmse).abs(), (ms.ssim - mb.ssim).abs(), (ms.hfen - mb.hfen).abs());
    let gap = mc.nrmse - mb.nrmse;
    outcome(
        r <= 0.6 && dn <= 0.005 && ds <= 0.02 && dh <= 0.02 && gap >= 0.01 && !sk.diverged,
        format!(
            "transform ratio {r:.3} (<=0.6); dNRMSE {dn:.4} (<=0.005), dSSIM {ds:.4} (<=0.02), dHFEN {dh:.4} (<=0.02); compression NRMSE gap {gap:.4} (>=0.01) at {} iterations",
            bench.params.iters
        ),
    )
}

fn criterion_8(bench: &Bench) -> Outcome {
    let base = &bench.runs[&Method::Baseline];
    let sk = &bench.runs[&Method::CoilSketching];
    let r = ratio(sk, base);
    let (mb, ms) = (metrics(base, &bench.tb), metrics(sk, &bench.tb));
    let batch = bench.params.sgd_batch.unwrap_or(bench.params.c_hat) as u64;
    let sgd_params = MethodParams {
        iters: (sk.coil_transforms / (2 * batch)) as usize,
        ..bench.params.clone()
    };
    let sgd = run_method(&bench.tb.problem, Method::Accproxsgd, &sgd_params, &RunOptions::default()).expect("sgd");
    let msgd = metrics(&sgd, &bench.tb);
    let dn = (ms.nrmse - mb.nrmse).abs();
    outcome(
        r <= 0.6 && dn <= 0.01 && msgd.nrmse >= ms.nrmse && !sk.diverged,
        format!(
            "transform ratio {r:.3} (<=0.6); dNRMSE {dn:.4} (<=0.01); AccProxSGD NRMSE {:.4} >= sketching {:.4} at {} vs {} coil transforms",
            msgd.nrmse, ms.nrmse, sgd.coil_transforms, sk.coil_transforms
        ),
    )
}

fn criterion_9(wavelet: &Bench, tv: &Bench) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut record = |label: &str, measured: u64, expected: u64| {
        pass &= measured == expected;
        lines.push(format!("{label} {measured}/{expected}"));
    };
    for (label, bench) in [("fista", wavelet), ("pdhg", tv)] {
        let run = &bench.runs[&Method::CoilSketching];
        let cfg = bench.params.coil_sketch_config(bench.tb.shape(), bench.tb.problem.ncoils()).unwrap();
        record(label, run.coil_transforms, cfg.closed_form_coil_transforms());
    }
    let cfg = config("cartesian_gfactor.toml");
    let tb = testbed(&cfg);
    let params = MethodParams { use_init: true, c_hat0: Some(6), ..cfg.params.clone() };
    let run = run_method(&tb.problem, Method::CoilSketching, &params, &RunOptions::default()).unwrap();
    let sk_cfg = params.coil_sketch_config(tb.shape(), tb.problem.ncoils()).unwrap();
    record("cg+init", run.coil_transforms, sk_cfg.closed_form_coil_transforms());
    outcome(pass, format!("measured/closed-form: {}", lines.join(", ")))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let bytes = std::fs::read(&path).unwrap();
        let bytes = if name.ends_with(".csv") { strip_wall_time(&bytes) } else { bytes };
        files.insert(name, bytes);
    }
    files
}

/// Drops the `*_s` (wall-clock) columns of a CSV file.
fn strip_wall_time(bytes: &[u8]) -> Vec<u8> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let records: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let Some(header) = records.first() else {
        return Vec::new();
    };
    let keep: Vec<usize> = (0..header.len()).filter(|&i| !header[i].ends_with("_s")).collect();
    let mut out = Vec::new();
    for r in &records {
        let row: Vec<&str> = keep.iter().map(|&i| &r[i]).collect();
        out.extend_from_slice(row.join(",").as_bytes());
        out.push(b'\n');
    }
    out
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("small.toml");
    std::fs::write(
        &cfg_path,
        "seed = 3\n[testbed]\nshape = [24, 24]\ncoils = 4\nspokes = 12\nreadout = 48\n\
         [params]\nlambda = 0.002\niters = 30\nc_hat = 3\nouter_iters = 3\ninner_iters = 5\n\
         [ablate]\nv_values = [1, 2, 3]\nseeds = 2\n[gfactor]\ntrials = 3\n[bench]\nreference_iters = 60\n",
    )
    .unwrap();
    let commands = ["simulate", "recon", "ablate", "gfactor", "bench"];
    let run_all = |out: &PathBuf| -> Vec<i32> {
        commands
            .iter()
            .map(|c| {
                sketchrecon::cli::main_with_args([
                    "sketchrecon",
                    c,
                    "--config",
                    cfg_path.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ])
            })
            .collect()
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let codes_a = run_all(&a);
    let codes_b = run_all(&b);
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    let differing: Vec<&String> = sa.keys().filter(|k| sb.get(*k) != Some(&sa[*k])).collect();
    let ok = codes_a.iter().chain(&codes_b).all(|&c| c == 0) && sa.len() == sb.len() && differing.is_empty();
    outcome(
        ok,
        format!("{} files from {} commands compared, exit codes {codes_a:?}/{codes_b:?}, differing {differing:?}", sa.len(), commands.len()),
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| selected.is_empty() || selected.contains(&n);
    let mut results: Vec<(u32, Outcome, f64)> = Vec::new();
    let mut run = |n: u32, f: &mut dyn FnMut() -> Outcome| {
        if wanted(n) {
            let start = Instant::now();
            let o = f();
            let secs = start.elapsed().as_secs_f64();
            println!("{} criterion {n:>2}: {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            results.push((n, o, secs));
        }
    };
    run(1, &mut criterion_1);
    run(2, &mut criterion_2);
    run(3, &mut criterion_3);
    run(4, &mut criterion_4);
    run(5, &mut criterion_5);
    run(6, &mut criterion_6);
    let wavelet = (wanted(7) || wanted(9))
        .then(|| run_bench("radial_wavelet.toml", &[Method::Baseline, Method::CoilCompression, Method::CoilSketching]));
    let tv = (wanted(8) || wanted(9)).then(|| run_bench("radial_tv.toml", &[Method::Baseline, Method::CoilSketching]));
    if let Some(w) = &wavelet {
        run(7, &mut || criterion_7(w));
    }
    if let Some(t) = &tv {
        run(8, &mut || criterion_8(t));
    }
    if let (Some(w), Some(t)) = (&wavelet, &tv) {
        run(9, &mut || criterion_9(w, t));
    }
    run(10, &mut criterion_10);
    let failed: Vec<u32> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
