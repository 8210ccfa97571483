//! Batch front-end: `simulate`, `recon`, `ablate`, `gfactor` and `bench`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 divergence.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;

use crate::coil_sketch::ReconProblem;
use crate::error::{Error, Result};
use crate::experiment::{
    ablate, build_testbed, gfactor, objective_variance, reference_solution, run_method, BenchRecord, GFactorSummary,
    Method, MethodRun, RunOptions, Sampling, Testbed,
};
use crate::grid::{GridShape, Image, Trajectory, TrajectoryKind};
use crate::sense::{DensityWeights, KSpaceData, SensitivityMaps};
use crate::simulate::support;
use crate::sketch::SketchDistribution;
use crate::vecops;

pub use config::{RunConfig, SEED_ENV};
use io::{read_npy, sha256_hex, write_csv, write_npy, write_pgm, write_table, NpyArray};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "sketchrecon", version, about = "Coil-sketched iterative MR reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate phantom, coil maps, trajectory and noisy k-space.
    Simulate(CommonArgs),
    /// Reconstruct the simulated data with one method.
    Recon(CommonArgs),
    /// Sweep sketch designs and seeds.
    Ablate(CommonArgs),
    /// Monte-Carlo inverse g-factor maps.
    Gfactor(CommonArgs),
    /// Compare all methods against a converged reference.
    Bench(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed (overrides the config and SKETCHRECON_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
    /// baseline, coil-compression, accproxsgd or coil-sketching.
    #[arg(long)]
    pub method: Option<String>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(m) = &self.method {
            cfg.method = m.parse()?;
        }
        let env = std::env::var(SEED_ENV).ok();
        cfg.resolve_seed(self.seed, env.as_deref())?;
        Ok(cfg)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Format(_) => EXIT_IO,
        Error::Diverged { .. } => EXIT_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (including the program name) and runs the command; returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    let (args, f): (&CommonArgs, fn(&RunConfig) -> Result<()>) = match command {
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Recon(a) => (a, cmd_recon),
        Command::Ablate(a) => (a, cmd_ablate),
        Command::Gfactor(a) => (a, cmd_gfactor),
        Command::Bench(a) => (a, cmd_bench),
    };
    let cfg = args.resolve()?;
    std::fs::create_dir_all(&cfg.out)?;
    f(&cfg)
}

fn image_npy(img: &Image) -> NpyArray {
    NpyArray::complex(img.shape.dims().to_vec(), img.values.clone())
}

/// Magnitude image for PGM export; the central slice of a 3D volume.
fn slice_magnitude(shape: &GridShape, values: &[f64]) -> (Vec<f64>, usize, usize) {
    let d = shape.dims();
    let (rows, cols) = (d[d.len() - 2], d[d.len() - 1]);
    let plane = rows * cols;
    let offset = if d.len() == 3 { (d[0] / 2) * plane } else { 0 };
    (values[offset..offset + plane].to_vec(), rows, cols)
}

fn write_image_pgm(path: &Path, shape: &GridShape, values: &[C64]) -> Result<()> {
    let mag: Vec<f64> = values.iter().map(|v| v.norm()).collect();
    let (m, r, c) = slice_magnitude(shape, &mag);
    write_pgm(path, &m, r, c)
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const SIM_FILES: [&str; 5] = ["phantom.npy", "maps.npy", "traj.npy", "kspace.npy", "weights.npy"];

fn write_simulation(tb: &Testbed, out: &Path) -> Result<()> {
    let shape = tb.shape();
    let dims = shape.dims().to_vec();
    let p = &tb.problem;
    let c = p.ncoils();
    write_npy(&out.join(SIM_FILES[0]), &image_npy(&tb.truth))?;
    let maps: Vec<C64> = p.maps.coils.concat();
    write_npy(&out.join(SIM_FILES[1]), &NpyArray::complex([vec![c], dims.clone()].concat(), maps))?;
    let traj = &p.data.traj;
    write_npy(&out.join(SIM_FILES[2]), &NpyArray::real(vec![traj.len(), traj.ndim], traj.points.clone()))?;
    write_npy(
        &out.join(SIM_FILES[3]),
        &NpyArray::complex(vec![c, traj.len()], p.data.stacked()),
    )?;
    let w = p.weights.as_ref().map_or_else(|| vec![1.0; traj.len()], |w| w.w.clone());
    write_npy(&out.join(SIM_FILES[4]), &NpyArray::real(vec![traj.len()], w))?;
    write_image_pgm(&out.join("phantom.pgm"), shape, &tb.truth.values)
}

fn snr_db(tb: &Testbed) -> f64 {
    if tb.noise_sigma == 0.0 {
        return f64::INFINITY;
    }
    let k = tb.problem.data.stacked();
    let rms = (vecops::norm_sq(&k) / k.len() as f64).sqrt();
    20.0 * (rms / tb.noise_sigma).log10()
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let tb = build_testbed(&cfg.testbed)?;
    write_simulation(&tb, &cfg.out)?;
    println!("realized R = {:.3}", tb.realized_r);
    println!("SNR = {:.2} dB (noise sigma {:.4e})", snr_db(&tb), tb.noise_sigma);
    println!("wrote {} arrays to {}", SIM_FILES.len(), cfg.out.display());
    Ok(())
}

/// Loads the simulated arrays from `out`, simulating them first if absent.
pub fn load_simulation(cfg: &RunConfig) -> Result<Testbed> {
    let out = &cfg.out;
    let tb = build_testbed(&cfg.testbed)?;
    if !SIM_FILES.iter().all(|f| out.join(f).exists()) {
        write_simulation(&tb, out)?;
        return Ok(tb);
    }
    let fmt = |m: String| Error::Format(m);
    let phantom = read_npy(&out.join(SIM_FILES[0]))?;
    let shape = GridShape::new(&phantom.shape).map_err(|e| fmt(e.to_string()))?;
    let truth = Image::new(shape.clone(), phantom.into_complex()?).map_err(|e| fmt(e.to_string()))?;
    let maps = read_npy(&out.join(SIM_FILES[1]))?;
    if maps.shape.len() != shape.ndim() + 1 || maps.shape[1..] != *shape.dims() {
        return Err(fmt(format!("maps shape {:?} does not match phantom {:?}", maps.shape, shape.dims())));
    }
    let coils: Vec<Vec<C64>> = maps.into_complex()?.chunks_exact(shape.size()).map(<[C64]>::to_vec).collect();
    let maps = SensitivityMaps::new(shape.clone(), coils).map_err(|e| fmt(e.to_string()))?;
    let traj = read_npy(&out.join(SIM_FILES[2]))?;
    let kind = match cfg.testbed.sampling {
        Sampling::Radial => TrajectoryKind::NonCartesian,
        Sampling::Cartesian => TrajectoryKind::CartesianMask,
    };
    let traj = Trajectory::new(shape.ndim(), traj.into_real()?, kind).map_err(|e| fmt(e.to_string()))?;
    let k = read_npy(&out.join(SIM_FILES[3]))?;
    let kc: Vec<Vec<C64>> = k.into_complex()?.chunks_exact(traj.len().max(1)).map(<[C64]>::to_vec).collect();
    let data = KSpaceData::new(traj, kc, false).map_err(|e| fmt(e.to_string()))?;
    let weights = if tb.problem.weights.is_some() {
        Some(DensityWeights::new(read_npy(&out.join(SIM_FILES[4]))?.into_real()?).map_err(|e| fmt(e.to_string()))?)
    } else {
        None
    };
    Ok(Testbed {
        support: support(&truth),
        truth,
        problem: ReconProblem {
            data,
            maps,
            weights,
            fourier: tb.problem.fourier,
        },
        ..tb
    })
}

fn trace_rows(run: &MethodRun) -> Vec<Vec<String>> {
    run.trace
        .iter()
        .map(|p| {
            vec![
                run.method.to_string(),
                p.iteration.to_string(),
                p.coil_transforms.to_string(),
                p.wall_time.to_string(),
                fmt_opt(p.distance),
            ]
        })
        .collect()
}

const TRACE_HEADER: [&str; 5] = ["method", "iteration", "coil_transforms", "wall_time_s", "distance"];

pub fn cmd_recon(cfg: &RunConfig) -> Result<()> {
    let tb = load_simulation(cfg)?;
    let method = cfg.method;
    let opts = RunOptions {
        reference: Some(&tb.truth.values),
        checkpoints: &[],
        outer_snapshots: method == Method::CoilSketching,
    };
    let run = run_method(&tb.problem, method, &cfg.params, &opts)?;
    let out = &cfg.out;
    let name = method.name();
    write_npy(&out.join(format!("recon_{name}.npy")), &image_npy(&run.x))?;
    write_image_pgm(&out.join(format!("recon_{name}.pgm")), tb.shape(), &run.x.values)?;
    write_table(&out.join(format!("history_{name}.csv")), &TRACE_HEADER, &trace_rows(&run))?;
    let record = BenchRecord::from_run(&run, &tb.truth)?;
    write_csv(&out.join(format!("bench_{name}.csv")), std::slice::from_ref(&record))?;
    if method == Method::CoilSketching {
        for (i, snap) in run.outer_snapshots.iter().enumerate() {
            let img = Image::new(tb.shape().clone(), snap.clone())?;
            write_npy(&out.join(format!("outer_{:03}.npy", i + 1)), &image_npy(&img))?;
        }
        let rows: Vec<Vec<String>> = run
            .per_outer
            .iter()
            .map(|r| {
                vec![
                    r.iteration.to_string(),
                    r.objective.to_string(),
                    r.coil_transforms.to_string(),
                    r.wall_time.to_string(),
                    fmt_opt(r.distance),
                ]
            })
            .collect();
        write_table(
            &out.join("outer_coil-sketching.csv"),
            &["outer", "objective", "coil_transforms", "wall_time_s", "distance"],
            &rows,
        )?;
    }
    println!(
        "{name}: nrmse {:.4} ssim {:.4} hfen {:.4} coil transforms {} ({:.2} s)",
        record.nrmse, record.ssim, record.hfen, record.coil_transforms, record.duration_s
    );
    if run.diverged {
        let last = run.per_outer.last();
        return Err(Error::Diverged {
            iteration: last.map_or(run.trace.len(), |r| r.iteration),
            objective: last.map_or(f64::NAN, |r| r.objective),
            initial: f64::NAN,
        });
    }
    Ok(())
}

fn dist_name(d: SketchDistribution) -> &'static str {
    match d {
        SketchDistribution::Gaussian => "gaussian",
        SketchDistribution::Rademacher => "rademacher",
    }
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<()> {
    let tb = load_simulation(cfg)?;
    let rows = ablate(&tb, &cfg.params, &cfg.ablate)?;
    write_csv(&cfg.out.join("ablate.csv"), &rows)?;
    let mut summary = Vec::new();
    for &v in &cfg.ablate.v_values {
        for &d in &cfg.ablate.distributions {
            let cell: Vec<_> = rows.iter().filter(|r| r.v == v && r.distribution == d).collect();
            if cell.is_empty() {
                continue;
            }
            let diverged = cell.iter().filter(|r| r.diverged).count();
            let var = objective_variance(&rows, |r| r.v == v && r.distribution == d);
            println!("V={v} {:10} variance {var:.3e} diverged {diverged}/{}", dist_name(d), cell.len());
            summary.push(vec![
                v.to_string(),
                (cfg.params.c_hat - v).to_string(),
                dist_name(d).to_string(),
                var.to_string(),
                diverged.to_string(),
                cell.len().to_string(),
            ]);
        }
    }
    write_table(
        &cfg.out.join("ablate_summary.csv"),
        &["v", "s", "distribution", "objective_variance", "diverged", "runs"],
        &summary,
    )
}

pub fn cmd_gfactor(cfg: &RunConfig) -> Result<()> {
    let tb = load_simulation(cfg)?;
    let maps = gfactor(&tb, &cfg.params, cfg.gfactor.trials, cfg.gfactor.seed)?;
    let mut summary = Vec::new();
    for (name, map) in &maps {
        let arr = NpyArray::real(tb.shape().dims().to_vec(), map.inverse_g.clone());
        write_npy(&cfg.out.join(format!("gfactor_{name}.npy")), &arr)?;
        let (m, r, c) = slice_magnitude(tb.shape(), &map.inverse_g);
        write_pgm(&cfg.out.join(format!("gfactor_{name}.pgm")), &m, r, c)?;
        let mean = map.mean_over_support();
        println!("{name}: mean inverse g-factor {mean:.4}");
        summary.push(GFactorSummary {
            method: name.clone(),
            mean_inverse_g: mean,
            trials: map.trials,
            r: map.r,
        });
    }
    write_csv(&cfg.out.join("gfactor_summary.csv"), &summary)
}

/// Loads the cached reference if its config hash and data hash match, otherwise
/// computes and stores it.
fn bench_reference(cfg: &RunConfig, tb: &Testbed) -> Result<Image> {
    let toml_err = |e: toml::ser::Error| Error::Config(e.to_string());
    let key = format!(
        "{}{}reference_iters = {}\n",
        toml::to_string(&cfg.testbed).map_err(toml_err)?,
        toml::to_string(&cfg.params).map_err(toml_err)?,
        cfg.bench.reference_iters
    );
    let key_hash = sha256_hex(key.as_bytes());
    let npy = cfg.out.join("reference.npy");
    let meta = cfg.out.join("reference.sha256");
    if let (Ok(bytes), Ok(text)) = (std::fs::read(&npy), std::fs::read_to_string(&meta)) {
        let expected = format!("config {key_hash}\ndata {}\n", sha256_hex(&bytes));
        if text == expected {
            let arr = NpyArray::from_bytes(&bytes)?;
            if arr.shape == tb.shape().dims() {
                return Image::new(tb.shape().clone(), arr.into_complex()?);
            }
        }
    }
    let x = reference_solution(&tb.problem, &cfg.params, cfg.bench.reference_iters)?;
    let bytes = image_npy(&x).to_bytes()?;
    std::fs::write(&npy, &bytes)?;
    io::write_text(&meta, &format!("config {key_hash}\ndata {}\n", sha256_hex(&bytes)))?;
    Ok(x)
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<()> {
    let tb = load_simulation(cfg)?;
    let reference = bench_reference(cfg, &tb)?;
    write_image_pgm(&cfg.out.join("reference.pgm"), tb.shape(), &reference.values)?;
    let checkpoints = if cfg.bench.checkpoints.is_empty() {
        let k = cfg.params.solver_kind().coil_factor(cfg.params.inner_cg_iters);
        let total = cfg.params.iters as u64 * k * tb.problem.ncoils() as u64;
        vec![total / 20, total / 8, total / 4]
    } else {
        cfg.bench.checkpoints.clone()
    };
    let mut records = Vec::new();
    let mut curves = Vec::new();
    for &m in &cfg.bench.methods {
        let opts = RunOptions {
            reference: Some(&reference.values),
            checkpoints: &checkpoints,
            outer_snapshots: false,
        };
        let run = run_method(&tb.problem, m, &cfg.params, &opts)?;
        for (budget, x) in &run.checkpoints {
            let diff = vecops::sub(x, &reference.values);
            write_image_pgm(&cfg.out.join(format!("diff_{}_{budget}.pgm", m.name())), tb.shape(), &diff)?;
        }
        let rec = BenchRecord::from_run(&run, &tb.truth)?;
        println!(
            "{:17} transforms {:6} converged at {:>6} nrmse {:.4} ssim {:.4} hfen {:.4}",
            m.name(),
            rec.coil_transforms,
            fmt_opt(rec.converged_at_transforms),
            rec.nrmse,
            rec.ssim,
            rec.hfen
        );
        curves.extend(trace_rows(&run));
        records.push(rec);
    }
    write_csv(&cfg.out.join("bench.csv"), &records)?;
    write_table(&cfg.out.join("convergence.csv"), &TRACE_HEADER, &curves)
}
