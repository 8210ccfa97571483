//! Coil sketching against the baseline solver: distance to a converged reference
//! after every outer iteration and the coil transforms each method needs.

use sketchrecon::coil_sketch::{coil_sketching_recon, Observer};
use sketchrecon::experiment::{build_testbed, reference_solution, run_method, Method, MethodParams, RunOptions, TestbedSpec};
use sketchrecon::solvers::RegKind;
use sketchrecon::Result;

fn main() -> Result<()> {
    let tb = build_testbed(&TestbedSpec {
        spokes: 24,
        ..TestbedSpec::radial_2d(64, 8)
    })?;
    let params = MethodParams {
        reg: RegKind::L1Wavelet,
        lambda: Some(0.002),
        iters: 200,
        c_hat: 4,
        outer_iters: 12,
        inner_iters: Some(15),
        ..MethodParams::default()
    };
    let reference = reference_solution(&tb.problem, &params, 1500)?;

    let cfg = params.coil_sketch_config(tb.shape(), tb.problem.ncoils())?;
    println!(
        "C^0 = {}, C^ = {} (V = {}, S = {}), T = {}, inner = {}",
        cfg.c_hat0, cfg.sketch.c_hat, cfg.sketch.v, cfg.sketch.s, cfg.outer_iters, cfg.inner_iters
    );
    let report = coil_sketching_recon(
        &tb.problem,
        &cfg,
        &mut Observer {
            reference: Some(&reference.values),
            ..Observer::default()
        },
    )?;
    for r in &report.per_outer {
        println!(
            "outer {:2}: distance {:.4}, objective {:.5e}, coil transforms {}",
            r.iteration,
            r.distance.unwrap_or(f64::NAN),
            r.objective,
            r.coil_transforms
        );
    }
    println!("closed-form count {}, measured {}", cfg.closed_form_coil_transforms(), report.coil_transforms);

    for method in [Method::Baseline, Method::CoilSketching] {
        let run = run_method(&tb.problem, method, &params, &RunOptions::with_reference(&reference.values))?;
        match run.converged_at() {
            Some(p) => println!("{method}: within 5% of the reference after {} coil transforms", p.coil_transforms),
            None => println!("{method}: not converged after {} coil transforms", run.coil_transforms),
        }
    }
    Ok(())
}
