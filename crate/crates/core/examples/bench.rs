//! All four methods on the radial TV testbed, scored against the phantom and
//! against a converged reference.

use sketchrecon::experiment::{bench, build_testbed, reference_solution, Method, MethodParams, TestbedSpec};
use sketchrecon::solvers::RegKind;
use sketchrecon::Result;

fn main() -> Result<()> {
    let tb = build_testbed(&TestbedSpec {
        spokes: 24,
        ..TestbedSpec::radial_2d(64, 8)
    })?;
    let params = MethodParams {
        reg: RegKind::L1Tv,
        lambda: Some(0.002),
        compressed_lambda: Some(0.002),
        iters: 200,
        pdhg_sigma_tau_ratio: 0.01,
        inner_cg_iters: 4,
        c_hat: 4,
        outer_iters: 10,
        inner_iters: Some(10),
        ..MethodParams::default()
    };
    let reference = reference_solution(&tb.problem, &params, 1000)?;
    println!("{:17} {:>8} {:>8} {:>7} {:>7} {:>7} {:>10}", "method", "time s", "coil tx", "NRMSE", "SSIM", "HFEN", "converged");
    for (_, r) in bench(&tb, &params, &Method::ALL, &reference)? {
        println!(
            "{:17} {:8.2} {:8} {:7.4} {:7.4} {:7.4} {:>10}",
            r.method.name(),
            r.duration_s,
            r.coil_transforms,
            r.nrmse,
            r.ssim,
            r.hfen,
            r.converged_at_transforms.map_or("-".to_string(), |c| c.to_string())
        );
    }
    Ok(())
}
