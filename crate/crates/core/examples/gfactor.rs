//! Pseudo-multiple-replica noise amplification of the baseline, an aggressive
//! coil compression and coil sketching on a Cartesian R=3 acquisition.

use sketchrecon::experiment::{build_testbed, gfactor, MethodParams, TestbedSpec};
use sketchrecon::simulate::MaskKind;
use sketchrecon::solvers::RegKind;
use sketchrecon::Result;

fn main() -> Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let tb = build_testbed(&TestbedSpec::cartesian_2d(64, 8, 3.0, MaskKind::Regular))?;
    let params = MethodParams {
        reg: RegKind::L2,
        lambda: Some(0.001),
        compressed_lambda: Some(0.001),
        iters: 60,
        compress_to: 3,
        c_hat: 4,
        outer_iters: 10,
        inner_iters: Some(10),
        ..MethodParams::default()
    };
    println!("R = {:.2}, {trials} noise replicas", tb.realized_r);
    for (method, map) in gfactor(&tb, &params, trials, 1000)? {
        let inside: Vec<f64> = map.inverse_g.iter().zip(&map.mask).filter(|(_, &m)| m).map(|(&g, _)| g).collect();
        let min = inside.iter().copied().fold(f64::INFINITY, f64::min);
        println!("{method:17} mean 1/g {:.4}, min 1/g {min:.4}", map.mean_over_support());
    }
    Ok(())
}
