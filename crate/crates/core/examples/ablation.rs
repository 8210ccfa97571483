//! Sweeps the number of verbatim coils V and the sketch distribution over a few
//! seeds and reports the spread of the final objective.

use sketchrecon::experiment::{ablate, build_testbed, objective_variance, AblationSweep, MethodParams, TestbedSpec};
use sketchrecon::sketch::SketchDistribution;
use sketchrecon::Result;

fn main() -> Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let tb = build_testbed(&TestbedSpec {
        spokes: 24,
        ..TestbedSpec::radial_2d(64, 8)
    })?;
    let params = MethodParams {
        lambda: Some(0.002),
        c_hat: 4,
        outer_iters: 10,
        inner_iters: Some(20),
        ..MethodParams::default()
    };
    let sweep = AblationSweep {
        seeds,
        ..AblationSweep::default()
    };
    let rows = ablate(&tb, &params, &sweep)?;
    for v in 0..=params.c_hat {
        for d in [SketchDistribution::Rademacher, SketchDistribution::Gaussian] {
            let cell: Vec<_> = rows.iter().filter(|r| r.v == v && r.distribution == d).collect();
            if cell.is_empty() {
                continue;
            }
            let diverged = cell.iter().filter(|r| r.diverged).count();
            let var = objective_variance(&rows, |r| r.v == v && r.distribution == d);
            println!("V={v} S={} {d:?}: variance {var:.3e}, diverged {diverged}/{}", params.c_hat - v, cell.len());
        }
    }
    Ok(())
}
