//! The three plain solvers on the radial testbed: CG for l2, FISTA for
//! l1-wavelet and PDHG with an inner CG prox for l1-TV.

use sketchrecon::coil_sketch::{full_objective, solve_smooth_plus_reg, Smooth, SolveState, SolverKind};
use sketchrecon::experiment::{build_testbed, TestbedSpec};
use sketchrecon::linop::LinOp;
use sketchrecon::metrics::MetricReport;
use sketchrecon::solvers::{RegKind, Regularizer, SolverConfig};
use sketchrecon::{vecops, Result};

fn main() -> Result<()> {
    let tb = build_testbed(&TestbedSpec {
        spokes: 24,
        ..TestbedSpec::radial_2d(64, 8)
    })?;
    let op = tb.problem.operator()?;
    let y = tb.problem.y();
    let cfg = SolverConfig {
        pdhg_sigma_tau_ratio: 0.01,
        inner_cg_iters: 4,
        ..SolverConfig::default()
    };
    let runs = [
        (SolverKind::Cg, RegKind::L2, 0.01, 30),
        (SolverKind::Fista, RegKind::L1Wavelet, 0.002, 150),
        (SolverKind::Pdhg, RegKind::L1Tv, 0.002, 150),
    ];
    for (solver, kind, lambda, iters) in runs {
        let reg = Regularizer::new(kind, lambda, tb.shape())?;
        let before = op.coil_transforms();
        let res = solve_smooth_plus_reg(
            &Smooth::LeastSquares { op: &op, y: &y },
            &reg,
            solver,
            iters,
            &cfg,
            &vecops::zeros(op.in_dim()),
            &mut SolveState::default(),
            &mut |_| {},
        )?;
        let m = MetricReport::compute(&res.x, &tb.truth.values, tb.shape())?;
        println!(
            "{solver:?}/{kind:?}: {iters} iterations, {} coil transforms, objective {:.4e}, NRMSE {:.4}, SSIM {:.4}",
            op.coil_transforms() - before,
            full_objective(&op, &y, &reg, &res.x),
            m.nrmse,
            m.ssim
        );
    }
    Ok(())
}
