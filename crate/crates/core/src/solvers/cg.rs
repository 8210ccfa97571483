use num_complex::Complex64 as C64;

use super::{Monitor, SolveResult, SolverConfig, Tracker};
use crate::linop::{LinOp, Normal};
use crate::vecops;

pub struct CgOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub residual_norms: Vec<f64>,
}

/// Conjugate gradient for a self-adjoint positive (semi)definite `M x = b`.
///
/// `x0 = None` starts from zero without an operator application. Stops when
/// `||r|| <= tol ||b||` or after `max_iters` applications of `M`.
pub fn cg<F, G>(
    mut apply: F,
    b: &[C64],
    x0: Option<&[C64]>,
    max_iters: usize,
    tol: f64,
    mut on_iter: G,
) -> CgOutcome
where
    F: FnMut(&[C64], &mut [C64]),
    G: FnMut(usize, &[C64]),
{
    let n = b.len();
    let mut x = x0.map_or_else(|| vecops::zeros(n), |v| v.to_vec());
    let mut mp = vecops::zeros(n);
    let mut r = match x0 {
        Some(x0) => {
            apply(x0, &mut mp);
            vecops::sub(b, &mp)
        }
        None => b.to_vec(),
    };
    let bnorm = vecops::norm(b);
    let mut rs = vecops::norm_sq(&r);
    let mut residual_norms = Vec::new();
    let mut p = r.clone();
    let mut iterations = 0;
    for k in 0..max_iters {
        if rs.sqrt() <= tol * bnorm || rs == 0.0 {
            break;
        }
        apply(&p, &mut mp);
        iterations += 1;
        let pmp = vecops::dot_re(&p, &mp);
        if pmp <= 0.0 || !pmp.is_finite() {
            break;
        }
        let alpha = rs / pmp;
        vecops::axpy(C64::new(alpha, 0.0), &p, &mut x);
        vecops::axpy(C64::new(-alpha, 0.0), &mp, &mut r);
        let rs_new = vecops::norm_sq(&r);
        residual_norms.push(rs_new.sqrt());
        on_iter(k, &x);
        let beta = rs_new / rs;
        rs = rs_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + *pi * beta;
        }
    }
    CgOutcome {
        x,
        iterations,
        residual_norms,
    }
}

/// Solves `(A^H A + lambda I) x = A^H y` by CG.
///
/// `cfg.tol` is the relative residual target.
pub fn cg_normal(
    a: &dyn LinOp,
    y: &[C64],
    lambda: f64,
    x0: Option<&[C64]>,
    cfg: &SolverConfig,
    monitor: &mut Monitor<'_>,
) -> SolveResult {
    let mut tracker = Tracker::new(monitor, cfg);
    let b = a.adjoint(y);
    let normal = Normal {
        op: a,
        shift: lambda,
    };
    let out = cg(
        |v, o| normal.forward_into(v, o),
        &b,
        x0,
        cfg.max_iters,
        cfg.tol,
        |k, x| tracker.step(k, x),
    );
    tracker.finish(out.x, out.iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{random_vector, Dense, Identity};
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense(n: usize, m: usize, seed: u64) -> Dense {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_vector(n * m, &mut rng);
        Dense {
            mat: DMatrix::from_vec(n, m, v),
        }
    }

    fn direct(a: &Dense, y: &[C64], lambda: f64) -> Vec<C64> {
        let m = &a.mat;
        let lhs = m.adjoint() * m + DMatrix::<C64>::identity(m.ncols(), m.ncols()) * C64::new(lambda, 0.0);
        let rhs = m.adjoint() * DVector::from_column_slice(y);
        lhs.lu().solve(&rhs).unwrap().iter().cloned().collect()
    }

    #[test]
    fn identity_in_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_vector(10, &mut rng);
        let r = cg_normal(&Identity { dim: 10 }, &y, 0.0, None, &SolverConfig::default(), &mut Monitor::default());
        assert!(r.iterations_run <= 2);
        assert!(vecops::rel_diff(&r.x, &y) < 1e-12);
    }

    #[test]
    fn matches_dense_solve() {
        let a = dense(16, 16, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random_vector(16, &mut rng);
        let cfg = SolverConfig {
            max_iters: 200,
            tol: 1e-14,
            ..SolverConfig::default()
        };
        let r = cg_normal(&a, &y, 0.1, None, &cfg, &mut Monitor::default());
        assert!(vecops::rel_diff(&r.x, &direct(&a, &y, 0.1)) < 1e-8);
    }

    #[test]
    fn ridge_limit() {
        let a = dense(12, 8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = random_vector(12, &mut rng);
        let lambda = 1e8;
        let r = cg_normal(&a, &y, lambda, None, &SolverConfig::default(), &mut Monitor::default());
        let aty = a.adjoint(&y);
        assert!(vecops::norm(&r.x) <= 2.0 * vecops::norm(&aty) / lambda);
        assert!(vecops::rel_diff(&r.x, &vecops::scale(&aty, 1.0 / lambda)) < 1e-6);
    }

    #[test]
    fn zero_data_returns_zero() {
        let a = dense(6, 4, 6);
        let r = cg_normal(&a, &vecops::zeros(6), 0.5, None, &SolverConfig::default(), &mut Monitor::default());
        assert_eq!(r.iterations_run, 0);
        assert!(r.x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn energy_error_nonincreasing() {
        let a = dense(20, 12, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = random_vector(20, &mut rng);
        let lambda = 0.05;
        let xs = direct(&a, &y, lambda);
        let normal = Normal { op: &a, shift: lambda };
        let energy = |x: &[C64]| {
            let e = vecops::sub(x, &xs);
            vecops::dot_re(&e, &normal.forward(&e))
        };
        let mut errs = vec![energy(&vecops::zeros(12))];
        let b = a.adjoint(&y);
        cg(|v, o| normal.forward_into(v, o), &b, None, 12, 0.0, |_, x| errs.push(energy(x)));
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-20);
        }
    }
}
