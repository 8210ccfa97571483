//! Linear-operator algebra and the concrete transforms used by the encoding model
//! and the regularizers.

pub mod fft;
pub mod finite_diff;
pub mod nufft;
pub mod wavelet;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::vecops;

pub use fft::{fft_centered, ifft_centered, CenteredFft};
pub use finite_diff::FiniteDiff;
pub use nufft::{dft_nonuniform, DirectNudft, GriddedNufft, GriddingParams};
pub use wavelet::{default_levels, Wavelet};

/// Shared monotone counter. Clones observe the same count.
#[derive(Clone, Debug, Default)]
pub struct CostCounter(Arc<AtomicU64>);

impl CostCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Work done by an operator so far.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Cost {
    /// Per-coil Fourier transforms (forward or adjoint), the dominant cost.
    pub coil_transforms: u64,
    /// Regularizer transform applications (wavelet, finite differences).
    pub transforms: u64,
}

impl std::ops::Add for Cost {
    type Output = Cost;
    fn add(self, o: Cost) -> Cost {
        Cost {
            coil_transforms: self.coil_transforms + o.coil_transforms,
            transforms: self.transforms + o.transforms,
        }
    }
}

impl std::ops::Sub for Cost {
    type Output = Cost;
    fn sub(self, o: Cost) -> Cost {
        Cost {
            coil_transforms: self.coil_transforms - o.coil_transforms,
            transforms: self.transforms - o.transforms,
        }
    }
}

/// A linear map `C^in_dim -> C^out_dim` with its adjoint.
///
/// Implementations are immutable after construction; applying them only touches
/// atomic cost counters, so they can be shared across threads.
pub trait LinOp: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn forward_into(&self, x: &[C64], out: &mut [C64]);
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]);

    fn cost(&self) -> Cost {
        Cost::default()
    }

    fn forward(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vecops::zeros(self.out_dim());
        self.forward_into(x, &mut out);
        out
    }

    fn adjoint(&self, y: &[C64]) -> Vec<C64> {
        let mut out = vecops::zeros(self.in_dim());
        self.adjoint_into(y, &mut out);
        out
    }
}

impl<T: LinOp + ?Sized> LinOp for &T {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        (**self).forward_into(x, out)
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        (**self).adjoint_into(y, out)
    }
    fn cost(&self) -> Cost {
        (**self).cost()
    }
}

impl<T: LinOp + ?Sized> LinOp for Box<T> {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        (**self).forward_into(x, out)
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        (**self).adjoint_into(y, out)
    }
    fn cost(&self) -> Cost {
        (**self).cost()
    }
}

impl<T: LinOp + ?Sized> LinOp for Arc<T> {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        (**self).forward_into(x, out)
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        (**self).adjoint_into(y, out)
    }
    fn cost(&self) -> Cost {
        (**self).cost()
    }
}

#[derive(Clone, Debug)]
pub struct Identity {
    pub dim: usize,
}

impl LinOp for Identity {
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        out.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        out.copy_from_slice(y);
    }
}

/// Elementwise multiplication by a fixed complex vector.
#[derive(Clone, Debug)]
pub struct Diagonal {
    pub diag: Vec<C64>,
}

impl Diagonal {
    pub fn real(d: &[f64]) -> Self {
        Self {
            diag: d.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }
}

impl LinOp for Diagonal {
    fn in_dim(&self) -> usize {
        self.diag.len()
    }
    fn out_dim(&self) -> usize {
        self.diag.len()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        for ((o, xi), d) in out.iter_mut().zip(x).zip(&self.diag) {
            *o = xi * d;
        }
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        for ((o, yi), d) in out.iter_mut().zip(y).zip(&self.diag) {
            *o = yi * d.conj();
        }
    }
}

/// Explicit dense matrix, used for small problems and as a test oracle.
#[derive(Clone, Debug)]
pub struct Dense {
    pub mat: DMatrix<C64>,
}

impl LinOp for Dense {
    fn in_dim(&self) -> usize {
        self.mat.ncols()
    }
    fn out_dim(&self) -> usize {
        self.mat.nrows()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..self.mat.ncols()).map(|c| self.mat[(r, c)] * x[c]).sum();
        }
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = (0..self.mat.nrows())
                .map(|r| self.mat[(r, c)].conj() * y[r])
                .sum();
        }
    }
}

/// `outer ∘ inner`.
pub struct Compose<A, B> {
    pub outer: A,
    pub inner: B,
}

pub fn compose<A: LinOp, B: LinOp>(outer: A, inner: B) -> Compose<A, B> {
    assert_eq!(
        outer.in_dim(),
        inner.out_dim(),
        "composition dimension mismatch"
    );
    Compose { outer, inner }
}

impl<A: LinOp, B: LinOp> LinOp for Compose<A, B> {
    fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.outer.out_dim()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        let mid = self.inner.forward(x);
        self.outer.forward_into(&mid, out);
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        let mid = self.outer.adjoint(y);
        self.inner.adjoint_into(&mid, out);
    }
    fn cost(&self) -> Cost {
        self.outer.cost() + self.inner.cost()
    }
}

/// Vertical stack `[A_1; A_2; ...]` of operators sharing the input space.
pub struct Stack {
    pub ops: Vec<Box<dyn LinOp>>,
}

impl Stack {
    pub fn new(ops: Vec<Box<dyn LinOp>>) -> Self {
        assert!(!ops.is_empty());
        let n = ops[0].in_dim();
        assert!(ops.iter().all(|o| o.in_dim() == n), "stack input mismatch");
        Self { ops }
    }
}

impl LinOp for Stack {
    fn in_dim(&self) -> usize {
        self.ops[0].in_dim()
    }
    fn out_dim(&self) -> usize {
        self.ops.iter().map(|o| o.out_dim()).sum()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        let mut off = 0;
        for op in &self.ops {
            let m = op.out_dim();
            op.forward_into(x, &mut out[off..off + m]);
            off += m;
        }
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        let mut off = 0;
        let mut tmp = vecops::zeros(self.in_dim());
        for op in &self.ops {
            let m = op.out_dim();
            op.adjoint_into(&y[off..off + m], &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += t;
            }
            off += m;
        }
    }
    fn cost(&self) -> Cost {
        self.ops
            .iter()
            .map(|o| o.cost())
            .fold(Cost::default(), |a, b| a + b)
    }
}

/// `s * A`.
pub struct Scaled<A> {
    pub op: A,
    pub scale: f64,
}

impl<A: LinOp> LinOp for Scaled<A> {
    fn in_dim(&self) -> usize {
        self.op.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.op.out_dim()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        self.op.forward_into(x, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        self.op.adjoint_into(y, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }
    fn cost(&self) -> Cost {
        self.op.cost()
    }
}

/// `A^H A + shift * I`, self-adjoint.
pub struct Normal<A> {
    pub op: A,
    pub shift: f64,
}

impl<A: LinOp> LinOp for Normal<A> {
    fn in_dim(&self) -> usize {
        self.op.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.op.in_dim()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        let ax = self.op.forward(x);
        self.op.adjoint_into(&ax, out);
        if self.shift != 0.0 {
            vecops::axpy(C64::new(self.shift, 0.0), x, out);
        }
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        self.forward_into(y, out)
    }
    fn cost(&self) -> Cost {
        self.op.cost()
    }
}

/// Standard complex normal vector (`E|z|^2 = 1`).
pub fn random_vector<R: rand::Rng>(n: usize, rng: &mut R) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re * s, im * s)
        })
        .collect()
}

/// Normalised adjoint mismatch `|<Au, v> - <u, A^H v>| / (||u|| ||v||)` for random `u, v`.
pub fn adjoint_mismatch(op: &dyn LinOp, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_vector(op.in_dim(), &mut rng);
    let v = random_vector(op.out_dim(), &mut rng);
    let lhs = vecops::dot(&op.forward(&u), &v);
    let rhs = vecops::dot(&u, &op.adjoint(&v));
    (lhs - rhs).norm() / (vecops::norm(&u) * vecops::norm(&v))
}

pub const DEFAULT_POWER_ITERS: usize = 30;

/// Largest eigenvalue of a self-adjoint PSD operator by power iteration.
///
/// Deterministic given `seed`; returns 0 for the zero operator.
pub fn max_eig_power(op: &dyn LinOp, iters: usize, seed: u64) -> f64 {
    assert_eq!(op.in_dim(), op.out_dim(), "power iteration needs a square operator");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_vector(op.in_dim(), &mut rng);
    let nx = vecops::norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        let y = op.forward(&x);
        lambda = vecops::dot_re(&x, &y);
        let ny = vecops::norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        x = y.into_iter().map(|v| v / ny).collect();
    }
    lambda.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn rand_dense(rows: usize, cols: usize, seed: u64) -> Dense {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_vector(rows * cols, &mut rng);
        Dense {
            mat: DMatrix::from_vec(rows, cols, v),
        }
    }

    #[test]
    fn power_identity() {
        let op = Identity { dim: 16 };
        assert!((max_eig_power(&op, 30, 1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn power_known_spectrum() {
        let d = Diagonal::real(&[1.0, 2.0f64.sqrt(), 3.0f64.sqrt(), 2.0]);
        let n = Normal { op: d, shift: 0.0 };
        assert!((max_eig_power(&n, 30, 7) - 4.0).abs() < 0.04);
        let d = Diagonal::real(&[1.0, 2.0, 3.0, 4.0]);
        assert!((max_eig_power(&d, 30, 7) - 4.0).abs() < 0.04);
    }

    #[test]
    fn power_zero_operator() {
        let d = Diagonal::real(&[0.0; 5]);
        assert_eq!(max_eig_power(&d, 30, 3), 0.0);
    }

    #[test]
    fn power_matches_dense_eigensolver() {
        let a = rand_dense(20, 20, 11);
        let gram = a.mat.adjoint() * &a.mat;
        let eig = gram.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let est = max_eig_power(&Normal { op: a, shift: 0.0 }, 300, 5);
        assert!((est - lmax).abs() / lmax < 1e-2, "{est} vs {lmax}");
    }

    #[test]
    fn power_deterministic() {
        let a = rand_dense(10, 10, 2);
        let n = Normal { op: a, shift: 0.0 };
        assert_eq!(max_eig_power(&n, 30, 9), max_eig_power(&n, 30, 9));
    }

    #[test]
    fn compose_and_stack_adjoint() {
        let a = rand_dense(5, 7, 1);
        let b = rand_dense(7, 4, 2);
        let c = compose(a.clone(), b.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_vector(4, &mut rng);
        assert_eq!(c.forward(&x), a.forward(&b.forward(&x)));
        assert!(adjoint_mismatch(&c, 3) < 1e-12);
        let s = Stack::new(vec![Box::new(a), Box::new(rand_dense(3, 7, 4))]);
        assert_eq!(s.out_dim(), 8);
        assert!(adjoint_mismatch(&s, 5) < 1e-12);
    }

    struct Counting {
        counter: CostCounter,
        dim: usize,
    }

    impl LinOp for Counting {
        fn in_dim(&self) -> usize {
            self.dim
        }
        fn out_dim(&self) -> usize {
            self.dim
        }
        fn forward_into(&self, x: &[C64], out: &mut [C64]) {
            self.counter.add(1);
            out.copy_from_slice(x);
        }
        fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
            self.counter.add(1);
            out.copy_from_slice(y);
        }
        fn cost(&self) -> Cost {
            Cost {
                coil_transforms: self.counter.get(),
                transforms: 0,
            }
        }
    }

    #[test]
    fn compose_costs_add() {
        let a = Counting {
            counter: CostCounter::new(),
            dim: 3,
        };
        let b = Counting {
            counter: CostCounter::new(),
            dim: 3,
        };
        let c = compose(a, b);
        let _ = c.forward(&vecops::zeros(3));
        let _ = c.adjoint(&vecops::zeros(3));
        assert_eq!(c.cost().coil_transforms, 4);
        assert_eq!(c.outer.cost().coil_transforms, 2);
    }
}
