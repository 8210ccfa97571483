//! Small dense-vector helpers over complex slices.

use num_complex::Complex64 as C64;

/// `<a, b> = sum conj(a_i) b_i`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Real part of `<a, b>`, the inner product of the underlying real vector space.
pub fn dot_re(a: &[C64], b: &[C64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[C64], s: f64) -> Vec<C64> {
    a.iter().map(|z| z * s).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `||a - b|| / ||b||`, or `||a||` when `b` is zero.
pub fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    let nb = norm(b);
    let d = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if nb > 0.0 {
        d / nb
    } else {
        d
    }
}

pub fn zeros(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}
