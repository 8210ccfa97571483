//! Image-quality metrics, convergence distance and the Monte-Carlo inverse g-factor.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::GridShape;
use crate::linop::{CostCounter, LinOp};
use crate::sense::{KSpaceData, SenseOperator};
use crate::simulate::complex_noise;
use crate::vecops;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub nrmse: f64,
    pub ssim: f64,
    pub hfen: f64,
}

impl MetricReport {
    pub fn compute(x: &[C64], reference: &[C64], shape: &GridShape) -> Result<Self> {
        Ok(Self {
            nrmse: nrmse(x, reference)?,
            ssim: ssim(x, reference, shape)?,
            hfen: hfen(x, reference, shape)?,
        })
    }
}

fn check_len(x: &[C64], reference: &[C64]) -> Result<()> {
    if x.len() != reference.len() {
        return Err(Error::dims("image length", reference.len(), x.len()));
    }
    Ok(())
}

/// `|| |x| - |ref| || / ||ref||`.
pub fn nrmse(x: &[C64], reference: &[C64]) -> Result<f64> {
    check_len(x, reference)?;
    let den = vecops::norm(reference);
    if den == 0.0 {
        return Err(Error::ZeroReference("nrmse"));
    }
    let num: f64 = x
        .iter()
        .zip(reference)
        .map(|(a, b)| (a.norm() - b.norm()).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}

/// `||x_t - x_inf|| / ||x_inf||`.
pub fn convergence_distance(x_t: &[C64], x_inf: &[C64]) -> Result<f64> {
    check_len(x_t, x_inf)?;
    if vecops::norm(x_inf) == 0.0 {
        return Err(Error::ZeroReference("convergence distance"));
    }
    Ok(vecops::rel_diff(x_t, x_inf))
}

/// Distance below which a run counts as converged.
pub const CONVERGED_DISTANCE: f64 = 0.05;

/// 2D slices `(rows, cols, offset)` of a 2D or 3D grid (3D sliced along axis 0).
fn slices(shape: &GridShape) -> Vec<(usize, usize, usize)> {
    let d = shape.dims();
    match d.len() {
        2 => vec![(d[0], d[1], 0)],
        _ => (0..d[0]).map(|z| (d[1], d[2], z * d[1] * d[2])).collect(),
    }
}

/// Normalised separable Gaussian of odd `size`.
fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let h = (size / 2) as f64;
    let g: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - h).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Zero-mean Laplacian-of-Gaussian kernel, row-major `size x size`.
pub fn log_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let h = (size / 2) as f64;
    let s2 = sigma * sigma;
    let mut k = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let r2 = (i as f64 - h).powi(2) + (j as f64 - h).powi(2);
            k.push((r2 - 2.0 * s2) / (s2 * s2) * (-r2 / (2.0 * s2)).exp());
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    k
}

/// Valid-mode 2D correlation of a `rows x cols` image with a square kernel.
fn filter_valid(img: &[f64], rows: usize, cols: usize, kernel: &[f64], size: usize) -> Vec<f64> {
    let (orow, ocol) = (rows + 1 - size, cols + 1 - size);
    let mut out = vec![0.0; orow * ocol];
    for r in 0..orow {
        for c in 0..ocol {
            let mut acc = 0.0;
            for i in 0..size {
                let row = &img[(r + i) * cols + c..(r + i) * cols + c + size];
                let krow = &kernel[i * size..(i + 1) * size];
                acc += row.iter().zip(krow).map(|(a, b)| a * b).sum::<f64>();
            }
            out[r * ocol + c] = acc;
        }
    }
    out
}

/// Mean local SSIM on magnitudes: 11x11 Gaussian window (`sigma = 1.5`), `K1 = 0.01`,
/// `K2 = 0.03`, dynamic range `max |ref|`. Valid windows only; 3D is averaged over
/// slices along axis 0.
pub fn ssim(x: &[C64], reference: &[C64], shape: &GridShape) -> Result<f64> {
    const WIN: usize = 11;
    check_len(x, reference)?;
    check_len(reference, &vec![C64::new(0.0, 0.0); shape.size()])?;
    let sl = slices(shape);
    if sl[0].0 < WIN || sl[0].1 < WIN {
        return Err(Error::InvalidShape(format!("SSIM needs slices of at least {WIN}x{WIN}")));
    }
    let l = reference.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if l == 0.0 {
        return Err(Error::ZeroReference("ssim"));
    }
    let g = gaussian_kernel(WIN, 1.5);
    let w: Vec<f64> = (0..WIN * WIN).map(|i| g[i / WIN] * g[i % WIN]).collect();
    let (c1, c2) = ((0.01 * l).powi(2), (0.03 * l).powi(2));
    let mut total = 0.0;
    for &(rows, cols, off) in &sl {
        let a: Vec<f64> = x[off..off + rows * cols].iter().map(|v| v.norm()).collect();
        let b: Vec<f64> = reference[off..off + rows * cols].iter().map(|v| v.norm()).collect();
        let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<_>>();
        let mu_a = filter_valid(&a, rows, cols, &w, WIN);
        let mu_b = filter_valid(&b, rows, cols, &w, WIN);
        let aa = filter_valid(&prod(&a, &a), rows, cols, &w, WIN);
        let bb = filter_valid(&prod(&b, &b), rows, cols, &w, WIN);
        let ab = filter_valid(&prod(&a, &b), rows, cols, &w, WIN);
        let mut s = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            s += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += s / mu_a.len() as f64;
    }
    Ok(total / sl.len() as f64)
}

/// `||LoG|x| - LoG|ref||| / ||LoG|ref|||` with a 15x15, `sigma = 1.5` kernel (valid mode,
/// slice-wise in 3D).
pub fn hfen(x: &[C64], reference: &[C64], shape: &GridShape) -> Result<f64> {
    const K: usize = 15;
    check_len(x, reference)?;
    let sl = slices(shape);
    if sl[0].0 < K || sl[0].1 < K {
        return Err(Error::InvalidShape(format!("HFEN needs slices of at least {K}x{K}")));
    }
    let kernel = log_kernel(K, 1.5);
    let (mut num, mut den) = (0.0, 0.0);
    for &(rows, cols, off) in &sl {
        let a: Vec<f64> = x[off..off + rows * cols].iter().map(|v| v.norm()).collect();
        let b: Vec<f64> = reference[off..off + rows * cols].iter().map(|v| v.norm()).collect();
        let fa = filter_valid(&a, rows, cols, &kernel, K);
        let fb = filter_valid(&b, rows, cols, &kernel, K);
        num += fa.iter().zip(&fb).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        den += fb.iter().map(|q| q * q).sum::<f64>();
    }
    if den == 0.0 {
        return Err(Error::ZeroReference("hfen"));
    }
    Ok((num / den).sqrt())
}

/// Inverse g-factor map; `mask[d]` is false outside the support or where a standard
/// deviation vanished (those entries hold `NaN`).
#[derive(Clone, Debug, PartialEq)]
pub struct GFactorMap {
    pub inverse_g: Vec<f64>,
    pub mask: Vec<bool>,
    pub trials: usize,
    pub r: f64,
}

impl GFactorMap {
    pub fn mean_over_support(&self) -> f64 {
        let (s, n) = self
            .inverse_g
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        s / n.max(1) as f64
    }
}

/// Reconstruction used inside the g-factor protocol: `(A, noisy data) -> image`.
pub type ReconFn<'a> = dyn Fn(&SenseOperator, &KSpaceData) -> Result<Vec<C64>> + 'a;

/// Pixelwise complex standard deviation over trials (`n - 1` normalisation).
fn pixel_std(samples: &[Vec<C64>]) -> Vec<f64> {
    let n = samples.len() as f64;
    let d = samples[0].len();
    let mut mean = vecops::zeros(d);
    for s in samples {
        vecops::axpy(C64::new(1.0 / n, 0.0), s, &mut mean);
    }
    let mut var = vec![0.0; d];
    for s in samples {
        for ((v, a), m) in var.iter_mut().zip(s).zip(&mean) {
            *v += (a - m).norm_sqr();
        }
    }
    var.into_iter().map(|v| (v / (n - 1.0)).sqrt()).collect()
}

fn noisy_data(clean: &[C64], traj: &crate::grid::Trajectory, ncoils: usize, sigma: f64, seed: u64) -> Result<KSpaceData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = complex_noise(clean.len(), sigma, &mut rng);
    let n = clean.len() / ncoils;
    let coils = clean
        .chunks_exact(n)
        .zip(noise.chunks_exact(n))
        .map(|(c, e)| c.iter().zip(e).map(|(a, b)| a + b).collect())
        .collect();
    KSpaceData::new(traj.clone(), coils, false)
}

/// Pseudo-replica inverse g-factor `sigma_full sqrt(R) / sigma_under` with one
/// reconstruction for both samplings.
#[allow(clippy::too_many_arguments)]
pub fn gfactor_montecarlo(
    recon: &ReconFn<'_>,
    a_full: &SenseOperator,
    a_under: &SenseOperator,
    x_true: &[C64],
    support: &[bool],
    noise_sigma: f64,
    trials: usize,
    r: f64,
    seed: u64,
) -> Result<GFactorMap> {
    gfactor_montecarlo_with(recon, recon, a_full, a_under, x_true, support, noise_sigma, trials, r, seed)
}

/// As [`gfactor_montecarlo`] with separate reconstructions for the fully sampled
/// reference and the undersampled data.
///
/// Trial `t` draws the noise of both acquisitions from seeds `seed + t` and
/// `seed + t + 2^32` respectively, so serial and parallel runs agree.
#[allow(clippy::too_many_arguments)]
pub fn gfactor_montecarlo_with(
    recon_full: &ReconFn<'_>,
    recon_under: &ReconFn<'_>,
    a_full: &SenseOperator,
    a_under: &SenseOperator,
    x_true: &[C64],
    support: &[bool],
    noise_sigma: f64,
    trials: usize,
    r: f64,
    seed: u64,
) -> Result<GFactorMap> {
    if trials < 2 {
        return Err(Error::param("g-factor needs at least two trials"));
    }
    let d = a_full.shape().size();
    if x_true.len() != d || support.len() != d {
        return Err(Error::dims("g-factor image", d, x_true.len().min(support.len())));
    }
    let silent = |op: &SenseOperator| op.unweighted().with_counter(CostCounter::new());
    let clean_full = silent(a_full).forward(x_true);
    let clean_under = silent(a_under).forward(x_true);
    let mut full = Vec::with_capacity(trials);
    let mut under = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let kf = noisy_data(&clean_full, a_full.traj(), a_full.ncoils(), noise_sigma, seed.wrapping_add(t))?;
        let ku = noisy_data(&clean_under, a_under.traj(), a_under.ncoils(), noise_sigma, seed.wrapping_add(t).wrapping_add(1 << 32))?;
        full.push(recon_full(a_full, &kf)?);
        under.push(recon_under(a_under, &ku)?);
    }
    let sf = pixel_std(&full);
    let su = pixel_std(&under);
    let mut mask = support.to_vec();
    let inverse_g = (0..d)
        .map(|i| {
            if mask[i] && su[i] > 0.0 && sf[i] > 0.0 {
                sf[i] * r.sqrt() / su[i]
            } else {
                mask[i] = false;
                f64::NAN
            }
        })
        .collect();
    Ok(GFactorMap {
        inverse_g,
        mask,
        trials,
        r,
    })
}
