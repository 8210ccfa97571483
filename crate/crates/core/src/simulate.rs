//! Synthetic phantoms, coil sensitivities, sampling patterns and noisy acquisition.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridShape, Image, Trajectory, TrajectoryKind};
use crate::linop::{CostCounter, LinOp};
use crate::sense::{KSpaceData, SenseOperator, SensitivityMaps};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    SheppLogan2d,
    Ellipsoids3d,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub shape: GridShape,
    pub contrast: f64,
}

// intensity, semi-axes (x, y, z), centre (x, y, z), rotation about z in degrees
const ELLIPSES: [(f64, [f64; 3], [f64; 3], f64); 10] = [
    (1.0, [0.69, 0.92, 0.81], [0.0, 0.0, 0.0], 0.0),
    (-0.8, [0.6624, 0.874, 0.78], [0.0, -0.0184, 0.0], 0.0),
    (-0.2, [0.11, 0.31, 0.22], [0.22, 0.0, 0.0], -18.0),
    (-0.2, [0.16, 0.41, 0.28], [-0.22, 0.0, 0.0], 18.0),
    (0.1, [0.21, 0.25, 0.41], [0.0, 0.35, -0.15], 0.0),
    (0.1, [0.046, 0.046, 0.05], [0.0, 0.1, 0.25], 0.0),
    (0.1, [0.046, 0.046, 0.05], [0.0, -0.1, 0.25], 0.0),
    (0.1, [0.046, 0.023, 0.05], [-0.08, -0.605, 0.0], 0.0),
    (0.1, [0.023, 0.023, 0.02], [0.0, -0.606, 0.0], 0.0),
    (0.1, [0.023, 0.046, 0.02], [0.06, -0.605, 0.0], 0.0),
];

/// Normalised coordinate of index `i` on an axis of length `n`, in `(-1, 1)`.
fn axis_coord(i: usize, n: usize) -> f64 {
    (2.0 * i as f64 + 1.0 - n as f64) / n as f64
}

/// Normalised `(x, y, z)` of a flat index; `x` runs along the last axis, `y` points up.
fn voxel_xyz(shape: &GridShape, flat: usize) -> [f64; 3] {
    let dims = shape.dims();
    let strides = shape.strides();
    let idx: Vec<usize> = dims.iter().zip(&strides).map(|(&n, &s)| (flat / s) % n).collect();
    let nd = dims.len();
    let x = axis_coord(idx[nd - 1], dims[nd - 1]);
    let y = -axis_coord(idx[nd - 2], dims[nd - 2]);
    let z = if nd == 3 { axis_coord(idx[0], dims[0]) } else { 0.0 };
    [x, y, z]
}

/// Modified Shepp-Logan value at a normalised point (3D when `with_z`).
pub fn shepp_logan_value(p: [f64; 3], with_z: bool) -> f64 {
    let mut v = 0.0;
    for (a, axes, c, phi) in ELLIPSES {
        let (s, co) = phi.to_radians().sin_cos();
        let dx = p[0] - c[0];
        let dy = p[1] - c[1];
        let xr = dx * co + dy * s;
        let yr = -dx * s + dy * co;
        let mut q = (xr / axes[0]).powi(2) + (yr / axes[1]).powi(2);
        if with_z {
            q += ((p[2] - c[2]) / axes[2]).powi(2);
        }
        if q <= 1.0 {
            v += a;
        }
    }
    v
}

/// Rasterises the phantom by point sampling at voxel centres; values in `[0, contrast]`.
pub fn make_phantom(spec: &PhantomSpec) -> Result<Image> {
    let with_z = match (spec.kind, spec.shape.ndim()) {
        (PhantomKind::SheppLogan2d, 2) => false,
        (PhantomKind::Ellipsoids3d, 3) => true,
        (k, n) => {
            return Err(Error::InvalidShape(format!("{k:?} phantom on a {n}D grid")));
        }
    };
    if !(spec.contrast > 0.0 && spec.contrast.is_finite()) {
        return Err(Error::param("phantom contrast must be positive"));
    }
    let vals: Vec<f64> = (0..spec.shape.size())
        .map(|i| spec.contrast * shepp_logan_value(voxel_xyz(&spec.shape, i), with_z).clamp(0.0, 1.0))
        .collect();
    Image::from_real(spec.shape.clone(), &vals)
}

/// `|x| > 0` per voxel.
pub fn support(img: &Image) -> Vec<bool> {
    img.values.iter().map(|v| v.norm() > 0.0).collect()
}

/// `C` Gaussian-lobe coils on a ring around the FOV with smooth phase, normalised to a
/// per-voxel sum of squares of one.
pub fn make_coil_maps(c: usize, shape: &GridShape, seed: u64) -> Result<SensitivityMaps> {
    if c == 0 {
        return Err(Error::param("need at least one coil"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let three_d = shape.ndim() == 3;
    let offset: f64 = rng.random_range(0.0..2.0 * PI);
    let params: Vec<_> = (0..c)
        .map(|k| {
            let theta = offset + 2.0 * PI * k as f64 / c as f64 + rng.random_range(-0.15..0.15);
            let radius = 1.3;
            let cz = if three_d { if k % 2 == 0 { 0.6 } else { -0.6 } } else { 0.0 };
            let width = 0.7 + rng.random_range(0.0..0.2);
            let phase = [
                rng.random_range(-PI..PI),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.5..0.5),
            ];
            ([radius * theta.cos(), radius * theta.sin(), cz], width, phase)
        })
        .collect();
    let mut coils = vec![Vec::with_capacity(shape.size()); c];
    for i in 0..shape.size() {
        let p = voxel_xyz(shape, i);
        let mut vals: Vec<C64> = params
            .iter()
            .map(|(ctr, w, ph)| {
                let d2: f64 = (0..3).map(|a| (p[a] - ctr[a]).powi(2)).sum();
                let mag = (-d2 / (2.0 * w * w)).exp();
                let phi = ph[0] + ph[1] * p[0] + ph[2] * p[1] + ph[3] * (p[0] * p[0] - p[1] * p[1]);
                C64::from_polar(mag, phi)
            })
            .collect();
        let sos: f64 = vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        vals.iter_mut().for_each(|v| *v /= sos);
        for (coil, v) in coils.iter_mut().zip(vals) {
            coil.push(v);
        }
    }
    SensitivityMaps::new(shape.clone(), coils)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    Regular,
    Random,
}

/// Phase-encode undersampling along axis 0, full sampling on the remaining axes.
///
/// `Regular` keeps every `round(R)`-th line plus the `acs` centre lines. `Random`
/// keeps the `acs` centre lines and draws the rest without replacement with a
/// variable density `(1 - |k|/kmax)^2 + 0.05`, so the line count is exactly
/// `round(n / R)`.
pub fn cartesian_mask(shape: &GridShape, r: f64, kind: MaskKind, acs: usize, seed: u64) -> Result<Trajectory> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::param(format!("acceleration must be >= 1, got {r}")));
    }
    let n = shape.dims()[0];
    if acs > n {
        return Err(Error::param(format!("{acs} calibration lines exceed {n} phase encodes")));
    }
    let acs_lo = n / 2 - acs / 2;
    let in_acs = |i: usize| i >= acs_lo && i < acs_lo + acs;
    let mut keep = vec![false; n];
    match kind {
        MaskKind::Regular => {
            let step = r.round().max(1.0) as usize;
            for (i, k) in keep.iter_mut().enumerate() {
                *k = i % step == 0 || in_acs(i);
            }
        }
        MaskKind::Random => {
            let target = ((n as f64 / r).round() as usize).max(acs).min(n);
            let candidates: Vec<usize> = (0..n).filter(|&i| !in_acs(i)).collect();
            for (i, k) in keep.iter_mut().enumerate() {
                *k = in_acs(i);
            }
            let half = n as f64 / 2.0;
            let weight = |j: usize| {
                let kk = (candidates[j] as f64 - half).abs() / half;
                (1.0 - kk).powi(2) + 0.05
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let picked = rand::seq::index::sample_weighted(&mut rng, candidates.len(), weight, target - acs)
                .map_err(|e| Error::param(format!("mask sampling failed: {e}")))?;
            for j in picked {
                keep[candidates[j]] = true;
            }
        }
    }
    let rest: Vec<Vec<i64>> = {
        let sub = GridShape::new(&[[2usize].as_slice(), &shape.dims()[1..]].concat())?;
        (0..sub.size() / 2).map(|i| sub.centered_coords(i)[1..].to_vec()).collect()
    };
    let mut pts = Vec::new();
    for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
        for r in &rest {
            pts.push(i as f64 - (n / 2) as f64);
            pts.extend(r.iter().map(|&v| v as f64));
        }
    }
    Trajectory::new(shape.ndim(), pts, TrajectoryKind::CartesianMask)
}

/// Number of sampled phase-encode lines of a Cartesian mask.
pub fn mask_lines(traj: &Trajectory) -> usize {
    let mut lines: Vec<i64> = (0..traj.len()).map(|i| traj.point(i)[0] as i64).collect();
    lines.dedup();
    lines.len()
}

/// Golden-ratio conjugate `(sqrt(5) - 1) / 2`.
pub const GOLDEN_CONJUGATE: f64 = 0.618_033_988_749_894_9;

/// Spoke angles in `[0, pi)`.
pub fn spoke_angles(spokes: usize, golden: bool) -> Vec<f64> {
    (0..spokes)
        .map(|k| {
            if golden {
                (k as f64 * PI * GOLDEN_CONJUGATE).rem_euclid(PI)
            } else {
                k as f64 * PI / spokes as f64
            }
        })
        .collect()
}

/// 2D radial spokes on the in-plane grid of `shape` (last two axes), ordered
/// `(ky, kx) = (r sin t, r cos t)`; each spoke has `readout` samples
/// `r_j = (j - readout/2) 2 kmax / readout` with `kmax = min(ny, nx) / 2`.
pub fn radial_traj(shape: &GridShape, spokes: usize, readout: usize, golden: bool) -> Result<Trajectory> {
    if spokes == 0 || readout == 0 {
        return Err(Error::param("radial trajectory needs at least one spoke and sample"));
    }
    let dims = shape.dims();
    let nd = dims.len();
    let kmax = dims[nd - 2].min(dims[nd - 1]) as f64 / 2.0;
    let radii: Vec<f64> = (0..readout)
        .map(|j| (j as f64 - (readout / 2) as f64) * 2.0 * kmax / readout as f64)
        .collect();
    let mut pts = Vec::with_capacity(spokes * readout * nd);
    let partitions: Vec<f64> = if nd == 3 {
        (0..dims[0]).map(|z| z as f64 - (dims[0] / 2) as f64).collect()
    } else {
        vec![0.0]
    };
    let angles = spoke_angles(spokes, golden);
    for &kz in &partitions {
        for &t in &angles {
            let (s, c) = t.sin_cos();
            for &r in &radii {
                if nd == 3 {
                    pts.push(kz);
                }
                pts.push(r * s);
                pts.push(r * c);
            }
        }
    }
    let traj = Trajectory::new(nd, pts, TrajectoryKind::NonCartesian)?;
    traj.check_range(shape)?;
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcquisitionSpec {
    /// Complex noise standard deviation per sample (`sigma / sqrt(2)` per component).
    pub noise_sigma: f64,
    pub seed: u64,
}

/// `sigma` giving `snr_db = 20 log10(rms(k) / sigma)`.
pub fn noise_for_snr(signal: &[C64], snr_db: f64) -> f64 {
    let rms = (crate::vecops::norm_sq(signal) / signal.len() as f64).sqrt();
    rms / 10f64.powf(snr_db / 20.0)
}

/// Complex white noise with per-sample standard deviation `sigma`.
pub fn complex_noise<R: Rng>(n: usize, sigma: f64, rng: &mut R) -> Vec<C64> {
    if sigma == 0.0 {
        return crate::vecops::zeros(n);
    }
    let d = Normal::new(0.0, sigma / 2f64.sqrt()).expect("finite sigma");
    (0..n).map(|_| C64::new(d.sample(rng), d.sample(rng))).collect()
}

/// `k = F C x + n` (no density weighting). Does not touch the operator's counter.
pub fn acquire(x: &Image, op: &SenseOperator, spec: &AcquisitionSpec) -> Result<KSpaceData> {
    if x.shape != *op.shape() {
        return Err(Error::param("image and operator grids differ"));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::param("noise sigma must be finite and nonnegative"));
    }
    let clean = op.unweighted().with_counter(CostCounter::new()).forward(&x.values);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = complex_noise(clean.len(), spec.noise_sigma, &mut rng);
    let n = op.nsamples();
    let coils = clean
        .chunks_exact(n)
        .zip(noise.chunks_exact(n))
        .map(|(c, e)| c.iter().zip(e).map(|(a, b)| a + b).collect())
        .collect();
    KSpaceData::new(op.traj().clone(), coils, false)
}
