//! Non-uniform discrete Fourier transform.
//!
//! [`DirectNudft`] evaluates the exponential sum exactly in `O(N D)`; it is the
//! reference. [`GriddedNufft`] is the fast Kaiser-Bessel gridding path and is checked
//! against the direct sum.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::fft::CenteredFft;
use super::LinOp;
use crate::error::{Error, Result};
use crate::grid::{GridShape, Image, Trajectory, TrajectoryKind};

/// Direct evaluation of `k[i] = D^{-1/2} sum_r x[r] exp(-i 2pi sum_a f_ia r_a / n_a)`.
pub struct DirectNudft {
    dims: [usize; 3],
    nsamples: usize,
    // per padded axis: table[i * n + r] = e^{-i2pi f_i r / n}
    tables: [Vec<C64>; 3],
    scale: f64,
}

/// Grid dims padded to three axes with leading singleton axes.
fn pad3(dims: &[usize]) -> [usize; 3] {
    let mut out = [1; 3];
    let off = 3 - dims.len();
    out[off..].copy_from_slice(dims);
    out
}

/// Trajectory coordinate of sample `i` on padded axis `a` (0 for singleton axes).
fn coord(traj: &Trajectory, i: usize, a: usize) -> f64 {
    let off = 3 - traj.ndim;
    if a < off {
        0.0
    } else {
        traj.point(i)[a - off]
    }
}

impl DirectNudft {
    pub fn new(shape: &GridShape, traj: &Trajectory) -> Result<Self> {
        traj.check_range(shape)?;
        let dims = pad3(shape.dims());
        let nsamples = traj.len();
        let tables = std::array::from_fn(|a| {
            let n = dims[a];
            let c = (n / 2) as f64;
            let mut t = Vec::with_capacity(nsamples * n);
            for i in 0..nsamples {
                let f = coord(traj, i, a);
                for r in 0..n {
                    let ph = -2.0 * PI * f * (r as f64 - c) / n as f64;
                    t.push(C64::from_polar(1.0, ph));
                }
            }
            t
        });
        Ok(Self {
            dims,
            nsamples,
            tables,
            scale: 1.0 / (shape.size() as f64).sqrt(),
        })
    }
}

impl LinOp for DirectNudft {
    fn in_dim(&self) -> usize {
        self.dims.iter().product()
    }
    fn out_dim(&self) -> usize {
        self.nsamples
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        let [n0, n1, n2] = self.dims;
        for (i, o) in out.iter_mut().enumerate() {
            let t0 = &self.tables[0][i * n0..(i + 1) * n0];
            let t1 = &self.tables[1][i * n1..(i + 1) * n1];
            let t2 = &self.tables[2][i * n2..(i + 1) * n2];
            let mut acc = C64::new(0.0, 0.0);
            for (r0, e0) in t0.iter().enumerate() {
                let mut acc1 = C64::new(0.0, 0.0);
                for (r1, e1) in t1.iter().enumerate() {
                    let row = &x[(r0 * n1 + r1) * n2..(r0 * n1 + r1 + 1) * n2];
                    let s: C64 = row.iter().zip(t2).map(|(a, b)| a * b).sum();
                    acc1 += s * e1;
                }
                acc += acc1 * e0;
            }
            *o = acc * self.scale;
        }
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        let [n0, n1, n2] = self.dims;
        out.fill(C64::new(0.0, 0.0));
        for (i, yi) in y.iter().enumerate() {
            let t0 = &self.tables[0][i * n0..(i + 1) * n0];
            let t1 = &self.tables[1][i * n1..(i + 1) * n1];
            let t2 = &self.tables[2][i * n2..(i + 1) * n2];
            let yv = yi * self.scale;
            for (r0, e0) in t0.iter().enumerate() {
                let a0 = yv * e0.conj();
                for (r1, e1) in t1.iter().enumerate() {
                    let a1 = a0 * e1.conj();
                    let row = &mut out[(r0 * n1 + r1) * n2..(r0 * n1 + r1 + 1) * n2];
                    for (o, e2) in row.iter_mut().zip(t2) {
                        *o += a1 * e2.conj();
                    }
                }
            }
        }
    }
}

/// Direct non-uniform DFT of an image at the trajectory points.
pub fn dft_nonuniform(img: &Image, traj: &Trajectory) -> Result<Vec<C64>> {
    if traj.kind != TrajectoryKind::NonCartesian {
        return Err(Error::param("dft_nonuniform expects a non-cartesian trajectory"));
    }
    if img.values.len() != img.shape.size() {
        return Err(Error::dims("image values", img.shape.size(), img.values.len()));
    }
    Ok(DirectNudft::new(&img.shape, traj)?.forward(&img.values))
}

/// Kaiser-Bessel gridding parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GriddingParams {
    pub oversampling: f64,
    /// Kernel width in oversampled-grid units.
    pub width: f64,
}

impl Default for GriddingParams {
    fn default() -> Self {
        Self {
            oversampling: 1.25,
            width: 6.0,
        }
    }
}

impl GriddingParams {
    /// Kaiser-Bessel shape parameter for the given oversampling and width.
    pub fn beta(&self) -> f64 {
        let (a, w) = (self.oversampling, self.width);
        PI * ((w / a).powi(2) * (a - 0.5).powi(2) - 0.8).sqrt()
    }
}

/// Modified Bessel function of the first kind, order zero.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn kb_kernel(u: f64, width: f64, beta: f64) -> f64 {
    let t = 2.0 * u / width;
    if t.abs() > 1.0 {
        0.0
    } else {
        bessel_i0(beta * (1.0 - t * t).sqrt())
    }
}

/// Continuous Fourier transform of [`kb_kernel`] at frequency `nu` (cycles per grid unit).
fn kb_transform(nu: f64, width: f64, beta: f64) -> f64 {
    let z = PI * width * nu;
    let s2 = beta * beta - z * z;
    if s2 > 1e-12 {
        let s = s2.sqrt();
        width * s.sinh() / s
    } else if s2 < -1e-12 {
        let s = (-s2).sqrt();
        width * s.sin() / s
    } else {
        width
    }
}

/// Fast NUFFT by Kaiser-Bessel interpolation from an oversampled Cartesian grid.
///
/// Forward and adjoint are exact transposes of each other, so adjointness holds to
/// rounding even though the forward only approximates [`DirectNudft`].
pub struct GriddedNufft {
    dims: [usize; 3],
    grid: [usize; 3],
    fft: CenteredFft,
    nsamples: usize,
    taps: usize,
    // per sample and padded axis: `taps` wrapped grid indices and kernel weights
    idx: [Vec<u32>; 3],
    wts: [Vec<f64>; 3],
    // 1 / (deapodisation * sqrt(D)) on the image grid
    deapod: Vec<f64>,
}

impl GriddedNufft {
    pub fn new(shape: &GridShape, traj: &Trajectory, params: GriddingParams) -> Result<Self> {
        traj.check_range(shape)?;
        if params.oversampling < 1.0 || params.width <= 0.0 {
            return Err(Error::param("gridding needs oversampling >= 1 and width > 0"));
        }
        let dims = pad3(shape.dims());
        let grid: [usize; 3] = std::array::from_fn(|a| {
            if dims[a] == 1 {
                1
            } else {
                let m = (params.oversampling * dims[a] as f64).ceil() as usize;
                m + m % 2
            }
        });
        let beta = params.beta();
        let w = params.width;
        let taps = w.floor() as usize + 1;
        let nsamples = traj.len();

        let mut idx: [Vec<u32>; 3] = Default::default();
        let mut wts: [Vec<f64>; 3] = Default::default();
        for a in 0..3 {
            idx[a] = Vec::with_capacity(nsamples * taps);
            wts[a] = Vec::with_capacity(nsamples * taps);
            let m = grid[a] as i64;
            let ratio = grid[a] as f64 / dims[a] as f64;
            for i in 0..nsamples {
                if dims[a] == 1 {
                    idx[a].push(0);
                    wts[a].push(1.0);
                    idx[a].extend(std::iter::repeat_n(0, taps - 1));
                    wts[a].extend(std::iter::repeat_n(0.0, taps - 1));
                    continue;
                }
                let v = coord(traj, i, a) * ratio;
                let start = (v - w / 2.0).ceil() as i64;
                for t in 0..taps as i64 {
                    let u = start + t;
                    let wt = kb_kernel(v - u as f64, w, beta);
                    idx[a].push((u + m / 2).rem_euclid(m) as u32);
                    wts[a].push(wt);
                }
            }
        }

        let scale = 1.0 / (shape.size() as f64).sqrt();
        let apod: [Vec<f64>; 3] = std::array::from_fn(|a| {
            let n = dims[a];
            if n == 1 {
                return vec![1.0];
            }
            (0..n)
                .map(|r| {
                    let rc = r as f64 - (n / 2) as f64;
                    kb_transform(rc / grid[a] as f64, w, beta)
                })
                .collect()
        });
        let mut deapod = Vec::with_capacity(shape.size());
        for r0 in 0..dims[0] {
            for r1 in 0..dims[1] {
                for r2 in 0..dims[2] {
                    deapod.push(scale / (apod[0][r0] * apod[1][r1] * apod[2][r2]));
                }
            }
        }

        Ok(Self {
            dims,
            grid,
            fft: CenteredFft::new(&grid),
            nsamples,
            taps,
            idx,
            wts,
            deapod,
        })
    }

    fn grid_offset(&self, a: usize) -> usize {
        self.grid[a] / 2 - self.dims[a] / 2
    }
}

impl LinOp for GriddedNufft {
    fn in_dim(&self) -> usize {
        self.dims.iter().product()
    }
    fn out_dim(&self) -> usize {
        self.nsamples
    }

    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        let [n0, n1, n2] = self.dims;
        let [m0, m1, m2] = self.grid;
        let (o0, o1, o2) = (self.grid_offset(0), self.grid_offset(1), self.grid_offset(2));
        let mut g = vec![C64::new(0.0, 0.0); m0 * m1 * m2];
        for r0 in 0..n0 {
            for r1 in 0..n1 {
                let src = (r0 * n1 + r1) * n2;
                let dst = ((r0 + o0) * m1 + r1 + o1) * m2 + o2;
                for r2 in 0..n2 {
                    g[dst + r2] = x[src + r2] * self.deapod[src + r2];
                }
            }
        }
        self.fft.transform_inplace(&mut g, false);
        let t = self.taps;
        for (i, o) in out.iter_mut().enumerate() {
            let (i0, w0) = (&self.idx[0][i * t..(i + 1) * t], &self.wts[0][i * t..(i + 1) * t]);
            let (i1, w1) = (&self.idx[1][i * t..(i + 1) * t], &self.wts[1][i * t..(i + 1) * t]);
            let (i2, w2) = (&self.idx[2][i * t..(i + 1) * t], &self.wts[2][i * t..(i + 1) * t]);
            let mut acc = C64::new(0.0, 0.0);
            for (&a0, &b0) in i0.iter().zip(w0) {
                if b0 == 0.0 {
                    continue;
                }
                let mut acc1 = C64::new(0.0, 0.0);
                for (&a1, &b1) in i1.iter().zip(w1) {
                    if b1 == 0.0 {
                        continue;
                    }
                    let base = (a0 as usize * m1 + a1 as usize) * m2;
                    let mut acc2 = C64::new(0.0, 0.0);
                    for (&a2, &b2) in i2.iter().zip(w2) {
                        acc2 += g[base + a2 as usize] * b2;
                    }
                    acc1 += acc2 * b1;
                }
                acc += acc1 * b0;
            }
            *o = acc;
        }
    }

    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        let [n0, n1, n2] = self.dims;
        let [m0, m1, m2] = self.grid;
        let (o0, o1, o2) = (self.grid_offset(0), self.grid_offset(1), self.grid_offset(2));
        let mut g = vec![C64::new(0.0, 0.0); m0 * m1 * m2];
        let t = self.taps;
        for (i, yi) in y.iter().enumerate() {
            let (i0, w0) = (&self.idx[0][i * t..(i + 1) * t], &self.wts[0][i * t..(i + 1) * t]);
            let (i1, w1) = (&self.idx[1][i * t..(i + 1) * t], &self.wts[1][i * t..(i + 1) * t]);
            let (i2, w2) = (&self.idx[2][i * t..(i + 1) * t], &self.wts[2][i * t..(i + 1) * t]);
            for (&a0, &b0) in i0.iter().zip(w0) {
                if b0 == 0.0 {
                    continue;
                }
                let v0 = yi * b0;
                for (&a1, &b1) in i1.iter().zip(w1) {
                    if b1 == 0.0 {
                        continue;
                    }
                    let v1 = v0 * b1;
                    let base = (a0 as usize * m1 + a1 as usize) * m2;
                    for (&a2, &b2) in i2.iter().zip(w2) {
                        g[base + a2 as usize] += v1 * b2;
                    }
                }
            }
        }
        self.fft.transform_inplace(&mut g, true);
        for r0 in 0..n0 {
            for r1 in 0..n1 {
                let dst = (r0 * n1 + r1) * n2;
                let src = ((r0 + o0) * m1 + r1 + o1) * m2 + o2;
                for r2 in 0..n2 {
                    out[dst + r2] = g[src + r2] * self.deapod[dst + r2];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{adjoint_mismatch, fft_centered, random_vector};
    use crate::vecops;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_traj(shape: &GridShape, n: usize, seed: u64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for _ in 0..n {
            for &d in shape.dims() {
                let h = d as f64 / 2.0;
                pts.push(rng.random_range(-h..h));
            }
        }
        Trajectory::new(shape.ndim(), pts, TrajectoryKind::NonCartesian).unwrap()
    }

    /// Independent O(ND) double loop over voxels and samples.
    fn brute_force(img: &Image, traj: &Trajectory) -> Vec<C64> {
        let d = img.shape.size();
        (0..traj.len())
            .map(|i| {
                let f = traj.point(i);
                let mut acc = C64::new(0.0, 0.0);
                for (j, x) in img.values.iter().enumerate() {
                    let r = img.shape.centered_coords(j);
                    let ph: f64 = f
                        .iter()
                        .zip(&r)
                        .zip(img.shape.dims())
                        .map(|((fa, ra), n)| fa * *ra as f64 / *n as f64)
                        .sum();
                    acc += x * C64::from_polar(1.0, -2.0 * PI * ph);
                }
                acc / (d as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn center_delta_flat_spectrum() {
        let s = GridShape::new(&[10, 12]).unwrap();
        let mut img = Image::zeros(s.clone());
        img.values[5 * 12 + 6] = C64::new(1.0, 0.0);
        let traj = random_traj(&s, 30, 1);
        let k = dft_nonuniform(&img, &traj).unwrap();
        for v in k {
            assert!((v - C64::new(1.0 / 120f64.sqrt(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn integer_points_match_fft() {
        let s = GridShape::new(&[8, 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = Image::new(s.clone(), random_vector(48, &mut rng)).unwrap();
        let full = fft_centered(&img).unwrap();
        let mut pts = Vec::new();
        let mut want = Vec::new();
        for (ky, kx) in [(-4, -3), (0, 0), (3, 2), (-1, 1), (2, -3)] {
            pts.extend([ky as f64, kx as f64]);
            want.push(full[((ky + 4) * 6 + kx + 3) as usize]);
        }
        let traj = Trajectory::new(2, pts, TrajectoryKind::NonCartesian).unwrap();
        let k = dft_nonuniform(&img, &traj).unwrap();
        assert!(vecops::rel_diff(&k, &want) < 1e-10);
    }

    #[test]
    fn direct_matches_brute_force() {
        let s = GridShape::new(&[12, 12]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Image::new(s.clone(), random_vector(144, &mut rng)).unwrap();
        let traj = random_traj(&s, 50, 4);
        let k = dft_nonuniform(&img, &traj).unwrap();
        assert!(vecops::rel_diff(&k, &brute_force(&img, &traj)) < 1e-12);
    }

    #[test]
    fn direct_3d_matches_brute_force() {
        let s = GridShape::new(&[4, 6, 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = Image::new(s.clone(), random_vector(120, &mut rng)).unwrap();
        let traj = random_traj(&s, 20, 6);
        let k = dft_nonuniform(&img, &traj).unwrap();
        assert!(vecops::rel_diff(&k, &brute_force(&img, &traj)) < 1e-12);
    }

    #[test]
    fn out_of_range_rejected() {
        let s = GridShape::new(&[8, 8]).unwrap();
        let traj = Trajectory::new(2, vec![0.0, 4.0], TrajectoryKind::NonCartesian).unwrap();
        assert!(matches!(
            dft_nonuniform(&Image::zeros(s), &traj),
            Err(Error::TrajectoryOutOfRange { .. })
        ));
    }

    #[test]
    fn kb_transform_matches_quadrature() {
        let (w, beta) = (4.0, GriddingParams::default().beta());
        for nu in [0.0, 0.1, 0.3, 0.45] {
            let n = 20000;
            let h = w / n as f64;
            let q: f64 = (0..=n)
                .map(|k| {
                    let u = -w / 2.0 + k as f64 * h;
                    let c = if k == 0 || k == n { 0.5 } else { 1.0 };
                    c * kb_kernel(u, w, beta) * (2.0 * PI * u * nu).cos() * h
                })
                .sum();
            let a = kb_transform(nu, w, beta);
            assert!((q - a).abs() / a.abs() < 1e-6, "nu {nu}: {q} vs {a}");
        }
    }

    #[test]
    fn gridded_matches_direct() {
        for dims in [vec![16, 16], vec![12, 20], vec![8, 8, 6]] {
            let s = GridShape::new(&dims).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let x = random_vector(s.size(), &mut rng);
            let traj = random_traj(&s, 200, 9);
            let direct = DirectNudft::new(&s, &traj).unwrap().forward(&x);
            let g = GriddedNufft::new(&s, &traj, GriddingParams::default()).unwrap();
            let fast = g.forward(&x);
            assert!(vecops::rel_diff(&fast, &direct) < 1e-3, "{dims:?}");
            let yv = random_vector(200, &mut rng);
            let ad = DirectNudft::new(&s, &traj).unwrap().adjoint(&yv);
            assert!(vecops::rel_diff(&g.adjoint(&yv), &ad) < 1e-3);
        }
    }

    #[test]
    fn width_four_is_coarser() {
        // oversampling 1.25 with a 4-wide kernel sits near 7e-3 relative error
        let s = GridShape::new(&[16, 16]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_vector(256, &mut rng);
        let traj = random_traj(&s, 300, 2);
        let direct = DirectNudft::new(&s, &traj).unwrap().forward(&x);
        let err = |w: f64| {
            let p = GriddingParams {
                oversampling: 1.25,
                width: w,
            };
            vecops::rel_diff(&GriddedNufft::new(&s, &traj, p).unwrap().forward(&x), &direct)
        };
        let (e4, e6) = (err(4.0), err(6.0));
        assert!(e4 > 1e-3 && e4 < 2e-2, "{e4}");
        assert!(e6 < 1e-3 && e6 < e4 / 5.0, "{e6}");
    }

    #[test]
    fn adjointness() {
        let s = GridShape::new(&[10, 14]).unwrap();
        let traj = random_traj(&s, 60, 10);
        let d = DirectNudft::new(&s, &traj).unwrap();
        let g = GriddedNufft::new(&s, &traj, GriddingParams::default()).unwrap();
        for seed in 0..10 {
            assert!(adjoint_mismatch(&d, seed) < 1e-10);
            assert!(adjoint_mismatch(&g, seed) < 1e-10);
        }
    }
}
