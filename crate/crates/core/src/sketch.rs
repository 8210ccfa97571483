//! Block-structured coil sketching matrices and the reduced sketched operator.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sense::{SenseOperator, SensitivityMaps};
use crate::vecops;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SketchDistribution {
    Gaussian,
    #[default]
    Rademacher,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub c_hat: usize,
    pub v: usize,
    pub s: usize,
    pub distribution: SketchDistribution,
    pub seed: u64,
}

impl SketchConfig {
    /// `V = c_hat - 1`, `S = 1`.
    pub fn recommended(c_hat: usize, seed: u64) -> Self {
        Self {
            c_hat,
            v: c_hat.saturating_sub(1),
            s: c_hat.min(1),
            distribution: SketchDistribution::Rademacher,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_hat == 0 {
            return Err(Error::param("sketch size must be at least one coil"));
        }
        if self.v + self.s != self.c_hat {
            return Err(Error::param(format!(
                "V + S = {} + {} does not equal c_hat = {}",
                self.v, self.s, self.c_hat
            )));
        }
        Ok(())
    }
}

/// Deterministic random stream number `t` derived from `seed`.
pub fn seed_stream(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

/// `S~ = [[I_V, 0], [0, R]]` with `R` an `S x (C - V)` random block.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchMatrix {
    pub mat: DMatrix<f64>,
    pub config: SketchConfig,
}

impl SketchMatrix {
    /// `S~ = I_C` (sketching disabled).
    pub fn identity(c: usize) -> Self {
        Self {
            mat: DMatrix::identity(c, c),
            config: SketchConfig {
                c_hat: c,
                v: c,
                s: 0,
                distribution: SketchDistribution::Rademacher,
                seed: 0,
            },
        }
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mat.ncols()
    }

    /// Applies `S~ (x) I_N` to coil-major stacked data.
    pub fn apply_stacked(&self, y: &[C64]) -> Result<Vec<C64>> {
        let c = self.cols();
        if !y.len().is_multiple_of(c) {
            return Err(Error::dims("stacked coil data", c, y.len()));
        }
        let n = y.len() / c;
        let mut out = vecops::zeros(self.rows() * n);
        for (i, o) in out.chunks_exact_mut(n).enumerate() {
            for j in 0..c {
                let m = self.mat[(i, j)];
                if m != 0.0 {
                    vecops::axpy(C64::new(m, 0.0), &y[j * n..(j + 1) * n], o);
                }
            }
        }
        Ok(out)
    }
}

/// Draws `S~` for `C` coils using `seed_stream(cfg.seed, 0)`.
pub fn gen_sketch_matrix(cfg: &SketchConfig, c: usize) -> Result<SketchMatrix> {
    let mut rng = seed_stream(cfg.seed, 0);
    gen_sketch_matrix_with(cfg, c, &mut rng)
}

/// Draws `S~` from an explicit random stream.
pub fn gen_sketch_matrix_with<R: Rng>(
    cfg: &SketchConfig,
    c: usize,
    rng: &mut R,
) -> Result<SketchMatrix> {
    cfg.validate()?;
    if cfg.v > c {
        return Err(Error::param(format!("V = {} exceeds C = {c}", cfg.v)));
    }
    if cfg.s > c - cfg.v {
        return Err(Error::param(format!(
            "S = {} exceeds C - V = {}",
            cfg.s,
            c - cfg.v
        )));
    }
    let mut mat = DMatrix::<f64>::zeros(cfg.c_hat, c);
    for i in 0..cfg.v {
        mat[(i, i)] = 1.0;
    }
    let gauss = Normal::new(0.0, 1.0 / cfg.s.max(1) as f64).expect("positive std");
    for i in cfg.v..cfg.c_hat {
        for j in cfg.v..c {
            mat[(i, j)] = match cfg.distribution {
                SketchDistribution::Gaussian => gauss.sample(rng),
                SketchDistribution::Rademacher => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
        }
    }
    Ok(SketchMatrix { mat, config: *cfg })
}

/// Per voxel `c_hat[.][d] = S~ c[.][d]`.
pub fn sketch_maps(maps: &SensitivityMaps, sk: &SketchMatrix) -> Result<SensitivityMaps> {
    if sk.cols() != maps.ncoils() {
        return Err(Error::dims("sketch matrix columns", maps.ncoils(), sk.cols()));
    }
    let d = maps.shape.size();
    let coils = (0..sk.rows())
        .map(|i| {
            let mut out = vecops::zeros(d);
            for (j, c) in maps.coils.iter().enumerate() {
                let m = sk.mat[(i, j)];
                if m != 0.0 {
                    vecops::axpy(C64::new(m, 0.0), c, &mut out);
                }
            }
            out
        })
        .collect();
    SensitivityMaps::new(maps.shape.clone(), coils)
}

/// `A_S = W^{1/2} F (S~ C)`, sharing the Fourier plan and coil counter of `op`.
pub fn build_sketched_operator(op: &SenseOperator, sk: &SketchMatrix) -> Result<SenseOperator> {
    if op.has_per_coil_weights() {
        return Err(Error::PerCoilWeights);
    }
    op.with_maps(sketch_maps(op.maps(), sk)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridShape, Trajectory, TrajectoryKind};
    use crate::linop::{random_vector, LinOp};
    use crate::sense::{build_sense, radial_density_weights, DensityWeights};

    fn cfg(c_hat: usize, v: usize, s: usize, distribution: SketchDistribution, seed: u64) -> SketchConfig {
        SketchConfig {
            c_hat,
            v,
            s,
            distribution,
            seed,
        }
    }

    fn check_blocks(sk: &SketchMatrix) {
        let SketchConfig { v, .. } = sk.config;
        for i in 0..sk.rows() {
            for j in 0..sk.cols() {
                let m = sk.mat[(i, j)];
                if i < v || j < v {
                    assert_eq!(m, if i == j { 1.0 } else { 0.0 });
                } else if sk.config.distribution == SketchDistribution::Rademacher {
                    assert!(m == 1.0 || m == -1.0);
                }
            }
        }
    }

    #[test]
    fn pure_truncation() {
        let sk = gen_sketch_matrix(&cfg(3, 3, 0, SketchDistribution::Gaussian, 1), 8).unwrap();
        let mut want = DMatrix::zeros(3, 8);
        for i in 0..3 {
            want[(i, i)] = 1.0;
        }
        assert_eq!(sk.mat, want);
    }

    #[test]
    fn recommended_rademacher_row() {
        let sk = gen_sketch_matrix(&SketchConfig::recommended(4, 7), 8).unwrap();
        check_blocks(&sk);
        for j in 0..3 {
            assert_eq!(sk.mat[(3, j)], 0.0);
        }
        for j in 3..8 {
            assert!(sk.mat[(3, j)].abs() == 1.0);
        }
    }

    #[test]
    fn deterministic_and_stream_dependent() {
        let c = cfg(2, 1, 1, SketchDistribution::Gaussian, 42);
        assert_eq!(gen_sketch_matrix(&c, 6).unwrap(), gen_sketch_matrix(&c, 6).unwrap());
        let a = gen_sketch_matrix_with(&c, 6, &mut seed_stream(42, 1)).unwrap();
        let b = gen_sketch_matrix_with(&c, 6, &mut seed_stream(42, 2)).unwrap();
        assert_ne!(a.mat, b.mat);
    }

    #[test]
    fn invalid_configs() {
        assert!(gen_sketch_matrix(&cfg(3, 2, 2, SketchDistribution::Gaussian, 0), 8).is_err());
        assert!(gen_sketch_matrix(&cfg(5, 5, 0, SketchDistribution::Gaussian, 0), 4).is_err());
        assert!(gen_sketch_matrix(&cfg(4, 1, 3, SketchDistribution::Gaussian, 0), 3).is_err());
    }

    #[test]
    fn second_moment_is_one() {
        for dist in [SketchDistribution::Gaussian, SketchDistribution::Rademacher] {
            let c = cfg(2, 1, 1, dist, 0);
            let mut acc = DMatrix::<f64>::zeros(3, 3);
            let draws = 10_000;
            for t in 0..draws {
                let sk = gen_sketch_matrix_with(&c, 4, &mut seed_stream(5, t)).unwrap();
                let r = sk.mat.view((1, 1), (1, 3)).into_owned();
                acc += r.transpose() * r;
            }
            acc /= draws as f64;
            for i in 0..3 {
                assert!((acc[(i, i)] - 1.0).abs() < 0.05, "{dist:?} {acc}");
                for j in 0..3 {
                    if i != j {
                        assert!(acc[(i, j)].abs() < 0.05);
                    }
                }
            }
        }
    }

    fn small_problem(c: usize, seed: u64) -> (SensitivityMaps, Trajectory) {
        let shape = GridShape::new(&[8, 8]).unwrap();
        let mut rng = seed_stream(seed, 99);
        let maps = SensitivityMaps::new(
            shape.clone(),
            (0..c).map(|_| random_vector(64, &mut rng)).collect(),
        )
        .unwrap();
        let pts = (0..2 * 40).map(|_| rng.random_range(-4.0..4.0)).collect();
        (maps, Trajectory::new(2, pts, TrajectoryKind::NonCartesian).unwrap())
    }

    #[test]
    fn maps_basis_probe_and_identity() {
        let (maps, _) = small_problem(4, 1);
        assert_eq!(sketch_maps(&maps, &SketchMatrix::identity(4)).unwrap(), maps);
        let sk = gen_sketch_matrix(&cfg(3, 1, 2, SketchDistribution::Gaussian, 3), 4).unwrap();
        let shape = GridShape::new(&[2, 2]).unwrap();
        let mut e3 = vec![vec![C64::new(0.0, 0.0); 4]; 4];
        e3[2][0] = C64::new(1.0, 0.0);
        let probe = sketch_maps(&SensitivityMaps::new(shape, e3).unwrap(), &sk).unwrap();
        for i in 0..3 {
            assert_eq!(probe.coils[i][0].re, sk.mat[(i, 2)]);
        }
        let sk = gen_sketch_matrix(&SketchConfig::recommended(3, 0), 4).unwrap();
        let out = sketch_maps(&maps, &sk).unwrap();
        assert_eq!(out.coils[..2], maps.coils[..2]);
    }

    #[test]
    fn kronecker_commutation() {
        for draw in 0..20 {
            let (maps, traj) = small_problem(4, draw);
            let w = radial_density_weights(&traj);
            let op = build_sense(&maps, &traj, Some(&w)).unwrap();
            let dist = if draw % 2 == 0 {
                SketchDistribution::Gaussian
            } else {
                SketchDistribution::Rademacher
            };
            let sk = gen_sketch_matrix(&cfg(2, 1, 1, dist, draw), 4).unwrap();
            let a_s = build_sketched_operator(&op, &sk).unwrap();
            let x = random_vector(64, &mut seed_stream(draw, 7));
            let ax = op.forward(&x);
            let want = sk.apply_stacked(&ax).unwrap();
            assert!(vecops::norm(&vecops::sub(&a_s.forward(&x), &want)) <= 1e-10 * vecops::norm(&ax));
        }
    }

    #[test]
    fn sketched_counter_uses_c_hat() {
        let (maps, traj) = small_problem(20, 3);
        let op = build_sense(&maps, &traj, None).unwrap();
        let sk = gen_sketch_matrix(&SketchConfig::recommended(4, 0), 20).unwrap();
        let a_s = build_sketched_operator(&op, &sk).unwrap();
        a_s.forward(&vecops::zeros(64));
        assert_eq!(op.coil_transforms(), 4);
        let pc = op
            .with_per_coil_weights(vec![DensityWeights::new(vec![1.0; 40]).unwrap(); 20])
            .unwrap();
        assert!(matches!(build_sketched_operator(&pc, &sk), Err(Error::PerCoilWeights)));
    }
}
