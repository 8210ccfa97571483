//! Multi-coil encoding operator `A = W^{1/2} F C`, density compensation and SVD
//! coil compression.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{GridShape, Trajectory, TrajectoryKind};
use crate::linop::nufft::GriddingParams;
use crate::linop::{CenteredFft, Cost, CostCounter, DirectNudft, GriddedNufft, LinOp};
use crate::vecops;

/// Complex coil sensitivity profiles on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMaps {
    pub shape: GridShape,
    pub coils: Vec<Vec<C64>>,
}

impl SensitivityMaps {
    pub fn new(shape: GridShape, coils: Vec<Vec<C64>>) -> Result<Self> {
        if coils.is_empty() {
            return Err(Error::param("sensitivity maps need at least one coil"));
        }
        for c in &coils {
            if c.len() != shape.size() {
                return Err(Error::dims("sensitivity map", shape.size(), c.len()));
            }
        }
        Ok(Self { shape, coils })
    }

    pub fn ncoils(&self) -> usize {
        self.coils.len()
    }

    /// Per-voxel sum of squares `sum_c |c_c[d]|^2`.
    pub fn sum_of_squares(&self) -> Vec<f64> {
        let mut sos = vec![0.0; self.shape.size()];
        for c in &self.coils {
            for (s, v) in sos.iter_mut().zip(c) {
                *s += v.norm_sqr();
            }
        }
        sos
    }
}

/// Nonnegative density compensation weights, shared by all coils.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityWeights {
    pub w: Vec<f64>,
}

impl DensityWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidWeight(i));
        }
        Ok(Self { w })
    }

    pub fn sqrt(&self) -> Vec<f64> {
        self.w.iter().map(|v| v.sqrt()).collect()
    }
}

/// Per-coil k-space samples together with the trajectory that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceData {
    pub traj: Trajectory,
    pub coils: Vec<Vec<C64>>,
    /// Whether `y = W^{1/2} k` has already been formed.
    pub weights_applied: bool,
}

impl KSpaceData {
    pub fn new(traj: Trajectory, coils: Vec<Vec<C64>>, weights_applied: bool) -> Result<Self> {
        let n = traj.len();
        for c in &coils {
            if c.len() != n {
                return Err(Error::dims("coil k-space length", n, c.len()));
            }
        }
        Ok(Self {
            traj,
            coils,
            weights_applied,
        })
    }

    pub fn ncoils(&self) -> usize {
        self.coils.len()
    }

    /// Coil-major stacked vector.
    pub fn stacked(&self) -> Vec<C64> {
        self.coils.concat()
    }

    /// Returns `W^{1/2} k` (no-op when already applied or no weights are given).
    pub fn weighted(&self, weights: Option<&DensityWeights>) -> Vec<C64> {
        match (weights, self.weights_applied) {
            (Some(w), false) => {
                let s = w.sqrt();
                self.coils
                    .iter()
                    .flat_map(|c| c.iter().zip(&s).map(|(v, s)| v * s).collect::<Vec<_>>())
                    .collect()
            }
            _ => self.stacked(),
        }
    }
}

/// How the per-coil Fourier transform is realised for non-Cartesian trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum FourierMode {
    /// Exact `O(N D)` exponential sum.
    #[default]
    Direct,
    /// Kaiser-Bessel gridding.
    Gridded(GriddingParams),
}

enum FourierOp {
    Cartesian { fft: CenteredFft, idx: Vec<usize> },
    Direct(DirectNudft),
    Gridded(GriddedNufft),
}

impl FourierOp {
    fn forward(&self, x: &[C64], out: &mut [C64]) {
        match self {
            FourierOp::Cartesian { fft, idx } => {
                let mut buf = x.to_vec();
                fft.forward_unitary(&mut buf);
                for (o, &i) in out.iter_mut().zip(idx) {
                    *o = buf[i];
                }
            }
            FourierOp::Direct(op) => op.forward_into(x, out),
            FourierOp::Gridded(op) => op.forward_into(x, out),
        }
    }

    fn adjoint(&self, y: &[C64], out: &mut [C64]) {
        match self {
            FourierOp::Cartesian { fft, idx } => {
                out.fill(C64::new(0.0, 0.0));
                for (v, &i) in y.iter().zip(idx) {
                    out[i] += v;
                }
                fft.inverse_unitary(out);
            }
            FourierOp::Direct(op) => op.adjoint_into(y, out),
            FourierOp::Gridded(op) => op.adjoint_into(y, out),
        }
    }
}

#[derive(Clone, Debug)]
enum Weighting {
    None,
    Shared(Vec<f64>),
    PerCoil(Vec<Vec<f64>>),
}

/// The encoding operator `A = W^{1/2} F C` from `C^D` to coil-major `C^{C N}`.
///
/// Every forward or adjoint application adds `C` to the shared coil-transform counter.
#[derive(Clone)]
pub struct SenseOperator {
    maps: SensitivityMaps,
    traj: Trajectory,
    weights: Option<DensityWeights>,
    weighting: Weighting,
    fourier: Arc<FourierOp>,
    counter: CostCounter,
}

/// Builds `A` with the exact Fourier path (FFT + mask, or direct non-uniform DFT).
pub fn build_sense(
    maps: &SensitivityMaps,
    traj: &Trajectory,
    weights: Option<&DensityWeights>,
) -> Result<SenseOperator> {
    build_sense_with(maps, traj, weights, FourierMode::Direct)
}

/// Builds `A` choosing how non-Cartesian transforms are evaluated.
pub fn build_sense_with(
    maps: &SensitivityMaps,
    traj: &Trajectory,
    weights: Option<&DensityWeights>,
    mode: FourierMode,
) -> Result<SenseOperator> {
    if maps.shape.ndim() != traj.ndim {
        return Err(Error::dims(
            "trajectory dimensionality",
            maps.shape.ndim(),
            traj.ndim,
        ));
    }
    traj.check_range(&maps.shape)?;
    if let Some(w) = weights {
        if w.w.len() != traj.len() {
            return Err(Error::dims("density weights", traj.len(), w.w.len()));
        }
        DensityWeights::new(w.w.clone())?;
    }
    let fourier = match (traj.kind, mode) {
        (TrajectoryKind::CartesianMask, _) => FourierOp::Cartesian {
            fft: CenteredFft::new(maps.shape.dims()),
            idx: traj.cartesian_indices(&maps.shape)?,
        },
        (TrajectoryKind::NonCartesian, FourierMode::Direct) => {
            FourierOp::Direct(DirectNudft::new(&maps.shape, traj)?)
        }
        (TrajectoryKind::NonCartesian, FourierMode::Gridded(p)) => {
            FourierOp::Gridded(GriddedNufft::new(&maps.shape, traj, p)?)
        }
    };
    Ok(SenseOperator {
        maps: maps.clone(),
        traj: traj.clone(),
        weights: weights.cloned(),
        weighting: match weights {
            Some(w) => Weighting::Shared(w.sqrt()),
            None => Weighting::None,
        },
        fourier: Arc::new(fourier),
        counter: CostCounter::new(),
    })
}

impl SenseOperator {
    pub fn maps(&self) -> &SensitivityMaps {
        &self.maps
    }

    pub fn traj(&self) -> &Trajectory {
        &self.traj
    }

    pub fn shape(&self) -> &GridShape {
        &self.maps.shape
    }

    pub fn weights(&self) -> Option<&DensityWeights> {
        self.weights.as_ref()
    }

    pub fn ncoils(&self) -> usize {
        self.maps.ncoils()
    }

    pub fn nsamples(&self) -> usize {
        self.traj.len()
    }

    pub fn counter(&self) -> &CostCounter {
        &self.counter
    }

    /// Coil transforms performed so far on the shared counter.
    pub fn coil_transforms(&self) -> u64 {
        self.counter.get()
    }

    /// Rebinds the operator to an existing counter.
    pub fn with_counter(mut self, counter: CostCounter) -> Self {
        self.counter = counter;
        self
    }

    /// Same operator on new maps (same trajectory, weights, Fourier plan and counter).
    pub fn with_maps(&self, maps: SensitivityMaps) -> Result<Self> {
        if maps.shape != self.maps.shape {
            return Err(Error::param("replacement maps have a different grid"));
        }
        Ok(Self {
            maps,
            ..self.clone()
        })
    }

    /// Same operator without density weighting (`F C`), sharing the counter.
    pub fn unweighted(&self) -> Self {
        Self {
            weights: None,
            weighting: Weighting::None,
            ..self.clone()
        }
    }

    /// Replaces the weighting by per-coil weights. Such operators cannot be sketched.
    pub fn with_per_coil_weights(&self, weights: Vec<DensityWeights>) -> Result<Self> {
        if weights.len() != self.ncoils() {
            return Err(Error::dims("per-coil weights", self.ncoils(), weights.len()));
        }
        if let Some(w) = weights.iter().find(|w| w.w.len() != self.nsamples()) {
            return Err(Error::dims("density weights", self.nsamples(), w.w.len()));
        }
        Ok(Self {
            weights: None,
            weighting: Weighting::PerCoil(weights.iter().map(|w| w.sqrt()).collect()),
            ..self.clone()
        })
    }

    pub fn has_per_coil_weights(&self) -> bool {
        matches!(self.weighting, Weighting::PerCoil(_))
    }

    fn sqrt_weights(&self, coil: usize) -> Option<&[f64]> {
        match &self.weighting {
            Weighting::None => None,
            Weighting::Shared(w) => Some(w),
            Weighting::PerCoil(ws) => Some(&ws[coil]),
        }
    }

    /// `A_c x` for a single coil; counts one transform.
    pub fn forward_coil(&self, coil: usize, x: &[C64], out: &mut [C64]) {
        self.counter.add(1);
        let tmp: Vec<C64> = x.iter().zip(&self.maps.coils[coil]).map(|(a, b)| a * b).collect();
        self.fourier.forward(&tmp, out);
        if let Some(w) = self.sqrt_weights(coil) {
            for (o, s) in out.iter_mut().zip(w) {
                *o *= s;
            }
        }
    }

    /// `out += A_c^H y_c` for a single coil; counts one transform.
    pub fn adjoint_coil_acc(&self, coil: usize, y: &[C64], out: &mut [C64]) {
        self.counter.add(1);
        let yw: Vec<C64> = match self.sqrt_weights(coil) {
            Some(w) => y.iter().zip(w).map(|(v, s)| v * s).collect(),
            None => y.to_vec(),
        };
        let mut tmp = vecops::zeros(self.maps.shape.size());
        self.fourier.adjoint(&yw, &mut tmp);
        for ((o, t), c) in out.iter_mut().zip(&tmp).zip(&self.maps.coils[coil]) {
            *o += t * c.conj();
        }
    }
}

impl LinOp for SenseOperator {
    fn in_dim(&self) -> usize {
        self.maps.shape.size()
    }
    fn out_dim(&self) -> usize {
        self.ncoils() * self.nsamples()
    }
    fn forward_into(&self, x: &[C64], out: &mut [C64]) {
        let n = self.nsamples();
        for (c, chunk) in out.chunks_exact_mut(n).enumerate() {
            self.forward_coil(c, x, chunk);
        }
    }
    fn adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        let n = self.nsamples();
        out.fill(C64::new(0.0, 0.0));
        for (c, chunk) in y.chunks_exact(n).enumerate() {
            self.adjoint_coil_acc(c, chunk, out);
        }
    }
    fn cost(&self) -> Cost {
        Cost {
            coil_transforms: self.counter.get(),
            transforms: 0,
        }
    }
}

/// Ramp density compensation `w ∝ |f|`, DC samples set to half the smallest nonzero
/// radius, normalised to `max(w) = 1`.
///
/// The radius is measured in the last two axes, so a 3D stack of radial spokes gets
/// the in-plane ramp.
pub fn radial_density_weights(traj: &Trajectory) -> DensityWeights {
    let skip = traj.ndim.saturating_sub(2);
    let radii: Vec<f64> = (0..traj.len())
        .map(|i| traj.point(i)[skip..].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let eps = 1e-12;
    let rmin = radii
        .iter()
        .cloned()
        .filter(|&r| r > eps)
        .fold(f64::INFINITY, f64::min);
    if !rmin.is_finite() {
        return DensityWeights {
            w: vec![1.0; radii.len()],
        };
    }
    let mut w: Vec<f64> = radii
        .iter()
        .map(|&r| if r > eps { r } else { 0.5 * rmin })
        .collect();
    let max = w.iter().cloned().fold(0.0, f64::max);
    w.iter_mut().for_each(|v| *v /= max);
    DensityWeights { w }
}

/// SVD coil compression computed from k-space data.
#[derive(Clone, Debug)]
pub struct CoilCompression {
    /// `keep x C` matrix mapping physical to virtual coils.
    pub matrix: DMatrix<C64>,
    /// All singular values of the `C x N` data matrix, descending.
    pub singular_values: Vec<f64>,
    pub energy_fraction: f64,
}

impl CoilCompression {
    /// Computes the energy-ordered virtual-coil basis of `data` and keeps `keep` coils.
    pub fn from_data(data: &KSpaceData, keep: usize) -> Result<Self> {
        let c = data.ncoils();
        if keep == 0 || keep > c {
            return Err(Error::param(format!("keep = {keep} outside 1..={c}")));
        }
        let mut gram = DMatrix::<C64>::zeros(c, c);
        for i in 0..c {
            for j in i..c {
                let v = vecops::dot(&data.coils[j], &data.coils[i]);
                gram[(i, j)] = v;
                gram[(j, i)] = v.conj();
            }
        }
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..c).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let sv: Vec<f64> = order
            .iter()
            .map(|&i| eig.eigenvalues[i].max(0.0).sqrt())
            .collect();
        let mut matrix = DMatrix::<C64>::zeros(keep, c);
        for (v, &i) in order.iter().take(keep).enumerate() {
            for p in 0..c {
                matrix[(v, p)] = eig.eigenvectors[(p, i)].conj();
            }
        }
        let total: f64 = sv.iter().map(|s| s * s).sum();
        let kept: f64 = sv.iter().take(keep).map(|s| s * s).sum();
        Ok(Self {
            matrix,
            singular_values: sv,
            energy_fraction: if total > 0.0 { kept / total } else { 1.0 },
        })
    }

    /// Smallest `keep` retaining at least `fraction` of the data energy.
    pub fn keep_for_energy(singular_values: &[f64], fraction: f64) -> usize {
        let total: f64 = singular_values.iter().map(|s| s * s).sum();
        let mut acc = 0.0;
        for (i, s) in singular_values.iter().enumerate() {
            acc += s * s;
            if acc >= fraction * total * (1.0 - 1e-12) {
                return i + 1;
            }
        }
        singular_values.len()
    }

    pub fn keep(&self) -> usize {
        self.matrix.nrows()
    }

    fn combine(&self, coils: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let len = coils[0].len();
        (0..self.keep())
            .map(|v| {
                let mut out = vecops::zeros(len);
                for (p, c) in coils.iter().enumerate() {
                    let m = self.matrix[(v, p)];
                    if m != C64::new(0.0, 0.0) {
                        vecops::axpy(m, c, &mut out);
                    }
                }
                out
            })
            .collect()
    }

    pub fn apply_data(&self, data: &KSpaceData) -> Result<KSpaceData> {
        if data.ncoils() != self.matrix.ncols() {
            return Err(Error::dims("coil count", self.matrix.ncols(), data.ncoils()));
        }
        KSpaceData::new(
            data.traj.clone(),
            self.combine(&data.coils),
            data.weights_applied,
        )
    }

    pub fn apply_maps(&self, maps: &SensitivityMaps) -> Result<SensitivityMaps> {
        if maps.ncoils() != self.matrix.ncols() {
            return Err(Error::dims("coil count", self.matrix.ncols(), maps.ncoils()));
        }
        SensitivityMaps::new(maps.shape.clone(), self.combine(&maps.coils))
    }
}

/// Compresses data and maps to the `keep` highest-energy virtual coils.
///
/// Returns the compressed data, compressed maps, the `keep x C` compression matrix
/// and the retained energy fraction.
pub fn coil_compress_svd(
    data: &KSpaceData,
    maps: &SensitivityMaps,
    keep: usize,
) -> Result<(KSpaceData, SensitivityMaps, DMatrix<C64>, f64)> {
    if maps.ncoils() != data.ncoils() {
        return Err(Error::dims("map coil count", data.ncoils(), maps.ncoils()));
    }
    let cc = CoilCompression::from_data(data, keep)?;
    Ok((
        cc.apply_data(data)?,
        cc.apply_maps(maps)?,
        cc.matrix.clone(),
        cc.energy_fraction,
    ))
}
