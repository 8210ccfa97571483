//! Image grids, images and k-space trajectories.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular 2D or 3D grid, stored in C order (last axis fastest).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    dims: Vec<usize>,
}

impl GridShape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if !(2..=3).contains(&dims.len()) {
            return Err(Error::InvalidShape(format!(
                "expected 2 or 3 dimensions, got {}",
                dims.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidShape(format!("dimension {d} < 2")));
        }
        Ok(Self {
            dims: dims.to_vec(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Voxel count `D`.
    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    /// C-order strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for a in (0..self.dims.len().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.dims[a + 1];
        }
        s
    }

    /// Centered integer coordinate `index - dim/2` of every voxel along each axis.
    pub fn centered_coords(&self, flat: usize) -> Vec<i64> {
        let mut rem = flat;
        let mut out = vec![0i64; self.dims.len()];
        for a in (0..self.dims.len()).rev() {
            let n = self.dims[a];
            out[a] = (rem % n) as i64 - (n / 2) as i64;
            rem /= n;
        }
        out
    }
}

/// Complex image on a [`GridShape`].
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub shape: GridShape,
    pub values: Vec<C64>,
}

impl Image {
    pub fn new(shape: GridShape, values: Vec<C64>) -> Result<Self> {
        if values.len() != shape.size() {
            return Err(Error::dims("image values", shape.size(), values.len()));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::param("image contains non-finite values"));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: GridShape) -> Self {
        let n = shape.size();
        Self {
            shape,
            values: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn from_real(shape: GridShape, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    CartesianMask,
    NonCartesian,
}

/// k-space sample locations in cycles/FOV, one row of `ndim` coordinates per sample,
/// axes ordered like the grid dims.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub ndim: usize,
    pub points: Vec<f64>,
    pub kind: TrajectoryKind,
}

impl Trajectory {
    pub fn new(ndim: usize, points: Vec<f64>, kind: TrajectoryKind) -> Result<Self> {
        if ndim == 0 || !points.len().is_multiple_of(ndim) || points.is_empty() {
            return Err(Error::param(format!(
                "trajectory needs a non-empty multiple of {ndim} coordinates, got {}",
                points.len()
            )));
        }
        if kind == TrajectoryKind::CartesianMask && points.iter().any(|p| p.fract() != 0.0) {
            return Err(Error::param("cartesian-mask trajectory with non-integer coordinate"));
        }
        Ok(Self { ndim, points, kind })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.ndim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.ndim..(i + 1) * self.ndim]
    }

    /// Checks every coordinate lies in `[-dim/2, dim/2)`.
    pub fn check_range(&self, shape: &GridShape) -> Result<()> {
        if shape.ndim() != self.ndim {
            return Err(Error::dims("trajectory dimensionality", shape.ndim(), self.ndim));
        }
        for i in 0..self.len() {
            for (a, (&f, &n)) in self.point(i).iter().zip(shape.dims()).enumerate() {
                let half = n as f64 / 2.0;
                if !(f >= -half && f < half) {
                    return Err(Error::TrajectoryOutOfRange {
                        index: i,
                        axis: a,
                        value: f,
                    });
                }
            }
        }
        Ok(())
    }

    /// Flat grid index of every sample of a Cartesian mask (DC at `dim/2`).
    pub fn cartesian_indices(&self, shape: &GridShape) -> Result<Vec<usize>> {
        self.check_range(shape)?;
        let strides = shape.strides();
        Ok((0..self.len())
            .map(|i| {
                self.point(i)
                    .iter()
                    .zip(shape.dims())
                    .zip(&strides)
                    .map(|((&f, &n), &s)| (f as i64 + (n / 2) as i64) as usize * s)
                    .sum()
            })
            .collect())
    }
}
