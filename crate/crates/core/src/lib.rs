//! Coil-sketched iterative MR image reconstruction.
//!
//! The crate is organised bottom-up:
//!
//! - [`linop`]: linear-operator algebra and the concrete transforms (centered FFT,
//!   non-uniform DFT / Kaiser-Bessel gridding, Daubechies-4 wavelets, periodic
//!   finite differences, power iteration).
//! - [`sense`]: the multi-coil encoding operator `A = W^{1/2} F C`, density
//!   compensation and SVD coil compression.
//! - [`sketch`]: the block-structured coil sketching matrix and the reduced
//!   sketched encoding operator.
//! - [`solvers`]: CG, FISTA, PDHG and accelerated proximal SGD.
//! - [`coil_sketch`]: the outer iterative-Hessian-sketch loop.
//! - [`simulate`], [`metrics`]: synthetic data and evaluation.
//! - [`experiment`], [`cli`]: reconstruction methods, testbeds and the batch front-end.

pub mod coil_sketch;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod linop;
pub mod metrics;
pub mod sense;
pub mod simulate;
pub mod sketch;
pub mod solvers;
pub mod vecops;

pub use error::{Error, Result};
pub use grid::{GridShape, Image, Trajectory, TrajectoryKind};
pub use num_complex::Complex64 as C64;
