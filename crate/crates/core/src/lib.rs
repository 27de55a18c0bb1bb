//! s-diagonalization of shift-preserving operators acting on finitely
//! generated shift-invariant spaces of `L²(ℝ^d)`.
//!
//! Every object lives on a [`FrequencyGrid`]: a uniform cell-centred sampling
//! of the torus `[0,1)^d`. Measurable sets become cell masks, "almost
//! everywhere" becomes "on every cell", and essential suprema become maxima.
//!
//! The pipeline is
//!
//! 1. [`fiberize`]: fibers `Tφ_i(ω)` of the generators and an orthonormal
//!    frame of each fiber space `J(ω)`;
//! 2. [`rangeop`]: the range operator as a matrix field `[R](ω)`, with
//!    adjoints, norms, inverses and measurable kernels;
//! 3. [`eigen`]: per-fiber spectra and the pasted eigenvalue functions `λ_j`;
//! 4. [`sdiag`]: the angle test, the s-diagonalization and its synthesis;
//! 5. [`signal`]: the same operators acting on coefficient sequences.
//!
//! [`FrequencyGrid`]: fields::FrequencyGrid

pub mod catalog;
pub mod cli;
pub mod eigen;
pub mod error;
pub mod fiberize;
pub mod fields;
pub mod linalg;
pub mod problem;
pub mod rangeop;
pub mod sdiag;
pub mod signal;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
