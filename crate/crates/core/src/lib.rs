//! Numerical laboratory for infinitely divisible ground states.
//!
//! Starting from an even Lévy density `sigma`, the pipeline inverts
//! `C(s) = exp(-psi(s))` to the ground-state density, builds the potential
//! that makes it a zero-energy state, solves for the low-lying spectrum and
//! position matrix elements, and evaluates the truncated four-point
//! diagnostic `chi2` at small, large and finite window length `T`.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.

pub mod correlators;
pub mod divdiff;
pub mod error;
pub mod grid;
pub mod interp;
pub mod levy;
pub mod linalg;
pub mod quadrature;
pub mod reconstruct;
pub mod reference;
pub mod sampler;
pub mod scalar;
pub mod schrodinger;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use scalar::Real;

pub type GridSpec = grid::GridSpec<f64>;
pub type GridFunction = grid::GridFunction<f64>;
pub type LevyDensity = levy::LevyDensity<f64>;
pub type LevyFamily = levy::LevyFamily<f64>;
pub type CharacteristicSamples = levy::CharacteristicSamples<f64>;
pub type Spectrum = schrodinger::Spectrum<f64>;
pub type MatrixElements = schrodinger::MatrixElements<f64>;
pub type Chi2Report = correlators::Chi2Report<f64>;
pub type ReferenceModel = reference::ReferenceModel<f64>;
