//! Fourier pseudospectral simulation, localized damping feedback and exact
//! control synthesis for the dispersion generalized Benjamin equation
//!
//! ```text
//! ∂_t u + β D^{2m} ∂_x u + α H^{2r} ∂_x u + ∂_x(u²) = -G D^δ G u + G h
//! ```
//!
//! on the circle `T = R/2πZ`.

pub mod control;
pub mod damping;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod spectral;
pub mod symbols;

pub use error::{Error, Result};

pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
pub type CVector = nalgebra::DVector<num_complex::Complex64>;
