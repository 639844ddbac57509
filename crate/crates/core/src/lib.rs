//! Weighted Poincaré chaos expansions for global sensitivity analysis.
//!
//! The crate builds, for any bounded continuous 1-D input distribution and
//! positive weight, the orthonormal eigenbasis of the weighted diffusion
//! operator (the Poincaré basis), tensorizes it into a chaos basis, fits
//! coefficients from model values and gradients with sparse regression and
//! reads Sobol' indices and weighted DGSMs straight off the coefficients.
//!
//! Module map:
//! - [`measures`]: input distributions, quantiles, sampling
//! - [`weights`]: constant and linear-preserving (Stein kernel) weights
//! - [`spectral`]: finite-element construction of the univariate bases
//! - [`chaos`]: truncation sets, design matrices, surrogate evaluation
//! - [`regression`]: LARS with leave-one-out selection and the three fitters
//! - [`gsa`]: Sobol' indices, DGSMs and the Poincaré bound
//! - [`bench`]: benchmark models and Monte Carlo reference indices
//! - [`experiment`]: batch experiment runner used by the CLI

pub mod bench;
pub mod chaos;
pub mod error;
pub mod experiment;
pub mod gsa;
pub mod interp;
pub mod measures;
pub mod quadrature;
pub mod regression;
pub mod seeds;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
