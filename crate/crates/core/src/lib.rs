//! Principal regression analysis of instantaneous asset correlations.
//!
//! The model: the date-t product of two assets' standardized returns is an
//! unbiased draw of their instantaneous correlation, and that correlation
//! responds linearly to a lagged market indicator. Regressing every pair on
//! the indicator yields an intercept matrix C (the unconditional
//! correlation) and a sensitivity matrix D whose spectrum says how the
//! correlation structure moves: a large negative bottom eigenvalue with its
//! eigenvector aligned to the market mode means correlations rise across
//! the board when the indicator falls.
//!
//! Everything is generic over the scalar type through [`scalar::Scalar`]
//! (`f32` or `f64`); the crate-root aliases fix the default precision.
//! All randomized computations draw from counter-derived substreams
//! ([`rng::substream`]), so results are reproducible at any thread count.

pub mod analysis;
pub mod error;
pub mod indicators;
pub mod matrix;
pub mod panel;
pub mod pra;
pub mod rng;
pub mod scalar;
pub mod significance;
pub mod spectra;
pub mod stats;
pub mod synthetic;

pub use error::{CoreError, Result};

/// Default precision for the concrete aliases below.
pub type Real = f64;
/// Dense matrix at default precision.
pub type Matrix = matrix::Mat<Real>;
/// Returns panel at default precision.
pub type Panel = panel::ReturnsPanel<Real>;
/// Conditioning series at default precision.
pub type Series = indicators::Indicator<Real>;
/// Regression output at default precision.
pub type Fit = pra::PraFit<Real>;
