//! Hausdorff dimension and Hausdorff measure of the truncated Gauss system and
//! its piecewise-linear analogue.
//!
//! Geometry in [`ifs`] is generic over [`scalar::Scalar`]; the aliases below
//! fix the two instantiations used by the numerics and the exact checks.

pub mod cli;
pub mod conformal;
pub mod density;
pub mod dimension;
pub mod error;
pub mod ifs;
pub mod scalar;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};

/// Interval with `f64` endpoints.
pub type Interval = ifs::IntervalX<f64>;
/// Interval with exact rational endpoints.
pub type ExactInterval = ifs::IntervalX<scalar::Rational>;
/// Cylinder with `f64` endpoints.
pub type FloatCylinder = ifs::Cylinder<f64>;
/// Cylinder with exact rational endpoints.
pub type ExactCylinder = ifs::Cylinder<scalar::Rational>;
