//! Numerical laboratory for configuration measures and group-correlation
//! energy integrals.

pub mod config_map;
pub mod error;
pub mod fourier;
pub mod identity;
pub mod measure;
pub mod mollify;
pub mod group;
pub mod presets;
pub mod scalar;
pub mod seeding;

pub use error::{LabError, Result};
pub use scalar::Scalar;

/// Concrete `f64` aliases for the common case.
pub type Measure64 = measure::PointMassMeasure<f64>;
pub type Grid64 = mollify::GridDensity<f64>;
pub type Mollifier64 = mollify::Mollifier<f64>;
