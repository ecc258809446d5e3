//! Exact simulation of walks driven by expanding maps whose choice depends on
//! a frozen random labelling of the tiles.
//!
//! Points on the torus are kept as integer numerators over a shared
//! denominator, so every step `x ↦ Mx mod 1` is exact.

pub mod bigrat;
pub mod environment;
pub mod error;
pub mod geometry;
pub mod model1d;
pub mod model2d;
pub mod rng;
pub mod stats;

pub type Rational = num_rational::BigRational;

pub use bigrat::{ExactPoint, IntMatrix};
pub use environment::Environment;
pub use error::{Error, Result};
pub use model1d::{Analytic1D, Ensemble1D, Mode, Params1D};
pub use model2d::{Analytic2D, Ensemble2D, Params2D};
pub use stats::EnsembleSummary;
