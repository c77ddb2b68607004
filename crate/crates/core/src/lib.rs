//! Exponential asymptotics at desk scale: least-term truncation of divergent
//! series, lateral and averaged Borel–Laplace sums, Stokes constants from late
//! coefficients, and the erf smoothing of Stokes jumps.

pub mod berry;
pub mod borel;
pub mod equations;
pub mod error;
pub mod numerics;
pub mod run;
pub mod stokes;
pub mod truncation;

pub use error::{Error, Result};
pub use numerics::PrecisionContext;
