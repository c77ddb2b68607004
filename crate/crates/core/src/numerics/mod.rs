//! Big-float kernel: special functions, extrapolation, rational
//! approximation, contour quadrature and a Taylor ODE integrator.

pub mod erf;
pub mod gamma;
pub mod ode;
pub mod pade;
pub mod precision;
pub mod quad;
pub mod richardson;

pub use erf::{erf_c64, erf_complex, erf_f64};
pub use gamma::{gamma_complex, Spouge};
pub use pade::{pade, pade_reduced, PadeApproximant};
pub use precision::PrecisionContext;
pub use quad::{quad_laplace, Contour, LaplaceQuadrature, SideTag};
pub use richardson::{richardson, richardson_with_error, Extrapolated};
