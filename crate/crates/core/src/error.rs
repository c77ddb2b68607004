use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid precision: bits={bits}, guard_bits={guard_bits} (need bits >= 64, guard_bits >= 32)")]
    InvalidPrecision { bits: u32, guard_bits: u32 },
    #[error("gamma has a pole at {0}")]
    GammaPole(i64),
    #[error("insufficient data: need {needed} entries, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("singular linear system in Padé [{m}/{n}]")]
    SingularSystem { m: usize, n: usize },
    #[error("terminal ray at angle {angle} does not decay for x = {x}")]
    NonDecayingRay { angle: f64, x: String },
    #[error("quadrature did not converge: {0}")]
    QuadratureNonconvergence(String),
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("unknown equation `{0}`")]
    UnknownEquation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no oracle available for `{0}`")]
    OracleUnavailable(String),
    #[error("ODE integration did not converge: {0}")]
    IntegrationNonconvergence(String),
    #[error("coefficient table too short: K = {k}, need at least {needed}")]
    TableTooShort { k: usize, needed: usize },
    #[error("no reference solution: {0}")]
    NoReference(String),
    #[error("point {0} is a recorded singularity of the Borel transform")]
    AtSingularity(String),
    #[error("point {p} is outside the continuation trust region (radius {radius})")]
    OutsideTrustRegion { p: String, radius: f64 },
    #[error("averaging depth {0} needs a closed-form Borel continuation")]
    UnsupportedDepth(usize),
    #[error("oscillation detected in Stokes inversion: {0}")]
    OscillationDetected(String),
    #[error("late-term model unavailable: {0}")]
    ModelUnavailable(String),
    #[error("anti-Stokes reading did not converge: {0}")]
    NonConvergence(String),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("mode separation failed: {0}")]
    ModeSeparation(String),
    #[error("schema error: {0}")]
    Schema(String),
}

impl Error {
    /// Schema errors are caller mistakes; everything else is numerical.
    pub fn is_schema(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::UnknownEquation(_)
                | Error::InvalidParameter(_)
                | Error::InvalidPrecision { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
