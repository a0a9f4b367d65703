use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// `mu > 0` where `lambda = 0`: the target is not absolutely continuous
    /// with respect to the base intensity.
    #[error("incompatible intensity: mu = {mu} where lambda = 0")]
    IncompatibleIntensity { mu: f64 },

    #[error("time {t} lies outside the horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("thinning envelope violated at t = {time}: intensity {intensity} > envelope {envelope}")]
    EnvelopeViolation {
        time: f64,
        intensity: f64,
        envelope: f64,
    },

    #[error("degenerate coefficient: b_{index} = 0")]
    DegenerateCoefficient { index: usize },

    #[error("step {step} is too coarse for horizon {horizon} (need step <= horizon / 10)")]
    StepTooCoarse { step: f64, horizon: f64 },

    #[error("diffusion-driven intensity requires an auxiliary diffusion path")]
    MissingAux,

    #[error("base intensity `{0}` is not supported; the base law must be simulable directly")]
    UnsupportedBase(String),

    #[error("divergent regime: beta * w * d = {product} >= 1")]
    DivergentRegime { product: f64 },

    #[error("delta must be positive, got {0}")]
    NonpositiveDelta(f64),

    #[error("link function violates phi(x) <= |x| at x = {x} (phi(x) = {value})")]
    PhiBoundViolated { x: f64, value: f64 },

    #[error("intensity `{0}` cannot be simulated directly; use cross-proposal importance sampling")]
    NotDirectlySimulable(String),

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("epsilon must lie in [0, 1), got {0}")]
    EpsOutOfRange(f64),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("schema error at `{path}`: {reason}")]
    Schema { path: String, reason: String },

    #[error("invariant violated at `{path}`: {reason}")]
    Invariant { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
