use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (only 2 and 3 are implemented)")]
    Dimension(usize),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("parameter {value} out of range for {what}: expected {range}")]
    ParameterOutOfRange {
        what: String,
        value: f64,
        range: String,
    },

    #[error("Bessel zero request out of range: order {order}, index {index}")]
    BesselRange { order: f64, index: usize },

    #[error("point at radius {radius} lies outside the ball of radius {ball_radius}")]
    OutsideBall { radius: f64, ball_radius: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (best residuals {residuals:?})")]
    SolverFailure {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("spacing mismatch: fine spacing {fine} is not half of coarse spacing {coarse}")]
    SpacingMismatch { coarse: f64, fine: f64 },

    #[error("Rayleigh quotient of the zero function")]
    ZeroVector,

    #[error("shell starting at radius {radius} lies outside the raster")]
    EmptyShell { radius: f64 },

    #[error("extension radius {radius} exceeds the grid extent {extent}")]
    GridExtent { radius: f64, extent: f64 },

    #[error("competitor span is degenerate: smallest Gram singular value {sigma_min}")]
    DegenerateSpan { sigma_min: f64 },

    #[error("insufficient data for a power-law fit: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
