use thiserror::Error;

use crate::critical::MembershipReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid contrast: {0}")]
    InvalidContrast(String),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("difference matrix is singular at mode m={m} (mu={mu})")]
    SingularMode { m: i64, mu: f64 },

    #[error("radius {r} outside piece interval [{lo}, {hi}]")]
    OutOfInterval { r: f64, lo: f64, hi: f64 },

    #[error(
        "source is not in the range of the critical operator (limiting ratio {ratio:.6} > 1); \
         the sum over D_m^-1 traces diverges"
    )]
    NotInRange {
        ratio: f64,
        report: Box<MembershipReport>,
    },

    #[error("regularized mode system is numerically singular at m={m}, delta={delta:e}")]
    SingularSystem { m: i64, delta: f64 },

    #[error("finite-difference system is singular (pivot {pivot:e} at row {row})")]
    SingularDiscreteSystem { row: usize, pivot: f64 },

    #[error("mode window [{lo}, {hi}] too small: need at least {min} modes")]
    WindowTooSmall { lo: i64, hi: i64, min: usize },

    #[error("mode window [{lo}, {hi}] outside [{min_lo}, {m_max}]")]
    WindowOutOfRange {
        lo: i64,
        hi: i64,
        min_lo: i64,
        m_max: i64,
    },

    #[error("invalid delta grid: {0}")]
    InvalidDeltaGrid(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl Error {
    /// Stable machine-readable identifier, used in JSON error objects.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "invalid_geometry",
            Error::InvalidContrast(_) => "invalid_contrast",
            Error::InvalidSource(_) => "invalid_source",
            Error::SingularMode { .. } => "singular_mode",
            Error::OutOfInterval { .. } => "out_of_interval",
            Error::NotInRange { .. } => "not_in_range",
            Error::SingularSystem { .. } => "singular_system",
            Error::SingularDiscreteSystem { .. } => "singular_discrete_system",
            Error::WindowTooSmall { .. } => "window_too_small",
            Error::WindowOutOfRange { .. } => "window_out_of_range",
            Error::InvalidDeltaGrid(_) => "invalid_delta_grid",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::Parse { .. } => "parse_error",
            Error::Validation { .. } => "validation_error",
        }
    }
}
