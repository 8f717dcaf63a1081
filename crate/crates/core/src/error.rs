use thiserror::Error;

/// Errors raised across the surrogate / optimization pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid marginal: {0}")]
    InvalidMarginal(String),

    #[error("degenerate measure: squared norm h_{degree} = {value:e} is not positive")]
    DegenerateMeasure { degree: usize, value: f64 },

    #[error("degree {degree} out of range (basis built up to {max})")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("invalid truncation N={n}, S={s}, m={m}: need 1 <= S <= N and m >= S")]
    InvalidTruncation { n: usize, s: usize, m: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("SVD failed: {0}")]
    SvdFailure(String),

    #[error("actual values are constant; R^2 undefined")]
    DegenerateActuals,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-positive mean {0:e} in objective")]
    NonPositiveMean(f64),

    #[error("design point out of bounds: {0}")]
    OutOfBounds(String),

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("mole fractions sum to {0}, expected 1")]
    FractionSumViolation(f64),

    #[error("at least two outlet records are required, got {0}")]
    InsufficientRecords(usize),

    #[error("outlet time stamps must be non-decreasing (record {0})")]
    NonMonotoneTime(usize),

    #[error("input outside model support: {0}")]
    OutOfSupport(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error stems from bad configuration or input data (as
    /// opposed to a numerical breakdown).
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::DegenerateMeasure { .. }
                | Error::SvdFailure(_)
                | Error::DegenerateActuals
                | Error::NonPositiveMean(_)
        )
    }
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMarginal(_) => "invalid_marginal",
            Error::DegenerateMeasure { .. } => "degenerate_measure",
            Error::DegreeOutOfRange { .. } => "degree_out_of_range",
            Error::InvalidTruncation { .. } => "invalid_truncation",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NonFiniteInput(_) => "non_finite_input",
            Error::InsufficientData(_) => "insufficient_data",
            Error::SvdFailure(_) => "svd_failure",
            Error::DegenerateActuals => "degenerate_actuals",
            Error::InvalidConfig(_) => "invalid_config",
            Error::NonPositiveMean(_) => "non_positive_mean",
            Error::OutOfBounds(_) => "out_of_bounds",
            Error::NonPositiveTemperature(_) => "non_positive_temperature",
            Error::FractionSumViolation(_) => "fraction_sum_violation",
            Error::InsufficientRecords(_) => "insufficient_records",
            Error::NonMonotoneTime(_) => "non_monotone_time",
            Error::OutOfSupport(_) => "out_of_support",
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
