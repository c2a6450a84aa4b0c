use thiserror::Error;

/// Everything that can go wrong in the library.
///
/// Math failures carry a witness describing the first offending item.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("one-form not closed: d/dz_{j} of component {l} differs from d/dz_{l} of component {j} at {monomial}")]
    NotClosed { j: usize, l: usize, monomial: String },

    #[error("no consistent primitive: component {component} disagrees at {monomial}")]
    InconsistentPrimitive { component: usize, monomial: String },

    #[error("not symmetric: {0}")]
    NotSymmetric(String),

    #[error("tau-dependent value where a rational one is required: {0}")]
    TauPresent(String),

    #[error("not nilpotent: {0}")]
    NotNilpotent(String),

    #[error("not of Hodge-Tate type: {0}")]
    NotHodgeTate(String),

    #[error("not polarizable: {0}")]
    NotPolarizable(String),

    #[error("degenerate cone: {0}")]
    ConeDegenerate(String),

    #[error("not maximally unipotent: {0}")]
    NotMaximallyUnipotent(String),

    #[error("grading violation: {0}")]
    GradingViolation(String),

    #[error("index {0} is not a divisor index")]
    NotDivisorIndex(usize),

    #[error("integrability fails: {0}")]
    NotIntegrable(String),

    #[error("log part nonzero: {0}")]
    LogPartNonzero(String),

    #[error("not canonical: {0}")]
    NotCanonical(String),

    #[error("integration inconsistent: {0}")]
    IntegrationInconsistent(String),

    #[error("not flat: {0}")]
    NotFlat(String),

    #[error("invalid module: {0}")]
    InvalidModule(String),

    #[error("malformed orbit: {0}")]
    MalformedOrbit(String),

    #[error("no rational adapted basis: {0}")]
    NoRationalAdaptedBasis(String),

    #[error("unsupported weight {0}")]
    UnsupportedWeight(u32),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("internal: {0}")]
    Internal(String),
}

impl Error {
    /// Input errors are problems with the data handed in, as opposed to
    /// mathematical conditions that fail.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::IndexOutOfRange { .. }
                | Error::ShapeMismatch(_)
                | Error::UnsupportedWeight(_)
                | Error::MalformedOrbit(_)
                | Error::NotDivisorIndex(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
