use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report. Each variant maps to exactly one
/// stable machine-readable code via [`Error::code`].
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("unbounded sensitivity: {0}")]
    UnboundedSensitivity(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible distribution class: {0}")]
    IncompatibleTheta(String),

    #[error("missing approximation: {0}")]
    MissingApproximation(String),

    #[error("non-constant conditional variance: {0}")]
    NonConstantVariance(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("unknown node: {0}")]
    UnknownNode(String),

    #[error("vacuous secret: {0}")]
    VacuousSecret(String),

    #[error("no admissible quilt: {0}")]
    NoAdmissibleQuilt(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::DomainMismatch(_) => "domain_mismatch",
            Error::UnboundedSensitivity(_) => "unbounded_sensitivity",
            Error::DegenerateCovariance(_) => "degenerate_covariance",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::IncompatibleTheta(_) => "incompatible_theta",
            Error::MissingApproximation(_) => "missing_approximation",
            Error::NonConstantVariance(_) => "nonconstant_variance",
            Error::SupportMismatch(_) => "support_mismatch",
            Error::UnknownNode(_) => "unknown_node",
            Error::VacuousSecret(_) => "vacuous_secret",
            Error::NoAdmissibleQuilt(_) => "no_admissible_quilt",
            Error::Json(_) => "malformed_json",
            Error::Io(_) => "io",
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }

    /// All codes, in declaration order.
    pub const CODES: &'static [&'static str] = &[
        "invalid_config",
        "invalid_dataset",
        "domain_mismatch",
        "unbounded_sensitivity",
        "degenerate_covariance",
        "invalid_parameter",
        "incompatible_theta",
        "missing_approximation",
        "nonconstant_variance",
        "support_mismatch",
        "unknown_node",
        "vacuous_secret",
        "no_admissible_quilt",
        "malformed_json",
        "io",
    ];
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::InvalidDataset(format!("{other:?}")),
            }
        } else {
            Error::InvalidDataset(e.to_string())
        }
    }
}
