use crate::rational::{format_rational, ParseRationalError, Rational};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("joint space of {size} {what} exceeds the cap of {cap}")]
    CapExceeded { what: &'static str, size: String, cap: u64 },

    #[error("element {element} does not have a finite-support distribution")]
    NotFinite { element: String },

    #[error("agent {agent} owns no elements")]
    NoElements { agent: usize },

    #[error("no exact threshold exists: atom at x' = {}", format_rational(.x_prime))]
    Atom { x_prime: Rational },

    #[error("unknown element or outcome `{0}`")]
    UnknownElement(String),

    #[error("agent {agent} submitted more than one proposal")]
    DuplicateProposal { agent: usize },

    #[error("report does not cover every element")]
    IncompleteReport,

    #[error("operation requires a {expected} instance")]
    WrongFlavor { expected: &'static str },

    #[error("instance is not agent-symmetric")]
    NotAgentSymmetric,

    #[error("instance is not fully symmetric")]
    NotFullySymmetric,

    #[error("instance has atoms; use the atom-split plan")]
    HasAtoms,

    #[error("probability of the all-lowest event is zero")]
    ZeroP,

    #[error("expected optimum is zero")]
    ZeroOpt,

    #[error("element pool is empty")]
    EmptyPool,

    #[error("pool of {n} elements cannot be split evenly among {k} agents")]
    IndivisiblePool { n: usize, k: usize },

    #[error("no pure-strategy equilibrium exists")]
    NoPureEquilibrium,

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("invalid model: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CapExceeded { .. } => 3,
            Error::NoPureEquilibrium => 5,
            Error::Domain(_) | Error::InvalidRange(_) | Error::Parse(_) | Error::Io(_) => 2,
            _ => 4,
        }
    }

    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::NotFinite { .. } => "not_finite",
            Error::NoElements { .. } => "no_elements",
            Error::Atom { .. } => "atom",
            Error::UnknownElement(_) => "unknown_element",
            Error::DuplicateProposal { .. } => "duplicate_proposal",
            Error::IncompleteReport => "incomplete_report",
            Error::WrongFlavor { .. } => "wrong_flavor",
            Error::NotAgentSymmetric => "not_agent_symmetric",
            Error::NotFullySymmetric => "not_fully_symmetric",
            Error::HasAtoms => "has_atoms",
            Error::ZeroP => "zero_p",
            Error::ZeroOpt => "zero_opt",
            Error::EmptyPool => "empty_pool",
            Error::IndivisiblePool { .. } => "indivisible_pool",
            Error::NoPureEquilibrium => "no_pure_equilibrium",
            Error::Domain(_) => "domain",
            Error::InvalidRange(_) => "invalid_range",
            Error::Invalid(_) => "invalid_model",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<ParseRationalError> for Error {
    fn from(e: ParseRationalError) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
