use thiserror::Error;

/// Errors raised by the core library. Every variant describes a caller
/// mistake (bad parameters, oversized budgets); the simulation kernel itself
/// never fails once a configuration has been validated.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degree d = 2*d1 + d2 = {d} is below the minimum of {min}")]
    DegreeTooSmall { d: usize, min: usize },

    #[error("degree d = {0} exceeds the supported maximum of 255 generators")]
    DegreeTooLarge(usize),

    #[error("{name} = {value} is outside {range}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("urn is empty: the first step is uniform and has no conditional law")]
    EmptyUrn,

    #[error("{0}")]
    Undefined(String),

    #[error("exact enumeration needs {paths} paths at n = {n} (limits: n <= {max_n}, paths <= {max_paths})")]
    EnumerationBudget {
        n: usize,
        paths: f64,
        max_n: usize,
        max_paths: f64,
    },

    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),

    #[error("accumulator mismatch: {0}")]
    Mismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
