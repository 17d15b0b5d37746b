use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("size limit exceeded: {what} needs {requested}, cap is {cap}")]
    SizeLimit {
        what: &'static str,
        requested: u128,
        cap: usize,
    },

    #[error("non-finite entry at flat index {0}")]
    NonFinite(usize),

    /// A coefficient or exponent matrix does not lie in the symmetry class
    /// required by its particle statistics.
    #[error("violates {condition} (deviation {deviation:.3e} > tolerance {tolerance:.0e})")]
    Symmetry {
        condition: String,
        deviation: f64,
        tolerance: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("singular normalization: det(exp(MJ) - I) vanishes")]
    SingularNormalization,

    #[error("invalid state: {0}")]
    StateValidity(String),

    /// The truncated bosonic space is too small for the requested state or
    /// trajectory.
    #[error("truncation alarm: {0}")]
    Truncation(String),

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("configuration error: {0}")]
    Configuration(String),
}
