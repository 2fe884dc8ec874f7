//! Error type shared across the crate.

use thiserror::Error;

/// Errors reported by model construction, solvers, samplers and I/O.
#[derive(Debug, Error)]
pub enum FieldError {
    /// Pattern text could not be parsed or violates the pattern grammar.
    #[error("invalid pattern `{text}`: {reason}")]
    Pattern { text: String, reason: String },

    /// A model, distribution or configuration failed an invariant check.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Corpus ingestion rejected a line.
    #[error("corpus line {line}: {reason}")]
    Corpus { line: usize, reason: String },

    /// Input was empty where at least one record is required.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Enumeration refused: the configuration space exceeds the budget.
    #[error("enumeration refused: {configs} configurations exceed budget {budget}")]
    EnumerationRefused { configs: u128, budget: u128 },

    /// The reference distribution puts mass where the model has none,
    /// so the divergence is infinite.
    #[error("absolute continuity violated: configuration `{config}` has zero model probability")]
    AbsoluteContinuity { config: String },

    /// Gibbs update requested at the length vertex or out of range.
    #[error("invalid site {site} for configuration of length {len}")]
    InvalidSite { site: usize, len: usize },

    /// A solver exhausted its iteration budget.
    #[error("{what} did not converge after {iterations} iterations (residual {residual})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A precondition of a numeric routine was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The model expectation handed to the binary gain solve is degenerate.
    #[error("invalid model expectation {0}: must lie strictly inside (0, 1)")]
    InvalidExpectation(f64),

    /// An internal invariant failed; indicates a solver bug, not bad input.
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    /// Model file parsing failed.
    #[error("model file line {line}: {reason}")]
    ModelFile { line: usize, reason: String },

    /// Unknown model file version.
    #[error("unsupported model file version `{0}`")]
    ModelVersion(String),

    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FieldError>;
