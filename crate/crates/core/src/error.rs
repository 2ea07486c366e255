use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid genotype code {0}, expected 1..=10")]
    InvalidCode(u8),

    #[error("invalid allele matrix entry {0}, expected 0 or 1")]
    InvalidAllele(u8),

    #[error("invalid tree topology: {0}")]
    InvalidTopology(String),

    #[error("topology enumeration refused for {0} nodes (limit {1})")]
    EnumerationTooLarge(usize, usize),

    #[error("zero coverage for sample {t}, pair {k}")]
    ZeroCoverage { t: usize, k: usize },

    #[error("non-finite log-likelihood: count {n} at sample {t}, pair {k}, outcome {g} has zero probability")]
    NonFiniteLikelihood { t: usize, k: usize, g: usize, n: f64 },

    #[error("variant count {variant} exceeds total {total}")]
    SnvCounts { total: u64, variant: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    DataFormat { path: String, line: usize, msg: String },

    #[error("no posterior samples match the requested model size")]
    NoMatchingSamples,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
