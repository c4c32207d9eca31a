use thiserror::Error;

/// Errors surfaced by state construction, evolution, and witness evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("mode index {mode} out of range for {n_modes} mode(s)")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("matrix is not Hermitian (max |m - m^dag| element = {deviation:.3e})")]
    NonHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("eigensolver failed to converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("state norm deviates from 1 by {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    #[error("trace deviates from 1 by {deviation:.3e}")]
    TraceDrift { deviation: f64 },

    #[error(
        "coherent amplitude |alpha|^2 = {alpha_sq:.3} needs a larger cutoff than {dim} \
         (truncated tail weight {tail:.3e})"
    )]
    TruncationTail { alpha_sq: f64, dim: usize, tail: f64 },

    #[error("monomial exponent {exponent} exceeds cutoff limit {max} for mode {mode}")]
    ExponentTooLarge {
        mode: usize,
        exponent: u32,
        max: u32,
    },

    #[error("population {population:.3e} leaked into the top Fock level of mode {mode}")]
    Leakage { mode: usize, population: f64 },

    #[error("jump probability per step {delta_p:.3e} exceeds 0.1; reduce dt")]
    StepTooLarge { delta_p: f64 },

    #[error("projection onto the qubit subspace discards population {discarded:.3e}")]
    ProjectionLeakage { discarded: f64 },

    #[error("empty monomial list")]
    EmptyMonomialList,

    #[error("duplicate monomial in list: {0}")]
    DuplicateMonomial(String),

    #[error("cannot parse monomial {input:?}: {reason}")]
    MonomialParse { input: String, reason: &'static str },

    #[error("model {model} does not support {what}")]
    Unsupported {
        model: &'static str,
        what: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;
