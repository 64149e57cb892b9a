//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

/// Unified error type.
#[derive(Debug, Clone, Error)]
pub enum FluxError {
    /// The fluctuator transition graph is not strongly connected, so the
    /// stationary distribution is not unique.  Signals an ill-posed model.
    #[error("fluctuator chain is not ergodic: {0}")]
    NonErgodic(String),

    /// Every transition rate is zero on a multi-state chain.
    #[error("all transition rates are zero for a multi-state fluctuator")]
    ZeroRates,

    /// The requested operation is defined only for a restricted family of
    /// models (for example the two-state asymptotic rate formulas).
    #[error("not supported: {0}")]
    NotSupported(String),

    /// The eigendecomposition and the scaling-and-squaring exponential
    /// disagree beyond tolerance, or a factorization failed outright.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    /// Structurally invalid model input (negative rate, dimension mismatch,
    /// non-Hermitian density matrix, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Invalid argument to an operation (empty grid, bad probability
    /// vector, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A time-domain fit converged but its residual exceeds the quality
    /// threshold, signalling multi-exponential decay outside the
    /// single-mode regime.  The fitted values are still reported.
    #[error("poor fit: rms residual {residual:.3e} exceeds {threshold:.3e} (gamma {gamma:.6e}, omega {omega:.6e})")]
    PoorFit {
        residual: f64,
        threshold: f64,
        gamma: f64,
        omega: f64,
    },
}

pub type Result<T> = std::result::Result<T, FluxError>;
