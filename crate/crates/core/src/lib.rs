//! Layer-fidelity benchmarking toolkit.
//!
//! Builds randomized-benchmarking circuit families over disjoint two-qubit
//! gate layers, simulates them under configurable coherent/incoherent noise
//! with a Trotterized density-matrix engine, fits the survival decays, and
//! assembles layer fidelity (LF), error per layered gate (EPLG), and the
//! error-mitigation sampling overhead γ, together with the exact-fidelity
//! and γ-bound theory used as independent cross-checks.

pub mod campaign;
pub mod channel;
pub mod circuits;
pub mod clifford;
pub mod crosstalk;
pub mod estimation;
pub mod gamma;
pub mod gates;
pub mod linalg;
pub mod noise;
pub mod pauli;
pub mod runner;
pub mod schedule;
pub mod simulator;
pub mod topology;

use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum LfError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("not trace preserving: deviation {0:.3e}")]
    NotTracePreserving(f64),
    #[error("not unitary: deviation {0:.3e}")]
    NotUnitary(f64),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("system size {n} exceeds dense cap {cap}")]
    SizeCap { n: usize, cap: usize },
    #[error("unsupported qubit count {0}")]
    UnsupportedQubitCount(usize),
    #[error("invalid layer specification: {0}")]
    InvalidLayerSpec(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid device model: {0}")]
    InvalidDevice(String),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("incomplete layer result: {0}")]
    IncompleteLayer(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LfError>;
