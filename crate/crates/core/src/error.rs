//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors raised by constructions and verifications.
#[derive(Debug, Error)]
pub enum DilationError {
    #[error("matrix is not Hermitian: asymmetry {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("matrix is indefinite: eigenvalue {eigenvalue:.3e} below -{tol:.3e}")]
    IndefiniteMatrix { eigenvalue: f64, tol: f64 },
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("entries must be finite: found NaN or infinity at index {0}")]
    NonFiniteEntry(usize),
    #[error("Gram matrices disagree: deviation {defect:.3e} exceeds tolerance {tol:.3e}")]
    GramMismatch { defect: f64, tol: f64 },
    #[error("ambient dimension {ambient} too small for span dimension {needed}")]
    DimensionOverflow { ambient: usize, needed: usize },
    #[error("operators live on different block spaces")]
    SpaceMismatch,
    #[error("exactness window exhausted: {0}")]
    WindowExhausted(String),
    #[error("operator is not a contraction: norm exceeds 1 by {0:.3e}")]
    NotContraction(f64),
    #[error("operator is not a co-isometry: defect {0:.3e}")]
    NotCoisometry(f64),
    #[error("operator is not an isometry: defect {0:.3e}")]
    NotIsometry(f64),
    #[error("operator is not unitary: defect {0:.3e}")]
    NotUnitary(f64),
    #[error("operators do not commute: defect {0:.3e}")]
    NotCommuting(f64),
    #[error("graph contains a cycle")]
    CyclicGraph,
    #[error("join vertex {vertex} missing from component {component}")]
    MissingJoinVertex { vertex: usize, component: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("R and T commute: commutator norm {0:.3e}; a non-commuting pair is required")]
    CommutingRT(f64),
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("candidate space does not contain the standard embedding: {0}")]
    BadEmbedding(String),
    #[error("dimension budget exceeded: requested {requested}, budget {budget}")]
    DimensionBudgetExceeded { requested: usize, budget: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
}

pub type Result<T> = std::result::Result<T, DilationError>;
