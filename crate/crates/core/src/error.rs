use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ratio of specific heats must exceed 1, got {0}")]
    InvalidGamma(f64),

    #[error("inadmissible state: rho = {rho}, p = {p}")]
    InvalidState { rho: f64, p: f64 },

    #[error("inadmissible entropy variables: v3 = {v3} (must be negative)")]
    InvalidEntropyVars { v3: f64 },

    #[error("logarithmic mean needs positive arguments, got ({a}, {b})")]
    LogMeanDomain { a: f64, b: f64 },

    #[error("quadrature order must be positive, got {0}")]
    QuadratureOrder(usize),

    #[error("invalid quadrature rule: {0}")]
    QuadratureRule(String),

    #[error("entropy-variable path leaves the admissible set at node {node} (xi = {xi})")]
    PathInadmissible { node: usize, xi: f64 },

    #[error("dissipation matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid dissipation: {0}")]
    Dissipation(String),

    #[error("singular linear system")]
    Singular,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("inadmissible state in slab {slab}, cell {cell}: rho = {rho}, p = {p}")]
    CellState {
        slab: usize,
        cell: usize,
        rho: f64,
        p: f64,
    },

    #[error(
        "Newton failed to converge for slab {slab}: {iterations} iterations, residual {residual:e}"
    )]
    NoConvergence {
        slab: usize,
        iterations: usize,
        residual: f64,
    },

    /// Failure inside the block whose first slab is `slab`.
    #[error("slab {slab}: {source}")]
    InSlab { slab: usize, source: Box<Error> },

    #[error("Riemann data generates vacuum (critical velocity {critical}, jump {jump})")]
    Vacuum { critical: f64, jump: f64 },
}

impl Error {
    /// Slab in which a solver failure occurred, if known.
    pub fn slab(&self) -> Option<usize> {
        match self {
            Self::CellState { slab, .. } | Self::NoConvergence { slab, .. } | Self::InSlab { slab, .. } => Some(*slab),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
