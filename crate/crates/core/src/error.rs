use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("contraction shape mismatch: leg {leg_a} of a has dimension {dim_a}, leg {leg_b} of b has dimension {dim_b}")]
    ContractShape {
        leg_a: usize,
        leg_b: usize,
        dim_a: usize,
        dim_b: usize,
    },
    #[error("leg {0} appears more than once in a contraction")]
    DuplicateLeg(usize),
    #[error("leg partition does not cover the tensor exactly once: {0}")]
    LegPartition(String),
    #[error("index {index} out of range for size {size}")]
    Index { index: usize, size: usize },
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("eigensolver failed: {0}")]
    Solver(String),
    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NonHermitian(f64),
    #[error("duplicate insertion at radius {rho}, arclength {s}")]
    DuplicateInsertion { rho: usize, s: usize },
    #[error("invalid bulk coordinate (rho {rho}, s {s}) for depth {depth}")]
    InvalidCoordinate { rho: usize, s: usize, depth: usize },
    #[error("spectrum is defective near eigenvalue cluster {cluster:?} (condition {condition:.3e})")]
    SpectrumDegeneracy { cluster: Vec<f64>, condition: f64 },
    #[error("no eigenvalue group at scaling dimension {0}")]
    NoSuchDimension(f64),
    #[error("expected multiplicity at least {expected} at scaling dimension {dimension}, found {found}")]
    Degeneracy {
        dimension: f64,
        expected: usize,
        found: usize,
    },
    #[error("coefficient extraction needs labeled dimension-2 operators")]
    LabelingRequired,
    #[error("angular momentum at the origin is singular")]
    SingularCentrifugal,
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("fit domain error: {0}")]
    FitDomain(String),
    #[error("ill-conditioned design matrix (condition {0:.3e})")]
    Conditioning(f64),
    #[error("curves are not on a common grid: {0}")]
    Alignment(String),
}

pub type Result<T> = std::result::Result<T, Error>;
