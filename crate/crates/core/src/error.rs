use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix has non-finite entries")]
    NonFiniteEntries,
    #[error("entry array is not {0}x{0}")]
    BadShape(usize),
    #[error("operator is not normal (residual {residual:.3e} exceeds tolerance)")]
    NotNormal { residual: f64 },
    #[error("operators {0} and {1} do not commute")]
    NotCommuting(usize, usize),
    #[error("eigenvalue clustering is ambiguous (component diameter {diameter:.3e} > 2*{radius:.3e})")]
    ClusterAmbiguity { diameter: f64, radius: f64 },
    #[error("first resolution does not refine the second")]
    NotRefinement,
    #[error("required overlap {0:?} is missing from the site")]
    MissingOverlap(Vec<usize>),
    #[error("markings on contexts {0} and {1} have no common refinement structure")]
    NoCommonRefinement(usize, usize),
    #[error("generators act reducibly (commutant dimension {0} > 1)")]
    ReducibleAmbient(usize),
    #[error("joint-diagonalizability criteria disagree: {0}")]
    InconsistentCriteria(String),
    #[error("unknown operator name: {0}")]
    UnknownOperator(String),
    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
