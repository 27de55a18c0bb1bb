use thiserror::Error;

use crate::fields::MeasurableMask;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ess-sup over null set")]
    NullSet,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("window/grid mismatch: {0}")]
    WindowMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tolerance {name} = {value}")]
    InvalidTolerance { name: &'static str, value: f64 },

    #[error("not a range operator on J: cell {cell} leaves the fiber by {defect:e}")]
    NotRangeOperator { cell: usize, defect: f64 },

    #[error("not uniformly bounded below: cell {cell} has certified lower bound {bound:e} (smallest singular value {sigma_min:e})")]
    NotBoundedBelow {
        cell: usize,
        sigma_min: f64,
        bound: f64,
    },

    #[error("eigen-solver failed on cell {0}")]
    EigenSolver(usize),

    #[error("defective fibers on {count} cells")]
    DefectiveFibers { count: usize, mask: MeasurableMask },

    #[error("operator is not normal (worst commutator defect {defect:e}); use oblique synthesis")]
    NotNormal { defect: f64 },

    #[error("f not in V: cell {cell} fiber leaves J by {defect:e}")]
    NotInSpace { cell: usize, defect: f64 },

    #[error("generator family is not a Riesz family on cell {0}")]
    NotRiesz(usize),

    #[error("support too large: {0}")]
    SupportTooLarge(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
