use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("entry ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("input is not orthonormal (deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("could not complete an orthonormal basis after random restarts")]
    BreakdownExhausted,
    #[error("operator mode {0:?} needs a preconditioner")]
    MissingPreconditioner(crate::sparse::OperatorMode),
    #[error("zero pivot in row {0}")]
    ZeroPivot(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
