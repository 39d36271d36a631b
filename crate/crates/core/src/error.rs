use thiserror::Error;

use crate::povm::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("Hermitian eigensolver did not converge")]
    EigenFailed,
    #[error("singular value decomposition did not converge")]
    SvdFailed,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not unitary (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("invalid POVM: {0}")]
    InvalidPovm(ValidationReport),
    #[error("invalid density state: {0}")]
    InvalidState(String),
    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),
    #[error("function undefined on outcome label {0}")]
    UndefinedLabel(String),
    #[error("post-processing table has {found} entries but the POVM has {expected} outcomes")]
    PartialPostProcessing { expected: usize, found: usize },
    #[error("negative outcome probability {0:e}")]
    NegativeProbability(f64),
    #[error("T_P is injective: no kernel element exists")]
    KernelEmpty,
    #[error("both Hermitian parts of the kernel vector vanish")]
    DegenerateKernelElement,
    #[error("splitting direction is not in the kernel of T_P (residual {residual:e})")]
    NotInKernel { residual: f64 },
    #[error("splitting direction has a one-sided spectrum [{min:e}, {max:e}]")]
    OneSidedSpectrum { min: f64, max: f64 },
    #[error("split did not reduce the rank budget ({before} -> {after})")]
    NoProgress { before: usize, after: usize },
    #[error("frame operator stayed singular after {0} draws")]
    SingularFrame(usize),
    #[error("histogram has zero total count")]
    EmptyHistogram,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed document at `{path}`: {message}")]
    Format { path: String, message: String },
    #[error("at branch {path}: {source}")]
    Branch {
        path: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_branch(self, path: &str) -> Self {
        match self {
            e @ Error::Branch { .. } => e,
            e => Error::Branch {
                path: path.to_string(),
                source: Box::new(e),
            },
        }
    }
}
