use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("Hermitian eigensolver did not converge for a {dim}x{dim} matrix")]
    EigenSolverFailure { dim: usize },

    #[error("state left the physical domain: minimum eigenvalue {min_eigenvalue:e}")]
    NonPhysicalState { min_eigenvalue: f64 },

    #[error("eigenvalue gap {gap:e} below the floor {floor:e}")]
    DegenerateSpectrum { gap: f64, floor: f64 },

    #[error("overdamped regime (4ω² <= ζ²/m²) has no closed-form solution here")]
    OverdampedUnsupported,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested index {index} beyond available rank {rank}")]
    IndexOutOfRange { index: usize, rank: usize },

    #[error("at t = {time}: {source}")]
    AtTime { time: f64, source: Box<Error> },
}

impl Error {
    pub(crate) fn at(self, time: f64) -> Self {
        match self {
            Error::AtTime { .. } => self,
            other => Error::AtTime {
                time,
                source: Box::new(other),
            },
        }
    }

    /// The underlying error, looking through any time annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            other => other,
        }
    }
}
