use thiserror::Error;

/// Errors produced by the estimation, fitting and training routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample {index}: {source}")]
    SampleAt {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("empty input: {context}")]
    EmptyInput { context: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid label {label}: {context}")]
    InvalidLabel { label: i32, context: &'static str },

    #[error(
        "class priors are not identifiable: {0} (mixture parameters are only recoverable when \
         all priors are pairwise distinct)"
    )]
    Identifiability(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("quadrature did not converge: relative change {rel_change:.3e} after refinement")]
    QuadratureNonConvergent { rel_change: f64 },

    #[error(
        "information matrix is singular or near-singular (condition number {cond:.3e}): \
         the mixture is close to a non-identifiable point"
    )]
    SingularInformation { cond: f64 },

    #[error("internal consistency check failed: {0}")]
    Inconsistency(String),

    #[error("loss kind {kind} is not valid here: {context}")]
    UnsupportedLoss {
        kind: &'static str,
        context: &'static str,
    },

    #[error("optimizer diverged: {0}")]
    Divergence(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_sample(self, index: usize) -> Error {
        Error::SampleAt {
            index,
            source: Box::new(self),
        }
    }
}
