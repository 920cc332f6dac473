use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: max asymmetry {max_asymmetry:e}")]
    Asymmetric { max_asymmetry: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("negative eigenvalue {value:e} below tolerance")]
    NegativeEigenvalue { value: f64 },

    #[error("length mismatch in {context}: expected {expected}, found {found}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular frame operator (smallest eigenvalue {min_eigenvalue:e}): vectors do not span")]
    Singular { min_eigenvalue: f64 },

    #[error("trace mismatch: sum of spectrum {spectrum_sum} != sum of norms {norm_sum}")]
    TraceMismatch { spectrum_sum: f64, norm_sum: f64 },

    #[error("infeasible spectrum/norm pair: {0}")]
    Infeasible(String),

    #[error("entry {value:e} at (n={n}, m={m}) would be truncated to dimension {dim}")]
    Truncation {
        n: usize,
        m: usize,
        value: f64,
        dim: usize,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("interlacing violated: {0}")]
    Interlacing(String),

    #[error("negative radicand {value:e} in eigenbasis step")]
    NegativeRadicand { value: f64 },

    #[error("matrix is not orthogonal: max deviation {deviation:e}")]
    NotOrthogonal { deviation: f64 },

    #[error("duality violated: max |F G^T - I| = {deviation:e}")]
    DualityViolation { deviation: f64 },

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("tolerance violated: {0}")]
    Tolerance(String),

    #[error("brute-force guard: {0}")]
    Guard(String),

    #[error("parse error in {source_name}: {message}")]
    Parse {
        source_name: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier printed by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "not-square",
            Error::Asymmetric { .. } => "asymmetric",
            Error::NonFinite { .. } => "non-finite",
            Error::NegativeEigenvalue { .. } => "negative-eigenvalue",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::Dimension(_) => "dimension",
            Error::Singular { .. } => "singular",
            Error::TraceMismatch { .. } => "trace-mismatch",
            Error::Infeasible(_) => "infeasible",
            Error::Truncation { .. } => "truncation",
            Error::Precondition(_) => "precondition",
            Error::Interlacing(_) => "interlacing",
            Error::NegativeRadicand { .. } => "negative-radicand",
            Error::NotOrthogonal { .. } => "not-orthogonal",
            Error::DualityViolation { .. } => "duality",
            Error::InvalidNoise(_) => "invalid-noise",
            Error::InvalidInput(_) => "invalid-input",
            Error::Tolerance(_) => "tolerance",
            Error::Guard(_) => "guard",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    /// Process exit status: 2 for malformed input, 1 for numerical or
    /// validation failures on well-formed input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::Json(_)
            | Error::NotSquare { .. }
            | Error::NonFinite { .. }
            | Error::LengthMismatch { .. }
            | Error::Dimension(_)
            | Error::InvalidInput(_)
            | Error::InvalidNoise(_)
            | Error::Guard(_) => 2,
            _ => 1,
        }
    }
}
