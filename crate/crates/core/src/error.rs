use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of {m} points aliases cutoff {n}: need at least {} points", 2 * n + 1)]
    Aliasing { m: usize, n: usize },

    #[error("field is not Hermitian-symmetric (imaginary residue {0:e})")]
    HermitianViolation(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid support interval ({a}, {b}): need 0 <= a < b <= 2*pi")]
    InvalidSupport { a: f64, b: f64 },

    #[error("profile truncation too coarse: g reaches {min:e} on the grid")]
    TruncationTooCoarse { min: f64 },

    #[error("degenerate damping profile: lower symbol constant is {0:e}")]
    DegenerateProfile(f64),

    #[error("feedback decomposition residual {0:e} exceeds tolerance")]
    DecompositionMismatch(f64),

    #[error("eigenvalue class of size {size} exceeds 5 (members {members:?})")]
    MultiplicityViolation { size: usize, members: Vec<i64> },

    #[error("empty scan range: {0}")]
    EmptyScan(String),

    #[error("backward propagation requested (t = {0}); only t >= 0 is supported")]
    BackwardTime(f64),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("contraction violated: norm grew from {before:e} to {after:e}")]
    ContractionViolated { before: f64, after: f64 },

    #[error("blow-up detected at t = {t} (last valid state at t = {last_valid})")]
    BlowUp { t: f64, last_valid: f64 },

    #[error("degenerate Gramian: modes {0:?} share an eigenvalue")]
    DegenerateGramian(Vec<i64>),

    #[error("ill-posed horizon: Gram condition number {0:e} exceeds 1e12")]
    IllPosedHorizon(f64),

    #[error("uncontrollable truncation: Gramian eigenvalue ratio {ratio:e}")]
    UncontrollableTruncation { ratio: f64, deficient: Vec<(f64, f64)> },

    #[error("certification error {0:e} exceeds tolerance; resolution insufficient")]
    ResolutionInsufficient(f64),

    #[error("observability failure: smallest Gramian eigenvalue {0:e} is not positive")]
    ObservabilityFailure(f64),

    #[error("endpoint means differ: {0} vs {1}")]
    MeanMismatch(f64, f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for validation, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::InvalidSupport { .. }
            | Error::Config(_)
            | Error::MeanMismatch(..)
            | Error::Aliasing { .. }
            | Error::BackwardTime(_)
            | Error::EmptyScan(_) => 2,
            Error::Io(_) | Error::Json(_) => 1,
            _ => 3,
        }
    }
}
