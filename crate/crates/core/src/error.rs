use thiserror::Error;

/// Standing assumption that a problem can violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Pairwise loss differences bounded by 1/2.
    A1,
    /// Loss is L-Lipschitz in the prediction.
    A2,
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Assumption::A1 => write!(f, "A1"),
            Assumption::A2 => write!(f, "A2"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed problem: {0}")]
    MalformedSpec(String),

    #[error("assumption {assumption} violated: {detail}")]
    AssumptionViolated {
        assumption: Assumption,
        detail: String,
    },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("sample of length {len} exceeds n = {n}")]
    SampleTooLong { len: usize, n: usize },

    #[error("enumeration needs {states} states, cap is {cap}")]
    EnumerationCapExceeded { states: f64, cap: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("estimator must be deterministic for {0}")]
    RequiresDeterministic(&'static str),

    #[error("luckiness must not depend on the predictor for {0}")]
    RequiresPredictorFree(&'static str),

    #[error("Shtarkov integral is not finite and positive (log S = {0})")]
    InfiniteShtarkov(f64),

    #[error("invalid partition: {0}")]
    BadPartition(String),

    #[error("degenerate prior: {0}")]
    DegeneratePrior(String),

    #[error("posterior puts mass {mass} on predictor {index} where the prior is zero")]
    AbsoluteContinuityViolated { index: usize, mass: f64 },

    #[error("density ratio undefined: q > 0 where p = 0 at outcome {0}")]
    SupportMismatch(usize),

    #[error("internal identity violated: {0}")]
    IdentityViolated(String),

    #[error("all predictors have zero expected excess risk, Bernstein fit undefined")]
    DegenerateExcess,

    #[error("cover cell diameter {diameter} exceeds epsilon {epsilon}")]
    DiameterViolated { diameter: f64, epsilon: f64 },

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),

    #[error("operation requires a log-loss problem: {0}")]
    NotLogLoss(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
