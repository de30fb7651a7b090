use thiserror::Error;

/// Errors raised anywhere in the benchmark stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("gate `{kind}` expects {expected} target(s), got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("qubit {qubit} used twice in one layer")]
    OverlappingLayer { qubit: usize },
    #[error("qubit {qubit} out of range for width {width}")]
    QubitOutOfRange { qubit: usize, width: usize },
    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("circuit contains a measurement and cannot be inverted")]
    MeasureInInverse,
    #[error("mid-circuit measurement on qubit {qubit} is not supported")]
    MidCircuitMeasure { qubit: usize },
    #[error("parameter slot {slot} is unbound")]
    UnboundSlot { slot: u32 },
    #[error("not a permutation of 0..{len}")]
    NotAPermutation { len: usize },
    #[error("width {width} exceeds the simulator cap of {cap} qubits")]
    WidthOverCap { width: usize, cap: usize },
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("malformed Pauli observable `{0}`")]
    MalformedObservable(String),
    #[error("distribution is not normalized (total {total})")]
    NotNormalized { total: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("every outcome was filtered out")]
    EmptyDistribution,
    #[error("singular confusion matrix on qubit {qubit}")]
    SingularConfusion { qubit: usize },
    #[error("no embedding of the circuit interaction graph into the coupling map")]
    NoEmbedding,
    #[error("rule violation ({rule}): {detail}")]
    RuleViolation { rule: String, detail: String },
    #[error("PEC sampling overhead gamma = {gamma:.3} exceeds cap {cap} (sampling multiplier {multiplier:.1}x)")]
    GammaCap {
        gamma: f64,
        cap: f64,
        multiplier: f64,
    },
    #[error("technique `{technique}` cannot be applied here: {reason}")]
    Inapplicable {
        technique: String,
        reason: String,
    },
    #[error("degenerate timer: elapsed time is zero")]
    DegenerateTimer,
    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
