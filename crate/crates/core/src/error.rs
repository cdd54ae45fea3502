//! Error types for the estimation pipeline.

use thiserror::Error;

/// Errors from sample generation and tail quantile evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("uniform draw {0} outside [0, 1)")]
    UniformOutOfRange(f64),
    #[error("tail quantile requires t > 1, got {0}")]
    QuantileDomain(f64),
    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),
    #[error("invalid shard plan: {0}")]
    InvalidPlan(String),
    #[error("shard values must be positive finite reals, got {0}")]
    NonPositiveValue(f64),
    #[error("invalid quantile table: {0}")]
    InvalidTable(String),
}

/// Errors from per-machine statistics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkerError {
    #[error("k = {k} out of range [1, {max}] for shard of size {n}", max = n - 1)]
    KOutOfRange { k: usize, n: usize },
    #[error("log-excess power must be 1, 2 or 3, got {0}")]
    InvalidAlpha(u32),
    #[error("requires k_n < k_rho <= n - 1, got k_n = {k_n}, k_rho = {k_rho}, n = {n}")]
    KOrder { k_n: usize, k_rho: usize, n: usize },
    #[error("shard contains non-positive value {0}")]
    NonPositiveValue(f64),
    #[error("tau must be non-negative, got {0}")]
    NegativeTau(f64),
    /// The T statistic is undefined: zero denominator, non-positive
    /// R-statistics, or T = 3 (pole of the rho map).
    #[error("degenerate T statistic")]
    DegenerateT,
    #[error("second order parameter estimate {rho} is not negative")]
    RhoDegenerate { rho: f64 },
}

/// Errors from central aggregation and the combined estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CentralError {
    #[error("no worker summaries to aggregate")]
    EmptySummaries,
    #[error("worker summaries carry mixed transmission modes")]
    MixedModes,
    #[error("worker summaries disagree on k_n or k_rho")]
    MismatchedK,
    #[error("duplicate machine id {0}")]
    DuplicateMachine(usize),
    #[error("operation requires {needed} summaries, mode is {got}")]
    ModeUnsupported { needed: &'static str, got: &'static str },
    #[error("p_N = {p_n} outside (0, k_n/n) = (0, {bound})")]
    InvalidPn { p_n: f64, bound: f64 },
    #[error(transparent)]
    Worker(#[from] WorkerError),
}

/// Errors from the closed-form theory layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("g(k, n, rho) requires 1 <= k <= n, got k = {k}, n = {n}")]
    KExceedsN { k: u64, n: u64 },
    #[error("rho must be negative, got {0}")]
    RhoNotNegative(f64),
    #[error("rho must be non-positive, got {0}")]
    RhoPositive(f64),
    #[error("moment order must be in 1..=4, got {0}")]
    InvalidMomentOrder(u32),
    #[error("invalid theory model: {0}")]
    InvalidModel(String),
}

/// Errors from experiment configuration parsing and validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("missing required config field `{0}`")]
    Missing(&'static str),
}

/// Errors from the Monte Carlo harness.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed report CSV at {path} line {line}: {reason}")]
    MalformedCsv {
        path: String,
        line: usize,
        reason: String,
    },
}

/// Errors from wire encoding and decoding.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("non-finite float {0} is not legal on the wire")]
    NonFinite(f64),
    #[error("malformed message at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("summary for mode `{mode}` must carry exactly {expected} statistics, got {got}")]
    BudgetViolation {
        mode: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Errors from coordinator/worker sessions.
#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected message `{got}` while waiting for {expected}")]
    UnexpectedMessage { expected: &'static str, got: String },
    #[error("worker {machine_id} reported error: {kind}")]
    WorkerReported { machine_id: usize, kind: String },
    #[error("worker {0} closed the connection mid-session")]
    ConnectionLost(usize),
    #[error("no summaries left after dropping failed workers")]
    NothingToAggregate,
    #[error(transparent)]
    Central(#[from] CentralError),
    #[error(transparent)]
    Worker(#[from] WorkerError),
}
