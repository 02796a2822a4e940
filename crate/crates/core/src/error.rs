use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("consumption {value} at step {step} outside [0, {alpha}]")]
    ConsumptionOutOfRange { step: usize, value: i64, alpha: i64 },

    #[error("request {value} at step {step} outside [{min}, {max}]")]
    RequestOutOfRange {
        step: usize,
        value: i64,
        min: i64,
        max: i64,
    },

    #[error("battery state {value} outside [0, {beta}]")]
    StateOutOfRange { value: i64, beta: i64 },

    #[error("integer overflow while accumulating energy")]
    Overflow,

    #[error("invalid tariff: {0}")]
    InvalidTariff(String),

    #[error("policy support contains an infeasible request for consumption {x:?}")]
    InfeasibleSupport { x: Vec<i64> },

    #[error("policy has no row for consumption {x:?}")]
    MissingRow { x: Vec<i64> },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("distribution support is not covered by the channel inputs")]
    SupportMismatch,

    #[error("enumeration guard exceeded: {size} candidates > limit {limit}")]
    GuardExceeded { size: f64, limit: f64 },

    #[error("instance too large for {what}: {reason}")]
    InstanceTooLarge { what: &'static str, reason: String },

    #[error("solver did not converge after {iterations} iterations (gap {gap:.3e} bits)")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("reduction step out of range: {0}")]
    ReductionOutOfRange(String),

    #[error("target alphabet [{lo}, {hi}] does not contain [0, {alpha}]")]
    TargetTooNarrow { lo: i64, hi: i64, alpha: i64 },

    #[error("block {block} total {total} outside the representable range [{min}, {max}]")]
    BlockTotalOutOfRange {
        block: usize,
        total: i64,
        min: i64,
        max: i64,
    },

    #[error("depletion time is zero: battery capacity {beta} + 1 < peak consumption {alpha}")]
    ZeroDepletionTime { beta: i64, alpha: i64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
