use alloc::string::String;

/// Failures raised by the core routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("median undefined: field is zero")]
    MedianUndefined,
    #[error("zero field")]
    ZeroField,
    #[error("w undefined: low band below level {level} carries no energy")]
    WUndefined { level: i64 },
    #[error("level must be at least 1, got {level}")]
    LevelTooSmall { level: i64 },
    #[error("time step must be positive, got {dt}")]
    NonPositiveTimeStep { dt: f64 },
    #[error("trajectory died at t = {time}: field vanished or became non-finite")]
    TrajectoryDied { time: f64 },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("duplicate noise table entry: entries {first} and {second} address the same coefficient")]
    DuplicateEntry { first: usize, second: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("support set is empty")]
    EmptySupport,
    #[error("segment too short: {len} steps, need at least {min}")]
    SegmentTooShort { len: usize, min: usize },
    #[error("horizon {horizon} must exceed burn-in {burn_in}")]
    HorizonBeforeBurnIn { burn_in: f64, horizon: f64 },
    #[error("horizon {horizon} exceeds recorded length {recorded}")]
    HorizonBeyondRecord { horizon: f64, recorded: f64 },
    #[error("no samples in the requested window")]
    EmptyWindow,
    #[error("infeasible initial data: {0}")]
    InfeasibleInitialData(&'static str),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
