//! Crate-wide error type.

use thiserror::Error;

use crate::corpus::Side;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error class, used by callers (e.g. the CLI) to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad inputs: malformed files, invalid configuration, violated preconditions.
    Validation,
    /// Underlying I/O failure.
    Io,
    /// A computation could not be carried out on otherwise well-formed inputs.
    Computation,
}

#[derive(Debug, Error)]
pub enum Error {
    // ── signal I/O ──────────────────────────────────────────────────────
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error("too few channels: found {found}, need at least 2")]
    TooFewChannels { found: usize },

    #[error("overlapping events: event {index} starts at {start}, previous event ends at {prev_end}")]
    OverlappingEvents {
        index: usize,
        start: usize,
        prev_end: usize,
    },

    #[error("event {index} out of range: end {end} exceeds signal length {signal_length}")]
    OutOfRangeEvent {
        index: usize,
        end: usize,
        signal_length: usize,
    },

    #[error("invalid event {index}: start {start} must be < end {end}")]
    InvalidEvent {
        index: usize,
        start: usize,
        end: usize,
    },

    // ── features ────────────────────────────────────────────────────────
    #[error("empty series")]
    EmptySeries,

    #[error("degenerate variance: series is constant")]
    DegenerateVariance,

    #[error("series too short: {len} samples, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("zero normalizer: series is identically zero")]
    ZeroNormalizer,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // ── corpus ──────────────────────────────────────────────────────────
    #[error("window out of bounds for event {event_index} ({side:?}): [{start}, {end}) outside signal of length {signal_length}")]
    WindowOutOfBounds {
        event_index: usize,
        side: Side,
        start: i64,
        end: i64,
        signal_length: usize,
    },

    #[error("duplicate signal id: {0}")]
    DuplicateIds(String),

    // ── forest ──────────────────────────────────────────────────────────
    #[error("empty feature matrix")]
    EmptyMatrix,

    #[error("feature matrix has no labels")]
    MissingLabels,

    #[error("inconsistent row width: row {row} has {found} values, expected {expected}")]
    InconsistentWidth {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("dimension mismatch: input has {found} features, model expects {expected}")]
    DimensionMismatch { found: usize, expected: usize },

    #[error("malformed model file: {0}")]
    MalformedModelFile(String),

    #[error("unsupported model format version {found}, this build reads version {supported}")]
    VersionMismatch { found: u32, supported: u32 },

    // ── detector ────────────────────────────────────────────────────────
    #[error("signal too short: {len} samples, need at least {window_len} for one window")]
    SignalTooShort { len: usize, window_len: usize },

    // ── evaluation ──────────────────────────────────────────────────────
    #[error("no true onsets to score against")]
    NoTrueOnsets,

    #[error("fold {fold_id} ({signal_id}): {source}")]
    Fold {
        fold_id: usize,
        signal_id: String,
        source: Box<Error>,
    },

    // ── synth ───────────────────────────────────────────────────────────
    #[error("invalid Hurst parameter {0}: must lie in (0, 1)")]
    InvalidHurst(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Classifies the error for exit-code mapping.
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            MalformedFile { .. }
            | TooFewChannels { .. }
            | OverlappingEvents { .. }
            | OutOfRangeEvent { .. }
            | InvalidEvent { .. }
            | InvalidConfig(_)
            | DuplicateIds(_)
            | MalformedModelFile(_)
            | VersionMismatch { .. }
            | InvalidHurst(_)
            | MissingLabels => ErrorCategory::Validation,
            Io(_) => ErrorCategory::Io,
            Fold { source, .. } => source.category(),
            _ => ErrorCategory::Computation,
        }
    }
}
