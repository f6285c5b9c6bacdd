//! Onset detection for imagined-word events in continuous multichannel
//! recordings.
//!
//! The library covers the whole experiment:
//!
//! ```text
//! marked signals (CSV)
//!   │
//!   ├─ corpus     per event: 2 word + 2 idle windows of 128 samples,
//!   │             first/last events discarded → class-balanced corpus
//!   ├─ signal     common average reference per window
//!   ├─ features   stats8 (mean/max/min/kurtosis/skewness/sum/entropy/H(1))
//!   │             or H(q) for q = 1..5 per channel
//!   ├─ forest     seeded random forest, Gini splits, bootstrap resamples
//!   ├─ detector   sequential 1 s windows → classify → merge runs of 1s,
//!   │             predicted onset = window index × 128
//!   └─ evaluation TETR-tolerant one-to-one onset matching, per-fold and
//!                 averaged true positive rate
//! ```
//!
//! [`synth`] generates marked signals with planted statistical signatures
//! (fractional Brownian motion words over white-noise idle) so the full
//! pipeline can be exercised and calibrated without a recorded dataset.
//!
//! Everything is deterministic given the configured seeds; see the README
//! for the CLI and the file formats.

pub mod corpus;
pub mod detector;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod forest;
mod seed;
pub mod signal;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};

pub use corpus::{
    build_fold_corpus, extract_training_segments, extract_training_segments_lenient, make_folds,
    Corpus, Fold, FoldPlan, Label, RecordedSignal, SegmentSpec, Side, SkippedEvent,
    TrainingSegment,
};
pub use detector::{
    classify_windows, detect, merge_runs, window_signal, ClassificationVector, DetectionResult,
    PredictedEvent,
};
pub use evaluation::{
    config_fingerprint, match_onsets, run_cross_validation, true_positive_rate, EvalReport,
    FoldReport, OnsetMatch, TetrAverage, TetrResult, TetrSpec,
};
pub use features::{
    extract_features, generalized_hurst, kurtosis, shannon_entropy, skewness, FeatureConfig,
    FeatureDescriptor, FeatureKind, FeatureMatrix, FeatureVector,
};
pub use forest::{
    train, train_with_oob, DecisionTree, ForestModel, ForestParams, TreeNode,
    MODEL_FORMAT_VERSION,
};
pub use signal::{
    apply_car, read_markers, read_signal, write_markers, write_signal, MarkerEvent, MarkerTrack,
    MultichannelSignal,
};
pub use synth::{generate_fbm, generate_subject, IdleModel, SynthSpec, WordModel};
