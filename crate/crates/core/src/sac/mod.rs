//! Switcher-aware classifier: feature assembly, boosted trees, training-set
//! generation, model persistence and the assignment solver it shares with
//! evaluation.

pub mod boost;
pub mod dataset;
pub mod features;
pub mod hungarian;
pub mod model_io;
pub mod sketch;

use thiserror::Error;

use crate::long_cues::LongCueError;
use crate::short_cues::ShortCueError;

pub use boost::{
    logistic, train, train_with_report, BoostedModel, Dataset, DecisionTree, TrainConfig, TrainReport, TreeNode,
};
pub use dataset::{build_training_set, to_dataset, DetectionSampling, TrainingSample, TrainingSetConfig};
pub use features::{
    assemble_features, find_switcher, CueProviders, FeatureMask, FeatureVector, FrameCues, PairClassifier,
    ShortTermAffinity,
};
pub use hungarian::hungarian_match;
pub use model_io::{parse_model, write_model};
pub use sketch::propose_splits;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SacError {
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("training data is degenerate (empty, featureless or single-class)")]
    DegenerateData,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("model format error at line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },
    #[error(transparent)]
    ShortCue(#[from] ShortCueError),
    #[error(transparent)]
    LongCue(#[from] LongCueError),
}

/// Build a training set and fit a model in one step.
pub fn train_from_samples(samples: &[TrainingSample], cfg: &TrainConfig) -> Result<BoostedModel, SacError> {
    train(&to_dataset(samples), cfg)
}
