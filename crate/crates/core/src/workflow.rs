//! End-to-end helpers shared by the command line and the examples: run the
//! tracker over a sequence, and train a classifier from simulated
//! sequences.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::entity::{Detection, Frame, Tracklet};
use crate::long_cues::{AppearanceModel, QualityScorer};
use crate::pipeline::{run_sequence, PipelineError, Tracker, TrackerConfig, TrackingRun};
use crate::postproc::strict_nms;
use crate::sac::{
    build_training_set, to_dataset, BoostedModel, CueProviders, Dataset, PairClassifier, SacError, ShortTermAffinity,
    TrainConfig, TrainingSample, TrainingSetConfig,
};
use crate::short_cues::ReferenceTracker;
use crate::sim::Scenario;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Sac(#[from] SacError),
}

/// Sources of per-region appearance and quality.
#[derive(Clone, Copy)]
pub struct Oracles<'a> {
    pub appearance: &'a dyn AppearanceModel,
    pub quality: &'a dyn QualityScorer,
}

impl<'a> Oracles<'a> {
    pub fn from_scenario(s: &'a Scenario) -> Self {
        Self {
            appearance: s,
            quality: s,
        }
    }
}

/// Optionally apply strict NMS per frame.
pub fn preprocess_detections(
    detections: &BTreeMap<Frame, Vec<Detection>>,
    nms_iou: Option<f64>,
) -> BTreeMap<Frame, Vec<Detection>> {
    match nms_iou {
        None => detections.clone(),
        Some(t) => detections.iter().map(|(f, d)| (*f, strict_nms(d, t))).collect(),
    }
}

/// Track every frame from the first to the last detection frame (or the
/// explicit `frames`), returning emitted and raw trajectories.
pub fn track_detections(
    detections: &BTreeMap<Frame, Vec<Detection>>,
    frames: Option<std::ops::RangeInclusive<Frame>>,
    oracles: Oracles<'_>,
    classifier: &dyn PairClassifier,
    cfg: &TrackerConfig,
) -> Result<TrackingRun, WorkflowError> {
    let frames = frames.unwrap_or_else(|| {
        let first = detections.keys().next().copied().unwrap_or(1);
        let last = detections.keys().next_back().copied().unwrap_or(0);
        first..=last
    });
    let mut tracker = Tracker::new(*cfg, &ReferenceTracker, oracles.appearance, oracles.quality, classifier)?;
    run_sequence(&mut tracker, detections, frames)?;
    Ok(tracker.finish())
}

pub fn track_scenario(
    scenario: &Scenario,
    classifier: &dyn PairClassifier,
    cfg: &TrackerConfig,
) -> Result<TrackingRun, WorkflowError> {
    track_detections(
        &scenario.detections,
        Some(scenario.frames()),
        Oracles::from_scenario(scenario),
        classifier,
        cfg,
    )
}

/// Labelled samples from one sequence. Hypotheses come from running the
/// tracker with `bootstrap` as its classifier.
pub fn training_samples(
    detections: &BTreeMap<Frame, Vec<Detection>>,
    gt: &[Tracklet],
    oracles: Oracles<'_>,
    bootstrap: &dyn PairClassifier,
    tracker_cfg: &TrackerConfig,
    set_cfg: &TrainingSetConfig,
) -> Result<Vec<TrainingSample>, WorkflowError> {
    let run = track_detections(detections, None, oracles, bootstrap, tracker_cfg)?;
    let providers = CueProviders {
        short: &ReferenceTracker,
        appearance: oracles.appearance,
        quality: oracles.quality,
    };
    Ok(build_training_set(&run.raw, gt, detections, &providers, set_cfg)?)
}

/// Train a classifier on several simulated sequences, bootstrapping
/// hypotheses with the short-term affinity baseline.
pub fn train_on_scenarios(
    scenarios: &[Scenario],
    tracker_cfg: &TrackerConfig,
    set_cfg: &TrainingSetConfig,
    train_cfg: &TrainConfig,
) -> Result<BoostedModel, WorkflowError> {
    let mut data = Dataset::default();
    for s in scenarios {
        let samples = training_samples(
            &s.detections,
            &s.gt,
            Oracles::from_scenario(s),
            &ShortTermAffinity,
            tracker_cfg,
            set_cfg,
        )?;
        let d = to_dataset(&samples);
        for (row, label) in d.rows.into_iter().zip(d.labels) {
            data.push(row, label);
        }
    }
    Ok(crate::sac::train(&data, train_cfg)?)
}
