//! The online tracker: per-frame cue extraction, classification, matching,
//! tracklet lifecycle and output smoothing.

pub mod kalman;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::assoc::{build_match_graph, solve_with_endpoints, AssociationResult, DEFAULT_ZETA_M};
use crate::entity::{Detection, Embedding, Frame, TrackId, TrackState, Tracklet};
use crate::geometry::{iou, BoundingBox};
use crate::long_cues::{AppearanceModel, EmbeddingCache, HistoryConfig, QualityScorer};
use crate::sac::{CueProviders, FeatureMask, FrameCues, PairClassifier, SacError};
use crate::short_cues::{update_quality, QualityParams, ShortTermProvider, ShortTermResult};

pub use kalman::{kalman_smooth, KalmanParams, KalmanState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("frame {got} does not follow frame {previous}")]
    NonMonotonicFrame { previous: Frame, got: Frame },
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sac(#[from] SacError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub quality: QualityParams,
    pub history: HistoryConfig,
    pub zeta_m: f64,
    pub birth_confidence: f64,
    pub birth_max_iou: f64,
    pub kalman: KalmanParams,
    /// Cue groups fed to the classifier; must match how it was trained.
    pub mask: FeatureMask,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            quality: QualityParams::default(),
            history: HistoryConfig::default(),
            zeta_m: DEFAULT_ZETA_M,
            birth_confidence: 0.4,
            birth_max_iou: 0.3,
            kalman: KalmanParams::default(),
            mask: FeatureMask::FULL,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let unit = [
            ("quality.decay", self.quality.decay),
            ("quality.drop_threshold", self.quality.drop_threshold),
            ("quality.output_threshold", self.quality.output_threshold),
            ("tracker.zeta_m", self.zeta_m),
            ("tracker.birth_confidence", self.birth_confidence),
            ("tracker.birth_max_iou", self.birth_max_iou),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(PipelineError::InvalidConfig(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        let positive = [
            ("kalman.process_noise", self.kalman.process_noise),
            ("kalman.measurement_noise", self.kalman.measurement_noise),
            (
                "kalman.initial_velocity_variance",
                self.kalman.initial_velocity_variance,
            ),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PipelineError::InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        if self.history.k == 0 || self.history.delta == 0 {
            return Err(PipelineError::InvalidConfig(
                "history.k and history.delta must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Boxes emitted for one frame, ascending by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutput {
    pub frame: Frame,
    pub boxes: Vec<(TrackId, BoundingBox)>,
}

/// Everything a finished run produced.
#[derive(Debug, Clone, Default)]
pub struct TrackingRun {
    /// Emitted trajectories (smoothed boxes, only frames with quality at or
    /// above the output threshold), ascending by id.
    pub output: Vec<Tracklet>,
    /// Unsmoothed internal tracklets including suppressed frames, ascending
    /// by id. These are the hypotheses classifier training consumes.
    pub raw: Vec<Tracklet>,
}

struct Slot {
    tracklet: Tracklet,
    kalman: KalmanState,
}

/// Stateful online tracker for one sequence.
pub struct Tracker<'a> {
    cfg: TrackerConfig,
    short: &'a dyn ShortTermProvider,
    appearance: &'a dyn AppearanceModel,
    quality: &'a dyn QualityScorer,
    classifier: &'a dyn PairClassifier,
    active: BTreeMap<TrackId, Slot>,
    finished: Vec<Tracklet>,
    emitted: BTreeMap<TrackId, Tracklet>,
    next_id: TrackId,
    last_frame: Option<Frame>,
}

impl<'a> Tracker<'a> {
    pub fn new(
        cfg: TrackerConfig,
        short: &'a dyn ShortTermProvider,
        appearance: &'a dyn AppearanceModel,
        quality: &'a dyn QualityScorer,
        classifier: &'a dyn PairClassifier,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            short,
            appearance,
            quality,
            classifier,
            active: BTreeMap::new(),
            finished: Vec::new(),
            emitted: BTreeMap::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Active tracklets ascending by id.
    pub fn active(&self) -> impl Iterator<Item = &Tracklet> {
        self.active.values().map(|s| &s.tracklet)
    }

    /// Process the detections of `frame`.
    pub fn track_step(&mut self, frame: Frame, detections: &[Detection]) -> Result<FrameOutput, PipelineError> {
        if let Some(previous) = self.last_frame {
            if frame <= previous {
                return Err(PipelineError::NonMonotonicFrame { previous, got: frame });
            }
        }
        self.last_frame = Some(frame);

        // one region is featurized at most once per step
        let cache = EmbeddingCache::new(self.appearance);
        let providers = CueProviders {
            short: self.short,
            appearance: &cache,
            quality: self.quality,
        };
        let targets: Vec<&Tracklet> = self.active.values().map(|s| &s.tracklet).collect();
        let (assoc, shorts, det_embeddings) = if targets.is_empty() {
            let embs = detections.iter().map(|d| cache.embed(frame, &d.bbox)).collect();
            let unmatched = (0..detections.len()).collect();
            (
                AssociationResult {
                    unmatched_detections: unmatched,
                    ..AssociationResult::default()
                },
                Vec::new(),
                embs,
            )
        } else {
            let cues = FrameCues::extract(&providers, &self.cfg.history, &targets, frame, detections)?;
            let edges = build_match_graph(&cues, self.classifier, &self.cfg.mask, self.cfg.zeta_m)?;
            let ids: Vec<TrackId> = cues.targets.iter().map(|t| t.id).collect();
            let assoc = solve_with_endpoints(&edges, &ids, &(0..detections.len()).collect::<Vec<_>>());
            let shorts = cues.targets.iter().map(|t| (t.id, t.short)).collect();
            (assoc, shorts, cues.det_embeddings)
        };

        let frame_embeddings = self.update_lifecycle(frame, &assoc, &shorts, detections, &det_embeddings, &cache);
        Ok(self.emit(frame, &frame_embeddings))
    }

    /// Apply matching results: update matched and unmatched tracklets, drop
    /// unreliable ones, and spawn new tracklets. Returns the embedding each
    /// surviving tracklet carries for this frame.
    fn update_lifecycle(
        &mut self,
        frame: Frame,
        assoc: &AssociationResult,
        shorts: &[(TrackId, ShortTermResult)],
        detections: &[Detection],
        det_embeddings: &[Embedding],
        cache: &EmbeddingCache<'_>,
    ) -> BTreeMap<TrackId, Embedding> {
        let qp = self.cfg.quality;
        let mut frame_embeddings = BTreeMap::new();
        let mut dropped = Vec::new();
        for &(id, short) in shorts {
            let slot = self.active.get_mut(&id).expect("targets come from the active set");
            let tr = &mut slot.tracklet;
            let (bbox, emb, q) = match assoc.detection_for(id) {
                Some(d) => {
                    let det = &detections[d];
                    let q = update_quality(tr.quality, true, iou(&short.track_box, &det.bbox), short.score, &qp);
                    tr.template = Some(det_embeddings[d].clone());
                    tr.matched_frames.insert(frame);
                    (det.bbox, det_embeddings[d].clone(), q)
                }
                None => {
                    let emb = cache.embed(frame, &short.track_box);
                    let q = update_quality(tr.quality, false, 0.0, short.score, &qp);
                    (short.track_box, emb, q)
                }
            };
            tr.positions.insert(frame, bbox);
            tr.embedding_history.insert(frame, emb.clone());
            tr.set_quality(q);
            slot.kalman = kalman_smooth(&slot.kalman, Some(&bbox), &self.cfg.kalman).0;
            if tr.quality < qp.drop_threshold {
                tr.state = TrackState::Dropped;
                dropped.push(id);
            } else {
                frame_embeddings.insert(id, emb);
            }
        }
        for id in dropped {
            let slot = self.active.remove(&id).expect("present");
            self.finished.push(slot.tracklet);
        }

        for &d in &assoc.unmatched_detections {
            let det = &detections[d];
            if det.confidence < self.cfg.birth_confidence {
                continue;
            }
            let max_overlap = self
                .active
                .values()
                .filter_map(|s| s.tracklet.box_at(frame))
                .map(|b| iou(b, &det.bbox))
                .fold(0.0, f64::max);
            if max_overlap >= self.cfg.birth_max_iou {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            let mut tr = Tracklet::new(id);
            tr.positions.insert(frame, det.bbox);
            tr.template = Some(det_embeddings[d].clone());
            tr.embedding_history.insert(frame, det_embeddings[d].clone());
            tr.matched_frames.insert(frame);
            tr.set_quality(det.confidence);
            frame_embeddings.insert(id, det_embeddings[d].clone());
            let kalman = KalmanState::init(&det.bbox, &self.cfg.kalman);
            self.active.insert(id, Slot { tracklet: tr, kalman });
        }
        frame_embeddings
    }

    fn emit(&mut self, frame: Frame, embeddings: &BTreeMap<TrackId, Embedding>) -> FrameOutput {
        let mut out = FrameOutput {
            frame,
            boxes: Vec::new(),
        };
        for (&id, slot) in &self.active {
            if slot.tracklet.quality < self.cfg.quality.output_threshold {
                continue;
            }
            let b = slot.kalman.bbox();
            out.boxes.push((id, b));
            let e = self.emitted.entry(id).or_insert_with(|| Tracklet::new(id));
            e.positions.insert(frame, b);
            e.quality = slot.tracklet.quality;
            if let Some(emb) = embeddings.get(&id) {
                e.embedding_history.insert(frame, emb.clone());
            }
        }
        out
    }

    /// End the run and hand back all trajectories.
    pub fn finish(self) -> TrackingRun {
        let mut raw = self.finished;
        raw.extend(self.active.into_values().map(|s| s.tracklet));
        raw.sort_by_key(|t| t.id);
        TrackingRun {
            output: self.emitted.into_values().collect(),
            raw,
        }
    }
}

/// Run a tracker over every frame of `detections` (ascending), including
/// frames with no detections in between the first and last frame.
pub fn run_sequence(
    tracker: &mut Tracker<'_>,
    detections: &BTreeMap<Frame, Vec<Detection>>,
    frames: impl IntoIterator<Item = Frame>,
) -> Result<Vec<FrameOutput>, PipelineError> {
    let empty = Vec::new();
    frames
        .into_iter()
        .map(|f| tracker.track_step(f, detections.get(&f).unwrap_or(&empty)))
        .collect()
}
