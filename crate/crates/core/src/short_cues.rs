//! Short-term cues: the single-object-tracker interface, a deterministic
//! reference tracker, the IoU short-term feature and tracking-quality
//! dynamics.

use thiserror::Error;

use crate::entity::{Frame, Tracklet};
use crate::geometry::{iou, BoundingBox};
use crate::long_cues::{cosine_similarity, AppearanceModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShortCueError {
    #[error("tracklet {0} has no template embedding")]
    MissingTemplate(u64),
    #[error("tracklet {0} has no position before frame {1}")]
    NoPosition(u64, Frame),
}

/// Output of a short-term tracker for one target in the next frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortTermResult {
    pub track_box: BoundingBox,
    /// Tracker confidence, in `[0, 1]`.
    pub score: f64,
}

/// What a short-term tracker may look at when searching frame `frame`.
pub struct FrameContext<'a> {
    pub frame: Frame,
    pub appearance: &'a dyn AppearanceModel,
}

/// A single-object tracker: given a tracklet (its positions before
/// `ctx.frame` and its template) find the target in `ctx.frame`.
pub trait ShortTermProvider: Send + Sync {
    fn track(&self, tracklet: &Tracklet, ctx: &FrameContext<'_>) -> Result<ShortTermResult, ShortCueError>;
}

/// Constant-velocity box extrapolation scored by template similarity.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceTracker;

impl ReferenceTracker {
    pub fn predict_box(tracklet: &Tracklet, frame: Frame) -> Option<BoundingBox> {
        let mut before = tracklet.positions.range(..frame).rev();
        let (&f1, b1) = before.next()?;
        let steps = (frame - f1) as f64;
        match before.next() {
            None => Some(*b1),
            Some((&f0, b0)) => {
                let dt = (f1 - f0) as f64;
                let (cx0, cy0) = b0.center();
                let (cx1, cy1) = b1.center();
                let (vx, vy) = ((cx1 - cx0) / dt, (cy1 - cy0) / dt);
                Some(b1.translate(vx * steps, vy * steps))
            }
        }
    }
}

impl ShortTermProvider for ReferenceTracker {
    fn track(&self, tracklet: &Tracklet, ctx: &FrameContext<'_>) -> Result<ShortTermResult, ShortCueError> {
        let template = tracklet
            .template
            .as_ref()
            .ok_or(ShortCueError::MissingTemplate(tracklet.id))?;
        let track_box =
            Self::predict_box(tracklet, ctx.frame).ok_or(ShortCueError::NoPosition(tracklet.id, ctx.frame))?;
        let sample = ctx.appearance.embed(ctx.frame, &track_box);
        let score = cosine_similarity(template, &sample).unwrap_or(0.0).clamp(0.0, 1.0);
        Ok(ShortTermResult { track_box, score })
    }
}

/// Tracking-quality update parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityParams {
    pub decay: f64,
    pub k: u32,
    /// Tracklets whose quality falls below this are dropped.
    pub drop_threshold: f64,
    /// Tracklets below this quality are not emitted.
    pub output_threshold: f64,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self {
            decay: 0.95,
            k: 16,
            drop_threshold: 0.1,
            output_threshold: 0.5,
        }
    }
}

/// IoU between the short-term tracker's box and a detection box.
pub fn short_feature(track_box: &BoundingBox, det_box: &BoundingBox) -> f64 {
    iou(track_box, det_box)
}

/// One step of the tracking-quality recursion.
///
/// Matched: `(q + iou_td * p) / 2`. Unmatched: `q * decay * p^k`.
pub fn update_quality(q: f64, matched: bool, iou_td: f64, p: f64, params: &QualityParams) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let next = if matched {
        (q + iou_td.clamp(0.0, 1.0) * p) / 2.0
    } else {
        q * params.decay * p.powi(params.k as i32)
    };
    next.clamp(0.0, 1.0)
}
