//! Shared entity model: detections, appearance embeddings and tracklets.

use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::BoundingBox;

/// Frame index, starting at 1.
pub type Frame = u32;

/// Tracklet identity label.
pub type TrackId = u64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub frame: Frame,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl Detection {
    /// Confidence is clamped into `[0, 1]`; NaN becomes 0.
    pub fn new(frame: Frame, bbox: BoundingBox, confidence: f64) -> Self {
        let confidence = if confidence.is_nan() {
            0.0
        } else {
            confidence.clamp(0.0, 1.0)
        };
        Self {
            frame,
            bbox,
            confidence,
        }
    }
}

/// Fixed-length appearance feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Returns `None` if any entry is not finite.
    pub fn new(values: Vec<f64>) -> Option<Self> {
        values.iter().all(|v| v.is_finite()).then_some(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Unit-norm copy; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Embedding> {
        let n = self.norm();
        (n > 0.0).then(|| Embedding(self.0.iter().map(|v| v / n).collect()))
    }

    /// Normalized mean of a set of embeddings of equal dimension.
    pub fn normalized_mean<'a>(items: impl IntoIterator<Item = &'a Embedding>) -> Option<Embedding> {
        let mut acc: Option<Vec<f64>> = None;
        for e in items {
            let u = e.normalized()?;
            match acc.as_mut() {
                None => acc = Some(u.0),
                Some(a) => {
                    for (x, y) in a.iter_mut().zip(&u.0) {
                        *x += y;
                    }
                }
            }
        }
        Embedding(acc?).normalized()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Active,
    Dropped,
}

/// One tracked identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub id: TrackId,
    pub positions: BTreeMap<Frame, BoundingBox>,
    /// Overall tracking quality, kept in `[0, 1]`.
    pub quality: f64,
    /// Exemplar appearance the short-term tracker searches for.
    pub template: Option<Embedding>,
    pub embedding_history: BTreeMap<Frame, Embedding>,
    /// Frames whose position came from a matched detection.
    pub matched_frames: BTreeSet<Frame>,
    pub state: TrackState,
}

impl Tracklet {
    pub fn new(id: TrackId) -> Self {
        Self {
            id,
            positions: BTreeMap::new(),
            quality: 1.0,
            template: None,
            embedding_history: BTreeMap::new(),
            matched_frames: BTreeSet::new(),
            state: TrackState::Active,
        }
    }

    pub fn with_positions(id: TrackId, positions: impl IntoIterator<Item = (Frame, BoundingBox)>) -> Self {
        let mut t = Self::new(id);
        t.positions.extend(positions);
        t
    }

    pub fn set_quality(&mut self, q: f64) {
        self.quality = if q.is_nan() { 0.0 } else { q.clamp(0.0, 1.0) };
    }

    pub fn box_at(&self, frame: Frame) -> Option<&BoundingBox> {
        self.positions.get(&frame)
    }

    pub fn first_frame(&self) -> Option<Frame> {
        self.positions.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<Frame> {
        self.positions.keys().next_back().copied()
    }

    /// Most recent position at or before `frame`.
    pub fn last_position_until(&self, frame: Frame) -> Option<(Frame, &BoundingBox)> {
        self.positions.range(..=frame).next_back().map(|(f, b)| (*f, b))
    }

    pub fn is_active(&self) -> bool {
        self.state == TrackState::Active
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}
