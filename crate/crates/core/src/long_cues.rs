//! Long-term appearance cues: quality-aware history selection and cosine
//! features between a tracklet's history and a candidate detection.

use std::collections::HashMap;
use std::sync::Mutex;

use thiserror::Error;

use crate::entity::{Embedding, Frame, Tracklet};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LongCueError {
    #[error("embedding has zero norm")]
    ZeroVector,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("tracklet has no recorded appearance at or before frame {0}")]
    EmptyTracklet(Frame),
    #[error("history is empty")]
    EmptyHistory,
}

/// Appearance feature extractor for an image region `(frame, box)`.
pub trait AppearanceModel: Send + Sync {
    fn embed(&self, frame: Frame, bbox: &BoundingBox) -> Embedding;
}

/// Scores how usable an image region is for appearance matching, in `[0, 1]`.
pub trait QualityScorer: Send + Sync {
    fn score(&self, frame: Frame, bbox: &BoundingBox) -> f64;
}

/// Scorer that rates every region as fully usable.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassThroughQuality;

impl QualityScorer for PassThroughQuality {
    fn score(&self, _frame: Frame, _bbox: &BoundingBox) -> f64 {
        1.0
    }
}

/// Appearance model that returns the same unit vector everywhere. Used when
/// no appearance source is available; all long-term features become 1.
#[derive(Debug, Clone)]
pub struct ConstantAppearance {
    dim: usize,
}

impl ConstantAppearance {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }
}

impl AppearanceModel for ConstantAppearance {
    fn embed(&self, _frame: Frame, _bbox: &BoundingBox) -> Embedding {
        let mut v = vec![0.0; self.dim];
        v[0] = 1.0;
        Embedding::new(v).expect("finite")
    }
}

type CacheKey = (Frame, [u64; 4]);

fn cache_key(frame: Frame, b: &BoundingBox) -> CacheKey {
    (frame, [b.x.to_bits(), b.y.to_bits(), b.w.to_bits(), b.h.to_bits()])
}

/// Memoizes an [`AppearanceModel`] so each `(frame, box)` region is
/// featurized at most once.
pub struct EmbeddingCache<'a> {
    inner: &'a dyn AppearanceModel,
    entries: Mutex<HashMap<CacheKey, Embedding>>,
}

impl<'a> EmbeddingCache<'a> {
    pub fn new(inner: &'a dyn AppearanceModel) -> Self {
        Self {
            inner,
            entries: Mutex::new(HashMap::new()),
        }
    }

    /// Drop entries for frames before `frame`.
    pub fn retain_from(&self, frame: Frame) {
        self.entries.lock().unwrap().retain(|k, _| k.0 >= frame);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl AppearanceModel for EmbeddingCache<'_> {
    fn embed(&self, frame: Frame, bbox: &BoundingBox) -> Embedding {
        let key = cache_key(frame, bbox);
        // Held across the call so concurrent lookups of one key compute once.
        let mut entries = self.entries.lock().unwrap();
        entries
            .entry(key)
            .or_insert_with(|| self.inner.embed(frame, bbox))
            .clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryConfig {
    /// Number of history frames.
    pub k: usize,
    /// Length of each selection window, in frames.
    pub delta: u32,
}

impl Default for HistoryConfig {
    fn default() -> Self {
        Self { k: 3, delta: 15 }
    }
}

impl HistoryConfig {
    /// Recommended range for `delta`.
    pub const DELTA_RANGE: std::ops::RangeInclusive<u32> = 10..=20;
}

/// Selected history frames, most recent window first.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackletHistory {
    pub indices: Vec<Frame>,
    pub embeddings: Vec<Embedding>,
}

/// Pick, for each of the `k` windows `(t - i*delta, t - (i-1)*delta]`, the
/// recorded frame with the highest quality score.
///
/// Only frames that carry an embedding are candidates. Ties go to the most
/// recent frame. A window with no candidate repeats the oldest frame
/// selected so far (or the nearest selected frame when the leading windows
/// are empty), so the output always has exactly `k` entries.
pub fn select_history(
    tracklet: &Tracklet,
    t: Frame,
    cfg: &HistoryConfig,
    quality: &dyn QualityScorer,
) -> Result<TrackletHistory, LongCueError> {
    if tracklet.embedding_history.range(..=t).next().is_none() {
        return Err(LongCueError::EmptyTracklet(t));
    }
    let delta = cfg.delta.max(1) as i64;
    let k = cfg.k.max(1);
    let mut picks: Vec<Option<Frame>> = Vec::with_capacity(k);
    for i in 1..=k as i64 {
        let hi = t as i64 - (i - 1) * delta;
        let lo = t as i64 - i * delta; // exclusive
        let mut best: Option<(Frame, f64)> = None;
        if hi >= 1 {
            let lo_incl = (lo + 1).max(0) as Frame;
            for (&f, _) in tracklet.embedding_history.range(lo_incl..=hi as Frame) {
                let bbox = match tracklet.positions.get(&f) {
                    Some(b) => b,
                    None => continue,
                };
                let q = quality.score(f, bbox);
                if best.is_none_or(|(_, bq)| q >= bq) {
                    best = Some((f, q));
                }
            }
        }
        picks.push(best.map(|(f, _)| f));
    }

    let first = picks.iter().flatten().next().copied();
    let mut indices = Vec::with_capacity(k);
    let mut oldest: Option<Frame> = None;
    for p in picks {
        let f = match p.or(oldest).or(first) {
            Some(f) => f,
            None => {
                // Every window empty: fall back to the latest appearance <= t.
                *tracklet.embedding_history.range(..=t).next_back().unwrap().0
            }
        };
        if p.is_some() {
            oldest = p;
        }
        indices.push(f);
    }
    let embeddings = indices.iter().map(|f| tracklet.embedding_history[f].clone()).collect();
    Ok(TrackletHistory { indices, embeddings })
}

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, LongCueError> {
    if a.dim() != b.dim() {
        return Err(LongCueError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(LongCueError::ZeroVector);
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity between each history embedding and the detection's.
pub fn long_features(history: &TrackletHistory, det: &Embedding) -> Result<Vec<f64>, LongCueError> {
    if history.embeddings.is_empty() {
        return Err(LongCueError::EmptyHistory);
    }
    history.embeddings.iter().map(|e| cosine_similarity(e, det)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    struct TableQuality(HashMap<Frame, f64>);
    impl QualityScorer for TableQuality {
        fn score(&self, frame: Frame, _b: &BoundingBox) -> f64 {
            self.0[&frame]
        }
    }

    fn tracklet_over(frames: impl IntoIterator<Item = Frame>) -> Tracklet {
        let mut t = Tracklet::new(1);
        for f in frames {
            t.positions.insert(f, BoundingBox::new(f as f64, 0., 10., 10.).unwrap());
            t.embedding_history.insert(f, emb(&[1.0, f as f64]));
        }
        t
    }

    #[test]
    fn history_picks_window_argmax() {
        let t = tracklet_over(1..=4);
        let q = TableQuality(HashMap::from([(1, 0.1), (2, 0.9), (3, 0.3), (4, 0.5)]));
        let h = select_history(&t, 4, &HistoryConfig { k: 2, delta: 2 }, &q).unwrap();
        assert_eq!(h.indices, vec![4, 2]);
    }

    #[test]
    fn history_singleton() {
        let t = tracklet_over([7]);
        let h = select_history(&t, 7, &HistoryConfig { k: 1, delta: 15 }, &PassThroughQuality).unwrap();
        assert_eq!(h.indices, vec![7]);
    }

    #[test]
    fn young_tracklet_pads_with_oldest_selection() {
        let t = tracklet_over(1..=5);
        let h = select_history(&t, 5, &HistoryConfig::default(), &PassThroughQuality).unwrap();
        // window 1 holds frames 1..=5; ties go to the most recent
        assert_eq!(h.indices, vec![5, 5, 5]);
        let q = TableQuality((1..=5).map(|f| (f, 1.0 / f as f64)).collect());
        let h = select_history(&t, 5, &HistoryConfig::default(), &q).unwrap();
        assert_eq!(h.indices, vec![1, 1, 1]);
    }

    #[test]
    fn empty_leading_window_uses_later_pick() {
        let t = tracklet_over(1..=3);
        let h = select_history(&t, 10, &HistoryConfig { k: 3, delta: 4 }, &PassThroughQuality).unwrap();
        // windows (6,10], (2,6], (-2,2]
        assert_eq!(h.indices, vec![3, 3, 2]);
    }

    #[test]
    fn empty_tracklet_errors() {
        let t = tracklet_over(5..=6);
        assert_eq!(
            select_history(&t, 4, &HistoryConfig::default(), &PassThroughQuality),
            Err(LongCueError::EmptyTracklet(4))
        );
    }

    #[test]
    fn selection_invariant_to_quality_rescaling() {
        let t = tracklet_over(1..=40);
        let base: HashMap<Frame, f64> = (1..=40).map(|f| (f, ((f * 37) % 11) as f64 / 11.0)).collect();
        let scaled: HashMap<Frame, f64> = base.iter().map(|(f, q)| (*f, q * 3.5)).collect();
        let cfg = HistoryConfig { k: 3, delta: 10 };
        let a = select_history(&t, 40, &cfg, &TableQuality(base)).unwrap();
        let b = select_history(&t, 40, &cfg, &TableQuality(scaled)).unwrap();
        assert_eq!(a.indices, b.indices);
        assert!(a.indices.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&emb(&[3.0, 4.0]), &emb(&[3.0, 4.0])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[1.0, 1.0])).unwrap();
        assert!((c - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!((c * 1e5).round(), 70711.0);
        assert_eq!(
            cosine_similarity(&emb(&[0.0, 0.0]), &emb(&[1.0, 1.0])),
            Err(LongCueError::ZeroVector)
        );
        assert!(matches!(
            cosine_similarity(&emb(&[1.0]), &emb(&[1.0, 1.0])),
            Err(LongCueError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn long_feature_examples() {
        let d = emb(&[1.0, 2.0, 2.0]);
        let same = TrackletHistory {
            indices: vec![3, 2, 1],
            embeddings: vec![d.clone(); 3],
        };
        for v in long_features(&same, &d).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let ortho = TrackletHistory {
            indices: vec![3, 2, 1],
            embeddings: vec![emb(&[2.0, -1.0, 0.0]); 3],
        };
        assert_eq!(long_features(&ortho, &d).unwrap(), vec![0.0; 3]);

        // per-element hand arithmetic: |d| = 3
        let h = TrackletHistory {
            indices: vec![30, 15, 1],
            embeddings: vec![emb(&[1.0, 0.0, 0.0]), emb(&[0.0, 3.0, 4.0]), emb(&[-1.0, -2.0, -2.0])],
        };
        let f = long_features(&h, &d).unwrap();
        let expected = [1.0 / 3.0, 14.0 / 15.0, -1.0];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        // element order follows history order
        let rev = TrackletHistory {
            indices: h.indices.iter().rev().copied().collect(),
            embeddings: h.embeddings.iter().rev().cloned().collect(),
        };
        let fr = long_features(&rev, &d).unwrap();
        assert_eq!(fr, f.iter().rev().copied().collect::<Vec<_>>());
    }

    struct Counting(AtomicUsize);
    impl AppearanceModel for Counting {
        fn embed(&self, frame: Frame, _b: &BoundingBox) -> Embedding {
            self.0.fetch_add(1, Ordering::SeqCst);
            emb(&[frame as f64, 1.0])
        }
    }

    #[test]
    fn cache_featurizes_once() {
        let c = Counting(AtomicUsize::new(0));
        let cache = EmbeddingCache::new(&c);
        let b = BoundingBox::new(1., 2., 3., 4.).unwrap();
        for _ in 0..5 {
            cache.embed(3, &b);
        }
        cache.embed(4, &b);
        assert_eq!(c.0.load(Ordering::SeqCst), 2);
        cache.retain_from(4);
        assert_eq!(cache.len(), 1);
    }
}
