//! Switcher retrieval and classifier input assembly.

use crate::entity::{Detection, Embedding, Frame, TrackId, Tracklet};
use crate::geometry::iou;
use crate::long_cues::{long_features, select_history, AppearanceModel, HistoryConfig, QualityScorer, TrackletHistory};
use crate::short_cues::{short_feature, FrameContext, ShortTermProvider, ShortTermResult};

use super::boost::BoostedModel;
use super::SacError;

/// Classifier input: target part `[f_s, f_l1..f_lK]` followed by the
/// switcher part with the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn from_values(values: Vec<f64>) -> Result<Self, SacError> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(SacError::LengthMismatch {
                expected: values.len() + values.len() % 2,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SacError::NonFinite);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// History length `K` (each half holds `K + 1` entries).
    pub fn k(&self) -> usize {
        self.values.len() / 2 - 1
    }

    pub fn target_half(&self) -> &[f64] {
        &self.values[..self.values.len() / 2]
    }

    pub fn switcher_half(&self) -> &[f64] {
        &self.values[self.values.len() / 2..]
    }

    /// Target and switcher halves exchanged.
    pub fn swapped(&self) -> Self {
        let half = self.values.len() / 2;
        let mut values = self.values[half..].to_vec();
        values.extend_from_slice(&self.values[..half]);
        Self { values }
    }

    pub fn masked(&self, mask: &FeatureMask) -> Self {
        let half = self.values.len() / 2;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let in_switcher = i >= half;
                let is_short = i % half == 0;
                let keep =
                    (!in_switcher || mask.switcher) && ((is_short && mask.short_term) || (!is_short && mask.long_term));
                if keep {
                    v
                } else {
                    0.0
                }
            })
            .collect();
        Self { values }
    }
}

/// Which cue groups reach the classifier; masked entries are zeroed so the
/// vector length stays `2(K+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureMask {
    pub short_term: bool,
    pub long_term: bool,
    pub switcher: bool,
}

impl FeatureMask {
    pub const FULL: Self = Self {
        short_term: true,
        long_term: true,
        switcher: true,
    };
    pub const NO_SWITCHER: Self = Self {
        short_term: true,
        long_term: true,
        switcher: false,
    };
    pub const SHORT_ONLY: Self = Self {
        short_term: true,
        long_term: false,
        switcher: false,
    };
    pub const LONG_ONLY: Self = Self {
        short_term: false,
        long_term: true,
        switcher: false,
    };
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::FULL
    }
}

/// Concatenate target and switcher cue features; an absent switcher
/// contributes zeros.
pub fn assemble_features(
    target_fs: f64,
    target_long: &[f64],
    switcher_fs: Option<f64>,
    switcher_long: Option<&[f64]>,
    k: usize,
) -> Result<FeatureVector, SacError> {
    let check = |len: usize| {
        if len == k {
            Ok(())
        } else {
            Err(SacError::LengthMismatch { expected: k, got: len })
        }
    };
    check(target_long.len())?;
    if let Some(l) = switcher_long {
        check(l.len())?;
    }
    let mut values = Vec::with_capacity(2 * (k + 1));
    values.push(target_fs);
    values.extend_from_slice(target_long);
    values.push(switcher_fs.unwrap_or(0.0));
    match switcher_long {
        Some(l) => values.extend_from_slice(l),
        None => values.extend(std::iter::repeat_n(0.0, k)),
    }
    FeatureVector::from_values(values)
}

#[derive(Debug, Clone, Copy)]
pub struct SwitcherQuery<'a> {
    pub switcher: Option<&'a Tracklet>,
    pub overlap: f64,
}

/// The other tracklet overlapping `target` most at frame `t`.
///
/// Absent when no other tracklet has positive IoU. Ties go to the
/// smallest tracklet id.
pub fn find_switcher<'a>(target: &Tracklet, others: &[&'a Tracklet], t: Frame) -> SwitcherQuery<'a> {
    let mut best: Option<(&'a Tracklet, f64)> = None;
    if let Some(tb) = target.box_at(t) {
        for &y in others {
            if y.id == target.id {
                continue;
            }
            let Some(yb) = y.box_at(t) else { continue };
            let v = iou(tb, yb);
            if v <= 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, bv)) => v > bv || (v == bv && y.id < b.id),
            };
            if better {
                best = Some((y, v));
            }
        }
    }
    SwitcherQuery {
        switcher: best.map(|(y, _)| y),
        overlap: best.map_or(0.0, |(_, v)| v),
    }
}

/// Scores a tracklet/detection feature vector with a matching probability.
pub trait PairClassifier: Send + Sync {
    fn score(&self, features: &FeatureVector) -> Result<f64, SacError>;
}

impl PairClassifier for BoostedModel {
    fn score(&self, features: &FeatureVector) -> Result<f64, SacError> {
        self.classify(features.values())
    }
}

/// Hand-crafted position-only affinity: the target's short-term IoU.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShortTermAffinity;

impl PairClassifier for ShortTermAffinity {
    fn score(&self, features: &FeatureVector) -> Result<f64, SacError> {
        Ok(features.values()[0].clamp(0.0, 1.0))
    }
}

/// Providers needed to compute cue features.
#[derive(Clone, Copy)]
pub struct CueProviders<'a> {
    pub short: &'a dyn ShortTermProvider,
    pub appearance: &'a dyn AppearanceModel,
    pub quality: &'a dyn QualityScorer,
}

/// Per-target short-term result and selected history.
#[derive(Debug, Clone)]
pub struct TargetCues {
    pub id: TrackId,
    pub short: ShortTermResult,
    pub history: TrackletHistory,
}

/// Everything needed to build the feature vector of any
/// (tracklet, detection) pair when associating frame `frame`.
#[derive(Debug, Clone)]
pub struct FrameCues {
    pub frame: Frame,
    pub k: usize,
    pub targets: Vec<TargetCues>,
    /// Index into `targets` of each target's switcher.
    pub switchers: Vec<Option<usize>>,
    pub detections: Vec<Detection>,
    pub det_embeddings: Vec<Embedding>,
}

impl FrameCues {
    /// Compute cues for `tracklets` (positions up to `frame - 1`) against
    /// `detections` of `frame`.
    pub fn extract(
        providers: &CueProviders<'_>,
        history: &HistoryConfig,
        tracklets: &[&Tracklet],
        frame: Frame,
        detections: &[Detection],
    ) -> Result<Self, SacError> {
        let prev = frame.saturating_sub(1);
        let ctx = FrameContext {
            frame,
            appearance: providers.appearance,
        };
        let mut targets = Vec::with_capacity(tracklets.len());
        for t in tracklets {
            let short = providers.short.track(t, &ctx)?;
            let hist = select_history(t, prev, history, providers.quality)?;
            targets.push(TargetCues {
                id: t.id,
                short,
                history: hist,
            });
        }
        let switchers = tracklets
            .iter()
            .map(|t| {
                find_switcher(t, tracklets, prev)
                    .switcher
                    .and_then(|s| tracklets.iter().position(|o| o.id == s.id))
            })
            .collect();
        let det_embeddings = detections
            .iter()
            .map(|d| providers.appearance.embed(frame, &d.bbox))
            .collect();
        Ok(Self {
            frame,
            k: history.k.max(1),
            targets,
            switchers,
            detections: detections.to_vec(),
            det_embeddings,
        })
    }

    fn part(&self, target: usize, det: usize) -> Result<(f64, Vec<f64>), SacError> {
        let cues = &self.targets[target];
        let fs = short_feature(&cues.short.track_box, &self.detections[det].bbox);
        let fl = long_features(&cues.history, &self.det_embeddings[det])?;
        Ok((fs, fl))
    }

    pub fn features(&self, target: usize, det: usize, mask: &FeatureMask) -> Result<FeatureVector, SacError> {
        let (fs, fl) = self.part(target, det)?;
        let sw = match self.switchers[target] {
            Some(s) => Some(self.part(s, det)?),
            None => None,
        };
        let fv = assemble_features(
            fs,
            &fl,
            sw.as_ref().map(|s| s.0),
            sw.as_ref().map(|s| s.1.as_slice()),
            self.k,
        )?;
        Ok(fv.masked(mask))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;

    fn track(id: TrackId, x: f64) -> Tracklet {
        Tracklet::with_positions(id, [(5, BoundingBox::new(x, 0.0, 10.0, 10.0).unwrap())])
    }

    #[test]
    fn switcher_is_largest_overlap() {
        let target = track(1, 0.0);
        let a = track(2, 5.0); // IoU 1/3
        let b = track(3, 20.0); // IoU 0
        let q = find_switcher(&target, &[&a, &b], 5);
        assert_eq!(q.switcher.map(|s| s.id), Some(2));
        assert!((q.overlap - 1.0 / 3.0).abs() < 1e-12);

        let far = track(4, 7.0); // IoU 3/17
        let q = find_switcher(&target, &[&far, &b, &a], 5);
        assert_eq!(q.switcher.map(|s| s.id), Some(2));
    }

    #[test]
    fn switcher_absent_cases() {
        let target = track(1, 0.0);
        assert!(find_switcher(&target, &[], 5).switcher.is_none());
        let b = track(3, 20.0);
        assert!(find_switcher(&target, &[&b], 5).switcher.is_none());
        assert!(find_switcher(&target, &[&target], 5).switcher.is_none());
    }

    #[test]
    fn switcher_tie_broken_by_id_regardless_of_order() {
        let target = track(1, 10.0);
        let left = track(9, 5.0);
        let right = track(4, 15.0);
        for others in [[&left, &right], [&right, &left]] {
            assert_eq!(find_switcher(&target, &others, 5).switcher.map(|s| s.id), Some(4));
        }
    }

    #[test]
    fn assemble_layout() {
        let f = assemble_features(0.5, &[0.1, 0.2, 0.3], Some(0.4), Some(&[0.6, 0.7, 0.8]), 3).unwrap();
        assert_eq!(f.values().len(), 8);
        assert_eq!(f.values(), &[0.5, 0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8]);
        let f = assemble_features(1.0, &[1.0, 1.0, 1.0], None, None, 3).unwrap();
        assert_eq!(f.values(), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.switcher_half(), &[0.0; 4]);
        assert_eq!(f.swapped().values(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            assemble_features(1.0, &[1.0], None, None, 3),
            Err(SacError::LengthMismatch { expected: 3, got: 1 })
        ));
        assert!(assemble_features(1.0, &[1.0; 3], Some(0.0), Some(&[1.0; 2]), 3).is_err());
    }

    #[test]
    fn masks_zero_selected_groups() {
        let f = FeatureVector::from_values(vec![1., 2., 3., 4., 5., 6., 7., 8.]).unwrap();
        assert_eq!(f.masked(&FeatureMask::FULL), f);
        assert_eq!(
            f.masked(&FeatureMask::NO_SWITCHER).values(),
            &[1., 2., 3., 4., 0., 0., 0., 0.]
        );
        assert_eq!(
            f.masked(&FeatureMask::SHORT_ONLY).values(),
            &[1., 0., 0., 0., 0., 0., 0., 0.]
        );
        assert_eq!(
            f.masked(&FeatureMask::LONG_ONLY).values(),
            &[0., 2., 3., 4., 0., 0., 0., 0.]
        );
        assert_eq!(f.k(), 3);
    }
}
