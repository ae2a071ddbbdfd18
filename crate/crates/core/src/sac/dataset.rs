//! Classifier training-set generation from tracker hypotheses and ground truth.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entity::{Detection, Frame, TrackId, Tracklet};
use crate::geometry::{iou, BoundingBox};
use crate::long_cues::HistoryConfig;

use super::boost::Dataset;
use super::features::{CueProviders, FeatureMask, FeatureVector, FrameCues};
use super::hungarian::hungarian_match;
use super::SacError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub features: FeatureVector,
    pub label: bool,
}

/// How candidate detections are drawn for each valid tracklet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectionSampling {
    /// Every detection whose center lies within `radius` box diagonals of
    /// the tracklet's current box.
    Gated { radius: f64 },
    /// One uniformly drawn detection of the next frame.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSetConfig {
    pub history: HistoryConfig,
    /// Hypothesis/GT pairs need IoU strictly above this to associate.
    pub gt_iou: f64,
    pub sampling: DetectionSampling,
    pub mask: FeatureMask,
}

impl Default for TrainingSetConfig {
    fn default() -> Self {
        Self {
            history: HistoryConfig::default(),
            gt_iou: 0.6,
            sampling: DetectionSampling::Gated { radius: 2.0 },
            mask: FeatureMask::FULL,
        }
    }
}

/// Maximum-IoU association of `boxes` to GT ids within one frame.
pub fn associate_to_gt(boxes: &[BoundingBox], gt: &[(TrackId, BoundingBox)], min_iou: f64) -> Vec<Option<TrackId>> {
    let profit: Vec<Vec<f64>> = boxes
        .iter()
        .map(|b| {
            gt.iter()
                .map(|(_, g)| {
                    let v = iou(b, g);
                    if v > min_iou {
                        v
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    hungarian_match(&profit)
        .into_iter()
        .map(|c| c.map(|c| gt[c].0))
        .collect()
}

/// Anchor rule: all associated anchors agree on one GT id and at most one
/// anchor is unassociated. Returns the agreed id.
pub fn anchor_identity(anchors: &[Option<TrackId>]) -> Option<TrackId> {
    let unmatched = anchors.iter().filter(|a| a.is_none()).count();
    if unmatched > 1 {
        return None;
    }
    let mut ids = anchors.iter().flatten();
    let first = *ids.next()?;
    ids.all(|&i| i == first).then_some(first)
}

fn gt_by_frame(gt: &[Tracklet]) -> BTreeMap<Frame, Vec<(TrackId, BoundingBox)>> {
    let mut out: BTreeMap<Frame, Vec<(TrackId, BoundingBox)>> = BTreeMap::new();
    for t in gt {
        for (&f, b) in &t.positions {
            out.entry(f).or_default().push((t.id, *b));
        }
    }
    out
}

/// Generate labelled feature vectors.
///
/// Hypotheses are associated with GT per frame. For a hypothesis at frame
/// `t` whose anchors `t, t-δ, …, t-(K-1)δ` pass [`anchor_identity`], each
/// sampled detection of frame `t+1` yields one sample labelled by whether
/// the detection belongs to the same GT identity; every positive also
/// yields its target/switcher-swapped vector as a negative.
pub fn build_training_set(
    tracker_output: &[Tracklet],
    gt: &[Tracklet],
    detections: &BTreeMap<Frame, Vec<Detection>>,
    providers: &CueProviders<'_>,
    cfg: &TrainingSetConfig,
) -> Result<Vec<TrainingSample>, SacError> {
    let gt_frames = gt_by_frame(gt);
    let empty = Vec::new();
    let no_dets: Vec<Detection> = Vec::new();

    // hypothesis id -> frame -> GT id
    let mut hyp_gt: HashMap<TrackId, BTreeMap<Frame, Option<TrackId>>> = HashMap::new();
    let frames: BTreeSet<Frame> = tracker_output
        .iter()
        .flat_map(|t| t.positions.keys().copied())
        .collect();
    for &f in &frames {
        let present: Vec<&Tracklet> = tracker_output.iter().filter(|t| t.positions.contains_key(&f)).collect();
        let boxes: Vec<BoundingBox> = present.iter().map(|t| t.positions[&f]).collect();
        let ids = associate_to_gt(&boxes, gt_frames.get(&f).unwrap_or(&empty), cfg.gt_iou);
        for (t, id) in present.iter().zip(ids) {
            hyp_gt.entry(t.id).or_default().insert(f, id);
        }
    }

    let mut rng = match cfg.sampling {
        DetectionSampling::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        DetectionSampling::Gated { .. } => None,
    };
    let k = cfg.history.k.max(1);
    let delta = cfg.history.delta.max(1);
    let mut views: BTreeMap<TrackId, Tracklet> = BTreeMap::new();
    let mut samples = Vec::new();

    for &t in &frames {
        // extend each hypothesis' view up to frame t
        for tr in tracker_output.iter().filter(|tr| tr.positions.contains_key(&t)) {
            let view = views.entry(tr.id).or_insert_with(|| Tracklet::new(tr.id));
            let bbox = tr.positions[&t];
            view.positions.insert(t, bbox);
            let emb = match tr.embedding_history.get(&t) {
                Some(e) => e.clone(),
                None => providers.appearance.embed(t, &bbox),
            };
            if tr.matched_frames.contains(&t) {
                view.matched_frames.insert(t);
                view.template = Some(emb.clone());
            } else if view.template.is_none() {
                view.template = Some(emb.clone());
            }
            view.embedding_history.insert(t, emb);
        }

        let next = t + 1;
        let dets = detections.get(&next).unwrap_or(&no_dets).as_slice();
        if dets.is_empty() {
            continue;
        }
        let active: Vec<&Tracklet> = views.values().filter(|v| v.positions.contains_key(&t)).collect();
        let mut valid: Vec<(usize, TrackId)> = Vec::new();
        for (i, v) in active.iter().enumerate() {
            let anchors: Vec<Option<TrackId>> = (0..k as u32)
                .map(|j| {
                    let f = t.checked_sub(j * delta)?;
                    hyp_gt.get(&v.id)?.get(&f).copied().flatten()
                })
                .collect();
            if let Some(id) = anchor_identity(&anchors) {
                valid.push((i, id));
            }
        }
        if valid.is_empty() {
            continue;
        }

        let cues = FrameCues::extract(providers, &cfg.history, &active, next, dets)?;
        let det_boxes: Vec<BoundingBox> = dets.iter().map(|d| d.bbox).collect();
        let det_gt = associate_to_gt(&det_boxes, gt_frames.get(&next).unwrap_or(&empty), cfg.gt_iou);

        for (i, gt_id) in valid {
            let current = active[i].positions[&t];
            let chosen: Vec<usize> = match (cfg.sampling, rng.as_mut()) {
                (DetectionSampling::Random { .. }, Some(r)) => vec![r.random_range(0..dets.len())],
                (DetectionSampling::Gated { radius }, _) => (0..dets.len())
                    .filter(|&d| dets[d].bbox.center_distance(&current) <= radius * current.diagonal())
                    .collect(),
                _ => unreachable!("rng exists iff sampling is random"),
            };
            for d in chosen {
                let features = cues.features(i, d, &cfg.mask)?;
                let label = det_gt[d] == Some(gt_id);
                if label {
                    samples.push(TrainingSample {
                        features: features.swapped(),
                        label: false,
                    });
                }
                samples.push(TrainingSample { features, label });
            }
        }
    }
    Ok(samples)
}

pub fn to_dataset(samples: &[TrainingSample]) -> Dataset {
    let mut data = Dataset::default();
    for s in samples {
        data.push(s.features.values().to_vec(), s.label);
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_rules() {
        assert_eq!(anchor_identity(&[Some(7), Some(7), None]), Some(7));
        assert_eq!(anchor_identity(&[Some(7), Some(7), Some(8)]), None);
        assert_eq!(anchor_identity(&[Some(7), None, None]), None);
        assert_eq!(anchor_identity(&[Some(3)]), Some(3));
        assert_eq!(anchor_identity(&[None]), None);
    }

    #[test]
    fn gt_association_gates_on_iou() {
        let b = |x: f64| BoundingBox::new(x, 0.0, 10.0, 10.0).unwrap();
        let gt = vec![(5, b(0.0)), (6, b(30.0))];
        // IoU(b(1), b(0)) = 90/110 > 0.6; IoU(b(34), b(30)) = 60/140 < 0.6
        let ids = associate_to_gt(&[b(34.0), b(1.0)], &gt, 0.6);
        assert_eq!(ids, vec![None, Some(5)]);
    }
}
