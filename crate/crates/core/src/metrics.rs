//! CLEAR MOT (MOTA, MOTP, FP, FN, IDS) and identity (IDF1, IDP, IDR)
//! metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::entity::{Frame, TrackId, Tracklet};
use crate::geometry::{iou, BoundingBox};
use crate::sac::hungarian_match;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("id {id} has two boxes in frame {frame}")]
    OverlappingIds { id: TrackId, frame: Frame },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalReport {
    pub mota: f64,
    /// Mean IoU distance `1 - IoU` over matched pairs (lower is better);
    /// 1 when nothing matched.
    pub motp: f64,
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub gt_count: usize,
    pub pred_count: usize,
    pub matches: usize,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// Per-frame boxes keyed by id; rejects an id with two boxes in a frame.
fn by_frame(tracks: &[Tracklet]) -> Result<BTreeMap<Frame, BTreeMap<TrackId, BoundingBox>>, MetricsError> {
    let mut out: BTreeMap<Frame, BTreeMap<TrackId, BoundingBox>> = BTreeMap::new();
    for t in tracks {
        for (&f, b) in &t.positions {
            if out.entry(f).or_default().insert(t.id, *b).is_some() {
                return Err(MetricsError::OverlappingIds { id: t.id, frame: f });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClearMot {
    pub mota: f64,
    pub motp: f64,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub gt_count: usize,
    pub pred_count: usize,
    pub matches: usize,
}

pub fn clear_mot(gt: &[Tracklet], pred: &[Tracklet], iou_threshold: f64) -> Result<ClearMot, MetricsError> {
    let gt_f = by_frame(gt)?;
    let pred_f = by_frame(pred)?;
    let frames: BTreeSet<Frame> = gt_f.keys().chain(pred_f.keys()).copied().collect();
    let empty = BTreeMap::new();
    let mut last_match: HashMap<TrackId, TrackId> = HashMap::new();
    let mut out = ClearMot::default();
    let mut dist_sum = 0.0;

    for f in frames {
        let g = gt_f.get(&f).unwrap_or(&empty);
        let p = pred_f.get(&f).unwrap_or(&empty);
        out.gt_count += g.len();
        out.pred_count += p.len();

        let mut pairs: Vec<(TrackId, TrackId, f64)> = Vec::new();
        let mut g_used = BTreeSet::new();
        let mut p_used = BTreeSet::new();
        // keep last correspondences that are still valid
        for (&gid, gb) in g {
            if let Some(&pid) = last_match.get(&gid) {
                if let Some(pb) = p.get(&pid) {
                    let v = iou(gb, pb);
                    if v >= iou_threshold && !p_used.contains(&pid) {
                        pairs.push((gid, pid, v));
                        g_used.insert(gid);
                        p_used.insert(pid);
                    }
                }
            }
        }
        let g_rest: Vec<(TrackId, &BoundingBox)> = g
            .iter()
            .filter(|(i, _)| !g_used.contains(*i))
            .map(|(i, b)| (*i, b))
            .collect();
        let p_rest: Vec<(TrackId, &BoundingBox)> = p
            .iter()
            .filter(|(i, _)| !p_used.contains(*i))
            .map(|(i, b)| (*i, b))
            .collect();
        let profit: Vec<Vec<f64>> = g_rest
            .iter()
            .map(|(_, gb)| {
                p_rest
                    .iter()
                    .map(|(_, pb)| {
                        let v = iou(gb, pb);
                        if v >= iou_threshold {
                            // keep IoU exactly at the threshold admissible
                            v.max(f64::MIN_POSITIVE)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        for (gi, pi) in hungarian_match(&profit).into_iter().enumerate() {
            if let Some(pi) = pi {
                let (gid, gb) = g_rest[gi];
                let (pid, pb) = p_rest[pi];
                pairs.push((gid, pid, iou(gb, pb)));
            }
        }

        for &(gid, pid, v) in &pairs {
            if let Some(prev) = last_match.insert(gid, pid) {
                if prev != pid {
                    out.ids += 1;
                }
            }
            dist_sum += 1.0 - v;
        }
        out.matches += pairs.len();
        out.fn_ += g.len() - pairs.len();
        out.fp += p.len() - pairs.len();
    }

    out.mota = if out.gt_count == 0 {
        if out.fp == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - (out.fp + out.fn_ + out.ids) as f64 / out.gt_count as f64
    };
    out.motp = if out.matches == 0 {
        1.0
    } else {
        dist_sum / out.matches as f64
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentityMetrics {
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// GT ids, prediction ids, overlap counts, GT box count, prediction box count.
type OverlapCounts = (Vec<TrackId>, Vec<TrackId>, Vec<Vec<f64>>, usize, usize);

/// Per (gt id, pred id) count of frames where both exist with IoU at or
/// above the threshold, plus total box counts.
fn overlap_counts(gt: &[Tracklet], pred: &[Tracklet], iou_threshold: f64) -> Result<OverlapCounts, MetricsError> {
    let gt_f = by_frame(gt)?;
    let pred_f = by_frame(pred)?;
    let gids: Vec<TrackId> = gt.iter().map(|t| t.id).collect::<BTreeSet<_>>().into_iter().collect();
    let pids: Vec<TrackId> = pred.iter().map(|t| t.id).collect::<BTreeSet<_>>().into_iter().collect();
    let mut counts = vec![vec![0.0; pids.len()]; gids.len()];
    for (f, g) in &gt_f {
        let Some(p) = pred_f.get(f) else { continue };
        for (gid, gb) in g {
            let gi = gids.binary_search(gid).expect("collected");
            for (pid, pb) in p {
                if iou(gb, pb) >= iou_threshold {
                    counts[gi][pids.binary_search(pid).expect("collected")] += 1.0;
                }
            }
        }
    }
    let n_gt = gt_f.values().map(BTreeMap::len).sum();
    let n_pred = pred_f.values().map(BTreeMap::len).sum();
    Ok((gids, pids, counts, n_gt, n_pred))
}

fn identity_from(idtp: usize, n_gt: usize, n_pred: usize) -> IdentityMetrics {
    let idfp = n_pred - idtp;
    let idfn = n_gt - idtp;
    let ratio = |a: usize, b: usize, vacuous: f64| if b == 0 { vacuous } else { a as f64 / b as f64 };
    let both_empty = n_gt == 0 && n_pred == 0;
    let vac = if both_empty { 1.0 } else { 0.0 };
    IdentityMetrics {
        idf1: ratio(2 * idtp, 2 * idtp + idfp + idfn, vac),
        idp: ratio(idtp, idtp + idfp, vac),
        idr: ratio(idtp, idtp + idfn, vac),
        idtp,
        idfp,
        idfn,
    }
}

pub fn identity_metrics(
    gt: &[Tracklet],
    pred: &[Tracklet],
    iou_threshold: f64,
) -> Result<IdentityMetrics, MetricsError> {
    let (_, _, counts, n_gt, n_pred) = overlap_counts(gt, pred, iou_threshold)?;
    let idtp: f64 = hungarian_match(&counts)
        .iter()
        .enumerate()
        .filter_map(|(g, p)| p.map(|p| counts[g][p]))
        .sum();
    Ok(identity_from(idtp.round() as usize, n_gt, n_pred))
}

pub fn evaluate(gt: &[Tracklet], pred: &[Tracklet], iou_threshold: f64) -> Result<EvalReport, MetricsError> {
    let c = clear_mot(gt, pred, iou_threshold)?;
    let i = identity_metrics(gt, pred, iou_threshold)?;
    Ok(EvalReport {
        mota: c.mota,
        motp: c.motp,
        idf1: i.idf1,
        idp: i.idp,
        idr: i.idr,
        fp: c.fp,
        fn_: c.fn_,
        ids: c.ids,
        gt_count: c.gt_count,
        pred_count: c.pred_count,
        matches: c.matches,
        idtp: i.idtp,
        idfp: i.idfp,
        idfn: i.idfn,
    })
}

impl EvalReport {
    fn fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("mota", format!("{:.4}", self.mota)),
            ("motp", format!("{:.4}", self.motp)),
            ("idf1", format!("{:.4}", self.idf1)),
            ("idp", format!("{:.4}", self.idp)),
            ("idr", format!("{:.4}", self.idr)),
            ("fp", self.fp.to_string()),
            ("fn", self.fn_.to_string()),
            ("ids", self.ids.to_string()),
            ("gt_count", self.gt_count.to_string()),
            ("pred_count", self.pred_count.to_string()),
            ("matches", self.matches.to_string()),
            ("idtp", self.idtp.to_string()),
            ("idfp", self.idfp.to_string()),
            ("idfn", self.idfn.to_string()),
        ]
    }

    /// Machine-readable `key=value` lines.
    pub fn to_key_value(&self) -> String {
        self.fields().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Header row and value row with aligned columns.
    pub fn to_table(&self) -> String {
        let fields = self.fields();
        let widths: Vec<usize> = fields.iter().map(|(k, v)| k.len().max(v.len())).collect();
        let row = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        format!(
            "{}\n{}\n",
            row(fields.iter().map(|f| f.0).collect()),
            row(fields.iter().map(|f| f.1.as_str()).collect())
        )
    }

    /// Parse the output of [`EvalReport::to_key_value`].
    pub fn from_key_value(text: &str) -> Option<Self> {
        let map: HashMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
        let f = |k: &str| map.get(k)?.trim().parse::<f64>().ok();
        let u = |k: &str| map.get(k)?.trim().parse::<usize>().ok();
        Some(Self {
            mota: f("mota")?,
            motp: f("motp")?,
            idf1: f("idf1")?,
            idp: f("idp")?,
            idr: f("idr")?,
            fp: u("fp")?,
            fn_: u("fn")?,
            ids: u("ids")?,
            gt_count: u("gt_count")?,
            pred_count: u("pred_count")?,
            matches: u("matches")?,
            idtp: u("idtp")?,
            idfp: u("idfp")?,
            idfn: u("idfn")?,
        })
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(x: f64) -> BoundingBox {
        BoundingBox::new(x, 0.0, 10.0, 10.0).unwrap()
    }

    fn track(id: TrackId, frames: impl IntoIterator<Item = (Frame, f64)>) -> Tracklet {
        Tracklet::with_positions(id, frames.into_iter().map(|(f, x)| (f, bx(x))))
    }

    fn two_objects() -> Vec<Tracklet> {
        vec![
            track(1, (1..=10).map(|f| (f, 0.0))),
            track(2, (1..=10).map(|f| (f, 100.0))),
        ]
    }

    #[test]
    fn perfect_tracking() {
        let gt = two_objects();
        let r = evaluate(&gt, &gt, 0.5).unwrap();
        assert_eq!((r.mota, r.fp, r.fn_, r.ids), (1.0, 0, 0, 0));
        assert_eq!(r.idf1, 1.0);
        assert_eq!(r.motp, 0.0);
    }

    #[test]
    fn one_object_missed() {
        let gt = two_objects();
        let r = evaluate(&gt, &gt[..1], 0.5).unwrap();
        assert_eq!((r.fn_, r.gt_count), (10, 20));
        assert!((r.mota - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mid_sequence_swap() {
        let gt = two_objects();
        let pred = vec![
            track(7, (1..=10).map(|f| (f, if f <= 5 { 0.0 } else { 100.0 }))),
            track(8, (1..=10).map(|f| (f, if f <= 5 { 100.0 } else { 0.0 }))),
        ];
        let r = evaluate(&gt, &pred, 0.5).unwrap();
        assert_eq!(r.ids, 2);
        assert!((r.mota - 0.9).abs() < 1e-12);
        assert_eq!(r.idtp, 10);
        assert!((r.idf1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_prediction() {
        let r = evaluate(&two_objects(), &[], 0.5).unwrap();
        assert_eq!((r.idf1, r.idr), (0.0, 0.0));
        assert_eq!(r.mota, 0.0);
    }

    #[test]
    fn duplicate_id_in_frame_rejected() {
        let pred = vec![track(3, [(1, 0.0)]), track(3, [(1, 50.0)])];
        assert_eq!(
            evaluate(&two_objects(), &pred, 0.5),
            Err(MetricsError::OverlappingIds { id: 3, frame: 1 })
        );
    }

    #[test]
    fn persistence_prefers_previous_pair() {
        // frame 2: pred 9 fits gt 1 better, but pred 8 is still valid
        let gt = vec![track(1, [(1, 0.0), (2, 0.0)])];
        let pred = vec![track(8, [(1, 0.0), (2, 3.0)]), track(9, [(2, 0.0)])];
        let c = clear_mot(&gt, &pred, 0.5).unwrap();
        assert_eq!((c.ids, c.fp), (0, 1));
    }

    #[test]
    fn fp_injection_lowers_mota_and_relabeling_is_invariant() {
        let gt = two_objects();
        let mut pred = gt.clone();
        let mut last = evaluate(&gt, &pred, 0.5).unwrap().mota;
        for k in 0..5 {
            pred.push(track(100 + k, [(3, 500.0 + 50.0 * k as f64)]));
            let m = evaluate(&gt, &pred, 0.5).unwrap().mota;
            assert!(m < last && m <= 1.0);
            last = m;
        }
        let relabeled: Vec<Tracklet> = pred
            .iter()
            .map(|t| Tracklet::with_positions(t.id * 31 + 7, t.positions.clone()))
            .collect();
        assert_eq!(evaluate(&gt, &pred, 0.5), evaluate(&gt, &relabeled, 0.5));
    }

    #[test]
    fn identity_metrics_match_brute_force() {
        fn best(counts: &[Vec<f64>], g: usize, used: &mut Vec<bool>) -> f64 {
            if g == counts.len() {
                return 0.0;
            }
            let mut b = best(counts, g + 1, used);
            for p in 0..used.len() {
                if !used[p] {
                    used[p] = true;
                    b = b.max(counts[g][p] + best(counts, g + 1, used));
                    used[p] = false;
                }
            }
            b
        }
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let ng = rng.random_range(1..=5);
            let np = rng.random_range(1..=5);
            let lanes: Vec<f64> = (0..ng).map(|i| i as f64 * 40.0).collect();
            let gt: Vec<Tracklet> = (0..ng)
                .map(|i| track(i as TrackId + 1, (1..=12).map(|f| (f, lanes[i]))))
                .collect();
            let pred: Vec<Tracklet> = (0..np)
                .map(|j| {
                    let mut frames: Vec<(Frame, f64)> = Vec::new();
                    for f in 1..=12 {
                        if rng.random_bool(0.7) {
                            frames.push((f, lanes[rng.random_range(0..ng)] + rng.random_range(0.0..4.0)));
                        }
                    }
                    track(50 + j as TrackId, frames)
                })
                .filter(|t| !t.positions.is_empty())
                .collect();
            // pred ids may share frames with the same lane: only one box per id
            let (_, _, counts, n_gt, n_pred) = overlap_counts(&gt, &pred, 0.5).unwrap();
            let used = &mut vec![false; counts.first().map_or(0, Vec::len)];
            let want = identity_from(best(&counts, 0, used) as usize, n_gt, n_pred);
            assert_eq!(identity_metrics(&gt, &pred, 0.5).unwrap(), want);
        }
    }

    #[test]
    fn report_round_trips_through_key_value() {
        let r = evaluate(&two_objects(), &two_objects()[..1], 0.5).unwrap();
        let back = EvalReport::from_key_value(&r.to_key_value()).unwrap();
        assert_eq!(back.fn_, r.fn_);
        assert!((back.mota - r.mota).abs() < 1e-4);
        let table = r.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].len(), lines[1].len());
    }
}
