//! Detection pre-filtering (strict NMS, confidence refinement) and the
//! offline clustering post-process: split tracklets into appearance-
//! consistent slices, merge slices into identities, interpolate gaps.

use std::collections::{BTreeMap, BTreeSet};

use crate::entity::{Detection, Embedding, Frame, TrackId, Tracklet};
use crate::geometry::{iou, BoundingBox};
use crate::long_cues::{cosine_similarity, AppearanceModel, QualityScorer};

pub const DEFAULT_NMS_IOU: f64 = 0.4;

/// Greedy non-maximum suppression: visit detections by descending
/// confidence (ties by input order) and drop any whose IoU with an already
/// kept box exceeds `iou_threshold`. Kept detections stay in input order.
pub fn strict_nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| iou(&dets[k].bbox, &dets[i].bbox) <= iou_threshold) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept.into_iter().map(|i| dets[i]).collect()
}

/// Replace each confidence by the scorer's rating of its region.
pub fn refine_confidence(dets: &[Detection], scorer: &dyn QualityScorer) -> Vec<Detection> {
    dets.iter()
        .map(|d| Detection::new(d.frame, d.bbox, scorer.score(d.frame, &d.bbox)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    /// Two frames of a tracklet are linked when the cosine distance of their
    /// embeddings is below this.
    pub sim_threshold: f64,
    /// Slices merge only when their mean embeddings are closer than this.
    pub merge_feature_threshold: f64,
    /// Maximum number of shared frames between merged groups.
    pub merge_max_frame_overlap: usize,
    /// Maximum frame gap between the end of one slice and the start of the
    /// next.
    pub merge_max_gap: u32,
    /// Allowed endpoint center distance, in box diagonals per gap frame.
    pub merge_max_center_dist: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            sim_threshold: 0.3,
            merge_feature_threshold: 0.3,
            merge_max_frame_overlap: 0,
            merge_max_gap: 30,
            merge_max_center_dist: 1.0,
        }
    }
}

/// An appearance-consistent piece of a tracklet.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub source: TrackId,
    pub boxes: BTreeMap<Frame, BoundingBox>,
    pub embeddings: BTreeMap<Frame, Embedding>,
    /// Normalized mean of member embeddings; `None` when no member frame
    /// carries one.
    pub mean_embedding: Option<Embedding>,
}

impl Slice {
    pub fn first_frame(&self) -> Frame {
        *self.boxes.keys().next().expect("slices are non-empty")
    }

    pub fn last_frame(&self) -> Frame {
        *self.boxes.keys().next_back().expect("slices are non-empty")
    }
}

fn cosine_distance(a: &Embedding, b: &Embedding) -> f64 {
    cosine_similarity(a, b).map_or(f64::INFINITY, |c| 1.0 - c)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    /// Union keeping the smaller root so representatives are stable.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.0[hi] = lo;
    }
}

/// Split a tracklet into connected components of its frame-similarity
/// graph. Frames without an embedding join the component of the nearest
/// embedded frame (earlier on ties). Slices are ordered by earliest frame.
pub fn split_tracklet(t: &Tracklet, cfg: &ClusterConfig) -> Vec<Slice> {
    if t.positions.is_empty() {
        return Vec::new();
    }
    let embedded: Vec<(Frame, &Embedding)> = t
        .positions
        .keys()
        .filter_map(|f| t.embedding_history.get(f).map(|e| (*f, e)))
        .collect();
    let mut uf = UnionFind::new(embedded.len());
    for i in 0..embedded.len() {
        for j in i + 1..embedded.len() {
            if cosine_distance(embedded[i].1, embedded[j].1) < cfg.sim_threshold {
                uf.union(i, j);
            }
        }
    }

    let mut comps: BTreeMap<usize, Slice> = BTreeMap::new();
    let new_slice = || Slice {
        source: t.id,
        boxes: BTreeMap::new(),
        embeddings: BTreeMap::new(),
        mean_embedding: None,
    };
    for (&f, b) in &t.positions {
        let comp = if embedded.is_empty() {
            0
        } else {
            let i = embedded.partition_point(|(ef, _)| *ef < f);
            let nearest = match (i.checked_sub(1), (i < embedded.len()).then_some(i)) {
                (_, Some(n)) if embedded[n].0 == f => n,
                (Some(p), Some(n)) => {
                    if f - embedded[p].0 <= embedded[n].0 - f {
                        p
                    } else {
                        n
                    }
                }
                (Some(p), None) => p,
                (None, Some(n)) => n,
                (None, None) => unreachable!("embedded is non-empty"),
            };
            uf.find(nearest)
        };
        let s = comps.entry(comp).or_insert_with(new_slice);
        s.boxes.insert(f, *b);
        if let Some(e) = t.embedding_history.get(&f) {
            s.embeddings.insert(f, e.clone());
        }
    }
    let mut slices: Vec<Slice> = comps.into_values().collect();
    for s in &mut slices {
        s.mean_embedding = Embedding::normalized_mean(s.embeddings.values());
    }
    slices.sort_by_key(Slice::first_frame);
    slices
}

fn frame_overlap(a: &BTreeSet<Frame>, b: &BTreeSet<Frame>) -> usize {
    a.intersection(b).count()
}

/// Spatio-temporal gates for joining slice `a` with slice `b`.
fn pair_compatible(a: &Slice, b: &Slice, cfg: &ClusterConfig) -> bool {
    let (early, late) = if a.first_frame() <= b.first_frame() {
        (a, b)
    } else {
        (b, a)
    };
    if late.first_frame() <= early.last_frame() {
        // overlapping spans: the group overlap gate decides
        return true;
    }
    let gap = late.first_frame() - early.last_frame();
    if gap > cfg.merge_max_gap {
        return false;
    }
    let end = &early.boxes[&early.last_frame()];
    let start = &late.boxes[&late.first_frame()];
    end.center_distance(start) <= cfg.merge_max_center_dist * end.diagonal() * f64::from(gap.max(1))
}

/// Greedily merge slices into identity groups, most similar pairs first
/// (ties by slice index). Returns groups of slice indices, each sorted,
/// ordered by their smallest index.
pub fn merge_slices(slices: &[Slice], cfg: &ClusterConfig) -> Vec<Vec<usize>> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..slices.len() {
        for j in i + 1..slices.len() {
            let (Some(a), Some(b)) = (&slices[i].mean_embedding, &slices[j].mean_embedding) else {
                continue;
            };
            let d = cosine_distance(a, b);
            if d < cfg.merge_feature_threshold {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut uf = UnionFind::new(slices.len());
    let mut frames: Vec<BTreeSet<Frame>> = slices.iter().map(|s| s.boxes.keys().copied().collect()).collect();
    for (_, i, j) in candidates {
        let (ri, rj) = (uf.find(i), uf.find(j));
        if ri == rj || !pair_compatible(&slices[i], &slices[j], cfg) {
            continue;
        }
        if frame_overlap(&frames[ri], &frames[rj]) > cfg.merge_max_frame_overlap {
            continue;
        }
        uf.union(ri, rj);
        let (keep, gone) = (ri.min(rj), ri.max(rj));
        let moved = std::mem::take(&mut frames[gone]);
        frames[keep].extend(moved);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..slices.len() {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Fill every missing frame between the first and last recorded frame by
/// per-coordinate linear interpolation. Recorded frames are untouched.
pub fn interpolate(t: &Tracklet) -> Tracklet {
    let mut out = t.clone();
    let recorded: Vec<(Frame, BoundingBox)> = t.positions.iter().map(|(f, b)| (*f, *b)).collect();
    for w in recorded.windows(2) {
        let ((f0, a), (f1, b)) = (w[0], w[1]);
        let span = f64::from(f1 - f0);
        for f in f0 + 1..f1 {
            let s = f64::from(f - f0) / span;
            let lerp = |x: f64, y: f64| x + (y - x) * s;
            out.positions.insert(
                f,
                BoundingBox {
                    x: lerp(a.x, b.x),
                    y: lerp(a.y, b.y),
                    w: lerp(a.w, b.w),
                    h: lerp(a.h, b.h),
                },
            );
        }
    }
    out
}

/// Compute missing per-frame embeddings from an appearance model.
pub fn attach_embeddings(tracks: &mut [Tracklet], appearance: &dyn AppearanceModel) {
    for t in tracks {
        for (&f, b) in &t.positions {
            t.embedding_history.entry(f).or_insert_with(|| appearance.embed(f, b));
        }
    }
}

fn assemble(slices: &[Slice], groups: &[Vec<usize>]) -> Vec<Tracklet> {
    let mut out: Vec<Tracklet> = groups
        .iter()
        .map(|g| {
            let mut t = Tracklet::new(0);
            // earlier slices win conflicting frames
            for &i in g.iter().rev() {
                t.positions.extend(slices[i].boxes.iter().map(|(f, b)| (*f, *b)));
                t.embedding_history
                    .extend(slices[i].embeddings.iter().map(|(f, e)| (*f, e.clone())));
            }
            t
        })
        .collect();
    // ids by first frame, then by first box for a total order
    out.sort_by(|a, b| {
        let ka = a.positions.iter().next().map(|(f, b)| (*f, b.x, b.y));
        let kb = b.positions.iter().next().map(|(f, b)| (*f, b.x, b.y));
        ka.partial_cmp(&kb).expect("finite boxes")
    });
    for (i, t) in out.iter_mut().enumerate() {
        t.id = i as TrackId + 1;
    }
    out
}

/// One split → merge → interpolate pass.
pub fn cluster_once(tracks: &[Tracklet], cfg: &ClusterConfig) -> Vec<Tracklet> {
    let slices: Vec<Slice> = tracks.iter().flat_map(|t| split_tracklet(t, cfg)).collect();
    let groups = merge_slices(&slices, cfg);
    assemble(&slices, &groups).iter().map(interpolate).collect()
}

/// Maximum number of clustering passes.
pub const MAX_PASSES: usize = 10;

/// Full offline post-process. Passes repeat until the output stops
/// changing, so running the post-process on its own output is a no-op.
/// Returns the tracklets and whether a fixed point was reached.
pub fn postprocess(tracks: &[Tracklet], cfg: &ClusterConfig) -> (Vec<Tracklet>, bool) {
    let mut current = cluster_once(tracks, cfg);
    for _ in 1..MAX_PASSES {
        let next = cluster_once(&current, cfg);
        if same_tracks(&next, &current) {
            return (current, true);
        }
        current = next;
    }
    (current, false)
}

fn same_tracks(a: &[Tracklet], b: &[Tracklet]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.id == y.id && x.positions == y.positions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64) -> BoundingBox {
        BoundingBox::new(x, y, 10.0, 20.0).unwrap()
    }

    fn unit(i: usize) -> Embedding {
        let mut v = vec![0.0; 4];
        v[i] = 1.0;
        Embedding::new(v).unwrap()
    }

    fn det(x: f64, c: f64) -> Detection {
        Detection::new(1, BoundingBox::new(x, 0.0, 10.0, 10.0).unwrap(), c)
    }

    fn tracklet(
        id: TrackId,
        frames: impl IntoIterator<Item = Frame>,
        x: impl Fn(Frame) -> f64,
        e: impl Fn(Frame) -> Embedding,
    ) -> Tracklet {
        let mut t = Tracklet::new(id);
        for f in frames {
            t.positions.insert(f, bx(x(f), 0.0));
            t.embedding_history.insert(f, e(f));
        }
        t
    }

    #[test]
    fn nms_examples() {
        // IoU(x=0, x=2.5) on 10x10 boxes = 75/125 = 0.6
        let kept = strict_nms(&[det(2.5, 0.8), det(0.0, 0.9)], 0.5);
        assert_eq!(kept, vec![det(0.0, 0.9)]);
        assert_eq!(strict_nms(&[det(0.0, 0.7), det(0.0, 0.7)], 0.4).len(), 1);
        assert_eq!(strict_nms(&[det(0.0, 0.7), det(50.0, 0.2)], 0.4).len(), 2);
    }

    #[test]
    fn nms_output_has_no_close_pairs() {
        let dets: Vec<Detection> = (0..40)
            .map(|i| det((i * 7 % 23) as f64, (i % 10) as f64 / 10.0))
            .collect();
        let kept = strict_nms(&dets, DEFAULT_NMS_IOU);
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                assert!(iou(&a.bbox, &b.bbox) <= DEFAULT_NMS_IOU);
            }
        }
    }

    struct Fixed(f64);
    impl QualityScorer for Fixed {
        fn score(&self, _: Frame, _: &BoundingBox) -> f64 {
            self.0
        }
    }

    #[test]
    fn refine_examples() {
        let d = vec![det(0.0, 0.3), det(20.0, 0.8)];
        assert_eq!(
            refine_confidence(&d, &crate::long_cues::PassThroughQuality)[0].confidence,
            1.0
        );
        let r = refine_confidence(&d, &Fixed(1.3));
        assert!(r.iter().all(|d| d.confidence == 1.0));
        assert_eq!(refine_confidence(&d, &Fixed(0.2))[1].confidence, 0.2);
        assert_eq!(r[1].bbox, d[1].bbox);
    }

    #[test]
    fn split_examples() {
        let cfg = ClusterConfig::default();
        let t = tracklet(1, 1..=10, |f| f as f64, |f| if f <= 5 { unit(0) } else { unit(1) });
        let s = split_tracklet(&t, &cfg);
        assert_eq!(s.len(), 2);
        assert_eq!(
            s[0].boxes.keys().copied().collect::<Vec<_>>(),
            (1..=5).collect::<Vec<_>>()
        );
        assert_eq!(
            s[1].boxes.keys().copied().collect::<Vec<_>>(),
            (6..=10).collect::<Vec<_>>()
        );
        assert_eq!(s[1].mean_embedding, Some(unit(1)));

        let t = tracklet(1, 1..=10, |f| f as f64, |_| unit(2));
        assert_eq!(split_tracklet(&t, &cfg).len(), 1);
        let t = tracklet(1, [4], |_| 0.0, |_| unit(2));
        assert_eq!(split_tracklet(&t, &cfg).len(), 1);
    }

    #[test]
    fn frames_without_embedding_attach_to_nearest() {
        let mut t = tracklet(1, 1..=10, |f| f as f64, |f| if f <= 5 { unit(0) } else { unit(1) });
        for f in [4, 5, 6] {
            t.embedding_history.remove(&f);
        }
        let s = split_tracklet(&t, &ClusterConfig::default());
        // 4 → 3, 5 ties between 3 and 7 → earlier, 6 → 7
        assert_eq!(s[0].boxes.keys().copied().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn merge_examples() {
        let cfg = ClusterConfig::default();
        let a = tracklet(1, 1..=5, |f| f as f64, |_| unit(0));
        let b = tracklet(2, 7..=10, |f| f as f64, |_| unit(0));
        let slices: Vec<Slice> = [&a, &b].iter().flat_map(|t| split_tracklet(t, &cfg)).collect();
        assert_eq!(merge_slices(&slices, &cfg), vec![vec![0, 1]]);

        let c = tracklet(3, 4..=8, |f| f as f64, |_| unit(0));
        let slices: Vec<Slice> = [&a, &c].iter().flat_map(|t| split_tracklet(t, &cfg)).collect();
        assert_eq!(merge_slices(&slices, &cfg).len(), 2);

        // 50 diagonals apart over a 2-frame gap
        let diag = bx(0.0, 0.0).diagonal();
        let far = tracklet(4, 7..=10, |_| 50.0 * diag, |_| unit(0));
        let slices: Vec<Slice> = [&a, &far].iter().flat_map(|t| split_tracklet(t, &cfg)).collect();
        assert_eq!(merge_slices(&slices, &cfg).len(), 2);
    }

    #[test]
    fn merged_groups_never_overlap() {
        let cfg = ClusterConfig::default();
        let tracks: Vec<Tracklet> = (0..6)
            .map(|i| tracklet(i, (i as Frame * 3)..(i as Frame * 3 + 5), |f| f as f64, |_| unit(0)))
            .collect();
        let slices: Vec<Slice> = tracks.iter().flat_map(|t| split_tracklet(t, &cfg)).collect();
        for g in merge_slices(&slices, &cfg) {
            for (x, &i) in g.iter().enumerate() {
                for &j in &g[x + 1..] {
                    let fi: BTreeSet<Frame> = slices[i].boxes.keys().copied().collect();
                    let fj: BTreeSet<Frame> = slices[j].boxes.keys().copied().collect();
                    assert!(frame_overlap(&fi, &fj) <= cfg.merge_max_frame_overlap);
                }
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let mut t = Tracklet::new(1);
        t.positions.insert(2, BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap());
        t.positions.insert(6, BoundingBox::new(8.0, 0.0, 10.0, 10.0).unwrap());
        let i = interpolate(&t);
        assert_eq!(i.positions[&4], BoundingBox::new(4.0, 0.0, 10.0, 10.0).unwrap());
        assert_eq!(i.positions.len(), 5);
        assert_eq!(i.positions[&2], t.positions[&2]);
        assert_eq!(i.positions[&6], t.positions[&6]);
        assert_eq!(interpolate(&i), i);
    }

    #[test]
    fn postprocess_joins_fragments_and_is_idempotent() {
        let cfg = ClusterConfig::default();
        let tracks = vec![
            tracklet(10, 1..=5, |f| f as f64, |_| unit(0)),
            tracklet(11, 8..=12, |f| f as f64, |_| unit(0)),
            tracklet(12, 1..=12, |f| 300.0 + f as f64, |_| unit(1)),
        ];
        let (out, converged) = postprocess(&tracks, &cfg);
        assert!(converged);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].positions.len(), 12);
        let (again, _) = postprocess(&out, &cfg);
        assert_eq!(again.len(), out.len());
        for (a, b) in again.iter().zip(&out) {
            assert_eq!((a.id, &a.positions), (b.id, &b.positions));
        }
    }
}
