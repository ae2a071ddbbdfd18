//! Tracklet/detection association: match graph construction and a
//! min-cost flow solver.

use std::collections::BTreeSet;

use crate::entity::TrackId;
use crate::sac::{FeatureMask, FrameCues, PairClassifier, SacError};

/// Default matching threshold ζ_m.
pub const DEFAULT_ZETA_M: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchEdge {
    pub tracklet_id: TrackId,
    pub detection_index: usize,
    pub score: f64,
    pub cost: f64,
}

impl MatchEdge {
    pub fn new(tracklet_id: TrackId, detection_index: usize, score: f64) -> Self {
        Self {
            tracklet_id,
            detection_index,
            score,
            cost: 1.0 - score,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssociationResult {
    pub matches: Vec<(TrackId, usize)>,
    pub unmatched_tracklets: Vec<TrackId>,
    pub unmatched_detections: Vec<usize>,
}

impl AssociationResult {
    pub fn total_cost(&self, edges: &[MatchEdge]) -> f64 {
        self.matches
            .iter()
            .map(|&(t, d)| {
                edges
                    .iter()
                    .filter(|e| e.tracklet_id == t && e.detection_index == d)
                    .map(|e| e.cost)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    pub fn detection_for(&self, id: TrackId) -> Option<usize> {
        self.matches.iter().find(|m| m.0 == id).map(|m| m.1)
    }
}

/// Score every (target, detection) pair of `cues` and keep edges with
/// `score > zeta_m`.
pub fn build_match_graph(
    cues: &FrameCues,
    classifier: &dyn PairClassifier,
    mask: &FeatureMask,
    zeta_m: f64,
) -> Result<Vec<MatchEdge>, SacError> {
    let mut edges = Vec::new();
    for (ti, target) in cues.targets.iter().enumerate() {
        for di in 0..cues.detections.len() {
            let y = classifier.score(&cues.features(ti, di, mask)?)?;
            if y > zeta_m {
                edges.push(MatchEdge::new(target.id, di, y));
            }
        }
    }
    Ok(edges)
}

/// Solve matching over `edges` alone; every endpoint that appears in some
/// edge but is not matched is reported unmatched.
///
/// The result has maximum cardinality and, among maximum matchings, minimum
/// total cost. It is computed as a min-cost maximum flow on
/// source → tracklet → detection → sink with unit capacities, by successive
/// shortest paths (Dijkstra on reduced costs). The edge list is put into a
/// canonical order first, so the result does not depend on input order.
pub fn solve_matching(edges: &[MatchEdge]) -> AssociationResult {
    let tracklets: Vec<TrackId> = edges
        .iter()
        .map(|e| e.tracklet_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let detections: Vec<usize> = edges
        .iter()
        .map(|e| e.detection_index)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    solve_with_endpoints(edges, &tracklets, &detections)
}

/// As [`solve_matching`], additionally reporting endpoints that have no
/// edge at all as unmatched.
pub fn solve_with_endpoints(edges: &[MatchEdge], tracklets: &[TrackId], detections: &[usize]) -> AssociationResult {
    let mut tracklets = tracklets.to_vec();
    tracklets.sort_unstable();
    tracklets.dedup();
    let mut detections = detections.to_vec();
    detections.sort_unstable();
    detections.dedup();

    // canonical, deduplicated edge set (keep the cheapest duplicate)
    let mut canon: Vec<MatchEdge> = edges.iter().filter(|e| e.cost.is_finite()).copied().collect();
    canon.sort_by(|a, b| {
        (a.tracklet_id, a.detection_index)
            .cmp(&(b.tracklet_id, b.detection_index))
            .then(a.cost.total_cmp(&b.cost))
    });
    canon.dedup_by(|b, a| a.tracklet_id == b.tracklet_id && a.detection_index == b.detection_index);

    let nt = tracklets.len();
    let nd = detections.len();
    let mut flow = Flow::new(nt + nd + 2);
    let (src, sink) = (nt + nd, nt + nd + 1);
    for i in 0..nt {
        flow.add_edge(src, i, 0.0);
    }
    let mut pair_arcs = Vec::new();
    for e in &canon {
        let (Ok(ti), Ok(di)) = (
            tracklets.binary_search(&e.tracklet_id),
            detections.binary_search(&e.detection_index),
        ) else {
            continue;
        };
        pair_arcs.push((flow.add_edge(ti, nt + di, e.cost), ti, di));
    }
    for j in 0..nd {
        flow.add_edge(nt + j, sink, 0.0);
    }
    flow.run(src, sink);

    let mut t_used = vec![false; nt];
    let mut d_used = vec![false; nd];
    let mut matches = Vec::new();
    for (arc, ti, di) in pair_arcs {
        if flow.arcs[arc].cap == 0 {
            matches.push((tracklets[ti], detections[di]));
            t_used[ti] = true;
            d_used[di] = true;
        }
    }
    AssociationResult {
        matches,
        unmatched_tracklets: tracklets
            .iter()
            .zip(&t_used)
            .filter(|(_, u)| !**u)
            .map(|(t, _)| *t)
            .collect(),
        unmatched_detections: detections
            .iter()
            .zip(&d_used)
            .filter(|(_, u)| !**u)
            .map(|(d, _)| *d)
            .collect(),
    }
}

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: u8,
    cost: f64,
}

/// Unit-capacity residual network; arc `i ^ 1` is the reverse of arc `i`.
struct Flow {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl Flow {
    fn new(n: usize) -> Self {
        Self {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cost: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap: 1, cost });
        self.arcs.push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Successive shortest augmenting paths until the sink is unreachable.
    /// Initial costs are non-negative only if callers pass costs >= 0; a
    /// Bellman-Ford pass seeds the potentials so any real costs work.
    fn run(&mut self, src: usize, sink: usize) {
        let n = self.adj.len();
        let mut pot = self.bellman_ford(src);
        loop {
            // dense Dijkstra on reduced costs; ties go to the lower node index
            let mut dist = vec![f64::INFINITY; n];
            let mut via: Vec<Option<usize>> = vec![None; n];
            let mut done = vec![false; n];
            dist[src] = 0.0;
            loop {
                let mut u = None;
                for v in 0..n {
                    if !done[v] && dist[v].is_finite() && u.is_none_or(|w: usize| dist[v] < dist[w]) {
                        u = Some(v);
                    }
                }
                let Some(u) = u else { break };
                done[u] = true;
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    if arc.cap == 0 || done[arc.to] {
                        continue;
                    }
                    // clamp tiny negative reduced costs from rounding
                    let rc = (arc.cost + pot[u] - pot[arc.to]).max(0.0);
                    if dist[u] + rc < dist[arc.to] {
                        dist[arc.to] = dist[u] + rc;
                        via[arc.to] = Some(a);
                    }
                }
            }
            if !dist[sink].is_finite() {
                return;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    pot[v] += dist[v];
                }
            }
            let mut v = sink;
            while let Some(a) = via[v] {
                self.arcs[a].cap -= 1;
                self.arcs[a ^ 1].cap += 1;
                v = self.arcs[a ^ 1].to;
            }
        }
    }

    fn bellman_ford(&self, src: usize) -> Vec<f64> {
        let n = self.adj.len();
        let mut d = vec![f64::INFINITY; n];
        d[src] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if !d[u].is_finite() {
                    continue;
                }
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    if arc.cap > 0 && d[u] + arc.cost < d[arc.to] {
                        d[arc.to] = d[u] + arc.cost;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        d.iter().map(|x| if x.is_finite() { *x } else { 0.0 }).collect()
    }
}
