//! Deterministic synthetic scenarios: ground-truth motion with scheduled
//! crossings, a corrupted detector, and an appearance/quality oracle that
//! stands in for learned feature extractors.
//!
//! Layout: the frame is cut into horizontal lanes. Every unpaired target
//! owns a lane, so unpaired targets never overlap. Each crossing pair
//! shares a lane, moves in opposite directions, and meets at a scheduled
//! frame; the second target of a pair rides slightly lower and is therefore
//! nearer to the camera, occluding the first. Horizontal motion is linear
//! with reflection at the frame borders.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::entity::{Detection, Embedding, Frame, TrackId, Tracklet};
use crate::geometry::{clip_box, iou, BoundingBox};
use crate::long_cues::{AppearanceModel, QualityScorer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub n_targets: usize,
    pub n_frames: u32,
    pub width: f64,
    pub height: f64,
    /// Horizontal speed range, px/frame.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Number of target pairs scheduled to cross each other.
    pub crossings: usize,
    /// Base probability of missing a fully visible target.
    pub fn_rate: f64,
    /// Per-target-slot probability of a background false positive.
    pub fp_rate: f64,
    /// Standard deviation of detection box jitter, px.
    pub jitter: f64,
    /// Standard deviation of detection confidence noise.
    pub conf_noise: f64,
    pub embed_dim: usize,
    /// Appearance noise scale; the noise vector has expected norm
    /// `appearance_noise * (1 - visibility)`.
    pub appearance_noise: f64,
    /// Share of an occluded pixel attributed to the nearest target covering
    /// it (1 = opaque occluders, 0 = occlusion ignored).
    pub occlusion_mixing: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_targets: 6,
            n_frames: 200,
            width: 1280.0,
            height: 720.0,
            speed_min: 1.0,
            speed_max: 4.0,
            crossings: 2,
            fn_rate: 0.05,
            fp_rate: 0.02,
            jitter: 1.5,
            conf_noise: 0.05,
            embed_dim: 32,
            appearance_noise: 0.3,
            occlusion_mixing: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Zero corruption: detections equal GT boxes, no misses, no false
    /// positives.
    pub fn noiseless(self) -> Self {
        Self {
            fn_rate: 0.0,
            fp_rate: 0.0,
            jitter: 0.0,
            conf_noise: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.n_targets == 0 || self.n_frames == 0 {
            return bad("n_targets and n_frames must be positive".into());
        }
        if 2 * self.crossings > self.n_targets {
            return bad(format!(
                "{} crossings need at least {} targets",
                self.crossings,
                2 * self.crossings
            ));
        }
        if !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()) {
            return bad("frame size must be positive".into());
        }
        if !(0.0 <= self.speed_min && self.speed_min <= self.speed_max && self.speed_max.is_finite()) {
            return bad("speed range must satisfy 0 <= min <= max".into());
        }
        for (name, v) in [
            ("fn_rate", self.fn_rate),
            ("fp_rate", self.fp_rate),
            ("occlusion_mixing", self.occlusion_mixing),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        for (name, v) in [
            ("jitter", self.jitter),
            ("conf_noise", self.conf_noise),
            ("appearance_noise", self.appearance_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be non-negative"));
            }
        }
        if self.embed_dim < self.n_targets + 1 {
            return bad(format!(
                "embed_dim {} cannot hold {} orthogonal prototypes",
                self.embed_dim,
                self.n_targets + 1
            ));
        }
        Ok(())
    }

    pub fn lanes(&self) -> usize {
        self.n_targets - self.crossings
    }
}

/// Motion of one target: fixed lane row, reflected linear horizontal motion.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Motion {
    /// Left edge at frame 0 in unfolded (unreflected) coordinates.
    x0: f64,
    velocity: f64,
    top: f64,
    w: f64,
    h: f64,
}

fn reflect(u: f64, span: f64) -> f64 {
    if span <= 0.0 {
        return 0.0;
    }
    let period = 2.0 * span;
    let m = u.rem_euclid(period);
    if m > span {
        period - m
    } else {
        m
    }
}

impl Motion {
    fn box_at(&self, frame: Frame, width: f64) -> BoundingBox {
        let x = reflect(self.x0 + self.velocity * frame as f64, width - self.w);
        BoundingBox {
            x,
            y: self.top,
            w: self.w,
            h: self.h,
        }
    }
}

/// A generated scenario. Frames run from 1 to `n_frames`; GT ids from 1 to
/// `n_targets`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub gt: Vec<Tracklet>,
    pub detections: BTreeMap<Frame, Vec<Detection>>,
    /// Index 0 is the background prototype; index `id` belongs to GT `id`.
    pub prototypes: Vec<Embedding>,
    pub visibility: BTreeMap<(Frame, TrackId), f64>,
    /// Scheduled meeting frame of each crossing pair `(a, b, frame)`; `b`
    /// is the nearer target.
    pub crossing_schedule: Vec<(TrackId, TrackId, Frame)>,
}

/// Seeded orthonormal prototypes (Gram-Schmidt of Gaussian vectors).
fn prototypes(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Embedding> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.iter().map(|x| x / norm).collect());
        }
    }
    basis.into_iter().map(|v| Embedding::new(v).expect("finite")).collect()
}

/// Nearer-first ordering: larger bottom edge is nearer; ties go to the
/// larger id.
fn nearer(a: (TrackId, &BoundingBox), b: (TrackId, &BoundingBox)) -> bool {
    (a.1.bottom(), a.0) > (b.1.bottom(), b.0)
}

fn visibility_of(id: TrackId, b: &BoundingBox, others: &[(TrackId, BoundingBox)]) -> f64 {
    let covered = others
        .iter()
        .filter(|(o, ob)| *o != id && nearer((*o, ob), (id, b)))
        .map(|(_, ob)| b.covered_fraction(ob))
        .fold(0.0, f64::max);
    1.0 - covered
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let prototypes = prototypes(cfg.n_targets + 1, cfg.embed_dim, &mut rng);
    for (i, a) in prototypes.iter().enumerate() {
        for b in &prototypes[i + 1..] {
            assert!(a.dot(b).abs() < 0.2, "prototype construction must be near-orthogonal");
        }
    }

    let lanes = cfg.lanes();
    let lane_h = cfg.height / lanes as f64;
    let mut lane_order: Vec<usize> = (0..lanes).collect();
    lane_order.shuffle(&mut rng);
    let n_frames = cfg.n_frames;

    let speed = |rng: &mut ChaCha8Rng| {
        if cfg.speed_max > cfg.speed_min {
            rng.random_range(cfg.speed_min..cfg.speed_max)
        } else {
            cfg.speed_min
        }
    };

    let mut motions: Vec<Motion> = Vec::with_capacity(cfg.n_targets);
    let mut crossing_schedule = Vec::new();
    for (slot, &lane) in lane_order.iter().enumerate() {
        let center = (lane as f64 + 0.5) * lane_h;
        let h = lane_h * rng.random_range(0.4..0.6);
        let w = (0.5 * h).min(cfg.width);
        let span = cfg.width - w;
        if slot < cfg.crossings {
            let lo = (0.2 * n_frames as f64).floor() as u32;
            let hi = ((0.8 * n_frames as f64).ceil() as u32).max(lo + 1);
            let meet: Frame = rng.random_range(lo..hi).max(1);
            let xc = span * rng.random_range(0.3..0.7);
            let (va, vb) = (speed(&mut rng), speed(&mut rng));
            let t = meet as f64;
            motions.push(Motion {
                x0: xc - va * t,
                velocity: va,
                top: center - 0.5 * h,
                w,
                h,
            });
            motions.push(Motion {
                x0: xc + vb * t,
                velocity: -vb,
                top: center - 0.3 * h,
                w,
                h,
            });
            let a = motions.len() as TrackId - 1;
            crossing_schedule.push((a, a + 1, meet));
        } else {
            let x = rng.random_range(0.0..=span);
            let v = speed(&mut rng) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            motions.push(Motion {
                x0: x,
                velocity: v,
                top: center - 0.5 * h,
                w,
                h,
            });
        }
    }

    let mut gt: Vec<Tracklet> = (1..=cfg.n_targets as TrackId).map(Tracklet::new).collect();
    let mut visibility = BTreeMap::new();
    let mut detections = BTreeMap::new();
    let jitter = Normal::new(0.0, cfg.jitter).expect("validated");
    let conf_noise = Normal::new(0.0, cfg.conf_noise).expect("validated");
    for frame in 1..=n_frames {
        let boxes: Vec<(TrackId, BoundingBox)> = motions
            .iter()
            .enumerate()
            .map(|(i, m)| (i as TrackId + 1, m.box_at(frame, cfg.width)))
            .collect();
        let mut dets = Vec::new();
        for &(id, b) in &boxes {
            gt[id as usize - 1].positions.insert(frame, b);
            let vis = visibility_of(id, &b, &boxes);
            visibility.insert((frame, id), vis);

            let p_miss = (cfg.fn_rate * (1.0 + 4.0 * (1.0 - vis))).min(1.0);
            let missed = rng.random::<f64>() < p_miss;
            let dx = jitter.sample(&mut rng);
            let dy = jitter.sample(&mut rng);
            let dw = jitter.sample(&mut rng);
            let dh = jitter.sample(&mut rng);
            let dc = conf_noise.sample(&mut rng);
            if !missed {
                let jb = BoundingBox {
                    x: b.x + dx,
                    y: b.y + dy,
                    w: (b.w + dw).max(1.0),
                    h: (b.h + dh).max(1.0),
                };
                dets.push(Detection::new(frame, jb, 0.6 + 0.35 * vis + dc));
            }

            if rng.random::<f64>() < cfg.fp_rate {
                let h = lane_h * rng.random_range(0.3..0.6);
                let w = (0.5 * h).min(cfg.width);
                let x = rng.random_range(0.0..=cfg.width - w);
                let y = rng.random_range(0.0..=(cfg.height - h).max(0.0));
                let conf = rng.random_range(0.1..0.6);
                dets.push(Detection::new(frame, BoundingBox { x, y, w, h }, conf));
            }
        }
        dets.shuffle(&mut rng);
        detections.insert(frame, dets);
    }

    Ok(Scenario {
        config: *cfg,
        gt,
        detections,
        prototypes,
        visibility,
        crossing_schedule,
    })
}

/// Stable 64-bit mixing (splitmix64 finalizer) for per-region noise seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Scenario {
    pub fn frames(&self) -> std::ops::RangeInclusive<Frame> {
        1..=self.config.n_frames
    }

    pub fn gt_boxes(&self, frame: Frame) -> Vec<(TrackId, BoundingBox)> {
        self.gt
            .iter()
            .filter_map(|t| t.box_at(frame).map(|b| (t.id, *b)))
            .collect()
    }

    pub fn visibility(&self, frame: Frame, id: TrackId) -> f64 {
        self.visibility.get(&(frame, id)).copied().unwrap_or(0.0)
    }

    pub fn prototype(&self, id: TrackId) -> &Embedding {
        &self.prototypes[id as usize]
    }

    pub fn background(&self) -> &Embedding {
        &self.prototypes[0]
    }

    /// Fraction of `b` showing each identity, ascending by id. Each pixel
    /// goes to the nearest identity covering it (softened by the occlusion
    /// mixing strength); uncovered pixels are background.
    pub fn pixel_shares(&self, frame: Frame, b: &BoundingBox) -> Vec<(TrackId, f64)> {
        let area = b.area();
        if area <= 0.0 {
            return Vec::new();
        }
        let mut cands: Vec<(TrackId, BoundingBox)> = self
            .gt_boxes(frame)
            .into_iter()
            .filter(|(_, g)| g.intersection_area(b) > 0.0)
            .collect();
        if cands.is_empty() {
            return Vec::new();
        }
        // nearest first
        cands.sort_by(|a, c| (c.1.bottom(), c.0).partial_cmp(&(a.1.bottom(), a.0)).expect("finite"));
        let mut xs = vec![b.x, b.right()];
        let mut ys = vec![b.y, b.bottom()];
        for (_, g) in &cands {
            xs.extend([g.x.clamp(b.x, b.right()), g.right().clamp(b.x, b.right())]);
            ys.extend([g.y.clamp(b.y, b.bottom()), g.bottom().clamp(b.y, b.bottom())]);
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ys.sort_by(f64::total_cmp);
        ys.dedup();

        let m = self.config.occlusion_mixing;
        let mut shares = vec![0.0; cands.len()];
        for xw in xs.windows(2) {
            for yw in ys.windows(2) {
                let cell = (xw[1] - xw[0]) * (yw[1] - yw[0]);
                if cell <= 0.0 {
                    continue;
                }
                let (cx, cy) = ((xw[0] + xw[1]) / 2.0, (yw[0] + yw[1]) / 2.0);
                let covering: Vec<usize> = (0..cands.len())
                    .filter(|&i| {
                        let g = &cands[i].1;
                        g.x <= cx && cx <= g.right() && g.y <= cy && cy <= g.bottom()
                    })
                    .collect();
                if covering.is_empty() {
                    continue;
                }
                let even = (1.0 - m) / covering.len() as f64;
                for (rank, &i) in covering.iter().enumerate() {
                    shares[i] += cell * (even + if rank == 0 { m } else { 0.0 });
                }
            }
        }
        let mut out: Vec<(TrackId, f64)> = cands
            .iter()
            .zip(shares)
            .map(|((id, _), s)| (*id, s / area))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }

    /// Appearance embedding of region `b` at `frame`.
    pub fn embedding_at(&self, frame: Frame, b: &BoundingBox) -> Embedding {
        let dim = self.config.embed_dim;
        let clipped = clip_box(b, self.config.width, self.config.height);
        let shares = self.pixel_shares(frame, &clipped);
        let mut v = vec![0.0; dim];
        let mut covered = 0.0;
        let mut dominant: Option<(TrackId, f64)> = None;
        for &(id, s) in &shares {
            covered += s;
            for (x, p) in v.iter_mut().zip(self.prototype(id).values()) {
                *x += s * p;
            }
            if dominant.is_none_or(|d| s > d.1) {
                dominant = Some((id, s));
            }
        }
        let bg = (1.0 - covered).max(0.0);
        for (x, p) in v.iter_mut().zip(self.background().values()) {
            *x += bg * p;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        } else {
            v = self.background().values().to_vec();
        }

        let vis = match dominant {
            Some((id, s)) if s >= bg => self.visibility(frame, id),
            _ => 0.0,
        };
        let scale = self.config.appearance_noise * (1.0 - vis) / (dim as f64).sqrt();
        if scale > 0.0 {
            let bits = [b.x, b.y, b.w, b.h].map(f64::to_bits);
            let seed = bits
                .iter()
                .fold(mix(self.config.seed ^ mix(frame as u64)), |acc, &x| mix(acc ^ x));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for x in v.iter_mut() {
                *x += scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Embedding::new(v).expect("finite mixture")
    }

    /// Ground-truth quality of a region: max over identities of IoU with the
    /// identity's box times its visibility.
    pub fn oracle_quality(&self, frame: Frame, b: &BoundingBox) -> f64 {
        self.gt_boxes(frame)
            .iter()
            .map(|(id, g)| iou(b, g) * self.visibility(frame, *id))
            .fold(0.0, f64::max)
            .clamp(0.0, 1.0)
    }
}

impl AppearanceModel for Scenario {
    fn embed(&self, frame: Frame, bbox: &BoundingBox) -> Embedding {
        self.embedding_at(frame, bbox)
    }
}

impl QualityScorer for Scenario {
    fn score(&self, frame: Frame, bbox: &BoundingBox) -> f64 {
        self.oracle_quality(frame, bbox)
    }
}
