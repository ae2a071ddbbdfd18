//! Tracking-quality recursion and quality-aware history selection.
//!
//! Run: `cargo run --example quality_dynamics`

use sactrack::entity::{Embedding, Tracklet};
use sactrack::geometry::BoundingBox;
use sactrack::long_cues::{select_history, HistoryConfig, QualityScorer};
use sactrack::short_cues::{update_quality, QualityParams};

/// Scores frames 5 and 12 as sharp, everything else as blurry.
struct Sharpness;

impl QualityScorer for Sharpness {
    fn score(&self, frame: u32, _bbox: &BoundingBox) -> f64 {
        if frame == 5 || frame == 12 {
            0.9
        } else {
            0.3
        }
    }
}

fn main() {
    let params = QualityParams::default();
    println!("matched updates (IoU 0.8, p 0.9) from q = 0.2:");
    let mut q = 0.2;
    for step in 1..=4 {
        q = update_quality(q, true, 0.8, 0.9, &params);
        println!("  step {step}: q = {q:.4}");
    }

    println!(
        "unmatched updates with p = 1 from q = 0.5 (drop below {}):",
        params.drop_threshold
    );
    let mut q = 0.5;
    let mut frames = 0;
    while q >= params.drop_threshold {
        q = update_quality(q, false, 0.0, 1.0, &params);
        frames += 1;
    }
    println!("  dropped after {frames} unmatched frames (q = {q:.4})");
    let q1 = update_quality(0.5, false, 0.0, 0.95, &params);
    println!("  one unmatched frame with p = 0.95: 0.5 -> {q1:.4} (p^k punishes poor regions)");

    let bbox = BoundingBox::new(0.0, 0.0, 10.0, 20.0).expect("valid box");
    let mut t = Tracklet::new(1);
    for f in 1..=20 {
        t.positions.insert(f, bbox);
        t.embedding_history
            .insert(f, Embedding::new(vec![f as f64, 1.0]).expect("finite"));
    }
    let cfg = HistoryConfig { k: 3, delta: 8 };
    let h = select_history(&t, 20, &cfg, &Sharpness).expect("non-empty tracklet");
    println!("history for t = 20, windows of {} frames: {:?}", cfg.delta, h.indices);
}
