//! Association as minimum-cost flow over classifier scores.
//!
//! Run: `cargo run --example min_cost_matching`

use sactrack::assoc::{solve_matching, MatchEdge, DEFAULT_ZETA_M};

fn show(title: &str, edges: &[MatchEdge]) {
    let r = solve_matching(edges);
    println!("{title}");
    for (t, d) in &r.matches {
        println!("  tracklet {t} -> detection {d}");
    }
    println!(
        "  total cost {:.3}; unmatched tracklets {:?}, detections {:?}",
        r.total_cost(edges),
        r.unmatched_tracklets,
        r.unmatched_detections
    );
}

fn main() {
    // A greedy choice of the best pair (0, 0) would leave the total worse.
    let edges = [
        MatchEdge::new(0, 0, 0.9),
        MatchEdge::new(0, 1, 0.8),
        MatchEdge::new(1, 0, 0.75),
        MatchEdge::new(1, 1, 0.1),
    ];
    show("2 x 2 instance:", &edges);

    // Matching as many pairs as possible takes priority over confidence.
    let edges = [
        MatchEdge::new(0, 0, 0.999),
        MatchEdge::new(1, 1, 0.999),
        MatchEdge::new(0, 2, 0.06),
        MatchEdge::new(1, 0, 0.06),
        MatchEdge::new(2, 1, 0.06),
    ];
    show("cardinality before cost:", &edges);

    // Scores at or below the gate never become edges.
    let scores = [(0, 0, 0.9), (1, 1, 0.04)];
    let gated: Vec<MatchEdge> = scores
        .iter()
        .filter(|s| s.2 > DEFAULT_ZETA_M)
        .map(|&(t, d, y)| MatchEdge::new(t, d, y))
        .collect();
    show(&format!("gated at {DEFAULT_ZETA_M}:"), &gated);
}
