//! Weighted quantile split proposals used by the tree learner.
//!
//! Run: `cargo run --example quantile_sketch`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sactrack::sac::propose_splits;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10_000;
    let values: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 1000.0).round()).collect();
    let hessians: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.25)).collect();
    let total: f64 = hessians.iter().sum();
    for eps in [0.0, 0.01, 0.05, 0.2] {
        let cands = propose_splits(&values, &hessians, eps);
        // largest hessian mass strictly between two consecutive proposals
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend(&cands);
        edges.push(f64::INFINITY);
        let worst = edges
            .windows(2)
            .map(|w| {
                values
                    .iter()
                    .zip(&hessians)
                    .filter(|(v, _)| **v > w[0] && **v < w[1])
                    .map(|(_, h)| h)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        println!(
            "eps {eps:<5} -> {:>4} candidates, max mass between candidates {:.4} of total",
            cands.len(),
            worst / total
        );
    }
}
