//! Maximum-profit rectangular assignment (Kuhn-Munkres with potentials).

/// Assign rows to columns maximizing total profit.
///
/// Entries `<= 0` are inadmissible: callers mark excluded pairs that way
/// (e.g. IoU below a gate). The result maps each row to its column, `None`
/// for rows left unassigned. Ties resolve deterministically by index order.
pub fn hungarian_match(profit: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = profit.len();
    let cols = profit.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    debug_assert!(profit.iter().all(|r| r.len() == cols), "ragged profit matrix");
    let gain = |r: usize, c: usize| {
        let p = profit[r][c];
        if p.is_finite() && p > 0.0 {
            p
        } else {
            0.0
        }
    };

    let assignment: Vec<Option<usize>> = if rows <= cols {
        solve_min(rows, cols, |r, c| -gain(r, c))
    } else {
        let by_col = solve_min(cols, rows, |c, r| -gain(r, c));
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        out
    };
    assignment
        .into_iter()
        .enumerate()
        .map(|(r, c)| c.filter(|&c| gain(r, c) > 0.0))
        .collect()
}

/// Total profit of an assignment.
pub fn assignment_profit(profit: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| profit[r][c]))
        .sum()
}

/// Min-cost assignment of every one of `n` rows into `m >= n` columns.
fn solve_min(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive search over all partial injections rows -> cols.
    fn brute_force(profit: &[Vec<f64>]) -> f64 {
        fn rec(profit: &[Vec<f64>], r: usize, used: &mut Vec<bool>) -> f64 {
            if r == profit.len() {
                return 0.0;
            }
            let mut best = rec(profit, r + 1, used);
            for c in 0..used.len() {
                if !used[c] && profit[r][c] > 0.0 {
                    used[c] = true;
                    best = best.max(profit[r][c] + rec(profit, r + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        let cols = profit.first().map_or(0, Vec::len);
        rec(profit, 0, &mut vec![false; cols])
    }

    #[test]
    fn examples() {
        let p = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let a = hungarian_match(&p);
        assert_eq!(a, vec![Some(0), Some(1)]);
        assert!((assignment_profit(&p, &a) - 1.7).abs() < 1e-12);
        assert!((brute_force(&p) - 1.7).abs() < 1e-12);

        assert_eq!(hungarian_match(&[vec![0.5]]), vec![Some(0)]);

        let p = vec![vec![0.9, 0.8], vec![0.85, 0.1]];
        let a = hungarian_match(&p);
        assert_eq!(a, vec![Some(1), Some(0)]);
        assert!((assignment_profit(&p, &a) - 1.65).abs() < 1e-12);
        assert!((brute_force(&p) - 1.65).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_entries_left_out() {
        let p = vec![vec![0.0, 0.7], vec![0.0, 0.0], vec![0.4, 0.0]];
        assert_eq!(hungarian_match(&p), vec![Some(1), None, Some(0)]);
        assert_eq!(hungarian_match(&[vec![0.0, 0.0]]), vec![None]);
        assert_eq!(hungarian_match(&[]), Vec::<Option<usize>>::new());
    }

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let r = rng.random_range(1..6);
            let c = rng.random_range(1..6);
            let p: Vec<Vec<f64>> = (0..r)
                .map(|_| {
                    (0..c)
                        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
                        .collect()
                })
                .collect();
            let a = hungarian_match(&p);
            let mut seen = std::collections::HashSet::new();
            assert!(a.iter().flatten().all(|c| seen.insert(*c)));
            assert!((assignment_profit(&p, &a) - brute_force(&p)).abs() < 1e-9);
        }
    }
}
