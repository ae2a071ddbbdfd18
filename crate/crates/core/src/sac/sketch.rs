//! Weighted quantile sketch for split proposals.

/// Distinct values with their summed weights, ascending by value.
pub(crate) fn weighted_groups(values: &[f64], weights: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    group_sorted(pairs.into_iter())
}

pub(crate) fn group_sorted(sorted: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for (v, w) in sorted {
        match groups.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => groups.push((v, w)),
        }
    }
    groups
}

/// Candidate thresholds from already-grouped `(value, weight)` pairs.
pub(crate) fn propose_from_groups(groups: &[(f64, f64)], eps: f64) -> Vec<f64> {
    let total: f64 = groups.iter().map(|g| g.1).sum();
    let budget = eps * total;
    let mut out = Vec::new();
    let mut bucket = 0.0;
    let mut bucket_groups = 0usize;
    for (i, &(v, w)) in groups.iter().enumerate() {
        if bucket_groups > 0 && (budget <= 0.0 || bucket + w > budget) {
            out.push(midpoint(groups[i - 1].0, v));
            bucket = 0.0;
            bucket_groups = 0;
        }
        bucket += w;
        bucket_groups += 1;
    }
    out
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // guard against rounding onto the upper value for adjacent floats
    if m >= b {
        a
    } else {
        m
    }
}

/// Propose split thresholds for one feature.
///
/// Candidates are midpoints between consecutive distinct values, chosen so
/// that the hessian mass strictly between two consecutive candidates (and
/// before the first / after the last) is at most `eps` of the total, unless
/// that stretch holds a single distinct value. `eps = 0` yields every
/// boundary, which is exact greedy enumeration. Samples go left when
/// `value < threshold`.
pub fn propose_splits(values: &[f64], hessians: &[f64], eps: f64) -> Vec<f64> {
    assert_eq!(values.len(), hessians.len(), "values and hessians must align");
    propose_from_groups(&weighted_groups(values, hessians), eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_boundary_for_four_values() {
        let c = propose_splits(&[4.0, 1.0, 3.0, 2.0], &[1.0; 4], 0.5);
        assert!(c.contains(&2.5), "{c:?}");
    }

    #[test]
    fn identical_values_give_no_split() {
        assert!(propose_splits(&[2.0; 6], &[0.3; 6], 0.0).len() <= 1);
    }

    #[test]
    fn full_mass_bucket() {
        let v: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(propose_splits(&v, &[1.0; 20], 1.0).len() <= 1);
        assert!(propose_splits(&v, &[1.0; 20], 3.0).len() <= 1);
    }

    #[test]
    fn zero_eps_enumerates_all_boundaries() {
        let c = propose_splits(&[3.0, 1.0, 2.0, 2.0], &[0.1, 0.2, 0.3, 0.4], 0.0);
        assert_eq!(c, vec![1.5, 2.5]);
    }

    #[test]
    fn empty_input() {
        assert!(propose_splits(&[], &[], 0.1).is_empty());
    }
}
