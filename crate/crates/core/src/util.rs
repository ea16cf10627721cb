//! Small numeric helpers shared across modules and test suites.

/// Normalize `v` in place so it sums to 1. Leaves an all-zero vector untouched.
pub fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        for x in v.iter_mut() {
            *x /= total;
        }
    }
}

/// Cosine similarity between two equal-length vectors; 0 if either is all-zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine: length mismatch");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Total-variation distance between two distributions over the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "total_variation: length mismatch");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Draw an index from unnormalized non-negative weights by cumulative scan.
///
/// `u` must lie in [0, 1). Returns `None` when no weight is positive. The
/// last positively weighted index absorbs any floating-point shortfall in
/// the cumulative sum.
pub fn sample_index(weights: &[f64], u: f64) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || total.is_nan() {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if acc > target && w > 0.0 {
            return Some(i);
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// Format a probability with 9 significant digits, the precision used by all
/// matrix files this crate writes.
pub fn fmt_prob(x: f64) -> String {
    format!("{x:.8e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_sums_to_one() {
        let mut v = vec![2.0, 6.0];
        normalize(&mut v);
        assert_eq!(v, vec![0.25, 0.75]);
    }

    #[test]
    fn cosine_identical_is_one() {
        let a = vec![0.3, 0.7];
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_disjoint_is_one() {
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
    }

    #[test]
    fn sample_index_respects_zero_weights() {
        // Zero-weight entries must never be selected, even at u near 1.
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.0), Some(1));
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.999_999), Some(1));
        assert_eq!(sample_index(&[1.0, 0.0], 0.999_999_999), Some(0));
        assert_eq!(sample_index(&[0.0, 0.0], 0.5), None);
    }

    #[test]
    fn fmt_prob_is_nine_significant_digits() {
        assert_eq!(fmt_prob(1.0 / 3.0), "3.33333333e-1");
    }
}
