//! Feature-importance quality metrics: times-in-top-K over repeated
//! runs, and an ordered Earth Mover's Distance whose cluster spacing
//! penalizes mistakes on important features more than on unimportant ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature counts of top-K membership over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtkVector {
    pub counts: Vec<u32>,
    pub k: usize,
    pub n_runs: usize,
}

fn validate_ranking(ranking: &[usize], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    if ranking.len() != p {
        return Err(Error::InvalidArgument(format!(
            "ranking has {} entries, expected {p}",
            ranking.len()
        )));
    }
    for &f in ranking {
        if f >= p || seen[f] {
            return Err(Error::InvalidArgument(format!(
                "ranking is not a permutation of 0..{p}"
            )));
        }
        seen[f] = true;
    }
    Ok(())
}

/// Count, per feature, in how many of the given rankings it appears
/// among the first `k` positions. Rankings list feature indices from
/// most to least important.
pub fn t_top_k(rankings: &[Vec<usize>], k: usize) -> Result<TtkVector> {
    let p = rankings
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("need at least one ranking".into()))?;
    if k > p {
        return Err(Error::InvalidArgument(format!("K = {k} exceeds feature count {p}")));
    }
    let mut counts = vec![0u32; p];
    for ranking in rankings {
        validate_ranking(ranking, p)?;
        for &f in &ranking[..k] {
            counts[f] += 1;
        }
    }
    Ok(TtkVector { counts, k, n_runs: rankings.len() })
}

/// Cluster locations 0, 2, 5, 9, 14, ...: the gap between consecutive
/// clusters i-1 and i is i, so mass moved near the important end of the
/// ordering travels farther.
pub fn emd_locations(p: usize) -> Vec<f64> {
    let mut locations = Vec::with_capacity(p);
    let mut current = 0.0;
    for i in 1..=p {
        if i > 1 {
            current += i as f64;
        }
        locations.push(current);
    }
    locations
}

/// An importance distribution arranged for the ordered EMD: clusters
/// sorted by increasing importance, with fixed locations and normalized
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    /// Cluster locations, shared by both sides of a comparison.
    pub locations: Vec<f64>,
    /// Normalized weights in cluster (sigma) order.
    pub weights: Vec<f64>,
    /// order[i] = feature index occupying cluster i (least important first).
    pub order: Vec<usize>,
}

fn normalized(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 features".into()));
    }
    if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::InvalidArgument("importances must be finite and non-negative".into()));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("importances sum to zero".into()));
    }
    Ok(values.iter().map(|&v| v / total).collect())
}

impl Signature {
    /// Build a signature from raw importances, deriving the ordering from
    /// the values themselves (ties break by ascending feature index).
    pub fn from_importances(values: &[f64]) -> Result<Self> {
        let weights = normalized(values)?;
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let weights = order.iter().map(|&f| weights[f]).collect();
        Ok(Self { locations: emd_locations(values.len()), weights, order })
    }

    /// Build a signature for `values` under an existing ordering, so the
    /// two sides of a comparison share clusters.
    pub fn with_order(order: &[usize], values: &[f64]) -> Result<Self> {
        validate_ranking(order, values.len())?;
        let weights = normalized(values)?;
        let weights = order.iter().map(|&f| weights[f]).collect();
        Ok(Self { locations: emd_locations(values.len()), weights, order: order.to_vec() })
    }
}

/// Earth Mover's Distance between two signatures sharing locations and
/// ordering, via the one-dimensional cumulative-difference closed form.
pub fn emd(a: &Signature, b: &Signature) -> Result<f64> {
    if a.order != b.order || a.locations != b.locations {
        return Err(Error::InvalidArgument(
            "signatures must share locations and ordering".into(),
        ));
    }
    let p = a.weights.len();
    let mut cum_a = 0.0;
    let mut cum_b = 0.0;
    let mut work = 0.0;
    for i in 0..p - 1 {
        cum_a += a.weights[i];
        cum_b += b.weights[i];
        work += (a.locations[i + 1] - a.locations[i]) * (cum_a - cum_b).abs();
    }
    Ok(work)
}

/// Ordered EMD between ground-truth and estimated importances: clusters
/// are ordered by increasing ground-truth importance, both vectors are
/// normalized, and the minimum transport work is returned.
pub fn ordered_emd(ground_truth: &[f64], estimated: &[f64]) -> Result<f64> {
    if estimated.len() != ground_truth.len() {
        return Err(Error::DimensionMismatch {
            expected: ground_truth.len(),
            got: estimated.len(),
        });
    }
    let gt = Signature::from_importances(ground_truth)?;
    let est = Signature::with_order(&gt.order, estimated)?;
    emd(&gt, &est)
}

/// One metric result, as emitted in machine-readable output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    /// K for t-top-K, p for the ordered EMD.
    pub parameter: usize,
    pub value: serde_json::Value,
    pub metadata: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ttk_identical_rankings() {
        let rankings: Vec<Vec<usize>> = (0..5).map(|_| vec![2, 0, 1, 3]).collect();
        let ttk = t_top_k(&rankings, 2).unwrap();
        assert_eq!(ttk.counts, vec![5, 0, 5, 0]);
        assert_eq!(ttk.n_runs, 5);
    }

    #[test]
    fn ttk_k_equal_p_counts_everything() {
        let rankings = vec![vec![1, 0, 2], vec![2, 1, 0]];
        let ttk = t_top_k(&rankings, 3).unwrap();
        assert_eq!(ttk.counts, vec![2, 2, 2]);
    }

    #[test]
    fn ttk_rejects_k_beyond_p() {
        assert!(t_top_k(&[vec![0, 1]], 3).is_err());
    }

    #[test]
    fn ttk_matches_brute_force_tally() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let p = rng.random_range(2..8usize);
            let n_runs = rng.random_range(1..10usize);
            let k = rng.random_range(1..=p);
            let rankings: Vec<Vec<usize>> = (0..n_runs)
                .map(|_| {
                    let mut r: Vec<usize> = (0..p).collect();
                    // Fisher-Yates with the test rng.
                    for i in (1..p).rev() {
                        let j = rng.random_range(0..=i);
                        r.swap(i, j);
                    }
                    r
                })
                .collect();
            let ttk = t_top_k(&rankings, k).unwrap();
            for f in 0..p {
                let mut tally = 0u32;
                for ranking in &rankings {
                    if ranking.iter().take(k).any(|&g| g == f) {
                        tally += 1;
                    }
                }
                assert_eq!(ttk.counts[f], tally);
                assert!(ttk.counts[f] as usize <= n_runs);
            }
        }
    }

    #[test]
    fn locations_follow_recurrence() {
        assert_eq!(emd_locations(1), vec![0.0]);
        assert_eq!(emd_locations(4), vec![0.0, 2.0, 5.0, 9.0]);
        let locations = emd_locations(9);
        for i in 1..9 {
            // Gap between clusters i-1 and i equals i+1 in 0-based terms.
            assert_eq!(locations[i] - locations[i - 1], (i + 1) as f64);
        }
    }

    #[test]
    fn emd_of_identical_vectors_is_zero() {
        let v = [0.1, 0.5, 0.2, 0.2];
        assert_eq!(ordered_emd(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn emd_worked_two_feature_example() {
        // Ground truth (0.3, 0.7) at locations (0, 2); estimate (0.5, 0.5)
        // moves 0.2 of mass across distance 2.
        let value = ordered_emd(&[0.3, 0.7], &[0.5, 0.5]).unwrap();
        assert_eq!(value, 0.4);
    }

    #[test]
    fn emd_is_symmetric_in_weights_for_fixed_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let p = rng.random_range(2..7usize);
            let gt: Vec<f64> = (0..p).map(|_| rng.random_range(0.01..1.0)).collect();
            let est: Vec<f64> = (0..p).map(|_| rng.random_range(0.01..1.0)).collect();
            let sig_gt = Signature::from_importances(&gt).unwrap();
            let sig_est = Signature::with_order(&sig_gt.order, &est).unwrap();
            let forward = emd(&sig_gt, &sig_est).unwrap();
            let backward = emd(&sig_est, &sig_gt).unwrap();
            assert_eq!(forward.to_bits(), backward.to_bits());
            assert!(forward >= 0.0);
        }
    }

    #[test]
    fn moving_mass_between_important_clusters_costs_more() {
        // Moving delta between the two MOST important clusters crosses the
        // widest gap (p); between the two LEAST important, the narrowest (2).
        let p = 5;
        let gt = [0.1, 0.15, 0.2, 0.25, 0.3];
        let delta = 0.05;
        let mut top_shift = gt;
        top_shift[4] -= delta;
        top_shift[3] += delta;
        let mut bottom_shift = gt;
        bottom_shift[0] -= delta;
        bottom_shift[1] += delta;
        let cost_top = ordered_emd(&gt, &top_shift).unwrap();
        let cost_bottom = ordered_emd(&gt, &bottom_shift).unwrap();
        assert!((cost_top - delta * p as f64).abs() < 1e-12);
        assert!((cost_bottom - delta * 2.0).abs() < 1e-12);
        assert!(cost_top > cost_bottom);
    }

    #[test]
    fn all_zero_vector_is_rejected() {
        assert!(matches!(
            ordered_emd(&[0.0, 0.0], &[0.5, 0.5]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            ordered_emd(&[0.5, 0.5], &[0.0, 0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn ground_truth_ties_break_by_index() {
        let sig = Signature::from_importances(&[0.4, 0.2, 0.4]).unwrap();
        // Ascending importance: f1 (0.2) first, then the tied 0.4s by index.
        assert_eq!(sig.order, vec![1, 0, 2]);
    }
}
