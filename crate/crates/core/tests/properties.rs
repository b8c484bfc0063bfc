//! Randomized property tests for the numeric invariants.

mod common;

use diffi::data::DataMatrix;
use diffi::diffi::{induced_imbalance, rank_features, ImportanceKind, ImportanceReport};
use diffi::forest::{fit, single_tree_score, ForestParams, Node, ThresholdMode};
use diffi::metrics::{emd_locations, ordered_emd, t_top_k, Signature};
use diffi::selection::rank_update;
use proptest::prelude::*;

fn report_from_scores(scores: Vec<f64>) -> ImportanceReport {
    let p = scores.len();
    ImportanceReport {
        kind: ImportanceKind::Global,
        counters: diffi::diffi::FeatureCounters { inlier: vec![1; p], outlier: vec![1; p] },
        cumulative: diffi::diffi::CumulativeImportance {
            inlier: vec![0.0; p],
            outlier: vec![0.0; p],
        },
        feature_names: diffi::data::default_feature_names(p),
        never_used_for_outliers: vec![false; p],
        inlier_warning: false,
        scores,
    }
}

proptest! {
    #[test]
    fn iic_is_symmetric_and_bounded(left in 0usize..200, right in 0usize..200) {
        prop_assume!(left + right >= 2);
        let a = induced_imbalance(left, right);
        let b = induced_imbalance(right, left);
        prop_assert_eq!(a.to_bits(), b.to_bits());
        if left == 0 || right == 0 {
            prop_assert_eq!(a, 0.0);
        } else if left.min(right) == 1 {
            prop_assert_eq!(a, 1.0);
        } else {
            prop_assert!((0.5..=1.0).contains(&a));
        }
    }

    #[test]
    fn single_tree_score_is_monotone_in_depth(psi in 2usize..2048, depth in 1usize..40) {
        let shallower = single_tree_score(depth, psi);
        let deeper = single_tree_score(depth + 1, psi);
        prop_assert!(shallower > deeper);
        prop_assert!(shallower > 0.0 && shallower < 1.0);
    }

    #[test]
    fn rank_update_is_monotone(p in 2usize..300) {
        let mut previous = f64::INFINITY;
        for rank in 1..=p {
            let value = rank_update(rank, p).unwrap();
            prop_assert!((0.0..=1.0).contains(&value));
            prop_assert!(value < previous);
            previous = value;
        }
    }

    #[test]
    fn emd_closed_form_matches_lp_oracle(
        weights in proptest::collection::vec((0.001f64..1.0, 0.001f64..1.0), 2..=8)
    ) {
        let (ground_truth, estimated): (Vec<f64>, Vec<f64>) = weights.into_iter().unzip();
        let p = ground_truth.len();
        let fast = ordered_emd(&ground_truth, &estimated).unwrap();

        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| ground_truth[a].total_cmp(&ground_truth[b]).then(a.cmp(&b)));
        let gt_sorted: Vec<f64> = order.iter().map(|&j| ground_truth[j]).collect();
        let est_sorted: Vec<f64> = order.iter().map(|&j| estimated[j]).collect();
        let lp = common::emd_lp(&emd_locations(p), &est_sorted, &gt_sorted);
        prop_assert!((fast - lp).abs() < 1e-9, "closed form {} vs LP {}", fast, lp);
        prop_assert!(fast >= 0.0);
    }

    #[test]
    fn emd_is_zero_iff_equal(weights in proptest::collection::vec(0.01f64..1.0, 2..=8)) {
        prop_assert_eq!(ordered_emd(&weights, &weights).unwrap(), 0.0);
    }

    #[test]
    fn emd_weight_symmetry_under_shared_order(
        weights in proptest::collection::vec((0.001f64..1.0, 0.001f64..1.0), 2..=8)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = weights.into_iter().unzip();
        let sig_a = Signature::from_importances(&a).unwrap();
        let sig_b = Signature::with_order(&sig_a.order, &b).unwrap();
        let forward = diffi::metrics::emd(&sig_a, &sig_b).unwrap();
        let backward = diffi::metrics::emd(&sig_b, &sig_a).unwrap();
        prop_assert_eq!(forward.to_bits(), backward.to_bits());
    }

    #[test]
    fn rank_features_orders_by_score_then_index(scores in proptest::collection::vec(0.0f64..10.0, 1..=12)) {
        let report = report_from_scores(scores.clone());
        let order = rank_features(&report);
        for window in order.windows(2) {
            let (a, b) = (window[0], window[1]);
            prop_assert!(
                scores[a] > scores[b] || (scores[a] == scores[b] && a < b),
                "order {:?} violates the tie rule at {}/{}", order, a, b
            );
        }
    }

    #[test]
    fn ttk_counts_match_membership(k in 1usize..6, seed in 0u64..500) {
        use rand::{Rng, SeedableRng};
        let p = 6;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rankings: Vec<Vec<usize>> = (0..7)
            .map(|_| {
                let mut r: Vec<usize> = (0..p).collect();
                for i in (1..p).rev() {
                    let j = rng.random_range(0..=i);
                    r.swap(i, j);
                }
                r
            })
            .collect();
        let ttk = t_top_k(&rankings, k).unwrap();
        for feature in 0..p {
            let tally = rankings.iter().filter(|r| r[..k].contains(&feature)).count() as u32;
            prop_assert_eq!(ttk.counts[feature], tally);
            prop_assert!(ttk.counts[feature] as usize <= rankings.len());
        }
    }

    #[test]
    fn fitted_trees_satisfy_structural_invariants(seed in 0u64..50) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(20..80usize);
        let p = rng.random_range(1..4usize);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        let psi = rng.random_range(2..=n.min(32));
        let params = ForestParams::new(psi, 5, seed).with_threshold(ThresholdMode::fixed(0.7));
        let model = fit(&data, &params).unwrap();
        let h_max = model.depth_limit();
        for tree in model.trees() {
            prop_assert_eq!(tree.in_bag().len(), psi);
            let mut leaf_total = 0usize;
            for (id, node) in tree.nodes().iter().enumerate() {
                match node {
                    Node::Leaf { depth, n_samples } => {
                        prop_assert!(*depth <= h_max);
                        leaf_total += n_samples;
                    }
                    Node::Internal { n_samples, .. } => {
                        let (nl, nr) = tree.child_counts(id as u32).unwrap();
                        prop_assert_eq!(nl + nr, *n_samples);
                        prop_assert!(nl >= 1 && nr >= 1);
                    }
                }
            }
            prop_assert_eq!(leaf_total, psi);
            // Every in-bag point reaches exactly one leaf and the routed
            // occupancy reproduces the recorded counts.
            let mut hits = vec![0usize; tree.nodes().len()];
            for &i in tree.in_bag() {
                hits[tree.leaf_of(data.row(i)) as usize] += 1;
            }
            for (id, node) in tree.nodes().iter().enumerate() {
                if let Node::Leaf { n_samples, .. } = node {
                    prop_assert_eq!(hits[id], *n_samples);
                }
            }
        }
    }
}
