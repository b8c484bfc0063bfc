//! Depth-based feature importance for Isolation Forests: global scores
//! from a fitted model and its training data, and local scores for
//! individual predicted outliers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::forest::{per_tree_predict, ForestModel, IsolationTree, Node};

/// Induced Imbalance Coefficient of a split with the given child counts.
///
/// Returns 0 for a useless split (one child empty), 1 for an isolating
/// split (one child holds exactly one point), and otherwise the imbalance
/// ratio max(n_l, n_r)/n scaled into [0.5, 1] relative to the extremes
/// attainable for this node size.
pub fn induced_imbalance(n_left: usize, n_right: usize) -> f64 {
    if n_left == 0 || n_right == 0 {
        return 0.0;
    }
    if n_left.min(n_right) == 1 {
        return 1.0;
    }
    let n = (n_left + n_right) as f64;
    let ratio = n_left.max(n_right) as f64 / n;
    let lambda_min = (n_left + n_right).div_ceil(2) as f64 / n;
    let lambda_max = (n - 1.0) / n;
    (ratio - lambda_min) / (lambda_max - lambda_min) * 0.5 + 0.5
}

/// Whether a report carries global or local scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceKind {
    Global,
    Local,
}

/// Per-feature occurrence counts recorded while accumulating importances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCounters {
    pub inlier: Vec<u64>,
    pub outlier: Vec<u64>,
}

/// Cumulative per-feature importances for inlier and outlier passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeImportance {
    pub inlier: Vec<f64>,
    pub outlier: Vec<f64>,
}

/// Feature-importance scores plus the raw quantities that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub kind: ImportanceKind,
    pub scores: Vec<f64>,
    pub counters: FeatureCounters,
    pub cumulative: CumulativeImportance,
    pub feature_names: Vec<String>,
    /// Set for features whose outlier counter stayed zero; their score is
    /// reported as 0 and they rank after every feature with a defined score.
    pub never_used_for_outliers: Vec<bool>,
    /// Set when a local report was requested for a point the model
    /// predicts as an inlier.
    pub inlier_warning: bool,
}

impl ImportanceReport {
    /// Feature indices ordered by descending score; ties break by
    /// ascending index, and features without a defined score go last.
    pub fn ranking(&self) -> Vec<usize> {
        rank_features(self)
    }
}

/// Ordering rule shared by every consumer of a report.
pub fn rank_features(report: &ImportanceReport) -> Vec<usize> {
    let mut order: Vec<usize> = (0..report.scores.len()).collect();
    order.sort_by(|&a, &b| {
        report.never_used_for_outliers[a]
            .cmp(&report.never_used_for_outliers[b])
            .then(report.scores[b].total_cmp(&report.scores[a]))
            .then(a.cmp(&b))
    });
    order
}

/// 1-based rank of each feature under a ranking produced by [`rank_features`].
pub fn ranking_to_ranks(ranking: &[usize]) -> Vec<usize> {
    let mut ranks = vec![0usize; ranking.len()];
    for (pos, &feature) in ranking.iter().enumerate() {
        ranks[feature] = pos + 1;
    }
    ranks
}

#[derive(Clone)]
struct Accumulator {
    i_inlier: Vec<f64>,
    i_outlier: Vec<f64>,
    c_inlier: Vec<u64>,
    c_outlier: Vec<u64>,
}

impl Accumulator {
    fn new(p: usize) -> Self {
        Self {
            i_inlier: vec![0.0; p],
            i_outlier: vec![0.0; p],
            c_inlier: vec![0u64; p],
            c_outlier: vec![0u64; p],
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for j in 0..self.i_inlier.len() {
            self.i_inlier[j] += other.i_inlier[j];
            self.i_outlier[j] += other.i_outlier[j];
            self.c_inlier[j] += other.c_inlier[j];
            self.c_outlier[j] += other.c_outlier[j];
        }
    }
}

/// One tree's contribution: walk each in-bag point's path and credit the
/// split features, weighting by the IIC and the inverse leaf depth.
///
/// The IIC of a node is class-conditional: for a predicted inlier it is
/// computed from the predicted-inlier occupancies of the node's children
/// (lambda_I), for a predicted outlier from the predicted-outlier
/// occupancies (lambda_O). A split that sends every inlier one way is
/// useless for inliers (lambda_I = 0) even when it cleanly cuts the
/// outliers off.
fn accumulate_tree(
    tree: &IsolationTree,
    data: &DataMatrix,
    psi: usize,
    model: &ForestModel,
    lambda_outlier_scale: f64,
    acc: &mut Accumulator,
) {
    let labels = per_tree_predict(tree, data, psi, model.threshold_mode());

    // Per-node occupancy of each predicted class.
    let mut occupancy = vec![[0usize; 2]; tree.nodes().len()];
    for (k, &row) in tree.in_bag().iter().enumerate() {
        let class = labels[k] as usize;
        let mut id = 0u32;
        loop {
            occupancy[id as usize][class] += 1;
            match tree.nodes()[id as usize] {
                Node::Internal { feature, threshold, left, right, .. } => {
                    id = if data.get(row, feature) < threshold { left } else { right };
                }
                Node::Leaf { .. } => break,
            }
        }
    }

    for (k, &row) in tree.in_bag().iter().enumerate() {
        let x = data.row(row);
        let path = tree.path_internal_nodes(x);
        let depth = tree.path_length(x);
        if depth == 0 {
            continue;
        }
        let inv_depth = 1.0 / depth as f64;
        let class = labels[k] as usize;
        for &v in &path {
            let (feature, left, right) = match tree.nodes()[v as usize] {
                Node::Internal { feature, left, right, .. } => (feature, left, right),
                Node::Leaf { .. } => unreachable!("path nodes are internal"),
            };
            let lambda = induced_imbalance(
                occupancy[left as usize][class],
                occupancy[right as usize][class],
            );
            if class == 1 {
                acc.i_outlier[feature] += inv_depth * (lambda * lambda_outlier_scale);
                acc.c_outlier[feature] += 1;
            } else {
                acc.i_inlier[feature] += inv_depth * lambda;
                acc.c_inlier[feature] += 1;
            }
        }
    }
}

fn global_diffi_scaled(
    model: &ForestModel,
    data: &DataMatrix,
    lambda_outlier_scale: f64,
) -> Result<ImportanceReport> {
    let p = model.n_features();
    if data.n_cols() != p {
        return Err(Error::DimensionMismatch { expected: p, got: data.n_cols() });
    }
    for tree in model.trees() {
        if let Some(&bad) = tree.in_bag().iter().find(|&&i| i >= data.n_rows()) {
            return Err(Error::InvalidArgument(format!(
                "in-bag index {bad} does not resolve in a dataset with {} rows; \
                 pass the training set the model was fitted on",
                data.n_rows()
            )));
        }
    }

    // Trees accumulate independently; the reduction below runs in tree
    // order with a fixed per-feature summation order, so results do not
    // depend on the worker count.
    let partials: Vec<Accumulator> = model
        .trees()
        .par_iter()
        .map(|tree| {
            let mut acc = Accumulator::new(p);
            accumulate_tree(tree, data, model.psi(), model, lambda_outlier_scale, &mut acc);
            acc
        })
        .collect();
    let mut total = Accumulator::new(p);
    for partial in &partials {
        total.merge(partial);
    }

    if total.c_outlier.iter().all(|&c| c == 0) {
        return Err(Error::DegenerateImportance(
            "no in-bag point was predicted as an outlier by any tree".into(),
        ));
    }

    // Smallest positive inlier term, used as the stand-in denominator for
    // features that outlier paths used but inlier paths never did.
    let min_positive_denominator = (0..p)
        .filter(|&j| total.c_inlier[j] > 0 && total.i_inlier[j] > 0.0)
        .map(|j| total.i_inlier[j] / total.c_inlier[j] as f64)
        .min_by(f64::total_cmp);
    let mut scores = vec![0.0; p];
    let mut never_used = vec![false; p];
    for j in 0..p {
        if total.c_outlier[j] == 0 {
            never_used[j] = true;
            continue;
        }
        let numerator = total.i_outlier[j] / total.c_outlier[j] as f64;
        let denominator = if total.c_inlier[j] > 0 && total.i_inlier[j] > 0.0 {
            total.i_inlier[j] / total.c_inlier[j] as f64
        } else {
            min_positive_denominator.ok_or_else(|| {
                Error::DegenerateImportance(
                    "no feature accumulated positive inlier importance".into(),
                )
            })?
        };
        scores[j] = numerator / denominator;
    }

    Ok(ImportanceReport {
        kind: ImportanceKind::Global,
        scores,
        counters: FeatureCounters { inlier: total.c_inlier, outlier: total.c_outlier },
        cumulative: CumulativeImportance { inlier: total.i_inlier, outlier: total.i_outlier },
        feature_names: model.feature_names().to_vec(),
        never_used_for_outliers: never_used,
        inlier_warning: false,
    })
}

/// Global feature importances for a fitted model.
///
/// Each tree partitions its own in-bag sample into predicted inliers and
/// outliers by the model's threshold rule; every internal node on a
/// point's path credits its split feature with the class-conditional IIC
/// divided by the leaf depth, and the final score per feature is the
/// outlier-to-inlier ratio of the counter-normalized cumulative
/// importances.
pub fn global_diffi(model: &ForestModel, data: &DataMatrix) -> Result<ImportanceReport> {
    global_diffi_scaled(model, data, 1.0)
}

/// Local feature importances for one data point.
///
/// Iterates over all trees; every internal node on the point's path
/// credits its split feature with 1/h_t(x) - 1/h_max, so paths that hit
/// the depth cap contribute nothing. Intended for predicted outliers; a
/// predicted inlier is still scored but the report carries a warning flag.
pub fn local_diffi(model: &ForestModel, x: &[f64]) -> Result<ImportanceReport> {
    let p = model.n_features();
    if x.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: x.len() });
    }
    let h_max = model.depth_limit() as f64;
    let mut i_outlier = vec![0.0; p];
    let mut c_outlier = vec![0u64; p];
    for tree in model.trees() {
        let path = tree.path_internal_nodes(x);
        let depth = tree.path_length(x);
        if depth == 0 {
            continue;
        }
        let delta = 1.0 / depth as f64 - 1.0 / h_max;
        for &v in &path {
            if let Node::Internal { feature, .. } = tree.nodes()[v as usize] {
                i_outlier[feature] += delta;
                c_outlier[feature] += 1;
            }
        }
    }

    let mut scores = vec![0.0; p];
    let mut never_used = vec![false; p];
    for j in 0..p {
        if c_outlier[j] == 0 {
            never_used[j] = true;
        } else {
            scores[j] = i_outlier[j] / c_outlier[j] as f64;
        }
    }
    let inlier_warning = model.anomaly_score(x)? < model.score_threshold();

    Ok(ImportanceReport {
        kind: ImportanceKind::Local,
        scores,
        counters: FeatureCounters { inlier: vec![0; p], outlier: c_outlier },
        cumulative: CumulativeImportance { inlier: vec![0.0; p], outlier: i_outlier },
        feature_names: model.feature_names().to_vec(),
        never_used_for_outliers: never_used,
        inlier_warning,
    })
}
