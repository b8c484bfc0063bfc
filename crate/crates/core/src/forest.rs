//! Isolation Forest training, path lengths, anomaly scores, and predictions.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// How anomaly scores are turned into binary labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Label outlier when score >= value.
    Fixed { value: f64 },
    /// Label the top `contamination` fraction of scores as outliers:
    /// the threshold is the (1 - contamination) quantile of the scores
    /// being partitioned (training scores at the forest level, in-bag
    /// single-tree scores at the tree level).
    Quantile { contamination: f64 },
}

impl Default for ThresholdMode {
    fn default() -> Self {
        ThresholdMode::Fixed { value: 0.5 }
    }
}

impl ThresholdMode {
    pub fn fixed(value: f64) -> Self {
        ThresholdMode::Fixed { value }
    }

    pub fn quantile(contamination: f64) -> Self {
        ThresholdMode::Quantile { contamination }
    }

    fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            ThresholdMode::Fixed { value } => ("threshold", value),
            ThresholdMode::Quantile { contamination } => ("contamination", contamination),
        };
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {v}")));
        }
        Ok(())
    }

    /// Resolve to a concrete cut value for the given score sample.
    ///
    /// The quantile rule never flags more than ceil(contamination * n)
    /// points: when the cut lands inside a block of tied scores (common
    /// for single-tree scores, whose depths are small integers), the
    /// threshold steps above the block instead of swallowing it.
    pub fn resolve(&self, scores: &[f64]) -> f64 {
        match *self {
            ThresholdMode::Fixed { value } => value,
            ThresholdMode::Quantile { contamination } => {
                let mut sorted = scores.to_vec();
                sorted.sort_by(|a, b| a.total_cmp(b));
                let n = sorted.len();
                let idx = (((1.0 - contamination) * n as f64).floor() as usize).min(n - 1);
                let candidate = sorted[idx];
                let block_start = sorted.partition_point(|&s| s < candidate);
                if block_start >= idx {
                    return candidate;
                }
                match sorted[idx..].iter().copied().find(|&s| s > candidate) {
                    Some(above) => above,
                    // Everything from the cut up is tied: exclude it all.
                    None => (candidate + 1.0) / 2.0,
                }
            }
        }
    }
}

/// Node identifier within one tree's node arena.
pub type NodeId = u32;

/// One node of an isolation tree. The root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        /// Index of the splitting feature f(v).
        feature: usize,
        /// Splitting threshold tau(v); values < tau go left.
        threshold: f64,
        left: NodeId,
        right: NodeId,
        /// Number of in-bag points routed through this node at training time.
        n_samples: usize,
    },
    Leaf {
        /// Edge count from the root.
        depth: usize,
        n_samples: usize,
    },
}

impl Node {
    pub fn n_samples(&self) -> usize {
        match *self {
            Node::Internal { n_samples, .. } | Node::Leaf { n_samples, .. } => n_samples,
        }
    }
}

/// A single data-induced random tree plus the in-bag sample it was grown on.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<Node>,
    in_bag: Vec<usize>,
}

impl IsolationTree {
    /// Assemble a tree from parts; used by deserialization and hand-built fixtures.
    pub fn from_parts(nodes: Vec<Node>, in_bag: Vec<usize>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidData("tree has no nodes".into()));
        }
        for node in &nodes {
            if let Node::Internal { left, right, .. } = *node {
                if left as usize >= nodes.len() || right as usize >= nodes.len() {
                    return Err(Error::InvalidData("child id out of range".into()));
                }
            }
        }
        Ok(Self { nodes, in_bag })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Row indices of the bootstrap sample this tree was grown on.
    pub fn in_bag(&self) -> &[usize] {
        &self.in_bag
    }

    /// Leaf id reached by `x` under the split tests (value < tau goes left).
    pub fn leaf_of(&self, x: &[f64]) -> NodeId {
        let mut id = 0u32;
        loop {
            match self.nodes[id as usize] {
                Node::Internal { feature, threshold, left, right, .. } => {
                    id = if x[feature] < threshold { left } else { right };
                }
                Node::Leaf { .. } => return id,
            }
        }
    }

    /// Path length h_t(x): the number of edges from the root to the leaf of `x`.
    pub fn path_length(&self, x: &[f64]) -> usize {
        match self.nodes[self.leaf_of(x) as usize] {
            Node::Leaf { depth, .. } => depth,
            Node::Internal { .. } => unreachable!("leaf_of returns a leaf"),
        }
    }

    /// Internal node ids on the root-to-leaf path of `x`, in root-first order.
    pub fn path_internal_nodes(&self, x: &[f64]) -> Vec<NodeId> {
        let mut path = Vec::new();
        let mut id = 0u32;
        loop {
            match self.nodes[id as usize] {
                Node::Internal { feature, threshold, left, right, .. } => {
                    path.push(id);
                    id = if x[feature] < threshold { left } else { right };
                }
                Node::Leaf { .. } => return path,
            }
        }
    }

    /// Occupancy counts (n_left, n_right) of an internal node.
    pub fn child_counts(&self, id: NodeId) -> Option<(usize, usize)> {
        match self.nodes[id as usize] {
            Node::Internal { left, right, .. } => Some((
                self.nodes[left as usize].n_samples(),
                self.nodes[right as usize].n_samples(),
            )),
            Node::Leaf { .. } => None,
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    /// Subsample size psi drawn (without replacement) per tree.
    pub psi: usize,
    pub n_trees: usize,
    pub seed: u64,
    pub threshold: ThresholdMode,
}

impl ForestParams {
    pub fn new(psi: usize, n_trees: usize, seed: u64) -> Self {
        Self { psi, n_trees, seed, threshold: ThresholdMode::default() }
    }

    pub fn with_threshold(mut self, threshold: ThresholdMode) -> Self {
        self.threshold = threshold;
        self
    }
}

impl Default for ForestParams {
    fn default() -> Self {
        Self::new(256, 100, 0)
    }
}

/// A fitted Isolation Forest. Immutable after `fit`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<IsolationTree>,
    psi: usize,
    threshold_mode: ThresholdMode,
    score_threshold: f64,
    rng_seed: u64,
    feature_names: Vec<String>,
}

/// Score and label for one data point.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Anomaly score in (0, 1].
    pub score: f64,
    /// 1 when score >= the model threshold.
    pub label: u8,
    /// h_t(x) for every tree.
    pub per_tree_depths: Vec<usize>,
}

/// Normalization factor c(psi): the average path length of an
/// unsuccessful binary search over psi points, using the harmonic-number
/// approximation H(k) ~ ln(k) + 0.5772156649.
pub fn average_path_factor(psi: usize) -> f64 {
    if psi > 2 {
        let k = (psi - 1) as f64;
        2.0 * (k.ln() + 0.5772156649) - 2.0 * k / psi as f64
    } else if psi == 2 {
        1.0
    } else {
        0.0
    }
}

/// Depth limit h_max = ceil(log2(n)).
pub fn depth_limit(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Single-tree anomaly score 2^(-h / c(psi)).
pub fn single_tree_score(depth: usize, psi: usize) -> f64 {
    (-(depth as f64) / average_path_factor(psi)).exp2()
}

/// Train an Isolation Forest.
///
/// Each tree grows on a uniform subsample of `psi` rows drawn without
/// replacement from its own RNG stream (master seed + tree index), so
/// adding trees never reshuffles earlier ones and trees can be built in
/// parallel with reproducible results.
pub fn fit(data: &DataMatrix, params: &ForestParams) -> Result<ForestModel> {
    let n = data.n_rows();
    if params.psi < 2 || params.psi > n {
        return Err(Error::InvalidArgument(format!(
            "psi must lie in [2, {n}], got {}",
            params.psi
        )));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
    }
    params.threshold.validate()?;

    let trees: Vec<IsolationTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| build_tree(data, params.psi, params.seed, t as u64))
        .collect();

    let mut model = ForestModel {
        trees,
        psi: params.psi,
        threshold_mode: params.threshold,
        score_threshold: 0.5,
        rng_seed: params.seed,
        feature_names: data.feature_names().to_vec(),
    };
    let training_scores: Vec<f64> = data.rows().map(|row| model.anomaly_score_slice(row)).collect();
    model.score_threshold = params.threshold.resolve(&training_scores);
    Ok(model)
}

fn build_tree(data: &DataMatrix, psi: usize, seed: u64, tree_index: u64) -> IsolationTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index);

    let mut in_bag: Vec<usize> = sample(&mut rng, data.n_rows(), psi).into_vec();
    let h_max = depth_limit(psi);
    let mut nodes = Vec::new();
    // Recursion works on disjoint index ranges of a scratch copy of in_bag.
    let mut scratch = in_bag.clone();
    grow(data, &mut scratch, 0, h_max, &mut rng, &mut nodes);
    in_bag.shrink_to_fit();
    IsolationTree { nodes, in_bag }
}

/// Grow the subtree over `indices` at `depth`; returns the new node's id.
fn grow(
    data: &DataMatrix,
    indices: &mut [usize],
    depth: usize,
    h_max: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node>,
) -> NodeId {
    let id = nodes.len() as NodeId;
    if depth >= h_max || indices.len() <= 1 {
        nodes.push(Node::Leaf { depth, n_samples: indices.len() });
        return id;
    }

    // Candidate features are those with non-constant values in this node.
    let p = data.n_cols();
    let mut ranges = Vec::with_capacity(p);
    for j in 0..p {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in indices.iter() {
            let v = data.get(i, j);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi > lo {
            ranges.push((j, lo, hi));
        }
    }
    if ranges.is_empty() {
        // All points identical on every feature: stop early.
        nodes.push(Node::Leaf { depth, n_samples: indices.len() });
        return id;
    }

    let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    // Uniform on the open interval (lo, hi); both children stay non-empty.
    let threshold = loop {
        let t = rng.random_range(lo..hi);
        if t > lo {
            break t;
        }
    };

    let split = partition(indices, |&i| data.get(i, feature) < threshold);
    let n_samples = indices.len();
    nodes.push(Node::Internal { feature, threshold, left: 0, right: 0, n_samples });

    let (left_slice, right_slice) = indices.split_at_mut(split);
    let left = grow(data, left_slice, depth + 1, h_max, rng, nodes);
    let right = grow(data, right_slice, depth + 1, h_max, rng, nodes);
    match &mut nodes[id as usize] {
        Node::Internal { left: l, right: r, .. } => {
            *l = left;
            *r = right;
        }
        Node::Leaf { .. } => unreachable!(),
    }
    id
}

/// Stable partition: elements satisfying `pred` move to the front;
/// returns the split point. Order within each side is preserved so that
/// accumulation order downstream stays deterministic.
fn partition<T: Copy, F: Fn(&T) -> bool>(slice: &mut [T], pred: F) -> usize {
    let mut left: Vec<T> = Vec::with_capacity(slice.len());
    let mut right: Vec<T> = Vec::with_capacity(slice.len());
    for &v in slice.iter() {
        if pred(&v) {
            left.push(v);
        } else {
            right.push(v);
        }
    }
    let split = left.len();
    slice[..split].copy_from_slice(&left);
    slice[split..].copy_from_slice(&right);
    split
}

impl ForestModel {
    /// Assemble a model from parts; used by deserialization and hand-built fixtures.
    pub fn from_parts(
        trees: Vec<IsolationTree>,
        psi: usize,
        threshold_mode: ThresholdMode,
        score_threshold: f64,
        rng_seed: u64,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidArgument("a model needs at least one tree".into()));
        }
        if psi < 2 {
            return Err(Error::InvalidArgument(format!("psi must be at least 2, got {psi}")));
        }
        if !(score_threshold > 0.0 && score_threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "score_threshold must lie in (0, 1), got {score_threshold}"
            )));
        }
        Ok(Self { trees, psi, threshold_mode, score_threshold, rng_seed, feature_names })
    }

    pub fn trees(&self) -> &[IsolationTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn psi(&self) -> usize {
        self.psi
    }

    /// Depth limit h_max = ceil(log2(psi)) shared by all trees.
    pub fn depth_limit(&self) -> usize {
        depth_limit(self.psi)
    }

    pub fn threshold_mode(&self) -> ThresholdMode {
        self.threshold_mode
    }

    /// Resolved forest-level score threshold.
    pub fn score_threshold(&self) -> f64 {
        self.score_threshold
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_dims(&self, got: usize) -> Result<()> {
        if got != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got });
        }
        Ok(())
    }

    fn anomaly_score_slice(&self, x: &[f64]) -> f64 {
        let total: usize = self.trees.iter().map(|t| t.path_length(x)).sum();
        let mean = total as f64 / self.trees.len() as f64;
        (-mean / average_path_factor(self.psi)).exp2()
    }

    /// Anomaly score s(x) = 2^(-mean path length / c(psi)).
    pub fn anomaly_score(&self, x: &[f64]) -> Result<f64> {
        self.check_dims(x.len())?;
        Ok(self.anomaly_score_slice(x))
    }

    fn predict_row(&self, row: &[f64]) -> Prediction {
        let per_tree_depths: Vec<usize> = self.trees.iter().map(|t| t.path_length(row)).collect();
        let mean = per_tree_depths.iter().sum::<usize>() as f64 / per_tree_depths.len() as f64;
        let score = (-mean / average_path_factor(self.psi)).exp2();
        let label = u8::from(score >= self.score_threshold);
        Prediction { score, label, per_tree_depths }
    }

    /// Score and label every row, splitting the set into predicted
    /// inliers (label 0) and outliers (label 1).
    pub fn predict(&self, data: &DataMatrix) -> Result<Vec<Prediction>> {
        self.check_dims(data.n_cols())?;
        Ok(data.rows().map(|row| self.predict_row(row)).collect())
    }

    /// Per-tree outlier labels for the tree's own in-bag sample, using
    /// the model's threshold rule on single-tree scores.
    pub fn per_tree_predict(&self, tree_index: usize, data: &DataMatrix) -> Result<Vec<u8>> {
        self.check_dims(data.n_cols())?;
        let tree = &self.trees[tree_index];
        Ok(per_tree_predict(tree, data, self.psi, self.threshold_mode))
    }
}

/// Label each in-bag point of `tree` by thresholding its single-tree
/// score 2^(-h_t / c(psi)). `data` must be the training matrix the
/// tree's in-bag indices refer to.
pub fn per_tree_predict(
    tree: &IsolationTree,
    data: &DataMatrix,
    psi: usize,
    threshold: ThresholdMode,
) -> Vec<u8> {
    let c = average_path_factor(psi);
    let scores: Vec<f64> = tree
        .in_bag()
        .iter()
        .map(|&i| (-(tree.path_length(data.row(i)) as f64) / c).exp2())
        .collect();
    let cut = threshold.resolve(&scores);
    scores.iter().map(|&s| u8::from(s >= cut)).collect()
}
