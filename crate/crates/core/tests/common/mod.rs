//! Shared test support: an independent linear-program transportation
//! solver used as the EMD oracle, and the hand-built micro-forest
//! fixture with its hand-traced importance values.
#![allow(dead_code)] // each test target uses its own subset

use diffi::data::DataMatrix;
use diffi::forest::{ForestModel, IsolationTree, Node, ThresholdMode};

const EPS: f64 = 1e-15;

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
    flow: f64,
}

/// Minimum-cost flow by successive shortest augmenting paths with
/// Bellman-Ford searches on the residual graph. Small and exact enough
/// to serve as the LP oracle for signature-sized transportation problems.
struct MinCostFlow {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl MinCostFlow {
    fn new(n_nodes: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); n_nodes] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost, flow: 0.0 });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0, cost: -cost, flow: 0.0 });
    }

    fn solve(&mut self, source: usize, sink: usize) -> (f64, f64) {
        let n = self.adj.len();
        let mut total_flow = 0.0;
        let mut total_cost = 0.0;
        loop {
            // Bellman-Ford over residual edges.
            let mut dist = vec![f64::INFINITY; n];
            let mut parent_edge = vec![usize::MAX; n];
            dist[source] = 0.0;
            for _ in 0..n {
                let mut changed = false;
                for u in 0..n {
                    if !dist[u].is_finite() {
                        continue;
                    }
                    for &e in &self.adj[u] {
                        let edge = &self.edges[e];
                        if edge.cap - edge.flow > EPS && dist[u] + edge.cost < dist[edge.to] - EPS {
                            dist[edge.to] = dist[u] + edge.cost;
                            parent_edge[edge.to] = e;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if !dist[sink].is_finite() {
                break;
            }
            // Bottleneck along the path.
            let mut bottleneck = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let e = parent_edge[v];
                bottleneck = bottleneck.min(self.edges[e].cap - self.edges[e].flow);
                v = self.edges[e ^ 1].to;
            }
            if bottleneck <= EPS {
                break;
            }
            let mut v = sink;
            while v != source {
                let e = parent_edge[v];
                self.edges[e].flow += bottleneck;
                self.edges[e ^ 1].flow -= bottleneck;
                total_cost += bottleneck * self.edges[e].cost;
                v = self.edges[e ^ 1].to;
            }
            total_flow += bottleneck;
        }
        (total_flow, total_cost)
    }
}

/// Transportation LP: move mass `from` (at the given locations) onto
/// `to`, minimizing total |location distance| x mass. Inputs need not be
/// normalized; they are scaled to sum 1 like the production path.
pub fn emd_lp(locations: &[f64], from: &[f64], to: &[f64]) -> f64 {
    let p = locations.len();
    let from_total: f64 = from.iter().sum();
    let to_total: f64 = to.iter().sum();
    let source = 2 * p;
    let sink = 2 * p + 1;
    let mut net = MinCostFlow::new(2 * p + 2);
    for i in 0..p {
        net.add_edge(source, i, from[i] / from_total, 0.0);
        net.add_edge(p + i, sink, to[i] / to_total, 0.0);
        for j in 0..p {
            net.add_edge(i, p + j, f64::INFINITY, (locations[i] - locations[j]).abs());
        }
    }
    let (flow, cost) = net.solve(source, sink);
    assert!((flow - 1.0).abs() < 1e-9, "transport must move all mass, moved {flow}");
    cost
}

/// Hand-built 2-tree forest over 8 points and 2 features, with a fixed
/// 0.6 score threshold so each tree partitions its in-bag sample into
/// depth-2 outliers and depth-3 inliers.
pub fn golden_micro_forest() -> (ForestModel, DataMatrix) {
    let data = DataMatrix::new(
        8,
        2,
        vec![
            1.0, 10.0, //
            2.0, 20.0, //
            3.0, 30.0, //
            4.0, 40.0, //
            5.0, 50.0, //
            6.0, 60.0, //
            30.0, 70.0, //
            40.0, 80.0,
        ],
        vec!["f1".to_string(), "f2".to_string()],
    )
    .unwrap();

    let tree_a = IsolationTree::from_parts(
        vec![
            Node::Internal { feature: 0, threshold: 4.5, left: 1, right: 6, n_samples: 8 },
            Node::Internal { feature: 1, threshold: 25.0, left: 2, right: 3, n_samples: 4 },
            Node::Leaf { depth: 2, n_samples: 2 },
            Node::Internal { feature: 0, threshold: 3.5, left: 4, right: 5, n_samples: 2 },
            Node::Leaf { depth: 3, n_samples: 1 },
            Node::Leaf { depth: 3, n_samples: 1 },
            Node::Internal { feature: 0, threshold: 20.0, left: 7, right: 10, n_samples: 4 },
            Node::Internal { feature: 1, threshold: 55.0, left: 8, right: 9, n_samples: 2 },
            Node::Leaf { depth: 3, n_samples: 1 },
            Node::Leaf { depth: 3, n_samples: 1 },
            Node::Leaf { depth: 2, n_samples: 2 },
        ],
        vec![0, 1, 2, 3, 4, 5, 6, 7],
    )
    .unwrap();

    let tree_b = IsolationTree::from_parts(
        vec![
            Node::Internal { feature: 1, threshold: 65.0, left: 1, right: 6, n_samples: 8 },
            Node::Internal { feature: 1, threshold: 15.0, left: 2, right: 3, n_samples: 6 },
            Node::Leaf { depth: 2, n_samples: 1 },
            Node::Internal { feature: 0, threshold: 2.5, left: 4, right: 5, n_samples: 5 },
            Node::Leaf { depth: 3, n_samples: 1 },
            Node::Leaf { depth: 3, n_samples: 4 },
            Node::Internal { feature: 0, threshold: 35.0, left: 7, right: 8, n_samples: 2 },
            Node::Leaf { depth: 2, n_samples: 1 },
            Node::Leaf { depth: 2, n_samples: 1 },
        ],
        vec![0, 1, 2, 3, 4, 5, 6, 7],
    )
    .unwrap();

    let model = ForestModel::from_parts(
        vec![tree_a, tree_b],
        8,
        ThresholdMode::fixed(0.6),
        0.6,
        0,
        vec!["f1".to_string(), "f2".to_string()],
    )
    .unwrap();
    (model, data)
}
