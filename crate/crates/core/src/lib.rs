//! Isolation Forest anomaly detection with depth-based feature
//! importance (DIFFI).
//!
//! The crate trains Isolation Forests, explains them globally (which
//! features the fitted model isolates outliers with) and locally (why a
//! single point was flagged), performs unsupervised feature selection by
//! aggregating importance rankings across independently seeded forests,
//! generates the polar-coordinate synthetic benchmark, and evaluates
//! importance quality with times-in-top-K and an ordered Earth Mover's
//! Distance.
//!
//! Everything is deterministic under a fixed seed: trees draw from
//! per-tree RNG streams, so results do not depend on the worker count.

pub mod data;
pub mod dataio;
pub mod diffi;
pub mod error;
pub mod forest;
pub mod metrics;
pub mod selection;
pub mod synth;

pub use data::DataMatrix;
pub use dataio::{load_csv, load_glass_csv, load_model, save_csv, save_model, LabeledDataset};
pub use diffi::{
    global_diffi, induced_imbalance, local_diffi, rank_features, ImportanceKind, ImportanceReport,
};
pub use error::{Error, Result};
pub use forest::{
    fit, per_tree_predict, ForestModel, ForestParams, IsolationTree, Prediction, ThresholdMode,
};
pub use metrics::{emd_locations, ordered_emd, t_top_k, Signature, TtkVector};
pub use selection::{
    evaluate_topk, median_f1, rank_update, select_features, AggregatedScores, SelectionConfig,
};
pub use synth::{generate, generate_test_outliers, OutlierFamily, SynthSpec};
