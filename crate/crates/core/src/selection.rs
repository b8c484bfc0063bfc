//! Unsupervised feature selection: aggregate global importance rankings
//! across independently seeded forests, plus the labeled F1 evaluation
//! used to audit a ranking.

use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::diffi::{global_diffi, ranking_to_ranks};
use crate::error::{Error, Result};
use crate::forest::{fit, ForestParams};

/// Score increment for a feature at 1-based rank `rank` out of `p`:
/// 1 - log(rank)/log(p). Rank 1 contributes 1, rank p contributes 0.
pub fn rank_update(rank: usize, p: usize) -> Result<f64> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("p must be at least 2, got {p}")));
    }
    if rank < 1 || rank > p {
        return Err(Error::InvalidArgument(format!("rank must lie in [1, {p}], got {rank}")));
    }
    Ok(1.0 - (rank as f64).ln() / (p as f64).ln())
}

/// Configuration for [`select_features`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub n_runs: usize,
    /// Forest hyperparameters; run i uses seed `forest.seed + i`.
    pub forest: ForestParams,
}

/// Aggregated selection scores plus the per-run rank matrix for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedScores {
    /// Sum over runs of the rank-update increments, per feature.
    pub s_agg: Vec<f64>,
    pub n_runs: usize,
    /// Row per run; entry j is the 1-based rank of feature j in that run.
    pub per_run_ranks: Vec<Vec<usize>>,
}

/// Sum rank-update increments over rank rows (1-based ranks per feature).
pub fn aggregate_rank_rows(rank_rows: &[Vec<usize>], p: usize) -> Result<Vec<f64>> {
    let mut s_agg = vec![0.0; p];
    for row in rank_rows {
        if row.len() != p {
            return Err(Error::InvalidArgument(format!(
                "rank row has {} entries, expected {p}",
                row.len()
            )));
        }
        for (j, &rank) in row.iter().enumerate() {
            s_agg[j] += rank_update(rank, p)?;
        }
    }
    Ok(s_agg)
}

/// Rank features by aggregating global importance rankings over
/// `n_runs` forests fitted with consecutive seeds.
///
/// Returns the final feature ordering (most important first, ties broken
/// by ascending index) together with the aggregated scores.
pub fn select_features(
    data: &DataMatrix,
    config: &SelectionConfig,
) -> Result<(Vec<usize>, AggregatedScores)> {
    if config.n_runs < 1 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".into()));
    }
    let p = data.n_cols();

    let run_results: Vec<Result<Vec<usize>>> = (0..config.n_runs)
        .into_par_iter()
        .map(|i| {
            let params = ForestParams {
                seed: config.forest.seed.wrapping_add(i as u64),
                ..config.forest.clone()
            };
            let model = fit(data, &params)?;
            let report = global_diffi(&model, data)?;
            Ok(ranking_to_ranks(&report.ranking()))
        })
        .collect();

    let completed_runs = run_results.iter().filter(|r| r.is_ok()).count();
    let mut per_run_ranks = Vec::with_capacity(config.n_runs);
    for (i, result) in run_results.into_iter().enumerate() {
        match result {
            Ok(ranks) => per_run_ranks.push(ranks),
            Err(cause) => {
                return Err(Error::SelectionAborted {
                    failed_run: i,
                    completed_runs,
                    cause: Box::new(cause),
                })
            }
        }
    }

    let s_agg = aggregate_rank_rows(&per_run_ranks, p)?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| s_agg[b].total_cmp(&s_agg[a]).then(a.cmp(&b)));
    Ok((order, AggregatedScores { s_agg, n_runs: config.n_runs, per_run_ranks }))
}

/// Binary F1 with outliers (label 1) as the positive class.
pub fn f1_score(labels: &[u8], predicted: &[u8]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&y, &yhat) in labels.iter().zip(predicted) {
        match (y, yhat) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Median of a non-empty sample (mean of the two middle values when even).
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Median F1 of `n_repeats` forests fitted on `data` with seeds
/// `params.seed .. params.seed + n_repeats - 1`.
pub fn median_f1(
    data: &DataMatrix,
    labels: &[u8],
    params: &ForestParams,
    n_repeats: usize,
) -> Result<f64> {
    if n_repeats < 1 {
        return Err(Error::InvalidArgument("n_repeats must be at least 1".into()));
    }
    if labels.len() != data.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} rows",
            labels.len(),
            data.n_rows()
        )));
    }
    let scores: Vec<Result<f64>> = (0..n_repeats)
        .into_par_iter()
        .map(|rep| {
            let rep_params =
                ForestParams { seed: params.seed.wrapping_add(rep as u64), ..params.clone() };
            let model = fit(data, &rep_params)?;
            let predicted: Vec<u8> =
                model.predict(data)?.into_iter().map(|pr| pr.label).collect();
            Ok(f1_score(labels, &predicted))
        })
        .collect();
    let values = scores.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(median(&values))
}

/// One row of the F1-vs-k table produced by [`evaluate_topk`].
#[derive(Debug, Clone, PartialEq)]
pub struct TopkEntry {
    pub k: usize,
    pub median_f1: f64,
    pub f1_scores: Vec<f64>,
}

/// For each k, fit `n_repeats` forests on the top-k ranked features and
/// report the median F1 against the supplied labels.
pub fn evaluate_topk(
    data: &DataMatrix,
    labels: &[u8],
    ranking: &[usize],
    k_values: &[usize],
    n_repeats: usize,
    params: &ForestParams,
) -> Result<Vec<TopkEntry>> {
    let p = data.n_cols();
    if ranking.len() != p {
        return Err(Error::InvalidArgument(format!(
            "ranking covers {} features, data has {p}",
            ranking.len()
        )));
    }
    for &k in k_values {
        if k == 0 || k >= p {
            return Err(Error::InvalidArgument(format!("k must lie in [1, {}], got {k}", p - 1)));
        }
    }
    let mut table = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let subset = data.select_columns(&ranking[..k])?;
        let f1_scores: Vec<f64> = (0..n_repeats)
            .into_par_iter()
            .map(|rep| {
                let rep_params =
                    ForestParams { seed: params.seed.wrapping_add(rep as u64), ..params.clone() };
                let model = fit(&subset, &rep_params)?;
                let predicted: Vec<u8> =
                    model.predict(&subset)?.into_iter().map(|pr| pr.label).collect();
                Ok(f1_score(labels, &predicted))
            })
            .collect::<Result<Vec<f64>>>()?;
        table.push(TopkEntry { k, median_f1: median(&f1_scores), f1_scores });
    }
    Ok(table)
}
