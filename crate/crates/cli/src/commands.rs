//! Implementations of the single-purpose subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use diffi::dataio::{
    load_csv, load_model, save_csv, save_model, write_rank_matrix_csv, write_report_csv,
    write_report_json, write_selection_csv, LabeledDataset,
};
use diffi::diffi::{global_diffi, local_diffi};
use diffi::forest::{fit as fit_forest, ForestModel, ForestParams};
use diffi::metrics::{ordered_emd, t_top_k, MetricRecord};
use diffi::selection::{evaluate_topk, select_features, SelectionConfig};
use diffi::synth::{generate, generate_test_outliers, SynthSpec};
use diffi::{Error, Result};
use serde::Serialize;

use crate::support::{delimiter_byte, parse_k_values, write_provenance};
use crate::{EmitFormat, ForestArgs, InputArgs};

fn load_input(input: &InputArgs) -> Result<LabeledDataset> {
    load_csv(&input.input, input.label_column.as_deref(), delimiter_byte(input.delimiter)?)
}

fn forest_params(args: &ForestArgs) -> ForestParams {
    ForestParams::new(args.psi, args.trees, args.seed).with_threshold(args.threshold.0)
}

#[derive(Serialize)]
struct FitConfig {
    input: String,
    label_column: Option<String>,
    psi: usize,
    n_trees: usize,
    seed: u64,
    threshold: diffi::forest::ThresholdMode,
}

fn fit_config(input: &InputArgs, args: &ForestArgs) -> FitConfig {
    FitConfig {
        input: input.input.display().to_string(),
        label_column: input.label_column.clone(),
        psi: args.psi,
        n_trees: args.trees,
        seed: args.seed,
        threshold: args.threshold.0,
    }
}

pub fn fit(input: &InputArgs, forest: &ForestArgs, out: &Path) -> Result<()> {
    let dataset = load_input(input)?;
    let model = fit_forest(&dataset.data, &forest_params(forest))?;
    save_model(&model, out)?;
    write_provenance(out, "fit", &fit_config(input, forest))?;
    eprintln!(
        "fitted {} trees (psi = {}) on {} rows; threshold {:.6}; model -> {}",
        model.n_trees(),
        model.psi(),
        dataset.data.n_rows(),
        model.score_threshold(),
        out.display()
    );
    Ok(())
}

fn load_model_and_data(model_path: &Path, input: &InputArgs) -> Result<(ForestModel, LabeledDataset)> {
    let model = load_model(model_path)?;
    let dataset = load_input(input)?;
    Ok((model, dataset))
}

#[derive(Serialize)]
struct ScoreConfig {
    model: String,
    input: String,
}

#[derive(Serialize)]
struct ScoreRow {
    row: usize,
    score: f64,
    label: u8,
}

pub fn score(model_path: &Path, input: &InputArgs, out: &Path, format: EmitFormat) -> Result<()> {
    let (model, dataset) = load_model_and_data(model_path, input)?;
    let predictions = model.predict(&dataset.data)?;
    let rows: Vec<ScoreRow> = predictions
        .iter()
        .enumerate()
        .map(|(row, p)| ScoreRow { row, score: p.score, label: p.label })
        .collect();
    let mut writer = BufWriter::new(File::create(out)?);
    match format {
        EmitFormat::Csv => {
            let mut csv = csv::Writer::from_writer(&mut writer);
            csv.write_record(["row", "score", "label"])?;
            for r in &rows {
                csv.write_record(&[r.row.to_string(), r.score.to_string(), r.label.to_string()])?;
            }
            csv.flush()?;
        }
        EmitFormat::Json => {
            serde_json::to_writer_pretty(&mut writer, &rows)
                .map_err(|e| Error::InvalidData(format!("score JSON: {e}")))?;
            writer.write_all(b"\n")?;
        }
    }
    writer.flush()?;
    write_provenance(
        out,
        "score",
        &ScoreConfig { model: model_path.display().to_string(), input: input.input.display().to_string() },
    )?;
    Ok(())
}

pub fn gfi(model_path: &Path, input: &InputArgs, out: &Path, format: EmitFormat) -> Result<()> {
    let (model, dataset) = load_model_and_data(model_path, input)?;
    let report = global_diffi(&model, &dataset.data)?;
    let mut writer = BufWriter::new(File::create(out)?);
    match format {
        EmitFormat::Csv => write_report_csv(&report, &mut writer)?,
        EmitFormat::Json => write_report_json(&report, &mut writer)?,
    }
    writer.flush()?;
    write_provenance(
        out,
        "gfi",
        &ScoreConfig { model: model_path.display().to_string(), input: input.input.display().to_string() },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct LfiRow {
    row: usize,
    predicted_outlier: bool,
    feature: String,
    score: f64,
    rank: usize,
    c_o: u64,
    i_o: f64,
}

pub fn lfi(model_path: &Path, input: &InputArgs, out: &Path, format: EmitFormat) -> Result<()> {
    let (model, dataset) = load_model_and_data(model_path, input)?;
    let mut rows: Vec<LfiRow> = Vec::new();
    for i in 0..dataset.data.n_rows() {
        let report = local_diffi(&model, dataset.data.row(i))?;
        let ranks = diffi::diffi::ranking_to_ranks(&report.ranking());
        for (j, rank) in ranks.iter().enumerate() {
            rows.push(LfiRow {
                row: i,
                predicted_outlier: !report.inlier_warning,
                feature: report.feature_names[j].clone(),
                score: report.scores[j],
                rank: *rank,
                c_o: report.counters.outlier[j],
                i_o: report.cumulative.outlier[j],
            });
        }
    }
    let mut writer = BufWriter::new(File::create(out)?);
    match format {
        EmitFormat::Csv => {
            let mut csv = csv::Writer::from_writer(&mut writer);
            csv.write_record(["row", "predicted_outlier", "feature", "score", "rank", "c_o", "i_o"])?;
            for r in &rows {
                csv.write_record(&[
                    r.row.to_string(),
                    r.predicted_outlier.to_string(),
                    r.feature.clone(),
                    r.score.to_string(),
                    r.rank.to_string(),
                    r.c_o.to_string(),
                    r.i_o.to_string(),
                ])?;
            }
            csv.flush()?;
        }
        EmitFormat::Json => {
            serde_json::to_writer_pretty(&mut writer, &rows)
                .map_err(|e| Error::InvalidData(format!("lfi JSON: {e}")))?;
            writer.write_all(b"\n")?;
        }
    }
    writer.flush()?;
    write_provenance(
        out,
        "lfi",
        &ScoreConfig { model: model_path.display().to_string(), input: input.input.display().to_string() },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct FselectConfig {
    input: String,
    label_column: Option<String>,
    n_runs: usize,
    psi: usize,
    n_trees: usize,
    seed: u64,
    threshold: diffi::forest::ThresholdMode,
    k_values: Option<Vec<usize>>,
    repeats: usize,
}

pub fn fselect(
    input: &InputArgs,
    forest: &ForestArgs,
    runs: usize,
    k_values: Option<&str>,
    repeats: usize,
    out_dir: &Path,
) -> Result<()> {
    let dataset = load_input(input)?;
    let k_values = k_values.map(parse_k_values).transpose()?;
    if k_values.is_some() && dataset.labels.is_none() {
        return Err(Error::InvalidArgument(
            "--k-values requires labels; pass --label-column".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;

    let config = SelectionConfig { n_runs: runs, forest: forest_params(forest) };
    let (order, aggregated) = select_features(&dataset.data, &config)?;

    let names = dataset.data.feature_names();
    let mut ranking_out = BufWriter::new(File::create(out_dir.join("ranking.csv"))?);
    write_selection_csv(names, &order, &aggregated, &mut ranking_out)?;
    ranking_out.flush()?;
    let mut matrix_out = BufWriter::new(File::create(out_dir.join("rank_matrix.csv"))?);
    write_rank_matrix_csv(names, &aggregated, &mut matrix_out)?;
    matrix_out.flush()?;

    if let (Some(k_values), Some(labels)) = (&k_values, &dataset.labels) {
        let table = evaluate_topk(&dataset.data, labels, &order, k_values, repeats, &forest_params(forest))?;
        let mut f1_out = csv::Writer::from_writer(BufWriter::new(
            File::create(out_dir.join("f1_vs_k.csv"))?,
        ));
        f1_out.write_record(["k", "median_f1"])?;
        for entry in &table {
            f1_out.write_record(&[entry.k.to_string(), entry.median_f1.to_string()])?;
        }
        f1_out.flush()?;
    }

    write_provenance(
        out_dir,
        "fselect",
        &FselectConfig {
            input: input.input.display().to_string(),
            label_column: input.label_column.clone(),
            n_runs: runs,
            psi: forest.psi,
            n_trees: forest.trees,
            seed: forest.seed,
            threshold: forest.threshold.0,
            k_values,
            repeats,
        },
    )?;
    eprintln!(
        "selected ranking: {}",
        order.iter().map(|&j| names[j].as_str()).collect::<Vec<_>>().join(" > ")
    );
    Ok(())
}

#[derive(Serialize)]
struct SynthConfig {
    n: usize,
    anomalies: f64,
    p_noise: usize,
    seed: u64,
    dataset_name: String,
    count_per_family: Option<usize>,
}

pub fn synth(
    n: usize,
    anomalies: f64,
    p_noise: usize,
    seed: u64,
    out: &Path,
    test_outliers: Option<&Path>,
    count_per_family: usize,
) -> Result<()> {
    let spec = SynthSpec { n, anomaly_fraction: anomalies, p_noise, seed };
    let (data, labels) = generate(&spec)?;
    save_csv(out, &data, Some(&labels), "label")?;
    if let Some(path) = test_outliers {
        let (test, families) = generate_test_outliers(count_per_family, seed, p_noise)?;
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = test.feature_names().to_vec();
        header.push("family".into());
        writer.write_record(&header)?;
        for (row, family) in test.rows().zip(&families) {
            let mut record: Vec<String> = row.iter().map(f64::to_string).collect();
            record.push(family.to_string());
            writer.write_record(&record)?;
        }
        writer.flush()?;
    }
    write_provenance(
        out,
        "synth",
        &SynthConfig {
            n,
            anomalies,
            p_noise,
            seed,
            dataset_name: spec.name(),
            count_per_family: test_outliers.map(|_| count_per_family),
        },
    )?;
    eprintln!("wrote dataset {} ({} rows, {} features + label)", spec.name(), n, p_noise + 2);
    Ok(())
}

fn emit_record(record: &MetricRecord, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(record)
        .map_err(|e| Error::InvalidData(format!("metric JSON: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Parse one ranking entry: a 1-based index or an `f`-prefixed name.
fn parse_ranking_entry(token: &str) -> Result<usize> {
    let trimmed = token.trim();
    let digits = trimmed.strip_prefix('f').unwrap_or(trimmed);
    let index: usize = digits
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad ranking entry {token:?}")))?;
    if index == 0 {
        return Err(Error::InvalidArgument("ranking entries are 1-based".into()));
    }
    Ok(index - 1)
}

#[derive(Serialize)]
struct TtkConfig {
    rankings: String,
    k: usize,
}

pub fn eval_ttk(rankings_path: &Path, k: usize, out: Option<&Path>) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(rankings_path)?;
    let mut rankings = Vec::new();
    for record in reader.records() {
        let record = record?;
        let ranking: Vec<usize> =
            record.iter().map(parse_ranking_entry).collect::<Result<_>>()?;
        rankings.push(ranking);
    }
    let ttk = t_top_k(&rankings, k)?;
    let record = MetricRecord {
        metric: "t-top-k".into(),
        parameter: k,
        value: serde_json::json!(ttk.counts),
        metadata: serde_json::json!({
            "n_runs": ttk.n_runs,
            "rankings": rankings_path.display().to_string(),
        }),
    };
    emit_record(&record, out)?;
    if let Some(path) = out {
        write_provenance(path, "eval-ttk", &TtkConfig {
            rankings: rankings_path.display().to_string(),
            k,
        })?;
    }
    Ok(())
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad importance value {t:?}")))
        })
        .collect()
}

#[derive(Serialize)]
struct EmdConfig {
    ground_truth: Vec<f64>,
    estimated: Vec<f64>,
}

pub fn eval_emd(ground_truth: &str, estimated: &str, out: Option<&Path>) -> Result<()> {
    let gt = parse_vector(ground_truth)?;
    let est = parse_vector(estimated)?;
    let value = ordered_emd(&gt, &est)?;
    let record = MetricRecord {
        metric: "ordered-emd".into(),
        parameter: gt.len(),
        value: serde_json::json!(value),
        metadata: serde_json::json!({ "ground_truth": gt, "estimated": est }),
    };
    emit_record(&record, out)?;
    if let Some(path) = out {
        write_provenance(path, "eval-emd", &EmdConfig { ground_truth: gt, estimated: est })?;
    }
    Ok(())
}

