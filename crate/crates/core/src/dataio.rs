//! Dataset ingestion, labeled-data handling, and model/report persistence.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{default_feature_names, DataMatrix};
use crate::diffi::{ImportanceKind, ImportanceReport};
use crate::error::{Error, Result};
use crate::forest::{ForestModel, IsolationTree, Node, ThresholdMode};
use crate::selection::AggregatedScores;

/// A dataset with optional binary labels, as loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub labels: Option<Vec<u8>>,
    pub name: String,
}

fn parse_cell(field: &str, row: usize, col: usize, name: &str) -> Result<f64> {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::ParseCell {
            row,
            col,
            name: name.to_string(),
            value: field.to_string(),
        }),
    }
}

/// Load a CSV dataset. A header row supplies the feature names when
/// present (detected by its cells not all parsing as numbers); otherwise
/// columns are named f1..fp. `label_column` selects a 0/1 column by name
/// and requires a header.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: Option<&str>,
    delimiter: u8,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(false)
        .from_path(path)?;

    let mut records = reader.records();
    let first = match records.next() {
        Some(record) => record?,
        None => return Err(Error::InvalidData("empty file".into())),
    };
    let n_cols_total = first.len();
    let has_header = first.iter().any(|field| field.trim().parse::<f64>().is_err());
    let column_names: Vec<String> = if has_header {
        first.iter().map(|s| s.trim().to_string()).collect()
    } else {
        default_feature_names(n_cols_total)
    };

    let label_index = match label_column {
        None => None,
        Some(wanted) => {
            if !has_header {
                return Err(Error::InvalidArgument(format!(
                    "label column {wanted:?} requested but the file has no header row"
                )));
            }
            Some(column_names.iter().position(|c| c == wanted).ok_or_else(|| {
                Error::InvalidArgument(format!("label column {wanted:?} not found in header"))
            })?)
        }
    };

    let feature_indices: Vec<usize> =
        (0..n_cols_total).filter(|&c| Some(c) != label_index).collect();
    let feature_names: Vec<String> =
        feature_indices.iter().map(|&c| column_names[c].clone()).collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n_rows = 0usize;
    let mut handle_record = |record: &csv::StringRecord, line: usize| -> Result<()> {
        if record.len() != n_cols_total {
            return Err(Error::InvalidData(format!(
                "row {line} has {} fields, expected {n_cols_total}",
                record.len()
            )));
        }
        for &c in &feature_indices {
            values.push(parse_cell(&record[c], line, c + 1, &column_names[c])?);
        }
        if let Some(lc) = label_index {
            let v = parse_cell(&record[lc], line, lc + 1, &column_names[lc])?;
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidData(format!(
                    "label at row {line} must be 0 or 1, got {v}"
                )));
            }
            labels.push(v as u8);
        }
        n_rows += 1;
        Ok(())
    };

    let mut line = 1usize;
    if !has_header {
        handle_record(&first, line)?;
    }
    for record in records {
        line += 1;
        handle_record(&record?, line)?;
    }

    let data = DataMatrix::new(n_rows, feature_indices.len(), values, feature_names)?;
    Ok(LabeledDataset { data, labels: label_index.map(|_| labels), name })
}

/// Write a dataset as CSV with a header row; the optional label column
/// is appended last. Values print in shortest round-trip form, so a
/// reload reproduces them bit-exactly.
pub fn save_csv(
    path: impl AsRef<Path>,
    data: &DataMatrix,
    labels: Option<&[u8]>,
    label_name: &str,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != data.n_rows() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} rows",
                l.len(),
                data.n_rows()
            )));
        }
    }
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = data.feature_names().to_vec();
    if labels.is_some() {
        header.push(label_name.to_string());
    }
    writer.write_record(&header)?;
    for (i, row) in data.rows().enumerate() {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            record.push(l[i].to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Model persistence
// ---------------------------------------------------------------------------

/// Version tag written into every model file.
pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_FORMAT_NAME: &str = "isolation-forest";

/// 17-significant-digit decimal, enough to reproduce any f64 bit-exactly.
fn float_literal(v: f64) -> String {
    format!("{v:.16e}")
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Serialize a model into the self-describing JSON format: version tag,
/// hyperparameters, threshold, and per-tree node lists. Thresholds are
/// written as 17-significant-digit decimals.
pub fn write_model(model: &ForestModel, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{{")?;
    writeln!(out, "  \"format\": {},", json_string(MODEL_FORMAT_NAME))?;
    writeln!(out, "  \"version\": {MODEL_FORMAT_VERSION},")?;
    writeln!(out, "  \"psi\": {},", model.psi())?;
    writeln!(out, "  \"n_trees\": {},", model.n_trees())?;
    writeln!(out, "  \"rng_seed\": {},", model.rng_seed())?;
    match model.threshold_mode() {
        ThresholdMode::Fixed { value } => writeln!(
            out,
            "  \"threshold\": {{\"mode\": \"fixed\", \"value\": {}}},",
            float_literal(value)
        )?,
        ThresholdMode::Quantile { contamination } => writeln!(
            out,
            "  \"threshold\": {{\"mode\": \"quantile\", \"contamination\": {}}},",
            float_literal(contamination)
        )?,
    }
    writeln!(out, "  \"score_threshold\": {},", float_literal(model.score_threshold()))?;
    let names: Vec<String> =
        model.feature_names().iter().map(|n| json_string(n)).collect();
    writeln!(out, "  \"feature_names\": [{}],", names.join(", "))?;
    writeln!(out, "  \"trees\": [")?;
    for (t, tree) in model.trees().iter().enumerate() {
        writeln!(out, "    {{")?;
        let in_bag: Vec<String> = tree.in_bag().iter().map(usize::to_string).collect();
        writeln!(out, "      \"in_bag\": [{}],", in_bag.join(", "))?;
        writeln!(out, "      \"nodes\": [")?;
        let node_count = tree.nodes().len();
        for (id, node) in tree.nodes().iter().enumerate() {
            let line = match *node {
                Node::Internal { feature, threshold, left, right, n_samples } => format!(
                    "        {{\"id\": {id}, \"feature\": {feature}, \"threshold\": {}, \
                     \"left\": {left}, \"right\": {right}, \"n_samples\": {n_samples}}}",
                    float_literal(threshold)
                ),
                Node::Leaf { depth, n_samples } => format!(
                    "        {{\"id\": {id}, \"depth\": {depth}, \"n_samples\": {n_samples}}}"
                ),
            };
            let comma = if id + 1 < node_count { "," } else { "" };
            writeln!(out, "{line}{comma}")?;
        }
        writeln!(out, "      ]")?;
        let comma = if t + 1 < model.n_trees() { "," } else { "" };
        writeln!(out, "    }}{comma}")?;
    }
    writeln!(out, "  ]")?;
    writeln!(out, "}}")?;
    Ok(())
}

pub fn save_model(model: &ForestModel, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_model(model, &mut writer)?;
    writer.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    psi: usize,
    n_trees: usize,
    rng_seed: u64,
    threshold: ThresholdMode,
    score_threshold: f64,
    feature_names: Vec<String>,
    trees: Vec<TreeFile>,
}

#[derive(Deserialize)]
struct TreeFile {
    in_bag: Vec<usize>,
    nodes: Vec<NodeFile>,
}

#[derive(Deserialize)]
struct NodeFile {
    id: u32,
    #[serde(default)]
    feature: Option<usize>,
    #[serde(default)]
    threshold: Option<f64>,
    #[serde(default)]
    left: Option<u32>,
    #[serde(default)]
    right: Option<u32>,
    #[serde(default)]
    depth: Option<usize>,
    n_samples: usize,
}

/// Parse a model from its serialized form.
pub fn read_model(input: &mut impl Read) -> Result<ForestModel> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::CorruptFile(format!("model JSON: {e}")))?;
    if file.format != MODEL_FORMAT_NAME {
        return Err(Error::CorruptFile(format!("unexpected format tag {:?}", file.format)));
    }
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: file.version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    if file.trees.len() != file.n_trees {
        return Err(Error::CorruptFile(format!(
            "header declares {} trees, file holds {}",
            file.n_trees,
            file.trees.len()
        )));
    }
    let mut trees = Vec::with_capacity(file.trees.len());
    for (t, tree_file) in file.trees.into_iter().enumerate() {
        let mut nodes = Vec::with_capacity(tree_file.nodes.len());
        for (pos, node) in tree_file.nodes.into_iter().enumerate() {
            if node.id as usize != pos {
                return Err(Error::CorruptFile(format!(
                    "tree {t}: node id {} out of order at position {pos}",
                    node.id
                )));
            }
            let parsed = match node {
                NodeFile {
                    feature: Some(feature),
                    threshold: Some(threshold),
                    left: Some(left),
                    right: Some(right),
                    n_samples,
                    ..
                } => Node::Internal { feature, threshold, left, right, n_samples },
                NodeFile { depth: Some(depth), n_samples, feature: None, .. } => {
                    Node::Leaf { depth, n_samples }
                }
                _ => {
                    return Err(Error::CorruptFile(format!(
                        "tree {t}: node {pos} is neither a complete internal node nor a leaf"
                    )))
                }
            };
            nodes.push(parsed);
        }
        trees.push(
            IsolationTree::from_parts(nodes, tree_file.in_bag)
                .map_err(|e| Error::CorruptFile(format!("tree {t}: {e}")))?,
        );
    }
    ForestModel::from_parts(
        trees,
        file.psi,
        file.threshold,
        file.score_threshold,
        file.rng_seed,
        file.feature_names,
    )
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ForestModel> {
    let mut reader = BufReader::new(File::open(path)?);
    read_model(&mut reader)
}

// ---------------------------------------------------------------------------
// Importance / selection reports
// ---------------------------------------------------------------------------

/// Row of an exported importance report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub feature: String,
    pub score: f64,
    pub rank: usize,
    pub c_i: u64,
    pub c_o: u64,
    pub i_i: f64,
    pub i_o: f64,
}

fn report_rows(report: &ImportanceReport) -> Vec<ReportRow> {
    let ranks = crate::diffi::ranking_to_ranks(&report.ranking());
    (0..report.scores.len())
        .map(|j| ReportRow {
            feature: report.feature_names[j].clone(),
            score: report.scores[j],
            rank: ranks[j],
            c_i: report.counters.inlier[j],
            c_o: report.counters.outlier[j],
            i_i: report.cumulative.inlier[j],
            i_o: report.cumulative.outlier[j],
        })
        .collect()
}

/// Export a report as CSV: feature, score, rank, C_I, C_O, I_I, I_O.
pub fn write_report_csv(report: &ImportanceReport, out: &mut impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["feature", "score", "rank", "c_i", "c_o", "i_i", "i_o"])?;
    for row in report_rows(report) {
        writer.write_record(&[
            row.feature,
            row.score.to_string(),
            row.rank.to_string(),
            row.c_i.to_string(),
            row.c_o.to_string(),
            row.i_i.to_string(),
            row.i_o.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    kind: ImportanceKind,
    inlier_warning: bool,
    features: Vec<ReportRow>,
}

/// Export a report as JSON with the same fields as the CSV form.
pub fn write_report_json(report: &ImportanceReport, out: &mut impl Write) -> Result<()> {
    let doc = ReportJson {
        kind: report.kind,
        inlier_warning: report.inlier_warning,
        features: report_rows(report),
    };
    serde_json::to_writer_pretty(&mut *out, &doc)
        .map_err(|e| Error::CorruptFile(format!("report JSON: {e}")))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Export selection results as CSV: feature, S_agg, final rank.
pub fn write_selection_csv(
    feature_names: &[String],
    order: &[usize],
    scores: &AggregatedScores,
    out: &mut impl Write,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["feature", "s_agg", "rank"])?;
    let ranks = crate::diffi::ranking_to_ranks(order);
    for (j, name) in feature_names.iter().enumerate() {
        writer.write_record(&[
            name.clone(),
            scores.s_agg[j].to_string(),
            ranks[j].to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Export the per-run rank matrix as CSV for audit: one row per run.
pub fn write_rank_matrix_csv(
    feature_names: &[String],
    scores: &AggregatedScores,
    out: &mut impl Write,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["run".to_string()];
    header.extend(feature_names.iter().cloned());
    writer.write_record(&header)?;
    for (i, row) in scores.per_run_ranks.iter().enumerate() {
        let mut record = vec![i.to_string()];
        record.extend(row.iter().map(usize::to_string));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Glass preset
// ---------------------------------------------------------------------------

/// UCI glass feature names, in file order after the Id column.
pub const GLASS_FEATURE_NAMES: [&str; 9] =
    ["RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe"];

/// Load the UCI Glass Identification CSV as a binary anomaly dataset:
/// window-glass classes 1-4 become inliers, non-window classes 5-7
/// become outliers. Accepts the raw file with or without the leading Id
/// column or a header row, drops exact duplicate rows, and returns the
/// original class of every kept row alongside the remapped dataset.
pub fn load_glass_csv(path: impl AsRef<Path>) -> Result<(LabeledDataset, Vec<u32>)> {
    let path = path.as_ref();
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(false).from_path(path)?;

    let mut rows: Vec<(Vec<f64>, u32)> = Vec::new();
    let mut line = 0usize;
    for record in reader.records() {
        let record = record?;
        line += 1;
        if line == 1 && record.iter().any(|f| f.trim().parse::<f64>().is_err()) {
            continue; // header row
        }
        let fields: Vec<&str> = record.iter().collect();
        let (feature_fields, class_field) = match fields.len() {
            11 => (&fields[1..10], fields[10]), // Id, 9 features, class
            10 => (&fields[..9], fields[9]),    // 9 features, class
            other => {
                return Err(Error::InvalidData(format!(
                    "row {line} has {other} fields; expected 10 or 11"
                )))
            }
        };
        let mut features = Vec::with_capacity(9);
        for (k, field) in feature_fields.iter().enumerate() {
            features.push(parse_cell(field, line, k + 1, GLASS_FEATURE_NAMES[k])?);
        }
        let class = parse_cell(class_field, line, fields.len(), "class")? as u32;
        if !(1..=7).contains(&class) {
            return Err(Error::InvalidData(format!(
                "row {line}: glass class must lie in 1..7, got {class}"
            )));
        }
        rows.push((features, class));
    }

    // The published file carries one exact duplicate row; keep first occurrences.
    let mut seen: Vec<&(Vec<f64>, u32)> = Vec::new();
    let mut kept: Vec<(Vec<f64>, u32)> = Vec::new();
    for row in &rows {
        let duplicate = seen.iter().any(|other| {
            other.1 == row.1
                && other.0.iter().zip(&row.0).all(|(a, b)| a.to_bits() == b.to_bits())
        });
        if !duplicate {
            seen.push(row);
            kept.push(row.clone());
        }
    }

    let n = kept.len();
    let mut values = Vec::with_capacity(n * 9);
    let mut labels = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    for (features, class) in kept {
        values.extend_from_slice(&features);
        labels.push(u8::from(class >= 5));
        classes.push(class);
    }
    let names = GLASS_FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let data = DataMatrix::new(n, 9, values, names)?;
    let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok((LabeledDataset { data, labels: Some(labels), name }, classes))
}
