//! Command-line front end binding the library into reproducible
//! experiment pipelines.

mod commands;
mod repro;
mod support;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use support::ThresholdSpec;

#[derive(Parser)]
#[command(
    name = "diffi",
    version,
    about = "Isolation Forest anomaly detection with depth-based feature importance",
    propagate_version = true
)]
struct Cli {
    /// Cap the worker thread count (default: DIFFI_THREADS env var, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Input dataset (CSV; header row optional).
    #[arg(long)]
    input: PathBuf,

    /// Name of the 0/1 label column, when the dataset has one.
    #[arg(long)]
    label_column: Option<String>,

    /// Field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: char,
}

#[derive(Args, Clone)]
struct ForestArgs {
    /// Subsample size per tree.
    #[arg(long, default_value_t = 256)]
    psi: usize,

    /// Number of trees.
    #[arg(long, default_value_t = 100)]
    trees: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Label threshold: a score cut like `0.5` / `fixed:0.5`, or
    /// `quantile:0.1` for the top 10% of training scores.
    #[arg(long, default_value = "fixed:0.5")]
    threshold: ThresholdSpec,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum EmitFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Train an Isolation Forest and save the model.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        forest: ForestArgs,
        /// Output model file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a dataset with a saved model.
    Score {
        /// Saved model file.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = EmitFormat::Csv)]
        format: EmitFormat,
    },
    /// Global feature importances of a model over its training set.
    Gfi {
        #[arg(long)]
        model: PathBuf,
        /// The training dataset the model was fitted on.
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = EmitFormat::Csv)]
        format: EmitFormat,
    },
    /// Local feature importances for each row of a dataset.
    Lfi {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = EmitFormat::Csv)]
        format: EmitFormat,
    },
    /// Feature selection by aggregating importance rankings across runs.
    Fselect {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        forest: ForestArgs,
        /// Number of independently seeded runs to aggregate.
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Evaluate median F1 on the top-k subsets for these k values
        /// (e.g. `1,2,3` or `1..5`); requires --label-column.
        #[arg(long, visible_alias = "k")]
        k_values: Option<String>,
        /// Forests per k value for the F1 table.
        #[arg(long, default_value_t = 30)]
        repeats: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic benchmark dataset.
    Synth {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Fraction of anomalous rows.
        #[arg(long, default_value_t = 0.10)]
        anomalies: f64,
        #[arg(long, default_value_t = 4)]
        p_noise: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset CSV.
        #[arg(long)]
        out: PathBuf,
        /// Also write crafted test outliers (x-axis, y-axis, bisector) here.
        #[arg(long)]
        test_outliers: Option<PathBuf>,
        /// Crafted outliers per family.
        #[arg(long, default_value_t = 100)]
        count_per_family: usize,
    },
    /// Times-in-top-K counts over a file of rankings.
    EvalTtk {
        /// CSV of rankings, one per row, most important feature first
        /// (1-based indices or f-names).
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long)]
        k: usize,
        /// Output JSON file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ordered EMD between ground-truth and estimated importances.
    EvalEmd {
        /// Comma-separated ground-truth importances.
        #[arg(long)]
        ground_truth: String,
        /// Comma-separated estimated importances.
        #[arg(long)]
        estimated: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// End-to-end synthetic experiment: generate, fit, predict, local
    /// importance on crafted outliers, accuracy table.
    ReproSynthetic {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.10)]
        anomalies: f64,
        #[arg(long, default_value_t = 4)]
        p_noise: usize,
        #[arg(long, default_value_t = 100)]
        count_per_family: usize,
        #[arg(long, default_value_t = 256)]
        psi: usize,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Threshold rule; defaults to the generator's contamination.
        #[arg(long)]
        threshold: Option<ThresholdSpec>,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Glass benchmark: window classes train as inliers, class-7 rows
    /// held out; detection and Ba/Al importance report.
    ReproGlass {
        /// Glass CSV (UCI format, with or without the Id column).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 64)]
        psi: usize,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Threshold rule; defaults to the training contamination.
        #[arg(long)]
        threshold: Option<ThresholdSpec>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    support::init_threads(cli.threads);
    let outcome = match cli.command {
        Command::Fit { input, forest, out } => commands::fit(&input, &forest, &out),
        Command::Score { model, input, out, format } => {
            commands::score(&model, &input, &out, format)
        }
        Command::Gfi { model, input, out, format } => commands::gfi(&model, &input, &out, format),
        Command::Lfi { model, input, out, format } => commands::lfi(&model, &input, &out, format),
        Command::Fselect { input, forest, runs, k_values, repeats, out } => {
            commands::fselect(&input, &forest, runs, k_values.as_deref(), repeats, &out)
        }
        Command::Synth { n, anomalies, p_noise, seed, out, test_outliers, count_per_family } => {
            commands::synth(n, anomalies, p_noise, seed, &out, test_outliers.as_deref(), count_per_family)
        }
        Command::EvalTtk { rankings, k, out } => commands::eval_ttk(&rankings, k, out.as_deref()),
        Command::EvalEmd { ground_truth, estimated, out } => {
            commands::eval_emd(&ground_truth, &estimated, out.as_deref())
        }
        Command::ReproSynthetic {
            n,
            anomalies,
            p_noise,
            count_per_family,
            psi,
            trees,
            seed,
            threshold,
            out,
        } => repro::synthetic(n, anomalies, p_noise, count_per_family, psi, trees, seed, threshold, &out),
        Command::ReproGlass { input, psi, trees, seed, threshold, out } => {
            repro::glass(&input, psi, trees, seed, threshold, &out)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            // Argument-class problems exit 2, runtime problems exit 1.
            match err {
                diffi::Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
