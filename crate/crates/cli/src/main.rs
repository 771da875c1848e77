//! `eyefresh`: batch front end for splitting, segmenting, extracting,
//! training and evaluating.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 segmentation failure rate above the configured threshold.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eyefresh_core::Error;

use crate::commands::FailureRateExceeded;

#[derive(Parser, Debug)]
#[command(
    name = "eyefresh",
    version,
    about = "Fish-eye freshness features and classifiers"
)]
struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true, env = "EYEFRESH_CONFIG")]
    config: Option<PathBuf>,

    /// Worker threads for image-level parallelism (default: all cores).
    #[arg(long, global = true, env = "EYEFRESH_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by commands that read a raw image dataset.
#[derive(Args, Debug, Clone, Default)]
struct DatasetArgs {
    /// Seed for the stratified split.
    #[arg(long, env = "EYEFRESH_SEED")]
    seed: Option<u64>,

    /// Fraction of every class assigned to the test split.
    #[arg(long)]
    test_frac: Option<f64>,

    /// Fraction of the remaining samples assigned to validation.
    #[arg(long)]
    val_frac: Option<f64>,

    /// JSON file mapping classes to directories under the root.
    #[arg(long)]
    layout: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assign every image under ROOT to train/val/test and write the split manifest.
    Split {
        root: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        dataset: DatasetArgs,
    },
    /// Segment the eye region of an image (or every image under a folder).
    Segment {
        input: PathBuf,
        /// Output folder for masked PNGs and their JSON sidecars.
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, env = "EYEFRESH_RESIZE")]
        resize: Option<String>,
    },
    /// Extract one feature set for every image and write per-split CSVs plus a manifest.
    Extract {
        root: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Existing split manifest; without it the split is computed from the seed.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, env = "EYEFRESH_FEATURE_SET")]
        feature_set: Option<String>,
        /// Restrict descriptors to the segmented eye disc.
        #[arg(long, env = "EYEFRESH_SEGMENTED")]
        segmented: bool,
        /// Resize every image to WxH before processing.
        #[arg(long, env = "EYEFRESH_RESIZE")]
        resize: Option<String>,
        /// Record and print wall-clock time per descriptor family.
        #[arg(long, env = "EYEFRESH_TIMING")]
        timing: bool,
        #[command(flatten)]
        dataset: DatasetArgs,
    },
    /// Fit a model on a feature CSV and save it as JSON.
    Train {
        /// Training CSV written by `extract`.
        #[arg(long)]
        train: PathBuf,
        /// knn, lr, mlp, rf or et.
        #[arg(long, env = "EYEFRESH_MODEL")]
        model: Option<String>,
        /// Hyperparameter override, repeatable: --param k=5
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long, env = "EYEFRESH_SEED")]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score a model on a feature CSV; prints a JSON report and the confusion matrix.
    Eval {
        /// Test CSV written by `extract`.
        #[arg(long)]
        test: PathBuf,
        /// Saved model from `train`.
        #[arg(long, conflicts_with_all = ["train", "model"])]
        model_file: Option<PathBuf>,
        /// Train on this CSV first instead of loading a model.
        #[arg(long, requires = "model")]
        train: Option<PathBuf>,
        #[arg(long, env = "EYEFRESH_MODEL")]
        model: Option<String>,
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long, env = "EYEFRESH_SEED")]
        seed: Option<u64>,
        /// Also write the JSON report here.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the columns and dimensionality of feature sets as JSON.
    FuseInfo {
        /// FS1..FS17; all sets when omitted.
        feature_set: Option<String>,
    },
    /// Write a seeded synthetic three-class dataset of eye images.
    Synth {
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, env = "EYEFRESH_SEED", default_value_t = 42)]
        seed: u64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<FailureRateExceeded>().is_some() {
        return 4;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Argument(_) | Error::UnsupportedModel(_)) => 2,
        Some(Error::Segmentation(_)) => 4,
        Some(_) => 3,
        None => 1,
    }
}

/// Joins the cause chain, skipping causes already spelled out by their parent.
fn render_chain(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    let mut last = out.clone();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !last.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
        last = text;
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", render_chain(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
