use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use eyefresh_core::classify::{self, evaluate, matrix_from_rows, ModelArtifact, ModelKind};
use eyefresh_core::dataset::{
    self, read_feature_matrix, read_split_manifest, write_feature_matrix, write_split_manifest,
    ClassLayout, Dataset, FeatureMatrix, FeatureRow, FreshnessLabel, LabeledSample, Split,
};
use eyefresh_core::fusion::{
    extract_timed, registry_with, ExtractOptions, Family, FamilyTimings, FeatureSetId,
    FeatureSetSpec,
};
use eyefresh_core::segmentation::{segment, SegmentationRecord};
use eyefresh_core::{synthetic, Error, RasterImage};
use rayon::prelude::*;
use serde::Serialize;
use walkdir::WalkDir;

use crate::config::{Resize, RunConfig};
use crate::{Cli, Command, DatasetArgs};

/// Too many images failed segmentation; outputs were still written.
#[derive(Debug)]
pub struct FailureRateExceeded {
    pub failed: usize,
    pub total: usize,
    pub threshold: f64,
}

impl fmt::Display for FailureRateExceeded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "segmentation failed for {} of {} images, above the {:.0}% threshold",
            self.failed,
            self.total,
            100.0 * self.threshold
        )
    }
}

impl std::error::Error for FailureRateExceeded {}

fn check_failure_rate(failed: usize, total: usize, threshold: f64) -> Result<()> {
    if total > 0 && failed as f64 / total as f64 > threshold {
        return Err(FailureRateExceeded {
            failed,
            total,
            threshold,
        }
        .into());
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()).into());
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("cannot start worker threads")?;
    pool.install(|| match cli.command {
        Command::Split { root, out, dataset } => {
            apply_dataset_args(&mut cfg, &dataset);
            cmd_split(&cfg, &root, &out)
        }
        Command::Segment { input, out, resize } => {
            if let Some(r) = resize {
                cfg.resize = Some(r.parse()?);
            }
            cmd_segment(&cfg, &input, &out)
        }
        Command::Extract {
            root,
            out,
            split,
            feature_set,
            segmented,
            resize,
            timing,
            dataset,
        } => {
            apply_dataset_args(&mut cfg, &dataset);
            if let Some(fs) = feature_set {
                cfg.feature_set = fs.parse()?;
            }
            cfg.segmented |= segmented;
            if let Some(r) = resize {
                cfg.resize = Some(r.parse()?);
            }
            cmd_extract(&cfg, &root, &out, split.as_deref(), timing)
        }
        Command::Train {
            train,
            model,
            params,
            seed,
            out,
        } => {
            let artifact = fit_from_csv(&mut cfg, &train, model, &params, seed)?;
            artifact.save(&out)?;
            print_json(&TrainSummary {
                model: artifact.kind(),
                feature_set: artifact.feature_set_id,
                n_features: artifact.n_features,
                n_classes: artifact.n_classes,
                seed: artifact.train_seed,
                output: out,
            })
        }
        Command::Eval {
            test,
            model_file,
            train,
            model,
            params,
            seed,
            out,
        } => {
            let artifact = match (model_file, train) {
                (Some(path), _) => ModelArtifact::load(&path)?,
                (None, Some(train)) => fit_from_csv(&mut cfg, &train, model, &params, seed)?,
                (None, None) => {
                    return Err(Error::Config(
                        "eval needs --model-file, or --train with --model".into(),
                    )
                    .into())
                }
            };
            cmd_eval(&artifact, &test, out.as_deref())
        }
        Command::FuseInfo { feature_set } => cmd_fuse_info(&cfg, feature_set.as_deref()),
        Command::Synth {
            out,
            per_class,
            size,
            seed,
        } => {
            let paths = synthetic::write_dataset(&out, per_class, size, seed)?;
            eprintln!("wrote {} images under {}", paths.len(), out.display());
            Ok(())
        }
    })
}

fn apply_dataset_args(cfg: &mut RunConfig, args: &DatasetArgs) {
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(f) = args.test_frac {
        cfg.test_frac = f;
    }
    if let Some(f) = args.val_frac {
        cfg.val_frac = f;
    }
    if let Some(l) = &args.layout {
        cfg.layout = Some(l.clone());
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) ends the process quietly.
fn print_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        r => r.context("cannot write to stdout"),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    print_stdout(&serde_json::to_string_pretty(value)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
        .map_err(Into::into)
}

fn load_dataset(cfg: &RunConfig, root: &Path) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "dataset root is not a readable directory",
            ),
        }
        .into());
    }
    let layout = match &cfg.layout {
        Some(p) => ClassLayout::from_json_file(p)?,
        None => ClassLayout::default(),
    };
    let ds = dataset::ingest(root, &layout)?;
    for (path, why) in &ds.rejected {
        eprintln!("warning: skipped {}: {why}", path.display());
    }
    Ok(ds)
}

#[derive(Serialize)]
struct SplitSummary {
    manifest: PathBuf,
    seed: u64,
    counts: BTreeMap<Split, BTreeMap<FreshnessLabel, usize>>,
}

fn split_counts(ds: &Dataset) -> BTreeMap<Split, BTreeMap<FreshnessLabel, usize>> {
    let mut counts: BTreeMap<Split, BTreeMap<FreshnessLabel, usize>> = BTreeMap::new();
    for s in &ds.samples {
        *counts
            .entry(s.split)
            .or_default()
            .entry(s.label)
            .or_default() += 1;
    }
    counts
}

fn cmd_split(cfg: &RunConfig, root: &Path, out: &Path) -> Result<()> {
    let ds = load_dataset(cfg, root)?;
    let ds = dataset::stratified_split(&ds, cfg.test_frac, cfg.val_frac, cfg.seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_split_manifest(&ds, out)?;
    print_json(&SplitSummary {
        manifest: out.to_path_buf(),
        seed: cfg.seed,
        counts: split_counts(&ds),
    })
}

fn load_image(cfg: &RunConfig, path: &Path) -> eyefresh_core::Result<RasterImage> {
    let img = RasterImage::open(path)?;
    match cfg.resize {
        Some(Resize { width, height }) => img.resized(width, height),
        None => Ok(img),
    }
}

fn is_image(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| {
        matches!(
            e.to_ascii_lowercase().as_str(),
            "png" | "jpg" | "jpeg" | "bmp"
        )
    })
}

fn cmd_segment(cfg: &RunConfig, input: &Path, out: &Path) -> Result<()> {
    let inputs: Vec<(PathBuf, PathBuf)> = if input.is_dir() {
        let mut found: Vec<PathBuf> = WalkDir::new(input)
            .into_iter()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_file() && is_image(e.path()))
            .map(|e| e.into_path())
            .collect();
        found.sort();
        found
            .into_iter()
            .map(|p| {
                let rel = p
                    .strip_prefix(input)
                    .expect("walked under input")
                    .to_path_buf();
                (p, rel)
            })
            .collect()
    } else if input.is_file() {
        let name = input
            .file_name()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("image"));
        vec![(input.to_path_buf(), name)]
    } else {
        return Err(Error::Io {
            path: input.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such image or folder"),
        }
        .into());
    };
    create_dir(out)?;
    let results: Vec<std::result::Result<(), String>> = inputs
        .par_iter()
        .map(|(src, rel)| {
            let img = load_image(cfg, src).map_err(|e| e.to_string())?;
            let seg = segment(&img, &cfg.segmentation).map_err(|e| e.to_string())?;
            let png = out.join(rel).with_extension("png");
            if let Some(dir) = png.parent() {
                std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
            }
            seg.masked.save_png(&png).map_err(|e| e.to_string())?;
            let record = SegmentationRecord::from(&seg);
            let text = serde_json::to_string_pretty(&record).map_err(|e| e.to_string())? + "\n";
            std::fs::write(png.with_extension("json"), text).map_err(|e| e.to_string())
        })
        .collect();
    let mut failed = 0;
    for ((src, _), r) in inputs.iter().zip(&results) {
        if let Err(e) = r {
            eprintln!("warning: {}: {e}", src.display());
            failed += 1;
        }
    }
    eprintln!(
        "segmented {} of {} images into {}",
        inputs.len() - failed,
        inputs.len(),
        out.display()
    );
    check_failure_rate(failed, inputs.len(), cfg.max_segmentation_failure_rate)
}

#[derive(Serialize)]
struct Failure {
    sample_id: String,
    error: String,
}

#[derive(Serialize, Default)]
struct TimingReport {
    images: usize,
    color_conversion_s: f64,
    per_family_s: BTreeMap<Family, f64>,
}

impl TimingReport {
    fn new(images: usize, t: &FamilyTimings) -> Self {
        Self {
            images,
            color_conversion_s: t.conversion.as_secs_f64(),
            per_family_s: t
                .per_family
                .iter()
                .map(|(f, d)| (*f, d.as_secs_f64()))
                .collect(),
        }
    }

    fn table(&self) -> String {
        let total: f64 = self.color_conversion_s + self.per_family_s.values().sum::<f64>();
        let mut out = format!("{:<18}{:>12}{:>8}\n", "family", "seconds", "share");
        let row = |name: &str, s: f64| {
            format!(
                "{name:<18}{s:>12.4}{:>7.1}%\n",
                100.0 * s / total.max(f64::MIN_POSITIVE)
            )
        };
        out += &row("color conversion", self.color_conversion_s);
        for (f, s) in &self.per_family_s {
            out += &row(f.label(), *s);
        }
        out += &format!("{:<18}{total:>12.4}\n", "total");
        out
    }
}

#[derive(Serialize)]
struct ExtractManifest {
    tool: &'static str,
    version: &'static str,
    config_hash: String,
    config: RunConfig,
    seed: u64,
    feature_set: FeatureSetId,
    n_columns: usize,
    /// Sample ids per split, in CSV row order.
    rows: BTreeMap<Split, Vec<String>>,
    segmentation_failures: Vec<Failure>,
    extraction_failures: Vec<Failure>,
    rejected_files: Vec<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<TimingReport>,
}

enum Outcome {
    Row(Box<FeatureRow>, FamilyTimings),
    SegmentationFailed(String),
    ExtractionFailed(String),
}

fn extract_sample(cfg: &RunConfig, spec: &FeatureSetSpec, sample: &LabeledSample) -> Outcome {
    let img = match load_image(cfg, &sample.image_path) {
        Ok(img) => img,
        Err(e) => return Outcome::ExtractionFailed(e.to_string()),
    };
    let mask = if cfg.segmented {
        match segment(&img, &cfg.segmentation) {
            Ok(s) => Some(s.mask),
            Err(e) => return Outcome::SegmentationFailed(e.to_string()),
        }
    } else {
        None
    };
    match extract_timed(&img, spec, mask.as_ref(), &cfg.extraction) {
        Ok((features, timings)) => Outcome::Row(
            Box::new(FeatureRow {
                sample_id: sample.id.clone(),
                features,
                label: sample.label,
            }),
            timings,
        ),
        Err(e) => Outcome::ExtractionFailed(e.to_string()),
    }
}

fn cmd_extract(
    cfg: &RunConfig,
    root: &Path,
    out: &Path,
    split: Option<&Path>,
    timing: bool,
) -> Result<()> {
    let spec = registry_with(cfg.histogram_base)
        .remove(&cfg.feature_set)
        .expect("registry covers every id");
    let ds = load_dataset(cfg, root)?;
    let ds = match split {
        Some(path) => {
            let mut ds = ds;
            ds.apply_manifest(&read_split_manifest(path)?)?;
            ds
        }
        None => dataset::stratified_split(&ds, cfg.test_frac, cfg.val_frac, cfg.seed)?,
    };
    create_dir(out)?;

    let outcomes: Vec<Outcome> = ds
        .samples
        .par_iter()
        .map(|s| extract_sample(cfg, &spec, s))
        .collect();

    let columns = spec.column_names(&cfg.extraction);
    let mut per_split: BTreeMap<Split, Vec<FeatureRow>> = BTreeMap::new();
    let mut seg_failures = Vec::new();
    let mut ext_failures = Vec::new();
    let mut total_timing = FamilyTimings::default();
    for (sample, outcome) in ds.samples.iter().zip(outcomes) {
        match outcome {
            Outcome::Row(row, t) => {
                total_timing.add(&t);
                per_split.entry(sample.split).or_default().push(*row);
            }
            Outcome::SegmentationFailed(error) => seg_failures.push(Failure {
                sample_id: sample.id.clone(),
                error,
            }),
            Outcome::ExtractionFailed(error) => ext_failures.push(Failure {
                sample_id: sample.id.clone(),
                error,
            }),
        }
    }
    for s in [Split::Train, Split::Val, Split::Test] {
        let rows = per_split.get(&s).map(Vec::as_slice).unwrap_or_default();
        write_feature_matrix(&out.join(format!("{}.csv", split_name(s))), &columns, rows)?;
    }
    let timing_report = timing.then(|| {
        let n = per_split.values().map(Vec::len).sum();
        TimingReport::new(n, &total_timing)
    });
    if let Some(t) = &timing_report {
        eprint!("{}", t.table());
    }
    let manifest = ExtractManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        seed: cfg.seed,
        feature_set: spec.id,
        n_columns: columns.len(),
        rows: per_split
            .iter()
            .map(|(s, rows)| (*s, rows.iter().map(|r| r.sample_id.clone()).collect()))
            .collect(),
        segmentation_failures: seg_failures,
        extraction_failures: ext_failures,
        rejected_files: ds
            .rejected
            .iter()
            .map(|(p, e)| Failure {
                sample_id: p.display().to_string(),
                error: e.clone(),
            })
            .collect(),
        timing: timing_report,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    let written: usize = per_split.values().map(Vec::len).sum();
    eprintln!(
        "{}: wrote {written} rows x {} columns to {}",
        spec.id,
        columns.len(),
        out.display()
    );
    if cfg.segmented {
        check_failure_rate(
            manifest.segmentation_failures.len(),
            ds.samples.len(),
            cfg.max_segmentation_failure_rate,
        )?;
    }
    Ok(())
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
        Split::Unassigned => "unassigned",
    }
}

fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    let m = read_feature_matrix(path)?;
    if m.n_rows() == 0 {
        return Err(Error::Dataset(format!("{} has no rows", path.display())).into());
    }
    Ok(m)
}

/// The registry set whose default column names match `columns`, if any.
fn identify_feature_set(cfg: &RunConfig, columns: &[String]) -> Option<FeatureSetId> {
    let options = ExtractOptions::default();
    registry_with(cfg.histogram_base)
        .into_values()
        .find(|spec| spec.column_names(&options) == columns)
        .map(|spec| spec.id)
}

fn fit_from_csv(
    cfg: &mut RunConfig,
    train: &Path,
    model: Option<String>,
    params: &[String],
    seed: Option<u64>,
) -> Result<ModelArtifact> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let name = model.or_else(|| cfg.model.clone()).ok_or_else(|| {
        Error::Config("no model given: pass --model or set \"model\" in the config".into())
    })?;
    let kind: ModelKind = name.parse()?;
    let overrides = cfg.overrides(params)?;
    let m = read_matrix(train)?;
    let x = matrix_from_rows(&m.rows, m.columns.len())?;
    let mut artifact = classify::train(kind, &overrides, &x, &m.label_indices(), cfg.seed)?;
    artifact.feature_set_id = identify_feature_set(cfg, &m.columns);
    Ok(artifact)
}

#[derive(Serialize)]
struct TrainSummary {
    model: ModelKind,
    feature_set: Option<FeatureSetId>,
    n_features: usize,
    n_classes: usize,
    seed: u64,
    output: PathBuf,
}

#[derive(Serialize)]
struct EvalOutput {
    model: ModelKind,
    feature_set: Option<FeatureSetId>,
    n_test: usize,
    #[serde(flatten)]
    report: classify::EvalReport,
}

fn cmd_eval(artifact: &ModelArtifact, test: &Path, out: Option<&Path>) -> Result<()> {
    let m = read_matrix(test)?;
    let x = matrix_from_rows(&m.rows, m.columns.len())?;
    let pred = artifact.predict(&x)?;
    let n_classes = artifact.n_classes.max(FreshnessLabel::ALL.len());
    let report = evaluate(&m.label_indices(), &pred, n_classes)?;
    let output = EvalOutput {
        model: artifact.kind(),
        feature_set: artifact.feature_set_id,
        n_test: m.n_rows(),
        report,
    };
    print_json(&output)?;
    let names: Vec<&str> = FreshnessLabel::ALL.iter().map(|l| l.dir_name()).collect();
    print_stdout(&output.report.confusion_table(&names))?;
    if let Some(path) = out {
        write_json(path, &output)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FeatureSetInfo {
    id: FeatureSetId,
    dimensionality: usize,
    blocks: Vec<String>,
    columns: Vec<String>,
}

fn cmd_fuse_info(cfg: &RunConfig, which: Option<&str>) -> Result<()> {
    let registry = registry_with(cfg.histogram_base);
    let info = |spec: &FeatureSetSpec| {
        let columns = spec.column_names(&cfg.extraction);
        FeatureSetInfo {
            id: spec.id,
            dimensionality: columns.len(),
            blocks: spec
                .components
                .iter()
                .map(|c| match c.space {
                    Some(space) => format!("{}({})", c.family.label(), space.tag()),
                    None => c.family.label().to_string(),
                })
                .collect(),
            columns,
        }
    };
    match which {
        Some(id) => {
            let id: FeatureSetId = id.parse()?;
            print_json(&info(&registry[&id]))
        }
        None => print_json(&registry.values().map(info).collect::<Vec<_>>()),
    }
}
