//! Labelled image folders, stratified splits and feature-matrix CSV files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fusion::FeatureVector;
use crate::raster::RasterImage;
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;

const IMAGE_EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "bmp"];

/// Freshness grade; the integer encoding is `0, 1, 2` in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FreshnessLabel {
    HighlyFresh,
    Fresh,
    NotFresh,
}

impl FreshnessLabel {
    pub const ALL: [FreshnessLabel; 3] = [
        FreshnessLabel::HighlyFresh,
        FreshnessLabel::Fresh,
        FreshnessLabel::NotFresh,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Argument(format!("label index {i} out of range 0..3")))
    }

    /// Default directory name for this class.
    pub fn dir_name(self) -> &'static str {
        match self {
            FreshnessLabel::HighlyFresh => "highly_fresh",
            FreshnessLabel::Fresh => "fresh",
            FreshnessLabel::NotFresh => "not_fresh",
        }
    }
}

impl fmt::Display for FreshnessLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for FreshnessLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "highlyfresh" | "0" => Ok(FreshnessLabel::HighlyFresh),
            "fresh" | "1" => Ok(FreshnessLabel::Fresh),
            "notfresh" | "2" => Ok(FreshnessLabel::NotFresh),
            _ => Err(Error::Argument(format!("unknown freshness label '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    /// Path relative to the dataset root with `/` separators.
    pub id: String,
    pub image_path: PathBuf,
    pub label: FreshnessLabel,
    pub split: Split,
}

/// Which directories under the root hold each class.
///
/// Every listed directory is searched recursively, so species
/// sub-folders are flattened into their freshness class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLayout {
    pub classes: BTreeMap<FreshnessLabel, Vec<String>>,
}

impl Default for ClassLayout {
    fn default() -> Self {
        Self {
            classes: FreshnessLabel::ALL
                .iter()
                .map(|l| (*l, vec![l.dir_name().to_string()]))
                .collect(),
        }
    }
}

impl ClassLayout {
    /// Reads a layout such as `{"classes": {"HighlyFresh": ["Highly Fresh"], ...}}`.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let layout: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad layout file {}: {e}", path.display())))?;
        for label in FreshnessLabel::ALL {
            if layout.classes.get(&label).is_none_or(|d| d.is_empty()) {
                return Err(Error::Config(format!(
                    "layout has no directory for class {label}"
                )));
            }
        }
        Ok(layout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub root: PathBuf,
    pub samples: Vec<LabeledSample>,
    pub class_counts: BTreeMap<FreshnessLabel, usize>,
    pub seed: u64,
    /// Files with an image extension that failed to decode.
    pub rejected: Vec<(PathBuf, String)>,
}

impl Dataset {
    /// Builds a dataset from explicit samples (all unassigned).
    pub fn from_samples(root: PathBuf, samples: Vec<LabeledSample>) -> Self {
        let mut class_counts: BTreeMap<FreshnessLabel, usize> =
            FreshnessLabel::ALL.iter().map(|l| (*l, 0)).collect();
        for s in &samples {
            *class_counts.entry(s.label).or_default() += 1;
        }
        Self {
            root,
            samples,
            class_counts,
            seed: DEFAULT_SEED,
            rejected: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &LabeledSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// `{sample_id: split}` manifest.
    pub fn split_manifest(&self) -> BTreeMap<String, Split> {
        self.samples
            .iter()
            .map(|s| (s.id.clone(), s.split))
            .collect()
    }

    /// Applies a manifest produced by [`Dataset::split_manifest`].
    pub fn apply_manifest(&mut self, manifest: &BTreeMap<String, Split>) -> Result<()> {
        for s in &mut self.samples {
            s.split = *manifest.get(&s.id).ok_or_else(|| {
                Error::Dataset(format!("sample '{}' missing from split manifest", s.id))
            })?;
        }
        Ok(())
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn sample_id(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Registers every image under the class directories of `root`.
///
/// Samples are ordered by path. Files that fail to decode are listed in
/// [`Dataset::rejected`].
pub fn ingest(root: &Path, layout: &ClassLayout) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "dataset root is not a directory",
            ),
        ));
    }
    let mut candidates: Vec<(PathBuf, FreshnessLabel)> = Vec::new();
    for label in FreshnessLabel::ALL {
        let dirs = layout
            .classes
            .get(&label)
            .ok_or_else(|| Error::Config(format!("no directory configured for class {label}")))?;
        for dir in dirs {
            let class_dir = root.join(dir);
            if !class_dir.is_dir() {
                return Err(Error::Config(format!(
                    "missing class directory {} for {label}",
                    class_dir.display()
                )));
            }
            for entry in walkdir::WalkDir::new(&class_dir).follow_links(true) {
                let entry = entry.map_err(|e| {
                    let path = e
                        .path()
                        .map(Path::to_path_buf)
                        .unwrap_or_else(|| class_dir.clone());
                    Error::io(path, e.into())
                })?;
                if entry.file_type().is_file() && is_image(entry.path()) {
                    candidates.push((entry.into_path(), label));
                }
            }
        }
    }
    candidates.sort();
    candidates.dedup_by(|a, b| a.0 == b.0);

    let decoded: Vec<std::result::Result<(), String>> = candidates
        .par_iter()
        .map(|(path, _)| {
            RasterImage::open(path)
                .map(|_| ())
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut samples = Vec::new();
    let mut rejected = Vec::new();
    for ((path, label), outcome) in candidates.into_iter().zip(decoded) {
        match outcome {
            Ok(()) => samples.push(LabeledSample {
                id: sample_id(root, &path),
                image_path: path,
                label,
                split: Split::Unassigned,
            }),
            Err(msg) => rejected.push((path, msg)),
        }
    }
    let ds = Dataset {
        rejected,
        ..Dataset::from_samples(root.to_path_buf(), samples)
    };
    if let Some((label, _)) = ds.class_counts.iter().find(|(_, c)| **c == 0) {
        return Err(Error::Dataset(format!(
            "class {label} has no decodable images"
        )));
    }
    Ok(ds)
}

fn split_count(n: usize, frac: f64) -> usize {
    // the epsilon keeps exact products such as 10 * 0.2 from flooring down
    ((n as f64 * frac) + 1e-9).floor() as usize
}

/// Stratified train/val/test assignment.
///
/// Per class, the samples are shuffled with a generator seeded by `seed`;
/// `floor(n * test_frac)` go to test and `floor(rest * val_frac)` of the
/// remainder to validation. The result depends only on sample order and seed.
pub fn stratified_split(ds: &Dataset, test_frac: f64, val_frac: f64, seed: u64) -> Result<Dataset> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::Argument(format!(
            "test_frac must be in (0, 1), got {test_frac}"
        )));
    }
    if !(0.0..1.0).contains(&val_frac) {
        return Err(Error::Argument(format!(
            "val_frac must be in [0, 1), got {val_frac}"
        )));
    }
    let mut out = ds.clone();
    out.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for label in FreshnessLabel::ALL {
        let mut idx: Vec<usize> = (0..out.samples.len())
            .filter(|i| out.samples[*i].label == label)
            .collect();
        if idx.is_empty() {
            if ds.samples.is_empty() {
                return Err(Error::Argument("cannot split an empty dataset".into()));
            }
            continue;
        }
        idx.shuffle(&mut rng);
        let n_test = split_count(idx.len(), test_frac);
        let n_val = split_count(idx.len() - n_test, val_frac);
        for (k, i) in idx.into_iter().enumerate() {
            out.samples[i].split = if k < n_test {
                Split::Test
            } else if k < n_test + n_val {
                Split::Val
            } else {
                Split::Train
            };
        }
    }
    Ok(out)
}

pub fn write_split_manifest(ds: &Dataset, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&ds.split_manifest())?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_split_manifest(path: &Path) -> Result<BTreeMap<String, Split>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// One CSV row: a sample's features and label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sample_id: String,
    pub features: FeatureVector,
    pub label: FreshnessLabel,
}

/// A feature matrix as read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<FreshnessLabel>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn label_indices(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.index()).collect()
    }
}

/// Writes the CSV: header is `columns` followed by `label`; labels are
/// encoded `0, 1, 2`. Values use the shortest representation that parses
/// back to the identical `f64`.
pub fn write_feature_csv<W: Write>(
    writer: W,
    columns: &[String],
    rows: &[FeatureRow],
) -> Result<()> {
    if let Some(first) = rows.first() {
        let set = first.features.set_id;
        for r in rows {
            if r.features.set_id != set || r.features.names != columns {
                return Err(Error::Schema(format!(
                    "row '{}' ({}) does not match the {}-column schema of {set}",
                    r.sample_id,
                    r.features.set_id,
                    columns.len()
                )));
            }
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(columns.iter().map(String::as_str).chain(["label"]))?;
    let mut record: Vec<String> = Vec::with_capacity(columns.len() + 1);
    for r in rows {
        record.clear();
        record.extend(r.features.values.iter().map(|v| v.to_string()));
        record.push(r.label.index().to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_feature_matrix(path: &Path, columns: &[String], rows: &[FeatureRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_feature_csv(std::io::BufWriter::new(file), columns, rows)
}

pub fn read_feature_csv<R: Read>(reader: R) -> Result<FeatureMatrix> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let n = header.len();
    if n == 0 || &header[n - 1] != "label" {
        return Err(Error::Schema(
            "feature CSV must end with a 'label' column".into(),
        ));
    }
    let columns: Vec<String> = header.iter().take(n - 1).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let values = rec
            .iter()
            .take(n - 1)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Schema(format!("row {}: '{v}' is not a number", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let label_text = &rec[n - 1];
        let label = label_text
            .parse::<usize>()
            .map_err(|_| Error::Schema(format!("row {}: bad label '{label_text}'", line + 1)))
            .and_then(|i| {
                FreshnessLabel::from_index(i).map_err(|e| Error::Schema(e.to_string()))
            })?;
        rows.push(values);
        labels.push(label);
    }
    Ok(FeatureMatrix {
        columns,
        rows,
        labels,
    })
}

pub fn read_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_csv(std::io::BufReader::new(file))
}
