//! Classical classifiers over feature matrices and their evaluation.
//!
//! KNN, logistic regression and the MLP see z-scored inputs (the scaler is
//! fitted on training rows only and stored in the artifact); the tree
//! ensembles use raw features.

pub mod knn;
pub mod logistic;
pub mod metrics;
pub mod mlp;
pub mod optim;
pub mod scaler;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::fusion::FeatureSetId;
use crate::{Error, Result};

pub use knn::{KnnModel, KnnParams};
pub use logistic::{logistic_objective, LogisticModel, LogisticParams};
pub use metrics::{evaluate, kfold_indices, ClassMetrics, EvalReport};
pub use mlp::{MlpModel, MlpParams};
pub use scaler::{standardize, Scaler};
pub use tree::{Forest, ForestParams};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Knn,
    Lr,
    Mlp,
    Rf,
    Et,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Knn,
        ModelKind::Lr,
        ModelKind::Mlp,
        ModelKind::Rf,
        ModelKind::Et,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Lr => "lr",
            ModelKind::Mlp => "mlp",
            ModelKind::Rf => "rf",
            ModelKind::Et => "et",
        }
    }

    /// Whether inputs are z-scored before fitting.
    pub fn standardizes(self) -> bool {
        matches!(self, ModelKind::Knn | ModelKind::Lr | ModelKind::Mlp)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Ok(ModelKind::Knn),
            "lr" | "logistic" => Ok(ModelKind::Lr),
            "mlp" | "ann" => Ok(ModelKind::Mlp),
            "rf" | "random_forest" => Ok(ModelKind::Rf),
            "et" | "extra_trees" => Ok(ModelKind::Et),
            "svm" | "lgbm" | "lightgbm" | "cb" | "catboost" => {
                Err(Error::UnsupportedModel(s.to_string()))
            }
            _ => Err(Error::Argument(format!(
                "unknown model '{s}' (available: knn, lr, mlp, rf, et)"
            ))),
        }
    }
}

/// Hyperparameter overrides from `name=value` strings.
pub trait HyperParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()>;

    fn apply(&mut self, overrides: &BTreeMap<String, String>) -> Result<()> {
        overrides.iter().try_for_each(|(k, v)| self.set(k, v))
    }
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Argument(format!("bad value '{value}' for hyperparameter '{key}'")))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// In-place row-wise softmax; returns each row's log-sum-exp.
pub(crate) fn softmax_rows(z: &mut Array2<f64>) -> Vec<f64> {
    let mut lse = Vec::with_capacity(z.nrows());
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
        lse.push(max + sum.ln());
    }
    lse
}

/// Learned state of one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Knn(KnnModel),
    Lr(LogisticModel),
    Mlp(MlpModel),
    Rf(Forest),
    Et(Forest),
}

/// A trained model with everything needed to score new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub feature_set_id: Option<FeatureSetId>,
    pub n_features: usize,
    pub n_classes: usize,
    pub train_seed: u64,
    pub scaler: Option<Scaler>,
    pub model: Model,
}

impl ModelArtifact {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            Model::Knn(_) => ModelKind::Knn,
            Model::Lr(_) => ModelKind::Lr,
            Model::Mlp(_) => ModelKind::Mlp,
            Model::Rf(_) => ModelKind::Rf,
            Model::Et(_) => ModelKind::Et,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let artifact: Self = serde_json::from_str(&text)?;
        if artifact.format_version != ARTIFACT_VERSION {
            return Err(Error::Config(format!(
                "model artifact version {} is not supported (expected {ARTIFACT_VERSION})",
                artifact.format_version
            )));
        }
        Ok(artifact)
    }

    fn prepare(&self, x: &Array2<f64>) -> Result<Option<Array2<f64>>> {
        if x.ncols() != self.n_features {
            return Err(Error::Argument(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok(self.scaler.as_ref().map(|s| s.transform(x)))
    }

    /// One class index per row.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        let scaled = self.prepare(x)?;
        let x = scaled.as_ref().unwrap_or(x);
        Ok(match &self.model {
            Model::Knn(m) => m.predict(x),
            Model::Lr(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
            Model::Rf(m) | Model::Et(m) => m.predict(x),
        })
    }
}

/// Typed hyperparameters for one model kind, with defaults and overrides applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Knn(KnnParams),
    Lr(LogisticParams),
    Mlp(MlpParams),
    Rf(ForestParams),
    Et(ForestParams),
}

impl ModelParams {
    pub fn defaults(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Knn => ModelParams::Knn(KnnParams::default()),
            ModelKind::Lr => ModelParams::Lr(LogisticParams::default()),
            ModelKind::Mlp => ModelParams::Mlp(MlpParams::default()),
            ModelKind::Rf => ModelParams::Rf(ForestParams::random_forest()),
            ModelKind::Et => ModelParams::Et(ForestParams::extra_trees()),
        }
    }

    pub fn with_overrides(kind: ModelKind, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let mut p = Self::defaults(kind);
        match &mut p {
            ModelParams::Knn(p) => p.apply(overrides)?,
            ModelParams::Lr(p) => p.apply(overrides)?,
            ModelParams::Mlp(p) => p.apply(overrides)?,
            ModelParams::Rf(p) | ModelParams::Et(p) => p.apply(overrides)?,
        }
        Ok(p)
    }
}

/// Fits `params` on `(x, y)`; deterministic in `seed`.
pub fn train_with(
    params: ModelParams,
    x: &Array2<f64>,
    y: &[usize],
    seed: u64,
) -> Result<ModelArtifact> {
    if x.nrows() != y.len() {
        return Err(Error::Argument(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if y.is_empty() || x.ncols() == 0 {
        return Err(Error::Training("training data is empty".into()));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let distinct = (0..n_classes).filter(|c| y.contains(c)).count();
    if distinct < 2 {
        return Err(Error::Training(
            "training data contains a single class".into(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training(
            "training matrix contains non-finite values".into(),
        ));
    }
    let kind = match params {
        ModelParams::Knn(_) => ModelKind::Knn,
        ModelParams::Lr(_) => ModelKind::Lr,
        ModelParams::Mlp(_) => ModelKind::Mlp,
        ModelParams::Rf(_) => ModelKind::Rf,
        ModelParams::Et(_) => ModelKind::Et,
    };
    let scaler = kind.standardizes().then(|| Scaler::fit(x));
    let scaled = scaler.as_ref().map(|s| s.transform(x));
    let xs = scaled.as_ref().unwrap_or(x);
    let model = match params {
        ModelParams::Knn(p) => Model::Knn(KnnModel::fit(p, xs, y, n_classes)),
        ModelParams::Lr(p) => Model::Lr(LogisticModel::fit(p, xs, y, n_classes)),
        ModelParams::Mlp(p) => Model::Mlp(MlpModel::fit(p, xs, y, n_classes, seed)),
        ModelParams::Rf(p) => Model::Rf(Forest::fit(p, xs, y, n_classes, seed)),
        ModelParams::Et(p) => Model::Et(Forest::fit(p, xs, y, n_classes, seed)),
    };
    Ok(ModelArtifact {
        format_version: ARTIFACT_VERSION,
        feature_set_id: None,
        n_features: x.ncols(),
        n_classes,
        train_seed: seed,
        scaler,
        model,
    })
}

/// Fits a model of `kind` with its defaults overridden by `overrides`.
pub fn train(
    kind: ModelKind,
    overrides: &BTreeMap<String, String>,
    x: &Array2<f64>,
    y: &[usize],
    seed: u64,
) -> Result<ModelArtifact> {
    train_with(ModelParams::with_overrides(kind, overrides)?, x, y, seed)
}

pub fn predict(model: &ModelArtifact, x: &Array2<f64>) -> Result<Vec<usize>> {
    model.predict(x)
}

/// Row-major matrix from nested rows; every row must have the same length.
pub fn matrix_from_rows(rows: &[Vec<f64>], n_cols: usize) -> Result<Array2<f64>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
        return Err(Error::Argument(format!(
            "row {bad} has {} values, expected {n_cols}",
            rows[bad].len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), n_cols), flat).map_err(|e| Error::Argument(e.to_string()))
}
