//! Run configuration: defaults, optional JSON file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use eyefresh_core::fusion::{ExtractOptions, FeatureSetId, HistogramBase};
use eyefresh_core::segmentation::SegmentationConfig;
use eyefresh_core::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MIN_RESIZE: usize = 32;

/// Target size for optional resizing, written `WxH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resize {
    pub width: usize,
    pub height: usize,
}

impl FromStr for Resize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Config(format!("resize must look like 224x224, got '{s}'"));
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let width: usize = w.trim().parse().map_err(|_| bad())?;
        let height: usize = h.trim().parse().map_err(|_| bad())?;
        if width < MIN_RESIZE || height < MIN_RESIZE {
            return Err(Error::Config(format!(
                "resize dimensions must be at least {MIN_RESIZE}, got {s}"
            )));
        }
        Ok(Self { width, height })
    }
}

impl fmt::Display for Resize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl Serialize for Resize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Resize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Everything that determines a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub feature_set: FeatureSetId,
    pub histogram_base: HistogramBase,
    pub segmented: bool,
    pub resize: Option<Resize>,
    pub seed: u64,
    pub test_frac: f64,
    pub val_frac: f64,
    pub model: Option<String>,
    pub params: BTreeMap<String, serde_json::Value>,
    pub layout: Option<PathBuf>,
    /// Above this fraction of failed segmentations the run exits with code 4.
    pub max_segmentation_failure_rate: f64,
    pub segmentation: SegmentationConfig,
    pub extraction: ExtractOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            feature_set: FeatureSetId::new(17).expect("FS17 exists"),
            histogram_base: HistogramBase::default(),
            segmented: false,
            resize: None,
            seed: 42,
            test_frac: 0.2,
            val_frac: 0.2,
            model: None,
            params: BTreeMap::new(),
            layout: None,
            max_segmentation_failure_rate: 0.2,
            segmentation: SegmentationConfig::default(),
            extraction: ExtractOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))
    }

    /// Hyperparameter overrides as strings, `params` first, then `key=value` flags.
    pub fn overrides(&self, flags: &[String]) -> Result<BTreeMap<String, String>, Error> {
        let mut out: BTreeMap<String, String> = self
            .params
            .iter()
            .map(|(k, v)| {
                let text = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), text)
            })
            .collect();
        for flag in flags {
            let (k, v) = flag
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--param expects key=value, got '{flag}'")))?;
            out.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(out)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
