//! The FS1..FS17 feature-set registry and the extractor that composes
//! descriptor blocks into one named vector.
//!
//! Blocks inside a set always appear in the order they were introduced:
//! color statistics (listed space order), variance ratios, GLCM, LBP,
//! percentiles, histograms. Smaller sets in a chain are therefore exact
//! prefixes of the larger ones.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::color_features::{
    color_histogram, color_percentiles, color_statistics, histogram_names, percentile_names,
    statistics_names, variance_ratio_names, variance_ratios_from_planes, HistogramNorm,
};
use crate::colorspace::{to_hsv, to_lab, ColorSpace};
use crate::raster::{ChannelPlane, RasterImage};
use crate::segmentation::EyeMask;
use crate::texture::{
    glcm_features, glcm_names, lbp_names, lbp_riu2, GlcmLayout, GLCM_DEFAULT_DISTANCE,
};
use crate::{Error, Result};

/// Descriptor family of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "CS")]
    Cs,
    #[serde(rename = "CVR")]
    Cvr,
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "CH")]
    Ch,
    #[serde(rename = "LBP")]
    Lbp,
    #[serde(rename = "GLCM")]
    Glcm,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Cs,
        Family::Cvr,
        Family::Glcm,
        Family::Lbp,
        Family::Cp,
        Family::Ch,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Family::Cs => "CS",
            Family::Cvr => "CVR",
            Family::Cp => "CP",
            Family::Ch => "CH",
            Family::Lbp => "LBP",
            Family::Glcm => "GLCM",
        }
    }
}

/// One block of a feature set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Component {
    pub family: Family,
    /// `None` for the space-independent families (CVR, LBP, GLCM).
    pub space: Option<ColorSpace>,
}

impl Component {
    pub const fn cs(space: ColorSpace) -> Self {
        Self {
            family: Family::Cs,
            space: Some(space),
        }
    }
    pub const fn cp(space: ColorSpace) -> Self {
        Self {
            family: Family::Cp,
            space: Some(space),
        }
    }
    pub const fn ch(space: ColorSpace) -> Self {
        Self {
            family: Family::Ch,
            space: Some(space),
        }
    }
    pub const CVR: Self = Self {
        family: Family::Cvr,
        space: None,
    };
    pub const GLCM: Self = Self {
        family: Family::Glcm,
        space: None,
    };
    pub const LBP: Self = Self {
        family: Family::Lbp,
        space: None,
    };

    /// Number of values the block contributes with default options.
    pub fn size(&self) -> usize {
        match self.family {
            Family::Cs => 24,
            Family::Cvr => 9,
            Family::Cp => 15,
            Family::Ch => 48,
            Family::Lbp => 10,
            Family::Glcm => 16,
        }
    }

    pub fn names(&self, options: &ExtractOptions) -> Vec<String> {
        let space = || self.space.expect("color block without a space");
        match self.family {
            Family::Cs => statistics_names(space()),
            Family::Cvr => variance_ratio_names(),
            Family::Cp => percentile_names(space()),
            Family::Ch => histogram_names(space()),
            Family::Lbp => lbp_names(),
            Family::Glcm => glcm_names(options.glcm_layout),
        }
    }
}

/// Identifier `FS1`..`FS17`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSetId(u8);

impl FeatureSetId {
    pub fn new(n: u8) -> Result<Self> {
        if (1..=17).contains(&n) {
            Ok(Self(n))
        } else {
            Err(Error::Argument(format!(
                "feature set must be FS1..FS17, got FS{n}"
            )))
        }
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = FeatureSetId> {
        (1..=17).map(FeatureSetId)
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FS{}", self.0)
    }
}

impl FromStr for FeatureSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .strip_prefix("FS")
            .or_else(|| s.strip_prefix("fs"))
            .unwrap_or(s);
        let n: u8 = digits
            .parse()
            .map_err(|_| Error::Argument(format!("unknown feature set '{s}'")))?;
        Self::new(n)
    }
}

impl Serialize for FeatureSetId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureSetId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An ordered list of blocks with its dimensionality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSetSpec {
    pub id: FeatureSetId,
    pub components: Vec<Component>,
    pub dimensionality: usize,
}

impl FeatureSetSpec {
    fn new(id: u8, components: Vec<Component>) -> Self {
        let dimensionality = components.iter().map(Component::size).sum();
        Self {
            id: FeatureSetId(id),
            components,
            dimensionality,
        }
    }

    fn extended(&self, id: u8, extra: &[Component]) -> Self {
        let mut components = self.components.clone();
        components.extend_from_slice(extra);
        Self::new(id, components)
    }

    /// Canonical column names in output order.
    pub fn column_names(&self, options: &ExtractOptions) -> Vec<String> {
        self.components
            .iter()
            .flat_map(|c| c.names(options))
            .collect()
    }
}

/// Which percentile set FS15..FS17 build on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HistogramBase {
    /// FS11 (BGR + HSV percentiles), the listed definition.
    #[default]
    Fs11,
    /// FS12 (BGR + Lab percentiles).
    Fs12,
}

/// Builds every FS spec. `base` selects the parent of FS15..FS17.
pub fn registry_with(base: HistogramBase) -> BTreeMap<FeatureSetId, FeatureSetSpec> {
    use ColorSpace::{Bgr, Hsv, Lab};
    let fs1 = FeatureSetSpec::new(1, vec![Component::cs(Bgr), Component::cs(Hsv)]);
    let fs2 = FeatureSetSpec::new(2, vec![Component::cs(Bgr), Component::cs(Lab)]);
    let fs3 = FeatureSetSpec::new(3, vec![Component::cs(Lab), Component::cs(Hsv)]);
    let fs4 = FeatureSetSpec::new(
        4,
        vec![Component::cs(Bgr), Component::cs(Lab), Component::cs(Hsv)],
    );
    let fs5 = fs2.extended(5, &[Component::CVR]);
    let fs6 = fs5.extended(6, &[Component::GLCM]);
    let fs7 = fs6.extended(7, &[Component::LBP]);
    let fs8 = fs7.extended(8, &[Component::cp(Bgr)]);
    let fs9 = fs7.extended(9, &[Component::cp(Lab)]);
    let fs10 = fs7.extended(10, &[Component::cp(Hsv)]);
    let fs11 = fs7.extended(11, &[Component::cp(Bgr), Component::cp(Hsv)]);
    let fs12 = fs7.extended(12, &[Component::cp(Bgr), Component::cp(Lab)]);
    let fs13 = fs7.extended(13, &[Component::cp(Lab), Component::cp(Hsv)]);
    let fs14 = fs7.extended(
        14,
        &[Component::cp(Bgr), Component::cp(Lab), Component::cp(Hsv)],
    );
    let parent = match base {
        HistogramBase::Fs11 => &fs11,
        HistogramBase::Fs12 => &fs12,
    };
    let fs15 = parent.extended(15, &[Component::ch(Bgr)]);
    let fs16 = parent.extended(16, &[Component::ch(Lab)]);
    let fs17 = parent.extended(17, &[Component::ch(Hsv)]);
    [
        fs1, fs2, fs3, fs4, fs5, fs6, fs7, fs8, fs9, fs10, fs11, fs12, fs13, fs14, fs15, fs16, fs17,
    ]
    .into_iter()
    .map(|s| (s.id, s))
    .collect()
}

/// The default registry.
pub fn registry() -> BTreeMap<FeatureSetId, FeatureSetSpec> {
    registry_with(HistogramBase::Fs11)
}

/// Looks up one spec in the default registry.
pub fn feature_set(id: FeatureSetId) -> FeatureSetSpec {
    registry().remove(&id).expect("registry covers FS1..FS17")
}

/// Knobs that change how blocks are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    pub histogram_norm: HistogramNorm,
    pub glcm_distance: usize,
    /// `MeanRange` changes the GLCM block to 8 values, so vectors no longer
    /// match the registry dimensionalities.
    pub glcm_layout: GlcmLayout,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            histogram_norm: HistogramNorm::PerChannel,
            glcm_distance: GLCM_DEFAULT_DISTANCE,
            glcm_layout: GlcmLayout::PerOrientation,
        }
    }
}

/// A named feature vector tied to its feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub set_id: FeatureSetId,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

/// Wall-clock time spent per descriptor family (plus color conversion).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyTimings {
    pub conversion: Duration,
    pub per_family: BTreeMap<Family, Duration>,
}

impl FamilyTimings {
    pub fn add(&mut self, other: &FamilyTimings) {
        self.conversion += other.conversion;
        for (f, d) in &other.per_family {
            *self.per_family.entry(*f).or_default() += *d;
        }
    }
}

/// Lazily converted color planes of one image.
struct PlaneCache<'a> {
    img: &'a RasterImage,
    planes: BTreeMap<ColorSpace, [ChannelPlane; 3]>,
}

impl<'a> PlaneCache<'a> {
    fn new(img: &'a RasterImage) -> Self {
        Self {
            img,
            planes: BTreeMap::new(),
        }
    }

    fn get(&mut self, space: ColorSpace, timings: &mut FamilyTimings) -> &[ChannelPlane; 3] {
        self.ensure(space, timings);
        &self.planes[&space]
    }

    fn ensure(&mut self, space: ColorSpace, timings: &mut FamilyTimings) {
        let img = self.img;
        self.planes.entry(space).or_insert_with(|| {
            let start = Instant::now();
            let planes = match space {
                ColorSpace::Bgr => img.bgr_planes(),
                ColorSpace::Hsv => to_hsv(img),
                ColorSpace::Lab => to_lab(img),
            };
            timings.conversion += start.elapsed();
            planes
        });
    }
}

/// Extracts `spec` from `img`, additionally returning per-family timings.
pub fn extract_timed(
    img: &RasterImage,
    spec: &FeatureSetSpec,
    mask: Option<&EyeMask>,
    options: &ExtractOptions,
) -> Result<(FeatureVector, FamilyTimings)> {
    let mut timings = FamilyTimings::default();
    let mut cache = PlaneCache::new(img);
    let mut values = Vec::with_capacity(spec.dimensionality);
    for component in &spec.components {
        let block = match (component.family, component.space) {
            (Family::Cs, Some(space)) => {
                let planes = cache.get(space, &mut timings);
                let start = Instant::now();
                let v = color_statistics(planes, mask)?;
                (v, start.elapsed())
            }
            (Family::Cp, Some(space)) => {
                let planes = cache.get(space, &mut timings);
                let start = Instant::now();
                let v = color_percentiles(planes, mask)?;
                (v, start.elapsed())
            }
            (Family::Ch, Some(space)) => {
                let planes = cache.get(space, &mut timings);
                let start = Instant::now();
                let v = color_histogram(planes, mask, options.histogram_norm)?;
                (v, start.elapsed())
            }
            (Family::Cvr, _) => {
                for space in ColorSpace::ALL {
                    cache.ensure(space, &mut timings);
                }
                let p = &cache.planes;
                let start = Instant::now();
                let v = variance_ratios_from_planes(
                    &p[&ColorSpace::Bgr],
                    &p[&ColorSpace::Hsv],
                    &p[&ColorSpace::Lab],
                    mask,
                )?;
                (v, start.elapsed())
            }
            (Family::Glcm, _) => {
                let b_star = &cache.get(ColorSpace::Lab, &mut timings)[2];
                let start = Instant::now();
                let v = glcm_features(b_star, options.glcm_distance, mask, options.glcm_layout)?;
                (v, start.elapsed())
            }
            (Family::Lbp, _) => {
                let b_star = &cache.get(ColorSpace::Lab, &mut timings)[2];
                let start = Instant::now();
                let v = lbp_riu2(b_star, mask)?.to_vec();
                (v, start.elapsed())
            }
            (family, None) => {
                return Err(Error::Argument(format!(
                    "{} block needs a color space",
                    family.label()
                )))
            }
        };
        *timings.per_family.entry(component.family).or_default() += block.1;
        values.extend(block.0);
    }
    let names = spec.column_names(options);
    assert_eq!(
        names.len(),
        values.len(),
        "{}: extracted {} values for {} columns",
        spec.id,
        values.len(),
        names.len()
    );
    if options.glcm_layout == GlcmLayout::PerOrientation {
        assert_eq!(
            values.len(),
            spec.dimensionality,
            "{} dimensionality mismatch",
            spec.id
        );
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Extraction(format!(
            "non-finite value for {}",
            names[i]
        )));
    }
    Ok((
        FeatureVector {
            set_id: spec.id,
            names,
            values,
        },
        timings,
    ))
}

/// Extracts `spec` from `img` with default options.
pub fn extract(
    img: &RasterImage,
    spec: &FeatureSetSpec,
    mask: Option<&EyeMask>,
) -> Result<FeatureVector> {
    extract_with(img, spec, mask, &ExtractOptions::default())
}

pub fn extract_with(
    img: &RasterImage,
    spec: &FeatureSetSpec,
    mask: Option<&EyeMask>,
    options: &ExtractOptions,
) -> Result<FeatureVector> {
    extract_timed(img, spec, mask, options).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn registry_dimensionalities() {
        let expected = [
            48, 48, 48, 72, 57, 73, 83, 98, 98, 98, 113, 113, 113, 128, 161, 161, 161,
        ];
        let reg = registry();
        assert_eq!(reg.len(), 17);
        for (spec, want) in reg.values().zip(expected) {
            assert_eq!(spec.dimensionality, want, "{}", spec.id);
            let sum: usize = spec.components.iter().map(Component::size).sum();
            assert_eq!(sum, want);
            let names = spec.column_names(&ExtractOptions::default());
            assert_eq!(names.len(), want);
            let unique: HashSet<_> = names.iter().collect();
            assert_eq!(unique.len(), names.len(), "{} has duplicate names", spec.id);
        }
    }

    #[test]
    fn fs5_and_fs17_composition() {
        let reg = registry();
        let fs5 = &reg[&FeatureSetId::new(5).unwrap()];
        assert_eq!(
            fs5.components,
            vec![
                Component::cs(ColorSpace::Bgr),
                Component::cs(ColorSpace::Lab),
                Component::CVR
            ]
        );
        let fs11 = &reg[&FeatureSetId::new(11).unwrap()];
        let fs17 = &reg[&FeatureSetId::new(17).unwrap()];
        assert_eq!(
            &fs17.components[..fs11.components.len()],
            &fs11.components[..]
        );
        assert_eq!(
            fs17.components.last(),
            Some(&Component::ch(ColorSpace::Hsv))
        );
    }

    #[test]
    fn fs12_override_keeps_dims() {
        let reg = registry_with(HistogramBase::Fs12);
        let fs16 = &reg[&FeatureSetId::new(16).unwrap()];
        assert_eq!(fs16.dimensionality, 161);
        assert!(fs16.components.contains(&Component::cp(ColorSpace::Lab)));
    }

    #[test]
    fn parse_ids() {
        assert_eq!("FS7".parse::<FeatureSetId>().unwrap().number(), 7);
        assert_eq!("fs17".parse::<FeatureSetId>().unwrap().number(), 17);
        assert_eq!("3".parse::<FeatureSetId>().unwrap().number(), 3);
        assert!("FS18".parse::<FeatureSetId>().is_err());
        assert!("FSx".parse::<FeatureSetId>().is_err());
        let json = serde_json::to_string(&FeatureSetId::new(4).unwrap()).unwrap();
        assert_eq!(json, "\"FS4\"");
    }

    #[test]
    fn constant_gray_image_fs1() {
        let img = RasterImage::filled(16, 16, [90, 90, 90]).unwrap();
        let v = extract(&img, &feature_set(FeatureSetId::new(1).unwrap()), None).unwrap();
        assert_eq!(v.len(), 48);
        for (name, value) in v.names.iter().zip(&v.values) {
            if name.ends_with("_mean") && !name.contains("hsv_h") && !name.contains("hsv_s") {
                assert!(*value > 0.0, "{name}");
            } else {
                assert_eq!(*value, 0.0, "{name}");
            }
        }
    }

    #[test]
    fn mean_range_layout_shrinks_glcm_block() {
        let img =
            RasterImage::from_fn(16, 16, |x, y| [(x * 13) as u8, (y * 7) as u8, 100]).unwrap();
        let opts = ExtractOptions {
            glcm_layout: GlcmLayout::MeanRange,
            ..Default::default()
        };
        let v = extract_with(
            &img,
            &feature_set(FeatureSetId::new(6).unwrap()),
            None,
            &opts,
        )
        .unwrap();
        assert_eq!(v.len(), 73 - 8);
    }

    #[test]
    fn timings_cover_each_family() {
        let img = RasterImage::from_fn(24, 24, |x, y| [(x * 9) as u8, (y * 5) as u8, 60]).unwrap();
        let spec = feature_set(FeatureSetId::new(17).unwrap());
        let (_, t) = extract_timed(&img, &spec, None, &ExtractOptions::default()).unwrap();
        let families: Vec<_> = t.per_family.keys().copied().collect();
        assert_eq!(families.len(), 6);
    }
}
