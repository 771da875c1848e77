//! Color descriptor families: statistics (CS), variance ratios (CVR),
//! percentiles (CP) and 16-bin histograms (CH).
//!
//! Every extractor accepts an optional [`EyeMask`]; when present only the
//! pixels inside the disc are used.

use serde::{Deserialize, Serialize};

use crate::colorspace::{to_hsv, to_lab, ColorSpace};
use crate::raster::{ChannelPlane, RasterImage};
use crate::segmentation::EyeMask;
use crate::{Error, Result};

/// Added to the denominator of every variance ratio.
pub const CVR_EPSILON: f64 = 1e-12;

/// Percentiles emitted per channel, in output order.
pub const PERCENTILES: [u32; 5] = [5, 25, 50, 75, 95];

pub const HISTOGRAM_BINS: usize = 16;

/// Statistic names in output order.
pub const STAT_NAMES: [&str; 8] = [
    "mean", "std", "skew", "kurt", "entropy", "wavelet", "moment5", "moment6",
];

/// The nine ratio pairs, `(numerator, denominator)` as `(space, channel index)`.
pub const CVR_PAIRS: [((ColorSpace, usize), (ColorSpace, usize)); 9] = [
    ((ColorSpace::Bgr, 2), (ColorSpace::Bgr, 1)),
    ((ColorSpace::Bgr, 2), (ColorSpace::Bgr, 0)),
    ((ColorSpace::Bgr, 1), (ColorSpace::Bgr, 0)),
    ((ColorSpace::Hsv, 0), (ColorSpace::Hsv, 1)),
    ((ColorSpace::Hsv, 0), (ColorSpace::Hsv, 2)),
    ((ColorSpace::Hsv, 1), (ColorSpace::Hsv, 2)),
    ((ColorSpace::Lab, 0), (ColorSpace::Lab, 1)),
    ((ColorSpace::Lab, 0), (ColorSpace::Lab, 2)),
    ((ColorSpace::Lab, 1), (ColorSpace::Lab, 2)),
];

/// How the three per-channel histograms are L2-normalised.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramNorm {
    /// Each 16-bin channel histogram gets unit L2 norm, then the three are concatenated.
    #[default]
    PerChannel,
    /// The concatenated 48-vector gets unit L2 norm.
    Concatenated,
}

/// The eight per-channel distribution descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    /// Shannon entropy in bits over 256 integer levels.
    pub entropy: f64,
    /// Mean absolute detail coefficient of a one-level 2-D Haar transform.
    pub wavelet_moment: f64,
    pub moment5: f64,
    pub moment6: f64,
}

impl ChannelStats {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.mean,
            self.std_dev,
            self.skewness,
            self.kurtosis,
            self.entropy,
            self.wavelet_moment,
            self.moment5,
            self.moment6,
        ]
    }
}

pub(crate) fn check_mask(plane: &ChannelPlane, mask: Option<&EyeMask>) -> Result<()> {
    if let Some(m) = mask {
        if m.width() != plane.width() || m.height() != plane.height() {
            return Err(Error::Argument(format!(
                "mask is {}x{} but plane is {}x{}",
                m.width(),
                m.height(),
                plane.width(),
                plane.height()
            )));
        }
    }
    Ok(())
}

#[inline]
fn inside(mask: Option<&EyeMask>, x: usize, y: usize) -> bool {
    mask.is_none_or(|m| m.contains(x, y))
}

/// Values of the plane inside the mask (all values without one), row-major.
pub fn scoped_values(plane: &ChannelPlane, mask: Option<&EyeMask>) -> Result<Vec<f64>> {
    check_mask(plane, mask)?;
    let values = match mask {
        None => plane.values().to_vec(),
        Some(m) => plane
            .values()
            .iter()
            .zip(m.bitmap())
            .filter_map(|(v, keep)| keep.then_some(*v))
            .collect(),
    };
    if values.is_empty() {
        return Err(Error::Extraction("no pixels inside the mask".into()));
    }
    Ok(values)
}

#[inline]
fn level(v: f64) -> usize {
    v.floor().clamp(0.0, 255.0) as usize
}

fn entropy_bits(values: &[f64]) -> f64 {
    let mut counts = [0u64; 256];
    for v in values {
        counts[level(*v)] += 1;
    }
    let n = values.len() as f64;
    counts
        .iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

fn haar_wavelet_moment(plane: &ChannelPlane, mask: Option<&EyeMask>) -> f64 {
    let (w, h) = (plane.width(), plane.height());
    let mut total = 0.0;
    let mut blocks = 0usize;
    for y0 in (0..h).step_by(2) {
        // odd sizes: the trailing row/column is duplicated
        let y1 = (y0 + 1).min(h - 1);
        for x0 in (0..w).step_by(2) {
            let x1 = (x0 + 1).min(w - 1);
            if !(inside(mask, x0, y0)
                && inside(mask, x1, y0)
                && inside(mask, x0, y1)
                && inside(mask, x1, y1))
            {
                continue;
            }
            let a = plane.get(x0, y0);
            let b = plane.get(x1, y0);
            let c = plane.get(x0, y1);
            let d = plane.get(x1, y1);
            let horizontal = (a - b + c - d) / 2.0;
            let vertical = (a + b - c - d) / 2.0;
            let diagonal = (a - b - c + d) / 2.0;
            total += horizontal.abs() + vertical.abs() + diagonal.abs();
            blocks += 1;
        }
    }
    if blocks == 0 {
        0.0
    } else {
        total / (3 * blocks) as f64
    }
}

/// Computes the eight distribution descriptors of one channel.
pub fn channel_stats(plane: &ChannelPlane, mask: Option<&EyeMask>) -> Result<ChannelStats> {
    let values = scoped_values(plane, mask)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut m = [0.0f64; 5]; // central moments 2..=6
    for v in &values {
        let d = v - mean;
        let d2 = d * d;
        m[0] += d2;
        m[1] += d2 * d;
        m[2] += d2 * d2;
        m[3] += d2 * d2 * d;
        m[4] += d2 * d2 * d2;
    }
    for x in &mut m {
        *x /= n;
    }
    let std_dev = m[0].sqrt();
    let standardized = |k: usize, order: i32| {
        if m[0] == 0.0 {
            0.0
        } else {
            m[k] / std_dev.powi(order)
        }
    };
    Ok(ChannelStats {
        mean,
        std_dev,
        skewness: standardized(1, 3),
        kurtosis: standardized(2, 4),
        entropy: entropy_bits(&values),
        wavelet_moment: haar_wavelet_moment(plane, mask),
        moment5: standardized(3, 5),
        moment6: standardized(4, 6),
    })
}

/// 24 values: 8 statistics for each of the three planes, channel-major.
pub fn color_statistics(planes: &[ChannelPlane; 3], mask: Option<&EyeMask>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(24);
    for plane in planes {
        out.extend(channel_stats(plane, mask)?.to_array());
    }
    Ok(out)
}

/// Population variance of the in-scope values (two-pass).
pub fn scoped_variance(plane: &ChannelPlane, mask: Option<&EyeMask>) -> Result<f64> {
    let values = scoped_values(plane, mask)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// The nine variance ratios from already converted planes.
pub fn variance_ratios_from_planes(
    bgr: &[ChannelPlane; 3],
    hsv: &[ChannelPlane; 3],
    lab: &[ChannelPlane; 3],
    mask: Option<&EyeMask>,
) -> Result<Vec<f64>> {
    let var = |space: ColorSpace, c: usize| {
        let planes = match space {
            ColorSpace::Bgr => bgr,
            ColorSpace::Hsv => hsv,
            ColorSpace::Lab => lab,
        };
        scoped_variance(&planes[c], mask)
    };
    CVR_PAIRS
        .iter()
        .map(|&((ns, nc), (ds, dc))| Ok(var(ns, nc)? / (var(ds, dc)? + CVR_EPSILON)))
        .collect()
}

/// `[R/G, R/B, G/B, H/S, H/V, S/V, L/a, L/b, a/b]` variance ratios.
pub fn color_variance_ratios(img: &RasterImage, mask: Option<&EyeMask>) -> Result<Vec<f64>> {
    variance_ratios_from_planes(&img.bgr_planes(), &to_hsv(img), &to_lab(img), mask)
}

/// Percentile of sorted data with linear interpolation between closest ranks.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// 15 values: percentiles {5, 25, 50, 75, 95} per channel, channel-major.
pub fn color_percentiles(planes: &[ChannelPlane; 3], mask: Option<&EyeMask>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(15);
    for plane in planes {
        let mut values = scoped_values(plane, mask)?;
        values.sort_unstable_by(f64::total_cmp);
        out.extend(
            PERCENTILES
                .iter()
                .map(|q| percentile_sorted(&values, f64::from(*q))),
        );
    }
    Ok(out)
}

/// Raw 16-bin counts over `[0, 256)` for one channel.
pub fn histogram_counts(
    plane: &ChannelPlane,
    mask: Option<&EyeMask>,
) -> Result<[u64; HISTOGRAM_BINS]> {
    let values = scoped_values(plane, mask)?;
    let mut counts = [0u64; HISTOGRAM_BINS];
    for v in values {
        let bin = ((v / 16.0).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    Ok(counts)
}

fn l2_normalize(values: &mut [f64]) {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
}

/// 48 values: three 16-bin channel histograms, L2-normalised per `norm`.
pub fn color_histogram(
    planes: &[ChannelPlane; 3],
    mask: Option<&EyeMask>,
    norm: HistogramNorm,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(3 * HISTOGRAM_BINS);
    for plane in planes {
        let mut block: Vec<f64> = histogram_counts(plane, mask)?
            .iter()
            .map(|c| *c as f64)
            .collect();
        if norm == HistogramNorm::PerChannel {
            l2_normalize(&mut block);
        }
        out.extend(block);
    }
    if norm == HistogramNorm::Concatenated {
        l2_normalize(&mut out);
    }
    Ok(out)
}

pub fn statistics_names(space: ColorSpace) -> Vec<String> {
    space
        .channels()
        .iter()
        .flat_map(|ch| {
            STAT_NAMES
                .iter()
                .map(move |s| format!("cs_{}_{}_{}", space.tag(), ch, s))
        })
        .collect()
}

pub fn variance_ratio_names() -> Vec<String> {
    CVR_PAIRS
        .iter()
        .map(|&((ns, nc), (ds, dc))| format!("cvr_{}_{}", ns.channels()[nc], ds.channels()[dc]))
        .collect()
}

pub fn percentile_names(space: ColorSpace) -> Vec<String> {
    space
        .channels()
        .iter()
        .flat_map(|ch| {
            PERCENTILES
                .iter()
                .map(move |q| format!("cp_{}_{}_p{}", space.tag(), ch, q))
        })
        .collect()
}

pub fn histogram_names(space: ColorSpace) -> Vec<String> {
    space
        .channels()
        .iter()
        .flat_map(|ch| {
            (0..HISTOGRAM_BINS).map(move |i| format!("ch_{}_{}_bin{}", space.tag(), ch, i))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(v: f64) -> ChannelPlane {
        ChannelPlane::from_fn(6, 5, |_, _| v).unwrap()
    }

    #[test]
    fn constant_plane_has_only_a_mean() {
        let s = channel_stats(&constant(100.0), None).unwrap();
        assert_eq!(s.mean, 100.0);
        assert_eq!(&s.to_array()[1..], &[0.0; 7]);
    }

    #[test]
    fn two_level_plane_has_one_bit_of_entropy() {
        let p = ChannelPlane::from_fn(8, 8, |x, _| if x < 4 { 0.0 } else { 255.0 }).unwrap();
        let s = channel_stats(&p, None).unwrap();
        assert!((s.entropy - 1.0).abs() < 1e-12);
        assert_eq!(s.mean, 127.5);
        assert!((s.std_dev - 127.5).abs() < 1e-12);
        // symmetric two-point distribution
        assert!(s.skewness.abs() < 1e-12);
        assert!((s.kurtosis - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_detail_of_vertical_stripes() {
        // columns alternate 0/10: horizontal detail |0-10+0-10|/2 = 10 per block
        let p = ChannelPlane::from_fn(4, 4, |x, _| if x % 2 == 0 { 0.0 } else { 10.0 }).unwrap();
        let s = channel_stats(&p, None).unwrap();
        assert!((s.wavelet_moment - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn odd_sized_plane_duplicates_trailing_edge() {
        let p = ChannelPlane::from_fn(3, 1, |x, _| x as f64).unwrap();
        // blocks: [0,1;0,1] -> h = (0-1+0-1)/2 = -1 ; [2,2;2,2] -> 0
        let s = channel_stats(&p, None).unwrap();
        assert!((s.wavelet_moment - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn variance_ratios_of_gray_and_constant_images() {
        let gray = RasterImage::from_fn(8, 8, |x, y| {
            let v = ((x * 31 + y * 17) % 256) as u8;
            [v, v, v]
        })
        .unwrap();
        let r = color_variance_ratios(&gray, None).unwrap();
        for v in &r[..3] {
            assert!((v - 1.0).abs() < 1e-9);
        }
        let flat = RasterImage::filled(5, 5, [30, 60, 90]).unwrap();
        assert_eq!(color_variance_ratios(&flat, None).unwrap(), vec![0.0; 9]);
    }

    #[test]
    fn percentile_interpolation() {
        let values: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(percentile_sorted(&values, 50.0), 49.5);
        assert_eq!(percentile_sorted(&values, 0.0), 0.0);
        assert_eq!(percentile_sorted(&values, 100.0), 99.0);
        let p = constant(7.0);
        let planes = [p.clone(), p.clone(), p];
        assert_eq!(color_percentiles(&planes, None).unwrap(), vec![7.0; 15]);
    }

    #[test]
    fn histogram_of_zero_planes() {
        let p = constant(0.0);
        let planes = [p.clone(), p.clone(), p];
        let per = color_histogram(&planes, None, HistogramNorm::PerChannel).unwrap();
        assert_eq!(per[0], 1.0);
        assert_eq!(per[16], 1.0);
        assert_eq!(per[32], 1.0);
        let cat = color_histogram(&planes, None, HistogramNorm::Concatenated).unwrap();
        assert_eq!(cat[0], cat[16]);
        assert!((cat.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_is_an_extraction_error() {
        let p = constant(1.0);
        let mask = EyeMask::disc(6, 5, (100.0, 100.0), 1.0).unwrap();
        assert!(matches!(
            channel_stats(&p, Some(&mask)),
            Err(Error::Extraction(_))
        ));
        let planes = [p.clone(), p.clone(), p];
        assert!(color_percentiles(&planes, Some(&mask)).is_err());
        assert!(color_histogram(&planes, Some(&mask), HistogramNorm::PerChannel).is_err());
    }

    #[test]
    fn mask_restricts_scope() {
        let p = ChannelPlane::from_fn(9, 9, |x, y| {
            if (x as f64 - 4.0).hypot(y as f64 - 4.0) <= 2.0 {
                50.0
            } else {
                200.0
            }
        })
        .unwrap();
        let mask = EyeMask::disc(9, 9, (4.0, 4.0), 2.0).unwrap();
        let s = channel_stats(&p, Some(&mask)).unwrap();
        assert_eq!(s.mean, 50.0);
        assert_eq!(s.std_dev, 0.0);
    }

    #[test]
    fn names_have_expected_shape() {
        assert_eq!(statistics_names(ColorSpace::Bgr)[0], "cs_bgr_b_mean");
        assert_eq!(statistics_names(ColorSpace::Lab).len(), 24);
        assert_eq!(variance_ratio_names()[0], "cvr_r_g");
        assert_eq!(variance_ratio_names()[8], "cvr_a_b");
        assert_eq!(percentile_names(ColorSpace::Hsv)[14], "cp_hsv_v_p95");
        assert_eq!(histogram_names(ColorSpace::Hsv)[47], "ch_hsv_v_bin15");
    }
}
