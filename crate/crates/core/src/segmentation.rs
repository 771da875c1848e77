//! Circular eye localisation by radial intensity scanning.
//!
//! The pipeline is: grayscale + 7x7 Gaussian ([`preprocess`]), rays cast
//! from the image centre ([`scan_boundary`]), a robust median radius
//! ([`estimate_radius`]) and finally a filled disc mask ([`segment`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::raster::{ChannelPlane, RasterImage};
use crate::{Error, Result};

/// Binary disc mask with its analytic description.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeMask {
    width: usize,
    height: usize,
    center: (f64, f64),
    radius: f64,
    bitmap: Vec<bool>,
}

impl EyeMask {
    /// Disc of `radius` around `center`: a pixel is set iff
    /// `(px - cx)^2 + (py - cy)^2 <= radius^2`.
    pub fn disc(width: usize, height: usize, center: (f64, f64), radius: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument("mask dimensions must be positive".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Argument(format!(
                "mask radius must be positive, got {radius}"
            )));
        }
        let r2 = radius * radius;
        let mut bitmap = Vec::with_capacity(width * height);
        for y in 0..height {
            let dy = y as f64 - center.1;
            for x in 0..width {
                let dx = x as f64 - center.0;
                bitmap.push(dx * dx + dy * dy <= r2);
            }
        }
        Ok(Self {
            width,
            height,
            center,
            radius,
            bitmap,
        })
    }

    /// Arbitrary row-major mask. `center` is the image centre and `radius`
    /// the smallest radius around it that covers every set pixel.
    pub fn from_bitmap(width: usize, height: usize, bitmap: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bitmap.len() != width * height {
            return Err(Error::Argument(format!(
                "bitmap of {} values does not match {width}x{height}",
                bitmap.len()
            )));
        }
        let center = image_center(width, height);
        let radius = bitmap
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| ((i % width) as f64 - center.0).hypot((i / width) as f64 - center.1))
            .fold(0.0, f64::max);
        Ok(Self {
            width,
            height,
            center,
            radius,
            bitmap,
        })
    }

    /// A mask that keeps every pixel.
    pub fn full(width: usize, height: usize) -> Result<Self> {
        let center = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        let radius = (width as f64).hypot(height as f64);
        Self::disc(width, height, center, radius)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn bitmap(&self) -> &[bool] {
        &self.bitmap
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.bitmap[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bitmap.iter().filter(|b| **b).count()
    }

    /// Copy of `img` with every pixel outside the disc set to black.
    pub fn apply(&self, img: &RasterImage) -> Result<RasterImage> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::Argument(format!(
                "mask is {}x{} but image is {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )));
        }
        let mut data = img.as_bgr().to_vec();
        for (px, keep) in data.chunks_exact_mut(3).zip(&self.bitmap) {
            if !keep {
                px.fill(0);
            }
        }
        RasterImage::from_bgr(self.width, self.height, data)
    }
}

/// Intensity samples along one ray and the boundary candidate found on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub angle: f64,
    /// Radius of the first sample; samples are spaced one pixel apart.
    pub start_radius: f64,
    pub samples: Vec<f64>,
    pub candidate_radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub kernel_size: usize,
    pub n_rays: usize,
    /// Scan starts at this fraction of `min(width, height)`.
    pub r_min_frac: f64,
    /// Scan stops at this fraction of `min(width, height)`.
    pub r_max_frac: f64,
    /// Candidates further than this many MADs from the median are dropped.
    pub mad_threshold: f64,
    /// Multiplier applied to the median radius.
    pub adjustment: f64,
    pub min_candidates: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            kernel_size: 7,
            n_rays: 360,
            r_min_frac: 0.05,
            r_max_frac: 0.48,
            mad_threshold: 3.0,
            adjustment: 1.05,
            min_candidates: 8,
        }
    }
}

/// Standard size-to-sigma rule for a Gaussian kernel.
pub fn gaussian_sigma(kernel_size: usize) -> f64 {
    0.3 * ((kernel_size as f64 - 1.0) / 2.0 - 1.0) + 0.8
}

/// Normalised 1-D Gaussian taps.
pub fn gaussian_kernel(kernel_size: usize) -> Vec<f64> {
    let sigma = gaussian_sigma(kernel_size);
    let half = (kernel_size / 2) as f64;
    let taps: Vec<f64> = (0..kernel_size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Mirror index without repeating the edge sample (`dcb|abcd|cba`).
pub fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Luma `0.299 R + 0.587 G + 0.114 B` without rounding.
pub fn grayscale(img: &RasterImage) -> ChannelPlane {
    let values = img
        .pixels()
        .map(|[b, g, r]| 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b))
        .collect();
    ChannelPlane::from_raw(img.width(), img.height(), values, (0.0, 255.0))
}

/// Separable Gaussian blur with reflected borders.
pub fn gaussian_blur(plane: &ChannelPlane, kernel_size: usize) -> ChannelPlane {
    let taps = gaussian_kernel(kernel_size);
    let half = (kernel_size / 2) as isize;
    let (w, h) = (plane.width(), plane.height());
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * plane.get(reflect_index(x as isize + k as isize - half, w), y))
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let v: f64 = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect_index(y as isize + k as isize - half, h) * w + x])
                .sum();
            out[y * w + x] = v.clamp(0.0, 255.0);
        }
    }
    ChannelPlane::from_raw(w, h, out, plane.range())
}

/// Grayscale conversion followed by the Gaussian blur.
pub fn preprocess(img: &RasterImage, kernel_size: usize) -> ChannelPlane {
    gaussian_blur(&grayscale(img), kernel_size)
}

/// Geometric centre in pixel coordinates.
pub fn image_center(width: usize, height: usize) -> (f64, f64) {
    ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)
}

/// Casts `config.n_rays` rays from the centre and records one boundary
/// candidate per ray.
///
/// The boundary is the steepest negative step of the inward intensity
/// change `s[k] - s[k + 1]`, i.e. the strongest dark-to-bright transition
/// when moving outward. The candidate sits halfway between the two samples.
/// Rays without any such step yield no candidate.
pub fn scan_boundary(
    plane: &ChannelPlane,
    config: &SegmentationConfig,
) -> Result<Vec<RadialProfile>> {
    let (w, h) = (plane.width(), plane.height());
    if w < 32 || h < 32 {
        return Err(Error::Segmentation(format!(
            "plane must be at least 32x32, got {w}x{h}"
        )));
    }
    if config.n_rays == 0 {
        return Err(Error::Argument("n_rays must be positive".into()));
    }
    let side = w.min(h) as f64;
    let r_min = config.r_min_frac * side;
    let r_max = config.r_max_frac * side;
    let n_samples = ((r_max - r_min).floor() as usize) + 1;
    if n_samples < 2 {
        return Err(Error::Argument(
            "scan range shorter than two samples".into(),
        ));
    }
    let (cx, cy) = image_center(w, h);
    let profiles = (0..config.n_rays)
        .into_par_iter()
        .map(|i| {
            let angle = 360.0 * i as f64 / config.n_rays as f64;
            let (sin, cos) = angle.to_radians().sin_cos();
            let samples: Vec<f64> = (0..n_samples)
                .map(|k| {
                    let r = r_min + k as f64;
                    plane.sample_bilinear(cx + r * cos, cy - r * sin)
                })
                .collect();
            let mut best: Option<(usize, f64)> = None;
            for (k, pair) in samples.windows(2).enumerate() {
                let step = pair[0] - pair[1];
                if step < 0.0 && best.is_none_or(|(_, b)| step < b) {
                    best = Some((k, step));
                }
            }
            RadialProfile {
                angle,
                start_radius: r_min,
                candidate_radius: best.map(|(k, _)| r_min + k as f64 + 0.5),
                samples,
            }
        })
        .collect();
    Ok(profiles)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Outcome of the robust radius estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    /// Median of the surviving candidates, before adjustment.
    pub median_radius: f64,
    /// `median_radius * adjustment`.
    pub radius: f64,
    pub n_candidates: usize,
    pub n_candidates_kept: usize,
}

/// Median radius after dropping candidates more than `mad_threshold`
/// median absolute deviations from the median.
pub fn estimate_radius(
    profiles: &[RadialProfile],
    config: &SegmentationConfig,
) -> Result<RadiusEstimate> {
    let mut candidates: Vec<f64> = profiles.iter().filter_map(|p| p.candidate_radius).collect();
    if candidates.len() < config.min_candidates.max(1) {
        return Err(Error::Segmentation(format!(
            "only {} of {} rays found a boundary candidate (need {})",
            candidates.len(),
            profiles.len(),
            config.min_candidates
        )));
    }
    candidates.sort_unstable_by(f64::total_cmp);
    let center = median(&candidates);
    let mut deviations: Vec<f64> = candidates.iter().map(|r| (r - center).abs()).collect();
    deviations.sort_unstable_by(f64::total_cmp);
    let mad = median(&deviations);
    let kept: Vec<f64> = candidates
        .iter()
        .copied()
        .filter(|r| (r - center).abs() <= config.mad_threshold * mad)
        .collect();
    let median_radius = median(&kept);
    Ok(RadiusEstimate {
        median_radius,
        radius: median_radius * config.adjustment,
        n_candidates: candidates.len(),
        n_candidates_kept: kept.len(),
    })
}

/// Result of [`segment`].
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub mask: EyeMask,
    pub masked: RasterImage,
    pub estimate: RadiusEstimate,
}

/// Segments the eye disc: preprocess, scan, estimate, then mask.
pub fn segment(img: &RasterImage, config: &SegmentationConfig) -> Result<Segmentation> {
    let plane = preprocess(img, config.kernel_size);
    let profiles = scan_boundary(&plane, config)?;
    let estimate = estimate_radius(&profiles, config)?;
    let center = image_center(img.width(), img.height());
    let mask = EyeMask::disc(img.width(), img.height(), center, estimate.radius)?;
    let masked = mask.apply(img)?;
    Ok(Segmentation {
        mask,
        masked,
        estimate,
    })
}

/// Sidecar record written next to a segmented image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationRecord {
    pub center: (f64, f64),
    pub radius: f64,
    pub n_candidates_kept: usize,
}

impl From<&Segmentation> for SegmentationRecord {
    fn from(s: &Segmentation) -> Self {
        Self {
            center: s.mask.center(),
            radius: s.mask.radius(),
            n_candidates_kept: s.estimate.n_candidates_kept,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(candidate: Option<f64>) -> RadialProfile {
        RadialProfile {
            angle: 0.0,
            start_radius: 0.0,
            samples: vec![0.0, 0.0],
            candidate_radius: candidate,
        }
    }

    #[test]
    fn sigma_for_seven_taps() {
        assert!((gaussian_sigma(7) - 1.4).abs() < 1e-12);
        let k = gaussian_kernel(7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[6]);
    }

    #[test]
    fn reflect_without_edge_repeat() {
        assert_eq!(reflect_index(-1, 5), 1);
        assert_eq!(reflect_index(-3, 5), 3);
        assert_eq!(reflect_index(5, 5), 3);
        assert_eq!(reflect_index(7, 5), 1);
        assert_eq!(reflect_index(-4, 2), 0);
        assert_eq!(reflect_index(3, 1), 0);
    }

    #[test]
    fn constant_blur_is_constant() {
        let img = RasterImage::filled(12, 9, [80, 80, 80]).unwrap();
        let p = preprocess(&img, 7);
        for v in p.values() {
            assert!((v - 80.0).abs() < 1e-9);
        }
    }

    #[test]
    fn blur_preserves_interior_mass() {
        let plane =
            ChannelPlane::from_fn(21, 21, |x, y| if (x, y) == (10, 10) { 255.0 } else { 0.0 })
                .unwrap();
        let out = gaussian_blur(&plane, 7);
        assert!((out.values().iter().sum::<f64>() - 255.0).abs() < 1e-6);
    }

    #[test]
    fn median_times_adjustment() {
        let cfg = SegmentationConfig::default();
        let profiles: Vec<_> = (0..20).map(|_| profile(Some(50.0))).collect();
        let e = estimate_radius(&profiles, &cfg).unwrap();
        assert!((e.radius - 52.5).abs() < 1e-12);
        assert_eq!(e.n_candidates_kept, 20);
    }

    #[test]
    fn outliers_are_discarded() {
        let cfg = SegmentationConfig::default();
        let mut profiles: Vec<_> = (0..350).map(|_| profile(Some(50.0))).collect();
        profiles.extend((0..10).map(|_| profile(Some(5.0))));
        let e = estimate_radius(&profiles, &cfg).unwrap();
        assert!((e.radius - 52.5).abs() < 1e-12);
        assert_eq!(e.n_candidates_kept, 350);
    }

    #[test]
    fn too_few_candidates() {
        let cfg = SegmentationConfig::default();
        let mut profiles: Vec<_> = (0..4).map(|_| profile(Some(50.0))).collect();
        profiles.extend((0..100).map(|_| profile(None)));
        let err = estimate_radius(&profiles, &cfg).unwrap_err();
        assert!(err.to_string().contains("only 4 of 104"));
    }

    #[test]
    fn constant_plane_has_no_candidates() {
        let plane = ChannelPlane::from_fn(64, 64, |_, _| 120.0).unwrap();
        let profiles = scan_boundary(&plane, &SegmentationConfig::default()).unwrap();
        assert_eq!(profiles.len(), 360);
        assert!(profiles.iter().all(|p| p.candidate_radius.is_none()));
    }

    #[test]
    fn small_plane_rejected() {
        let plane = ChannelPlane::from_fn(31, 64, |_, _| 0.0).unwrap();
        assert!(matches!(
            scan_boundary(&plane, &SegmentationConfig::default()),
            Err(Error::Segmentation(_))
        ));
    }

    #[test]
    fn mask_matches_analytic_disc() {
        let m = EyeMask::disc(20, 16, (9.5, 7.5), 5.3).unwrap();
        for y in 0..16 {
            for x in 0..20 {
                let inside = (x as f64 - 9.5).powi(2) + (y as f64 - 7.5).powi(2) <= 5.3 * 5.3;
                assert_eq!(m.contains(x, y), inside);
            }
        }
        assert!(EyeMask::disc(4, 4, (1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn masking_is_idempotent() {
        let img = RasterImage::from_fn(10, 10, |x, y| [x as u8 * 20, y as u8 * 20, 200]).unwrap();
        let m = EyeMask::disc(10, 10, (4.5, 4.5), 3.0).unwrap();
        let once = m.apply(&img).unwrap();
        assert_eq!(m.apply(&once).unwrap(), once);
        assert_eq!(once.pixel(0, 0), [0, 0, 0]);
        assert_eq!(once.pixel(4, 4), img.pixel(4, 4));
    }
}
