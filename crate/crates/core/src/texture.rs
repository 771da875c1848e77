//! Texture descriptors on a single plane (the Lab b* channel in the
//! feature pipeline): rotation-invariant uniform LBP and GLCM Haralick
//! features.

use serde::{Deserialize, Serialize};

use crate::color_features::check_mask;
use crate::raster::ChannelPlane;
use crate::segmentation::EyeMask;
use crate::{Error, Result};

/// Number of riu2 bins for P = 8.
pub const LBP_BINS: usize = 10;

pub const GLCM_LEVELS: usize = 256;

pub const GLCM_DEFAULT_DISTANCE: usize = 3;

/// GLCM orientations in output order.
pub const GLCM_ANGLES: [u32; 4] = [0, 45, 90, 135];

pub const GLCM_FEATURES: [&str; 4] = ["contrast", "homogeneity", "energy", "correlation"];

/// Neighbour offsets `(dx, dy)` for P = 8, R = 1, counter-clockwise from
/// the right neighbour, `y` pointing down.
const LBP_AXIS: [(isize, isize); 4] = [(1, 0), (0, -1), (-1, 0), (0, 1)];

/// Sign of `neighbour - center` for the P = 8, R = 1 circle.
///
/// Axis points are read directly. Diagonal points lie at distance 1 from the
/// centre and are bilinearly interpolated from the 2x2 block spanned by the
/// centre, the two adjacent axis neighbours and the diagonal pixel. The
/// difference is formed as `s*(A + B) + s^2*D` with `A`, `B` the axis
/// differences and `D` the mixed term, so it is identical under 90 degree
/// rotations of the input.
#[inline]
fn lbp_code(plane: &ChannelPlane, x: usize, y: usize) -> u8 {
    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let c = plane.get(x, y);
    let at =
        |dx: isize, dy: isize| plane.get((x as isize + dx) as usize, (y as isize + dy) as usize);
    let mut pattern = 0u8;
    for k in 0..4 {
        let (ax, ay) = LBP_AXIS[k];
        let (bx, by) = LBP_AXIS[(k + 1) % 4];
        let a = at(ax, ay) - c;
        if a >= 0.0 {
            pattern |= 1 << (2 * k);
        }
        let b = at(bx, by) - c;
        let diag = at(ax + bx, ay + by);
        let mixed = (diag + c) - (at(ax, ay) + at(bx, by));
        let diff = S * (a + b) + S * S * mixed;
        if diff >= 0.0 {
            pattern |= 1 << (2 * k + 1);
        }
    }
    pattern
}

/// Maps an 8-bit circular pattern to its riu2 label in `0..=9`.
pub fn riu2_label(pattern: u8) -> usize {
    let transitions = (pattern ^ pattern.rotate_right(1)).count_ones();
    if transitions <= 2 {
        pattern.count_ones() as usize
    } else {
        LBP_BINS - 1
    }
}

/// L1-normalised 10-bin riu2 histogram (P = 8, R = 1).
///
/// Only interior pixels contribute; with a mask, a pixel contributes only
/// when its whole 3x3 neighbourhood is inside the mask.
pub fn lbp_riu2(plane: &ChannelPlane, mask: Option<&EyeMask>) -> Result<[f64; LBP_BINS]> {
    check_mask(plane, mask)?;
    let (w, h) = (plane.width(), plane.height());
    if w < 3 || h < 3 {
        return Err(Error::Extraction(format!(
            "LBP needs at least a 3x3 plane, got {w}x{h}"
        )));
    }
    let mut counts = [0u64; LBP_BINS];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            if let Some(m) = mask {
                let full = (y - 1..=y + 1).all(|yy| (x - 1..=x + 1).all(|xx| m.contains(xx, yy)));
                if !full {
                    continue;
                }
            }
            counts[riu2_label(lbp_code(plane, x, y))] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Extraction(
            "mask leaves no pixel with a complete LBP neighbourhood".into(),
        ));
    }
    Ok(counts.map(|c| c as f64 / total as f64))
}

/// Pixel offset `(dx, dy)` for an orientation, `y` pointing down.
pub fn glcm_offset(angle: u32, distance: usize) -> (isize, isize) {
    let d = distance as isize;
    match angle {
        0 => (d, 0),
        45 => (d, -d),
        90 => (0, -d),
        135 => (-d, -d),
        other => panic!("unsupported GLCM orientation {other}"),
    }
}

#[inline]
fn quantize(v: f64) -> usize {
    v.round().clamp(0.0, (GLCM_LEVELS - 1) as f64) as usize
}

/// A co-occurrence matrix for one orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmMatrix {
    pub levels: usize,
    pub distance: usize,
    pub orientation: u32,
    cells: Vec<f64>,
}

impl GlcmMatrix {
    /// Builds the symmetric, normalised matrix: both `(i, j)` and `(j, i)` are
    /// counted for every pair, and a pair only counts when both pixels are in
    /// the mask.
    pub fn build(
        plane: &ChannelPlane,
        distance: usize,
        orientation: u32,
        mask: Option<&EyeMask>,
    ) -> Result<Self> {
        check_mask(plane, mask)?;
        let (w, h) = (plane.width() as isize, plane.height() as isize);
        let (dx, dy) = glcm_offset(orientation, distance);
        let mut counts = vec![0u64; GLCM_LEVELS * GLCM_LEVELS];
        let mut pairs = 0u64;
        for y in 0..h {
            let ny = y + dy;
            if ny < 0 || ny >= h {
                continue;
            }
            for x in 0..w {
                let nx = x + dx;
                if nx < 0 || nx >= w {
                    continue;
                }
                let (x, y, nx, ny) = (x as usize, y as usize, nx as usize, ny as usize);
                if let Some(m) = mask {
                    if !(m.contains(x, y) && m.contains(nx, ny)) {
                        continue;
                    }
                }
                let i = quantize(plane.get(x, y));
                let j = quantize(plane.get(nx, ny));
                counts[i * GLCM_LEVELS + j] += 1;
                counts[j * GLCM_LEVELS + i] += 1;
                pairs += 1;
            }
        }
        if pairs == 0 {
            return Err(Error::Extraction(format!(
                "no valid pixel pair at distance {distance}, orientation {orientation} deg"
            )));
        }
        let total = (2 * pairs) as f64;
        Ok(Self {
            levels: GLCM_LEVELS,
            distance,
            orientation,
            cells: counts.into_iter().map(|c| c as f64 / total).collect(),
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.levels + j]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// `[contrast, homogeneity, energy, correlation]`.
    ///
    /// Energy is the angular second moment (sum of squared cells).
    /// Correlation is 1 when either marginal has zero variance.
    pub fn haralick(&self) -> [f64; 4] {
        let n = self.levels;
        let mut contrast = 0.0;
        let mut homogeneity = 0.0;
        let mut energy = 0.0;
        let mut mu_i = 0.0;
        let mut mu_j = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = self.get(i, j);
                if p == 0.0 {
                    continue;
                }
                let d = i as f64 - j as f64;
                contrast += p * d * d;
                homogeneity += p / (1.0 + d * d);
                energy += p * p;
                mu_i += p * i as f64;
                mu_j += p * j as f64;
            }
        }
        let mut var_i = 0.0;
        let mut var_j = 0.0;
        let mut cov = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = self.get(i, j);
                if p == 0.0 {
                    continue;
                }
                let di = i as f64 - mu_i;
                let dj = j as f64 - mu_j;
                var_i += p * di * di;
                var_j += p * dj * dj;
                cov += p * di * dj;
            }
        }
        let correlation = if var_i <= 0.0 || var_j <= 0.0 {
            1.0
        } else {
            cov / (var_i.sqrt() * var_j.sqrt())
        };
        [contrast, homogeneity, energy, correlation]
    }
}

/// How the per-orientation Haralick values are laid out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlcmLayout {
    /// 16 values: feature-major, then orientation.
    #[default]
    PerOrientation,
    /// 8 values: per feature, mean then range over the four orientations.
    MeanRange,
}

/// Haralick features over the four orientations.
pub fn glcm_features(
    plane: &ChannelPlane,
    distance: usize,
    mask: Option<&EyeMask>,
    layout: GlcmLayout,
) -> Result<Vec<f64>> {
    let per_angle = GLCM_ANGLES
        .iter()
        .map(|a| GlcmMatrix::build(plane, distance, *a, mask).map(|m| m.haralick()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(16);
    for f in 0..GLCM_FEATURES.len() {
        let values = per_angle.iter().map(|v| v[f]);
        match layout {
            GlcmLayout::PerOrientation => out.extend(values),
            GlcmLayout::MeanRange => {
                let v: Vec<f64> = values.collect();
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                out.push(v.iter().sum::<f64>() / v.len() as f64);
                out.push(max - min);
            }
        }
    }
    Ok(out)
}

pub fn glcm_names(layout: GlcmLayout) -> Vec<String> {
    match layout {
        GlcmLayout::PerOrientation => GLCM_FEATURES
            .iter()
            .flat_map(|f| GLCM_ANGLES.iter().map(move |a| format!("glcm_{f}_{a}")))
            .collect(),
        GlcmLayout::MeanRange => GLCM_FEATURES
            .iter()
            .flat_map(|f| [format!("glcm_{f}_mean"), format!("glcm_{f}_range")])
            .collect(),
    }
}

pub fn lbp_names() -> Vec<String> {
    (0..LBP_BINS).map(|i| format!("lbp_riu2_bin{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riu2_labels() {
        assert_eq!(riu2_label(0), 0);
        assert_eq!(riu2_label(0xFF), 8);
        assert_eq!(riu2_label(0b0000_0111), 3);
        assert_eq!(riu2_label(0b1100_0001), 3);
        assert_eq!(riu2_label(0b0101_0101), 9);
        let uniform = (0..=255u8).filter(|p| riu2_label(*p) < 9).count();
        assert_eq!(uniform, 58);
    }

    #[test]
    fn constant_plane_lbp_is_all_ones() {
        let p = ChannelPlane::from_fn(5, 5, |_, _| 42.0).unwrap();
        let h = lbp_riu2(&p, None).unwrap();
        assert_eq!(h[8], 1.0);
        assert_eq!(h.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn single_peak_is_all_zero_code() {
        let p =
            ChannelPlane::from_fn(3, 3, |x, y| if (x, y) == (1, 1) { 9.0 } else { 1.0 }).unwrap();
        assert_eq!(lbp_riu2(&p, None).unwrap()[0], 1.0);
    }

    #[test]
    fn tiny_plane_rejected() {
        let p = ChannelPlane::from_fn(2, 5, |_, _| 0.0).unwrap();
        assert!(lbp_riu2(&p, None).is_err());
    }

    #[test]
    fn thin_mask_rejected() {
        let p = ChannelPlane::from_fn(9, 9, |x, _| x as f64).unwrap();
        let mask = EyeMask::disc(9, 9, (4.0, 4.0), 0.5).unwrap();
        assert!(matches!(
            lbp_riu2(&p, Some(&mask)),
            Err(Error::Extraction(_))
        ));
    }

    #[test]
    fn constant_plane_glcm() {
        let p = ChannelPlane::from_fn(8, 8, |_, _| 17.0).unwrap();
        let f = glcm_features(&p, 3, None, GlcmLayout::PerOrientation).unwrap();
        assert_eq!(&f[0..4], &[0.0; 4]);
        assert_eq!(&f[4..8], &[1.0; 4]);
        assert_eq!(&f[8..12], &[1.0; 4]);
        assert_eq!(&f[12..16], &[1.0; 4]);
    }

    #[test]
    fn checkerboard_contrast() {
        let p =
            ChannelPlane::from_fn(2, 2, |x, y| if (x + y) % 2 == 0 { 0.0 } else { 255.0 }).unwrap();
        let m = GlcmMatrix::build(&p, 1, 0, None).unwrap();
        assert_eq!(m.get(0, 255), 0.5);
        assert_eq!(m.get(255, 0), 0.5);
        assert_eq!(m.haralick()[0], 65025.0);
    }

    #[test]
    fn glcm_is_symmetric_and_normalised() {
        let p = ChannelPlane::from_fn(9, 7, |x, y| ((x * 37 + y * 91) % 256) as f64).unwrap();
        for angle in GLCM_ANGLES {
            let m = GlcmMatrix::build(&p, 3, angle, None).unwrap();
            assert!((m.cells().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for i in 0..GLCM_LEVELS {
                for j in 0..i {
                    assert_eq!(m.get(i, j), m.get(j, i));
                }
            }
        }
    }

    #[test]
    fn distance_too_large_rejected() {
        let p = ChannelPlane::from_fn(3, 3, |x, _| x as f64).unwrap();
        assert!(matches!(
            glcm_features(&p, 3, None, GlcmLayout::PerOrientation),
            Err(Error::Extraction(_))
        ));
    }

    #[test]
    fn mean_range_layout() {
        let p = ChannelPlane::from_fn(8, 8, |x, _| (x * 10) as f64).unwrap();
        let per = glcm_features(&p, 1, None, GlcmLayout::PerOrientation).unwrap();
        let agg = glcm_features(&p, 1, None, GlcmLayout::MeanRange).unwrap();
        assert_eq!(agg.len(), 8);
        assert_eq!(glcm_names(GlcmLayout::MeanRange).len(), 8);
        let contrast = &per[0..4];
        let mean = contrast.iter().sum::<f64>() / 4.0;
        assert!((agg[0] - mean).abs() < 1e-12);
        // vertical offset sees no change, horizontal offset sees 100 each step
        assert_eq!(contrast[2], 0.0);
        assert!((agg[1] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn names() {
        let n = glcm_names(GlcmLayout::PerOrientation);
        assert_eq!(n.len(), 16);
        assert_eq!(n[0], "glcm_contrast_0");
        assert_eq!(n[15], "glcm_correlation_135");
        assert_eq!(lbp_names()[9], "lbp_riu2_bin9");
    }
}
