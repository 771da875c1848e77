//! BGR to HSV and CIELAB conversion in the common 8-bit scaled convention.
//!
//! HSV: `H` in `[0, 180]` (degrees halved), `S` and `V` in `[0, 255]`.
//! Lab: `L* * 255 / 100`, `a* + 128`, `b* + 128`, each clamped to `[0, 255]`.
//! Every converted value is rounded half away from zero to an integer level.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::raster::{ChannelPlane, RasterImage};

/// The three color spaces features are computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ColorSpace {
    Bgr,
    Hsv,
    Lab,
}

impl ColorSpace {
    pub const ALL: [ColorSpace; 3] = [ColorSpace::Bgr, ColorSpace::Hsv, ColorSpace::Lab];

    /// Lower-case tag used in feature names.
    pub fn tag(self) -> &'static str {
        match self {
            ColorSpace::Bgr => "bgr",
            ColorSpace::Hsv => "hsv",
            ColorSpace::Lab => "lab",
        }
    }

    /// Channel tags in plane order.
    pub fn channels(self) -> [&'static str; 3] {
        match self {
            ColorSpace::Bgr => ["b", "g", "r"],
            ColorSpace::Hsv => ["h", "s", "v"],
            ColorSpace::Lab => ["l", "a", "b"],
        }
    }

    /// Converts `img` into this space's three planes.
    pub fn planes(self, img: &RasterImage) -> [ChannelPlane; 3] {
        match self {
            ColorSpace::Bgr => img.bgr_planes(),
            ColorSpace::Hsv => to_hsv(img),
            ColorSpace::Lab => to_lab(img),
        }
    }
}

impl std::fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Converts one BGR pixel to 8-bit scaled HSV.
pub fn bgr_to_hsv_pixel([b, g, r]: [u8; 3]) -> [u8; 3] {
    let (b, g, r) = (f64::from(b), f64::from(g), f64::from(r));
    let v = r.max(g).max(b);
    let min = r.min(g).min(b);
    let diff = v - min;
    let s = if v == 0.0 { 0.0 } else { 255.0 * diff / v };
    let mut h = if diff == 0.0 {
        0.0
    } else if v == r {
        60.0 * (g - b) / diff
    } else if v == g {
        120.0 + 60.0 * (b - r) / diff
    } else {
        240.0 + 60.0 * (r - g) / diff
    };
    if h < 0.0 {
        h += 360.0;
    }
    [(h / 2.0).round() as u8, s.round() as u8, v.round() as u8]
}

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

fn srgb_to_linear_lut() -> &'static [f64; 256] {
    static LUT: OnceLock<[f64; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [0.0; 256];
        for (i, out) in lut.iter_mut().enumerate() {
            let c = i as f64 / 255.0;
            *out = if c <= 0.040_45 {
                c / 12.92
            } else {
                ((c + 0.055) / 1.055).powf(2.4)
            };
        }
        lut
    })
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one BGR pixel to 8-bit scaled CIELAB (D65).
pub fn bgr_to_lab_pixel([b, g, r]: [u8; 3]) -> [u8; 3] {
    let lut = srgb_to_linear_lut();
    let rgb = [lut[r as usize], lut[g as usize], lut[b as usize]];
    let mut xyz = [0.0; 3];
    for (out, row) in xyz.iter_mut().zip(RGB_TO_XYZ.iter()) {
        // normalise by the white point, i.e. the row sum
        let white: f64 = row.iter().sum();
        *out = row.iter().zip(rgb.iter()).map(|(m, c)| m * c).sum::<f64>() / white;
    }
    let fx = lab_f(xyz[0]);
    let fy = lab_f(xyz[1]);
    let fz = lab_f(xyz[2]);
    let l = 116.0 * fy - 16.0;
    let a = 500.0 * (fx - fy);
    let bb = 200.0 * (fy - fz);
    let scale = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    [
        scale(l * 255.0 / 100.0),
        scale(a + 128.0),
        scale(bb + 128.0),
    ]
}

fn convert(
    img: &RasterImage,
    f: fn([u8; 3]) -> [u8; 3],
    ranges: [(f64, f64); 3],
) -> [ChannelPlane; 3] {
    let n = img.len();
    let mut planes = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for px in img.pixels() {
        for (plane, v) in planes.iter_mut().zip(f(px)) {
            plane.push(f64::from(v));
        }
    }
    let [p0, p1, p2] = planes;
    let (w, h) = (img.width(), img.height());
    [
        ChannelPlane::from_raw(w, h, p0, ranges[0]),
        ChannelPlane::from_raw(w, h, p1, ranges[1]),
        ChannelPlane::from_raw(w, h, p2, ranges[2]),
    ]
}

/// H, S, V planes; H in [0, 180], S and V in [0, 255].
pub fn to_hsv(img: &RasterImage) -> [ChannelPlane; 3] {
    convert(
        img,
        bgr_to_hsv_pixel,
        [(0.0, 180.0), (0.0, 255.0), (0.0, 255.0)],
    )
}

/// L, a, b planes, all in [0, 255].
pub fn to_lab(img: &RasterImage) -> [ChannelPlane; 3] {
    convert(img, bgr_to_lab_pixel, [(0.0, 255.0); 3])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_primaries() {
        assert_eq!(bgr_to_hsv_pixel([0, 0, 255]), [0, 255, 255]);
        assert_eq!(bgr_to_hsv_pixel([0, 255, 0]), [60, 255, 255]);
        assert_eq!(bgr_to_hsv_pixel([255, 0, 0]), [120, 255, 255]);
        assert_eq!(bgr_to_hsv_pixel([128, 128, 128]), [0, 0, 128]);
        assert_eq!(bgr_to_hsv_pixel([0, 0, 0]), [0, 0, 0]);
    }

    #[test]
    fn lab_achromatic_endpoints() {
        let white = bgr_to_lab_pixel([255, 255, 255]);
        assert_eq!(white[0], 255);
        assert!((i32::from(white[1]) - 128).abs() <= 1);
        assert!((i32::from(white[2]) - 128).abs() <= 1);
        let black = bgr_to_lab_pixel([0, 0, 0]);
        assert_eq!(black[0], 0);
        assert!((i32::from(black[1]) - 128).abs() <= 1);
        assert!((i32::from(black[2]) - 128).abs() <= 1);
    }

    #[test]
    fn gray_axis_is_neutral() {
        for v in 0..=255u8 {
            let hsv = bgr_to_hsv_pixel([v, v, v]);
            assert_eq!(hsv[1], 0);
            let lab = bgr_to_lab_pixel([v, v, v]);
            assert!(
                (i32::from(lab[1]) - 128).abs() <= 1,
                "a at gray {v}: {}",
                lab[1]
            );
            assert!(
                (i32::from(lab[2]) - 128).abs() <= 1,
                "b at gray {v}: {}",
                lab[2]
            );
        }
    }

    #[test]
    fn plane_ranges_declared() {
        let img = RasterImage::filled(2, 2, [10, 200, 30]).unwrap();
        let hsv = to_hsv(&img);
        assert_eq!(hsv[0].range(), (0.0, 180.0));
        for p in to_lab(&img).iter().chain(hsv.iter()) {
            assert!(p
                .values()
                .iter()
                .all(|v| *v >= p.range().0 && *v <= p.range().1));
        }
    }
}
