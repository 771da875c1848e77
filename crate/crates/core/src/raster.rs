//! In-memory image containers shared by every extractor.

use std::path::Path;

use crate::{Error, Result};

/// Channel order of a [`RasterImage`]. Only BGR is produced by this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ChannelOrder {
    Bgr,
}

/// A decoded 3-channel 8-bit image stored interleaved in BGR order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RasterImage {
    /// Builds an image from interleaved BGR bytes.
    pub fn from_bgr(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Argument(format!(
                "expected {} bytes for a {width}x{height} BGR image, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image of a single repeated BGR value.
    pub fn filled(width: usize, height: usize, bgr: [u8; 3]) -> Result<Self> {
        let data = bgr
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::from_bgr(width, height, data)
    }

    /// Builds an image by evaluating `f(x, y) -> [b, g, r]` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::from_bgr(width, height, data)
    }

    pub fn from_rgb_image(img: &image::RgbImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        let mut data = Vec::with_capacity(w as usize * h as usize * 3);
        for p in img.pixels() {
            data.extend_from_slice(&[p[2], p[1], p[0]]);
        }
        Self::from_bgr(w as usize, h as usize, data)
    }

    pub fn to_rgb_image(&self) -> image::RgbImage {
        let mut out = image::RgbImage::new(self.width as u32, self.height as u32);
        for (dst, src) in out.pixels_mut().zip(self.data.chunks_exact(3)) {
            *dst = image::Rgb([src[2], src[1], src[0]]);
        }
        out
    }

    /// Decodes any supported file and converts it to 3-channel BGR.
    pub fn open(path: &Path) -> Result<Self> {
        let decoded = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_rgb_image(&decoded.to_rgb8())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }

    /// Resamples to the given size with a triangle (bilinear) filter.
    pub fn resized(&self, width: usize, height: usize) -> Result<Self> {
        let out = image::imageops::resize(
            &self.to_rgb_image(),
            width as u32,
            height as u32,
            image::imageops::FilterType::Triangle,
        );
        Self::from_rgb_image(&out)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn order(&self) -> ChannelOrder {
        ChannelOrder::Bgr
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interleaved BGR bytes, row-major.
    pub fn as_bgr(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Splits into B, G, R planes with range [0, 255].
    pub fn bgr_planes(&self) -> [ChannelPlane; 3] {
        let mut planes = [
            Vec::with_capacity(self.len()),
            Vec::with_capacity(self.len()),
            Vec::with_capacity(self.len()),
        ];
        for px in self.pixels() {
            for (plane, v) in planes.iter_mut().zip(px) {
                plane.push(f64::from(v));
            }
        }
        planes.map(|values| ChannelPlane::from_raw(self.width, self.height, values, (0.0, 255.0)))
    }
}

/// A single channel of real values with a declared value range.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlane {
    width: usize,
    height: usize,
    values: Vec<f64>,
    range: (f64, f64),
}

impl ChannelPlane {
    /// Checked constructor: every value must be finite and inside `range`.
    pub fn new(width: usize, height: usize, values: Vec<f64>, range: (f64, f64)) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::Argument(format!(
                "plane of {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v < range.0 || **v > range.1)
        {
            return Err(Error::Argument(format!(
                "plane value {v} outside declared range [{}, {}]",
                range.0, range.1
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            range,
        })
    }

    pub(crate) fn from_raw(
        width: usize,
        height: usize,
        values: Vec<f64>,
        range: (f64, f64),
    ) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
            range,
        }
    }

    /// Convenience constructor for 8-bit style planes with range [0, 255].
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values, (0.0, 255.0))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Bilinear sample at real coordinates, clamped to the plane.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) + fx * (self.get(x1, y0) - self.get(x0, y0));
        let bottom = self.get(x0, y1) + fx * (self.get(x1, y1) - self.get(x0, y1));
        top + fy * (bottom - top)
    }

    /// The plane rotated 90 degrees counter-clockwise.
    pub fn rotated_90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut values = Vec::with_capacity(w * h);
        // new dims: width = h, height = w; new(x', y') = old(w - 1 - y', x')
        for ny in 0..w {
            for nx in 0..h {
                values.push(self.get(w - 1 - ny, nx));
            }
        }
        Self::from_raw(h, w, values, self.range)
    }
}
