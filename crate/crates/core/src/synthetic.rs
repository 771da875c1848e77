//! Seeded synthetic eye images for tests, demos and smoke runs.
//!
//! Every image is a dark disc centred on a bright, lightly textured frame.
//! The three freshness classes differ in disc hue and in how much milky
//! clouding covers the disc.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::FreshnessLabel;
use crate::raster::RasterImage;
use crate::{Error, Result};

/// A bright frame with a centred uniform dark disc.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscScene {
    pub size: usize,
    pub radius: f64,
    pub disc_level: u8,
    pub background_level: u8,
    /// Adds five white specular blobs inside the disc.
    pub specular: bool,
}

impl DiscScene {
    pub fn new(size: usize, radius: f64) -> Self {
        Self {
            size,
            radius,
            disc_level: 30,
            background_level: 210,
            specular: false,
        }
    }

    /// Centres of the specular blobs: 0.55r from the centre, 72 degrees apart.
    pub fn specular_centers(&self) -> Vec<(f64, f64)> {
        let c = (self.size as f64 - 1.0) / 2.0;
        (0..5)
            .map(|i| {
                let a = (i as f64 * 72.0 + 18.0).to_radians();
                (
                    c + 0.55 * self.radius * a.cos(),
                    c + 0.55 * self.radius * a.sin(),
                )
            })
            .collect()
    }

    pub fn specular_radius(&self) -> f64 {
        (0.1 * self.radius).max(3.0)
    }

    pub fn render(&self) -> Result<RasterImage> {
        let c = (self.size as f64 - 1.0) / 2.0;
        let blobs = if self.specular {
            self.specular_centers()
        } else {
            Vec::new()
        };
        let blob_r = self.specular_radius();
        RasterImage::from_fn(self.size, self.size, |x, y| {
            let (fx, fy) = (x as f64, y as f64);
            if blobs
                .iter()
                .any(|(bx, by)| (fx - bx).hypot(fy - by) <= blob_r)
            {
                return [255; 3];
            }
            let v = if (fx - c).hypot(fy - c) <= self.radius {
                self.disc_level
            } else {
                self.background_level
            };
            [v; 3]
        })
    }
}

/// Per-class appearance: disc tint (BGR) and clouding strength in [0, 1].
fn class_style(label: FreshnessLabel) -> ([f64; 3], f64) {
    match label {
        FreshnessLabel::HighlyFresh => ([70.0, 35.0, 20.0], 0.0),
        FreshnessLabel::Fresh => ([40.0, 55.0, 75.0], 0.35),
        FreshnessLabel::NotFresh => ([95.0, 100.0, 115.0], 0.8),
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// One synthetic eye of the given class, `size`×`size` pixels.
pub fn eye_image(label: FreshnessLabel, size: usize, rng: &mut ChaCha8Rng) -> Result<RasterImage> {
    if size < 32 {
        return Err(Error::Argument(format!(
            "synthetic images need size >= 32, got {size}"
        )));
    }
    let (tint, cloud) = class_style(label);
    let s = size as f64;
    let c = (s - 1.0) / 2.0;
    let radius = s * rng.random_range(0.28..0.36);
    let gain = rng.random_range(0.9..1.1);
    let tint: Vec<f64> = tint
        .iter()
        .map(|t| t * gain + rng.random_range(-6.0..6.0))
        .collect();
    let background = rng.random_range(195.0..225.0);
    let pupil = radius * rng.random_range(0.35..0.45);

    // Milky patches: soft bright bumps, more and stronger for staler eyes.
    let n_patches = (cloud * 12.0).round() as usize;
    let patches: Vec<(f64, f64, f64, f64)> = (0..n_patches)
        .map(|_| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let d = radius * rng.random_range(0.0..0.8);
            let w = radius * rng.random_range(0.12..0.3);
            let amp = 90.0 * cloud * rng.random_range(0.6..1.0);
            (c + d * a.cos(), c + d * a.sin(), w, amp)
        })
        .collect();
    let noise_amp = 4.0 + 14.0 * cloud;
    let mut noise = ChaCha8Rng::seed_from_u64(rng.random());

    RasterImage::from_fn(size, size, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let r = (fx - c).hypot(fy - c);
        if r > radius {
            let v = background + noise.random_range(-8.0..8.0);
            return [clamp_u8(v), clamp_u8(v - 4.0), clamp_u8(v - 8.0)];
        }
        let haze: f64 = patches
            .iter()
            .map(|(px, py, w, amp)| {
                amp * (-((fx - px).powi(2) + (fy - py).powi(2)) / (2.0 * w * w)).exp()
            })
            .sum();
        let base = if r <= pupil { 0.35 } else { 1.0 };
        let n = noise.random_range(-noise_amp..noise_amp);
        let px = |t: f64| clamp_u8((t * base + haze + n).min(background - 40.0));
        [px(tint[0]), px(tint[1]), px(tint[2])]
    })
}

/// `per_class` images of each class, deterministic in `seed`.
pub fn generate(
    per_class: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<(FreshnessLabel, RasterImage)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * per_class);
    for label in FreshnessLabel::ALL {
        for _ in 0..per_class {
            out.push((label, eye_image(label, size, &mut rng)?));
        }
    }
    Ok(out)
}

/// Writes a generated dataset as `<root>/<class dir>/<class>_<i>.png`.
pub fn write_dataset(
    root: &Path,
    per_class: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    let mut counters = [0usize; 3];
    for (label, img) in generate(per_class, size, seed)? {
        let dir = root.join(label.dir_name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let i = &mut counters[label.index()];
        let path = dir.join(format!("{}_{:04}.png", label.dir_name(), *i));
        *i += 1;
        img.save_png(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let a = generate(2, 64, 9).unwrap();
        let b = generate(2, 64, 9).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.0 == y.0 && x.1 == y.1));
        let c = generate(2, 64, 10).unwrap();
        assert_ne!(a[0].1, c[0].1);
    }

    #[test]
    fn disc_is_darker_than_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for label in FreshnessLabel::ALL {
            let img = eye_image(label, 96, &mut rng).unwrap();
            let g = |x: usize, y: usize| img.pixel(x, y).iter().map(|v| *v as f64).sum::<f64>();
            assert!(g(48, 48) + 60.0 < g(2, 2), "{label}");
        }
    }

    #[test]
    fn specular_blobs_are_white() {
        let scene = DiscScene {
            specular: true,
            ..DiscScene::new(224, 50.0)
        };
        let img = scene.render().unwrap();
        let (bx, by) = scene.specular_centers()[0];
        assert_eq!(
            img.pixel(bx.round() as usize, by.round() as usize),
            [255; 3]
        );
        assert_eq!(img.pixel(0, 0), [210; 3]);
    }
}
