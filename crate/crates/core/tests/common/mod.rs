//! Straightforward reference implementations used to cross-check the
//! optimised code paths. They favour obviousness over speed.

#![allow(dead_code, clippy::needless_range_loop)]

use eyefresh_core::ChannelPlane;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ChannelPlane {
    ChannelPlane::from_fn(w, h, |_, _| f64::from(rng.random_range(0u8..=255))).unwrap()
}

/// Integer plane with few distinct levels, so ties and flat regions are common.
pub fn coarse_plane(rng: &mut ChaCha8Rng, w: usize, h: usize, levels: u32) -> ChannelPlane {
    let step = 255 / (levels - 1).max(1);
    ChannelPlane::from_fn(w, h, |_, _| f64::from(rng.random_range(0..levels) * step)).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12) || (a - b).abs() < 1e-15
}

/// GLCM by enumerating every ordered pixel pair and keeping those whose
/// displacement is `+offset` or `-offset`. Returns the normalised matrix.
pub fn glcm_by_pairs(plane: &ChannelPlane, offset: (isize, isize)) -> Vec<Vec<f64>> {
    let (w, h) = (plane.width(), plane.height());
    let coords: Vec<(isize, isize)> = (0..h as isize)
        .flat_map(|y| (0..w as isize).map(move |x| (x, y)))
        .collect();
    let mut p = vec![vec![0.0; 256]; 256];
    let mut total = 0.0;
    for &(x0, y0) in &coords {
        for &(x1, y1) in &coords {
            let d = (x1 - x0, y1 - y0);
            if d == offset || d == (-offset.0, -offset.1) {
                let i = plane.get(x0 as usize, y0 as usize) as usize;
                let j = plane.get(x1 as usize, y1 as usize) as usize;
                p[i][j] += 1.0;
                total += 1.0;
            }
        }
    }
    for row in &mut p {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    p
}

/// Contrast, homogeneity, angular second moment and correlation from the
/// textbook formulas, using the row and column marginals.
pub fn haralick_reference(p: &[Vec<f64>]) -> [f64; 4] {
    let n = p.len();
    let px: Vec<f64> = (0..n).map(|i| p[i].iter().sum()).collect();
    let py: Vec<f64> = (0..n).map(|j| (0..n).map(|i| p[i][j]).sum()).collect();
    let mean = |m: &[f64]| m.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>();
    let (mx, my) = (mean(&px), mean(&py));
    let var = |m: &[f64], mu: f64| {
        m.iter()
            .enumerate()
            .map(|(i, v)| (i as f64 - mu).powi(2) * v)
            .sum::<f64>()
    };
    let (vx, vy) = (var(&px, mx), var(&py, my));
    let mut contrast = 0.0;
    let mut homogeneity = 0.0;
    let mut asm = 0.0;
    let mut cov = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = p[i][j];
            let d = i as f64 - j as f64;
            contrast += v * d * d;
            homogeneity += v / (1.0 + d * d);
            asm += v * v;
            cov += (i as f64 - mx) * (j as f64 - my) * v;
        }
    }
    let corr = if vx == 0.0 || vy == 0.0 {
        1.0
    } else {
        cov / (vx * vy).sqrt()
    };
    [contrast, homogeneity, asm, corr]
}

/// Offsets with `y` pointing down: 0, 45, 90 and 135 degrees.
pub fn orientation_offsets(d: isize) -> [(isize, isize); 4] {
    [(d, 0), (d, -d), (0, -d), (-d, -d)]
}

/// 16 GLCM values, feature-major then orientation.
pub fn glcm_reference(plane: &ChannelPlane, d: isize) -> Vec<f64> {
    let per: Vec<[f64; 4]> = orientation_offsets(d)
        .iter()
        .map(|o| haralick_reference(&glcm_by_pairs(plane, *o)))
        .collect();
    (0..4).flat_map(|f| per.iter().map(move |h| h[f])).collect()
}

/// Bilinear sample at a real coordinate with explicit corner weights,
/// returned as a weighted sum of differences from `reference`.
fn bilinear_difference(plane: &ChannelPlane, x: f64, y: f64, reference: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = (x0 + 1).min(plane.width() - 1);
    let y1 = (y0 + 1).min(plane.height() - 1);
    let corners = [
        ((1.0 - fx) * (1.0 - fy), x0, y0),
        (fx * (1.0 - fy), x1, y0),
        ((1.0 - fx) * fy, x0, y1),
        (fx * fy, x1, y1),
    ];
    corners
        .iter()
        .filter(|(w, ..)| *w != 0.0)
        .map(|(w, cx, cy)| w * (plane.get(*cx, *cy) - reference))
        .sum()
}

/// LBP code for one pixel by walking the 8 sample points on the unit circle.
pub fn lbp_code_reference(plane: &ChannelPlane, x: usize, y: usize) -> [bool; 8] {
    let c = plane.get(x, y);
    let mut bits = [false; 8];
    for (p, bit) in bits.iter_mut().enumerate() {
        let theta = std::f64::consts::TAU * p as f64 / 8.0;
        // snap coordinates so axis samples land exactly on pixels
        let dx = (theta.cos() * 1e9).round() / 1e9;
        let dy = -(theta.sin() * 1e9).round() / 1e9;
        *bit = bilinear_difference(plane, x as f64 + dx, y as f64 + dy, c) >= 0.0;
    }
    bits
}

pub fn riu2_reference(bits: &[bool; 8]) -> usize {
    let transitions = (0..8).filter(|&i| bits[i] != bits[(i + 1) % 8]).count();
    if transitions <= 2 {
        bits.iter().filter(|b| **b).count()
    } else {
        9
    }
}

pub fn lbp_reference(plane: &ChannelPlane) -> [f64; 10] {
    let mut counts = [0u64; 10];
    for y in 1..plane.height() - 1 {
        for x in 1..plane.width() - 1 {
            counts[riu2_reference(&lbp_code_reference(plane, x, y))] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    counts.map(|c| c as f64 / total as f64)
}

/// Linear interpolation between closest ranks after a full sort.
pub fn percentile_reference(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Mean, std, skewness, kurtosis, 5th and 6th standardised moments.
pub fn moments_reference(values: &[f64]) -> [f64; 6] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let central = |k: i32| values.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let var = central(2);
    let sd = var.sqrt();
    let std_moment = |k: i32| {
        if var == 0.0 {
            0.0
        } else {
            central(k) / sd.powi(k)
        }
    };
    [
        mean,
        sd,
        std_moment(3),
        std_moment(4),
        std_moment(5),
        std_moment(6),
    ]
}

pub fn entropy_reference(values: &[f64]) -> f64 {
    let mut counts = std::collections::HashMap::new();
    for v in values {
        *counts.entry(v.floor() as i64).or_insert(0usize) += 1;
    }
    let n = values.len() as f64;
    -counts
        .values()
        .map(|c| *c as f64 / n)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// One-level orthonormal Haar transform of the edge-padded plane; mean of
/// the absolute detail coefficients.
pub fn wavelet_reference(plane: &ChannelPlane) -> f64 {
    let (w, h) = (plane.width(), plane.height());
    let (pw, ph) = (w + w % 2, h + h % 2);
    let px = |x: usize, y: usize| plane.get(x.min(w - 1), y.min(h - 1));
    // rows then columns, each pass scaled by 1/sqrt(2)
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut details = Vec::new();
    for by in (0..ph).step_by(2) {
        for bx in (0..pw).step_by(2) {
            let lo_top = s * (px(bx, by) + px(bx + 1, by));
            let hi_top = s * (px(bx, by) - px(bx + 1, by));
            let lo_bot = s * (px(bx, by + 1) + px(bx + 1, by + 1));
            let hi_bot = s * (px(bx, by + 1) - px(bx + 1, by + 1));
            details.push(s * (lo_top - lo_bot)); // vertical detail
            details.push(s * (hi_top + hi_bot)); // horizontal detail
            details.push(s * (hi_top - hi_bot)); // diagonal detail
        }
    }
    details.iter().map(|d| d.abs()).sum::<f64>() / details.len() as f64
}

/// Relative error between two gradient vectors.
pub fn gradient_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
        + numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn central_differences(theta: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = t[i];
            let h = step * orig.abs().max(1.0);
            t[i] = orig + h;
            let up = f(&t);
            t[i] = orig - h;
            let down = f(&t);
            t[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
