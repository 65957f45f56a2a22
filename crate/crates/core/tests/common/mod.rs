//! Helpers shared by the integration tests: seeded images, photo loading
//! and independent re-implementations used as oracles.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use styler::structure_tensor::QuantizerSpec;
use styler::{io, BladeModel64, Image64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image64 {
    Image64::from_fn(w, h, 1, |_, _, _| rng.random::<f64>()).unwrap()
}

/// Smooth random field: a few random sinusoids plus mild noise.
pub fn textured(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image64 {
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(0.0..6.3),
                rng.random_range(0.05..0.2),
            )
        })
        .collect();
    Image64::from_fn(w, h, 1, |x, y, _| {
        let mut v = 0.5;
        for &(fx, fy, ph, a) in &waves {
            v += a * (fx * x as f64 + fy * y as f64 + ph).sin();
        }
        (v + rng.random_range(-0.03..0.03)).clamp(0.0, 1.0)
    })
    .unwrap()
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// Luma of every PNG in `tests/data/photos/<set>`, sorted by file name.
pub fn photos(set: &str) -> Vec<(String, Image64)> {
    let dir = data_dir().join("photos").join(set);
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, io::load_luma(&p).unwrap())
        })
        .collect()
}

fn clamp_at(u: &[f64], w: usize, h: usize, x: isize, y: isize) -> f64 {
    u[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize]
}

/// Direct 2-D Gaussian smoothing with replicate padding.
pub fn naive_gaussian(u: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return u.to_vec();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let g: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = g.iter().sum::<f64>().powi(2);
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for j in -r..=r {
                for i in -r..=r {
                    acc += g[(i + r) as usize] * g[(j + r) as usize] * clamp_at(u, w, h, x + i, y + j);
                }
            }
            out[y as usize * w + x as usize] = acc / norm;
        }
    }
    out
}

/// Structure tensor bucket per pixel, computed from scratch: gradients on
/// the half-pixel grid, averaged to pixel centers, Gaussian smoothed, and
/// eigen-decomposed with nalgebra.
pub fn naive_buckets(img: &Image64, q: &QuantizerSpec) -> Vec<usize> {
    let (w, h) = (img.width(), img.height());
    let u = img.plane(0);
    let at = |x: usize, y: usize| u[y * w + x];
    let mut planes = [vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]];
    for y in 0..h {
        for x in 0..w {
            let mut t = [0.0; 3];
            for cy in [y as isize - 1, y as isize] {
                for cx in [x as isize - 1, x as isize] {
                    let cx = cx.clamp(0, w as isize - 2) as usize;
                    let cy = cy.clamp(0, h as isize - 2) as usize;
                    let gx = 0.5 * (at(cx + 1, cy) + at(cx + 1, cy + 1) - at(cx, cy) - at(cx, cy + 1));
                    let gy = 0.5 * (at(cx, cy + 1) + at(cx + 1, cy + 1) - at(cx, cy) - at(cx + 1, cy));
                    t[0] += 0.25 * gx * gx;
                    t[1] += 0.25 * gx * gy;
                    t[2] += 0.25 * gy * gy;
                }
            }
            for k in 0..3 {
                planes[k][y * w + x] = t[k];
            }
        }
    }
    let [a, b, c] = planes.map(|p| naive_gaussian(&p, w, h, q.rho));
    (0..w * h)
        .map(|i| {
            let m = nalgebra::Matrix2::new(a[i], b[i], b[i], c[i]);
            let e = m.symmetric_eigen();
            let (k1, k2) = if e.eigenvalues[0] >= e.eigenvalues[1] { (0, 1) } else { (1, 0) };
            let l1 = e.eigenvalues[k1].max(0.0);
            let l2 = e.eigenvalues[k2].max(0.0);
            let v = e.eigenvectors.column(k1);
            let theta = v[1].atan2(v[0]).rem_euclid(PI);
            let (s1, s2) = (l1.sqrt(), l2.sqrt());
            let coh = if s1 + s2 > 0.0 { (s1 - s2) / (s1 + s2) } else { 0.0 };
            let o = ((theta / PI * q.orientation_bins as f64).floor() as usize) % q.orientation_bins;
            let s = q.strength_thresholds.iter().filter(|&&t| t <= s1).count();
            let cc = q.coherence_thresholds.iter().filter(|&&t| t <= coh).count();
            o + q.orientation_bins * (s + q.strength_bins * cc)
        })
        .collect()
}

/// Double-loop filtering with replicate padding. Returns the output and,
/// per pixel, the sum of `|h_j z_j|` for relative error bounds.
pub fn naive_filter(img: &Image64, model: &BladeModel64, buckets: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width(), img.height());
    let side = model.side() as isize;
    let r = side / 2;
    let u = img.plane(0);
    let mut out = vec![0.0; w * h];
    let mut mag = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let f = model.filter(buckets[i]);
            for dy in 0..side {
                for dx in 0..side {
                    let t = f[(dy * side + dx) as usize] * clamp_at(u, w, h, x + dx - r, y + dy - r);
                    out[i] += t;
                    mag[i] += t.abs();
                }
            }
        }
    }
    (out, mag)
}

/// A model with random thresholds and coefficients.
pub fn random_model(rng: &mut ChaCha8Rng, side: usize, o: usize, s: usize, c: usize) -> BladeModel64 {
    let mut q = QuantizerSpec::new(o, s, c, rng.random_range(0.5..2.5));
    let mut st: Vec<f64> = (1..s).map(|_| rng.random_range(0.02..0.4)).collect();
    st.sort_by(f64::total_cmp);
    st.dedup();
    while st.len() + 1 < s {
        let last = st.last().copied().unwrap_or(0.02);
        st.push(last + 0.01);
    }
    q.strength_thresholds = st;
    let k = q.bucket_count();
    let filters = (0..k * side * side).map(|_| rng.random_range(-1.0..1.0)).collect();
    BladeModel64::new(side, q, filters, 1).unwrap()
}

/// Forward-difference total variation, both isotropic and anisotropic.
pub fn total_variation(img: &Image64) -> (f64, f64) {
    let (w, h) = (img.width(), img.height());
    let u = img.plane(0);
    let (mut iso, mut aniso) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let c = u[y * w + x];
            let dx = if x + 1 < w { u[y * w + x + 1] - c } else { 0.0 };
            let dy = if y + 1 < h { u[(y + 1) * w + x] - c } else { 0.0 };
            iso += (dx * dx + dy * dy).sqrt();
            aniso += dx.abs() + dy.abs();
        }
    }
    (iso, aniso)
}
