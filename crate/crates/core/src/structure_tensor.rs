//! Structure tensor features and filter-bank bucket selection.
//!
//! Gradients are taken with the 2x2 stencil in 45-degree rotated
//! coordinates, which places both components at the same half-pixel
//! location. Outer products are rotated back to image axes, averaged from
//! the four half-grid points around each pixel center, then smoothed with a
//! Gaussian of standard deviation `rho`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::par;
use crate::scalar::Scalar;
use crate::spatial_ops::gaussian_blur_plane_into;

/// Per-pixel local geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureTriple {
    /// Angle of the dominant eigenvector (gradient direction) in `[0, pi)`.
    pub orientation: f64,
    /// Square root of the dominant eigenvalue.
    pub strength: f64,
    /// `(sqrt(l1) - sqrt(l2)) / (sqrt(l1) + sqrt(l2))`, 0 when both vanish.
    pub coherence: f64,
}

/// Quantization of [`FeatureTriple`]s into bucket indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub orientation_bins: usize,
    pub strength_bins: usize,
    pub coherence_bins: usize,
    /// Ascending, `strength_bins - 1` entries.
    pub strength_thresholds: Vec<f64>,
    /// Ascending, `coherence_bins - 1` entries.
    pub coherence_thresholds: Vec<f64>,
    /// Structure tensor smoothing, pixels.
    pub rho: f64,
}

pub const DEFAULT_RHO: f64 = 2.0;

impl QuantizerSpec {
    /// Uniform coherence thresholds and evenly spaced placeholder strength
    /// thresholds on `(0, 0.1)`; training replaces the latter with quantiles.
    pub fn new(orientation_bins: usize, strength_bins: usize, coherence_bins: usize, rho: f64) -> Self {
        let strength_thresholds = (1..strength_bins)
            .map(|k| 0.1 * k as f64 / strength_bins as f64)
            .collect();
        Self {
            orientation_bins,
            strength_bins,
            coherence_bins,
            strength_thresholds,
            coherence_thresholds: uniform_thresholds(coherence_bins),
            rho,
        }
    }

    pub fn bucket_count(&self) -> usize {
        self.orientation_bins * self.strength_bins * self.coherence_bins
    }

    pub fn validate(&self) -> Result<()> {
        if self.orientation_bins == 0 || self.strength_bins == 0 || self.coherence_bins == 0 {
            return Err(Error::invalid("quantizer bin counts must be >= 1"));
        }
        if self.strength_thresholds.len() + 1 != self.strength_bins
            || self.coherence_thresholds.len() + 1 != self.coherence_bins
        {
            return Err(Error::invalid("quantizer needs bins - 1 thresholds per feature"));
        }
        for t in [&self.strength_thresholds, &self.coherence_thresholds] {
            if t.iter().any(|v| !v.is_finite()) || t.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::invalid("quantizer thresholds must be strictly ascending"));
            }
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::invalid("structure tensor rho must be >= 0"));
        }
        Ok(())
    }

    /// Bucket index `o + O * (s + S * c)`.
    #[inline]
    pub fn select_bucket(&self, f: &FeatureTriple) -> usize {
        let o_bins = self.orientation_bins;
        let mut o = (f.orientation / PI * o_bins as f64).floor();
        if !o.is_finite() {
            o = 0.0;
        }
        let o = (o as i64).rem_euclid(o_bins as i64) as usize;
        let s = self.strength_thresholds.partition_point(|&t| t <= f.strength);
        let c = self.coherence_thresholds.partition_point(|&t| t <= f.coherence);
        o + o_bins * (s + self.strength_bins * c)
    }

    /// Inverse of [`select_bucket`](Self::select_bucket): `(o, s, c)`.
    pub fn bucket_coords(&self, k: usize) -> (usize, usize, usize) {
        let o = k % self.orientation_bins;
        let rest = k / self.orientation_bins;
        (o, rest % self.strength_bins, rest / self.strength_bins)
    }
}

/// `bins - 1` thresholds evenly spaced on `(0, 1)`.
pub fn uniform_thresholds(bins: usize) -> Vec<f64> {
    (1..bins).map(|k| k as f64 / bins as f64).collect()
}

/// Smoothed tensor components per pixel: `a = Jxx`, `b = Jxy`, `c = Jyy`.
#[derive(Clone, Debug)]
pub struct TensorField<T> {
    pub width: usize,
    pub height: usize,
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> TensorField<T> {
    pub fn features_at(&self, i: usize) -> FeatureTriple {
        eigen_features(self.a[i].as_f64(), self.b[i].as_f64(), self.c[i].as_f64())
    }
}

fn require_gray<T: Scalar>(img: &Image<T>) -> Result<()> {
    if img.channels() != 1 {
        return Err(Error::invalid("structure tensor needs a single-channel image"));
    }
    if img.width() < 2 || img.height() < 2 {
        return Err(Error::invalid("structure tensor needs at least a 2x2 image"));
    }
    Ok(())
}

/// Differences along the rotated axes at half-pixel positions.
///
/// `g1[x, y] = (u(x+1, y) - u(x, y+1)) / sqrt 2` and
/// `g2[x, y] = (u(x+1, y+1) - u(x, y)) / sqrt 2`, valid for
/// `x < width - 1`, `y < height - 1`; the last row and column replicate.
pub fn rotated_gradients<T: Scalar>(img: &Image<T>) -> Result<(Vec<T>, Vec<T>)> {
    require_gray(img)?;
    let (w, h) = (img.width(), img.height());
    let u = img.plane(0);
    let s = T::of(FRAC_1_SQRT_2);
    let mut g1 = vec![T::zero(); w * h];
    let mut g2 = vec![T::zero(); w * h];
    for y in 0..h {
        let ys = y.min(h - 2);
        for x in 0..w {
            let xs = x.min(w - 2);
            let (p00, p10) = (u[ys * w + xs], u[ys * w + xs + 1]);
            let (p01, p11) = (u[(ys + 1) * w + xs], u[(ys + 1) * w + xs + 1]);
            g1[y * w + x] = (p10 - p01) * s;
            g2[y * w + x] = (p11 - p00) * s;
        }
    }
    Ok((g1, g2))
}

/// Reusable buffers for [`select_buckets_into`] and friends.
#[derive(Clone, Debug, Default)]
pub struct TensorWorkspace<T> {
    prod: [Vec<T>; 3],
    smooth: [Vec<T>; 3],
}

impl<T: Scalar> TensorWorkspace<T> {
    pub fn new() -> Self {
        Self {
            prod: [Vec::new(), Vec::new(), Vec::new()],
            smooth: [Vec::new(), Vec::new(), Vec::new()],
        }
    }

    /// Leaves the smoothed components in `self.smooth`.
    fn compute(&mut self, img: &Image<T>, rho: f64) -> Result<()> {
        require_gray(img)?;
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::invalid(format!("rho must be >= 0, got {rho}")));
        }
        let (w, h) = (img.width(), img.height());
        for v in self.prod.iter_mut().chain(self.smooth.iter_mut()) {
            v.resize(w * h, T::zero());
        }
        let u = img.plane(0);
        let s = T::of(FRAC_1_SQRT_2);
        // half-grid outer products in image axes; the last row and column
        // replicate
        let [pxx, pxy, pyy] = &mut self.prod;
        for y in 0..h {
            let ys = y.min(h - 2);
            for x in 0..w {
                let xs = x.min(w - 2);
                let (p00, p10) = (u[ys * w + xs], u[ys * w + xs + 1]);
                let (p01, p11) = (u[(ys + 1) * w + xs], u[(ys + 1) * w + xs + 1]);
                let g1 = (p10 - p01) * s;
                let g2 = (p11 - p00) * s;
                let gx = (g1 + g2) * s;
                let gy = (g2 - g1) * s;
                let i = y * w + x;
                pxx[i] = gx * gx;
                pxy[i] = gx * gy;
                pyy[i] = gy * gy;
            }
        }
        let quarter = T::of(0.25);
        let (vw, vh) = (w - 1, h - 1);
        for (plane, out) in self.prod.iter().zip(self.smooth.iter_mut()) {
            par::for_rows(out, w, |y, row| {
                let y0 = y.saturating_sub(1).min(vh - 1);
                let y1 = y.min(vh - 1);
                for (x, o) in row.iter_mut().enumerate() {
                    let x0 = x.saturating_sub(1).min(vw - 1);
                    let x1 = x.min(vw - 1);
                    *o = (plane[y0 * w + x0] + plane[y0 * w + x1] + plane[y1 * w + x0]
                        + plane[y1 * w + x1])
                        * quarter;
                }
            });
        }
        for (centered, out) in self.smooth.iter().zip(self.prod.iter_mut()) {
            gaussian_blur_plane_into(centered, w, h, rho, out);
        }
        std::mem::swap(&mut self.prod, &mut self.smooth);
        Ok(())
    }
}

/// Gaussian-smoothed structure tensor.
pub fn smoothed_tensor<T: Scalar>(img: &Image<T>, rho: f64) -> Result<TensorField<T>> {
    let mut ws = TensorWorkspace::new();
    ws.compute(img, rho)?;
    let [a, b, c] = ws.smooth;
    Ok(TensorField {
        width: img.width(),
        height: img.height(),
        a,
        b,
        c,
    })
}

/// Eigen-analysis of the symmetric matrix `[[a, b], [b, c]]`.
pub fn eigen_features(a: f64, b: f64, c: f64) -> FeatureTriple {
    let half_trace = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let l1 = (half_trace + disc).max(0.0);
    let l2 = (half_trace - disc).max(0.0);
    let mut orientation = 0.5 * (2.0 * b).atan2(a - c);
    if orientation < 0.0 {
        orientation += PI;
    }
    if orientation >= PI {
        orientation -= PI;
    }
    let (s1, s2) = (l1.sqrt(), l2.sqrt());
    let coherence = if s1 + s2 > 0.0 {
        ((s1 - s2) / (s1 + s2)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    FeatureTriple {
        orientation,
        strength: s1,
        coherence,
    }
}

/// Per-pixel features of a single-channel image.
pub fn features<T: Scalar>(img: &Image<T>, rho: f64) -> Result<Vec<FeatureTriple>> {
    let field = smoothed_tensor(img, rho)?;
    Ok((0..img.pixel_count()).map(|i| field.features_at(i)).collect())
}

/// Per-pixel bucket indices of a single-channel image.
pub fn select_buckets<T: Scalar>(img: &Image<T>, q: &QuantizerSpec) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    select_buckets_into(img, q, &mut TensorWorkspace::new(), &mut out)?;
    Ok(out)
}

/// [`select_buckets`] with caller-owned buffers; `out` is resized to the
/// pixel count.
pub fn select_buckets_into<T: Scalar>(
    img: &Image<T>,
    q: &QuantizerSpec,
    ws: &mut TensorWorkspace<T>,
    out: &mut Vec<u32>,
) -> Result<()> {
    ws.compute(img, q.rho)?;
    let w = img.width();
    out.resize(img.pixel_count(), 0);
    let [a, b, c] = &ws.smooth;
    par::for_rows(out, w, |y, row| {
        let base = y * w;
        for (x, o) in row.iter_mut().enumerate() {
            let i = base + x;
            let f = eigen_features(a[i].as_f64(), b[i].as_f64(), c[i].as_f64());
            *o = q.select_bucket(&f) as u32;
        }
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img_from(w: usize, h: usize, f: impl Fn(f64, f64) -> f64) -> Image<f64> {
        Image::from_fn(w, h, 1, |x, y, _| f(x as f64, y as f64)).unwrap()
    }

    fn noise(seed: u64, w: usize, h: usize) -> Image<f64> {
        let mut s = seed.wrapping_add(0x2545_F491_4F6C_DD1D);
        Image::from_fn(w, h, 1, |_, _, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % 65_536) as f64 / 65_536.0
        })
        .unwrap()
    }

    #[test]
    fn gradient_stencil_on_ramps() {
        let c = img_from(5, 4, |_, _| 0.7);
        let (g1, g2) = rotated_gradients(&c).unwrap();
        assert!(g1.iter().chain(&g2).all(|&v| v == 0.0));
        let rx = img_from(6, 5, |x, _| x);
        let (g1, g2) = rotated_gradients(&rx).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - FRAC_1_SQRT_2).abs() < 1e-15 && (b - FRAC_1_SQRT_2).abs() < 1e-15);
            assert!(((a * a + b * b).sqrt() - 1.0).abs() < 1e-15);
        }
        let ry = img_from(6, 5, |_, y| y);
        let (g1, g2) = rotated_gradients(&ry).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a + FRAC_1_SQRT_2).abs() < 1e-15 && (b - FRAC_1_SQRT_2).abs() < 1e-15);
        }
        assert!(rotated_gradients(&img_from(1, 5, |_, _| 0.0)).is_err());
        let rgb = Image::filled(3, 3, 3, 0.0f64).unwrap();
        assert!(rotated_gradients(&rgb).is_err());
    }

    #[test]
    fn tensor_of_constant_and_ramp() {
        let t = smoothed_tensor(&img_from(8, 8, |_, _| 0.2), 2.0).unwrap();
        assert!(t.a.iter().chain(&t.b).chain(&t.c).all(|&v| v == 0.0));
        let t = smoothed_tensor(&img_from(20, 20, |x, _| x), 1.5).unwrap();
        for i in 0..400 {
            assert!((t.a[i] - 1.0).abs() < 1e-12);
            assert!(t.b[i].abs() < 1e-12 && t.c[i].abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_is_psd_and_trace_matches_smoothed_magnitude() {
        let img = noise(4, 31, 23);
        let rho = 1.7;
        let t = smoothed_tensor(&img, rho).unwrap();
        // direct route: |g|^2 on the half grid (rotation-invariant), averaged to
        // centers, then blurred
        let (g1, g2) = rotated_gradients(&img).unwrap();
        let (w, h) = (31, 23);
        let mag: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a * a + b * b).collect();
        let mut centered = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let xs = [x.saturating_sub(1).min(w - 2), x.min(w - 2)];
                let ys = [y.saturating_sub(1).min(h - 2), y.min(h - 2)];
                let mut s = 0.0;
                for yy in ys {
                    for xx in xs {
                        s += mag[yy * w + xx];
                    }
                }
                centered[y * w + x] = s / 4.0;
            }
        }
        let expected = crate::spatial_ops::gaussian_blur_plane(&centered, w, h, rho);
        for i in 0..w * h {
            assert!((t.a[i] + t.c[i] - expected[i]).abs() < 1e-6);
            assert!(t.a[i] >= 0.0 && t.c[i] >= 0.0);
            assert!(t.a[i] * t.c[i] - t.b[i] * t.b[i] >= -1e-9);
        }
    }

    #[test]
    fn eigen_examples() {
        let z = eigen_features(0.0, 0.0, 0.0);
        assert_eq!((z.orientation, z.strength, z.coherence), (0.0, 0.0, 0.0));
        let r1 = eigen_features(1.0, 0.0, 0.0);
        assert_eq!((r1.orientation, r1.strength, r1.coherence), (0.0, 1.0, 1.0));
        let d = eigen_features(4.0, 0.0, 1.0);
        assert!((d.strength - 2.0).abs() < 1e-15);
        assert!((d.coherence - 1.0 / 3.0).abs() < 1e-15);
        let v = eigen_features(0.0, 0.0, 1.0);
        assert!((v.orientation - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn bucket_examples() {
        let q = QuantizerSpec::new(16, 5, 3, 2.0);
        assert_eq!(q.bucket_count(), 240);
        let zero = FeatureTriple {
            orientation: 0.0,
            strength: 0.0,
            coherence: 0.0,
        };
        assert_eq!(q.select_bucket(&zero), 0);
        let top = FeatureTriple {
            orientation: PI - 1e-12,
            ..zero
        };
        assert_eq!(q.select_bucket(&top), 15);
        let wrap = FeatureTriple {
            orientation: PI,
            ..zero
        };
        assert_eq!(q.select_bucket(&wrap), 0);
        // exactly on a threshold goes to the upper bin
        let on = FeatureTriple {
            strength: q.strength_thresholds[1],
            coherence: q.coherence_thresholds[0],
            ..zero
        };
        assert_eq!(q.bucket_coords(q.select_bucket(&on)), (0, 2, 1));
    }

    #[test]
    fn quantizer_validation() {
        let mut q = QuantizerSpec::new(8, 3, 3, 1.0);
        assert!(q.validate().is_ok());
        q.strength_thresholds = vec![0.2, 0.1];
        assert!(q.validate().is_err());
        let mut q = QuantizerSpec::new(8, 3, 3, 1.0);
        q.coherence_thresholds.pop();
        assert!(q.validate().is_err());
        let q = QuantizerSpec::new(0, 3, 3, 1.0);
        assert!(q.validate().is_err());
    }

    fn linear_scan_bucket(q: &QuantizerSpec, f: &FeatureTriple) -> usize {
        let o = ((f.orientation / PI * q.orientation_bins as f64).floor() as usize) % q.orientation_bins;
        let mut s = 0;
        for &t in &q.strength_thresholds {
            if f.strength >= t {
                s += 1;
            }
        }
        let mut c = 0;
        for &t in &q.coherence_thresholds {
            if f.coherence >= t {
                c += 1;
            }
        }
        o + q.orientation_bins * (s + q.strength_bins * c)
    }

    proptest! {
        #[test]
        fn bucket_matches_linear_scan(o in 0.0f64..PI, s in 0.0f64..0.2, c in 0.0f64..=1.0,
                                      ob in 1usize..30, sb in 1usize..6, cb in 1usize..5) {
            let q = QuantizerSpec::new(ob, sb, cb, 2.0);
            let f = FeatureTriple { orientation: o, strength: s, coherence: c };
            let k = q.select_bucket(&f);
            prop_assert!(k < q.bucket_count());
            prop_assert_eq!(k, linear_scan_bucket(&q, &f));
        }

        #[test]
        fn bucket_is_total(o in proptest::num::f64::ANY, s in proptest::num::f64::ANY, c in proptest::num::f64::ANY) {
            let q = QuantizerSpec::new(16, 5, 3, 2.0);
            let f = FeatureTriple { orientation: o, strength: s, coherence: c };
            prop_assert!(q.select_bucket(&f) < q.bucket_count());
        }

        #[test]
        fn features_scale_with_contrast(seed in 0u64..500, alpha in 0.1f64..5.0) {
            let img = noise(seed, 16, 16);
            let scaled = img.map(|v| v * alpha);
            let f0 = features(&img, 1.0).unwrap();
            let f1 = features(&scaled, 1.0).unwrap();
            for (a, b) in f0.iter().zip(&f1) {
                prop_assert!((b.strength - alpha * a.strength).abs() < 1e-6 * (1.0 + a.strength * alpha));
                prop_assert!((a.coherence - b.coherence).abs() < 1e-6);
                let d = (a.orientation - b.orientation).abs();
                prop_assert!(d.min(PI - d) < 1e-6);
            }
        }
    }

    #[test]
    fn quarter_turn_shifts_orientation() {
        let img = noise(21, 40, 40);
        let f0 = features(&img, 2.0).unwrap();
        let rot = img.rotate90();
        let f1 = features(&rot, 2.0).unwrap();
        // rotated pixel (x', y') = (y, W-1-x) for a ccw turn
        let w = 40;
        for y in 8..32 {
            for x in 8..32 {
                let a = f0[y * w + x];
                let b = f1[(w - 1 - x) * w + y];
                assert!((a.strength - b.strength).abs() < 1e-4);
                assert!((a.coherence - b.coherence).abs() < 1e-4);
                let d = (a.orientation + PI / 2.0 - b.orientation).rem_euclid(PI);
                assert!(d.min(PI - d) < 1e-4, "{} vs {}", a.orientation, b.orientation);
            }
        }
    }
}
