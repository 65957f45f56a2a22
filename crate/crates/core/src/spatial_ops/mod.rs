//! Convolution and texture-synthesis blocks.

mod halftone;
mod pattern;

pub use halftone::{halftone, HalftoneMode};
pub use pattern::{default_hatch_textures, load_textures, pattern_fill, Texture};

use crate::color::luma_plane;
use crate::error::{Error, Result};
use crate::image::{Chroma, Image};
use crate::par;
use crate::scalar::Scalar;

/// Sampled Gaussian truncated at `ceil(3 sigma)` and normalized to unit sum.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Horizontal convolution of columns `x0..x0 + out.len()` of one row,
/// replicate padding.
fn convolve_row_span<T: Scalar>(src: &[T], x0: usize, kernel: &[T], out: &mut [T]) {
    let w = src.len() as isize;
    let r = kernel.len() / 2;
    let at = |x: usize| {
        let mut acc = T::zero();
        for (k, kv) in kernel.iter().enumerate() {
            let xi = (x as isize + k as isize - r as isize).clamp(0, w - 1);
            acc += *kv * src[xi as usize];
        }
        acc
    };
    let x1 = x0 + out.len();
    // columns whose whole window lies inside the row
    let lo = r.max(x0).min(x1);
    let hi = (src.len().saturating_sub(r)).clamp(lo, x1);
    if lo < hi {
        let inner = &mut out[lo - x0..hi - x0];
        inner.fill(T::zero());
        // one pass per tap keeps the inner loop contiguous
        for (k, kv) in kernel.iter().enumerate() {
            let s = &src[lo + k - r..hi + k - r];
            for (o, v) in inner.iter_mut().zip(s) {
                *o += *kv * *v;
            }
        }
    }
    for x in (x0..lo).chain(hi..x1) {
        out[x - x0] = at(x);
    }
}

/// Separable Gaussian blur of a single plane.
pub fn gaussian_blur_plane<T: Scalar>(plane: &[T], w: usize, h: usize, sigma: f64) -> Vec<T> {
    let mut out = vec![T::zero(); w * h];
    gaussian_blur_plane_into(plane, w, h, sigma, &mut out);
    out
}

/// [`gaussian_blur_plane`] writing into `out` (length `w * h`).
///
/// Works on tiles so the horizontal pass result never leaves cache; each
/// output is still the row pass followed by the column pass, summed in tap
/// order.
pub fn gaussian_blur_plane_into<T: Scalar>(plane: &[T], w: usize, h: usize, sigma: f64, out: &mut [T]) {
    const BAND: usize = 64;
    const STRIP: usize = 128;
    assert_eq!(plane.len(), w * h, "plane size");
    assert_eq!(out.len(), w * h, "output size");
    if sigma <= 0.0 {
        out.copy_from_slice(plane);
        return;
    }
    let kernel: Vec<T> = gaussian_kernel(sigma).into_iter().map(T::of).collect();
    let r = kernel.len() / 2;
    par::for_bands(out, w, BAND, |y0, rows| {
        let band = rows.len() / w;
        let span = band + 2 * r;
        let mut tile = vec![T::zero(); span * STRIP];
        for x0 in (0..w).step_by(STRIP) {
            let x1 = (x0 + STRIP).min(w);
            let sw = x1 - x0;
            // tile row j holds the row pass of source row y0 + j - r
            for j in 0..span {
                let yi = (y0 as isize + j as isize - r as isize).clamp(0, h as isize - 1) as usize;
                convolve_row_span(&plane[yi * w..(yi + 1) * w], x0, &kernel, &mut tile[j * sw..(j + 1) * sw]);
            }
            for (dy, row) in rows.chunks_mut(w).enumerate() {
                let row = &mut row[x0..x1];
                row.fill(T::zero());
                for (k, kv) in kernel.iter().enumerate() {
                    let src = &tile[(dy + k) * sw..(dy + k + 1) * sw];
                    for (o, s) in row.iter_mut().zip(src) {
                        *o += *kv * *s;
                    }
                }
            }
        }
    });
}

/// Gaussian smoothing of every channel.
pub fn gaussian_blur<T: Scalar>(img: &Image<T>, sigma: f64) -> Result<Image<T>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(img.data().len());
    for c in 0..img.channels() {
        data.extend(gaussian_blur_plane(img.plane(c), w, h, sigma));
    }
    Ok(img.with_data(data))
}

/// Sobel gradient magnitude of the luma, clipped to `[0, 1]`.
pub fn sobel<T: Scalar>(img: &Image<T>) -> Result<Image<T>> {
    let (w, h) = (img.width(), img.height());
    let luma = luma_plane(img);
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        luma[yc * w + xc]
    };
    let two = T::of(2.0);
    let mut out = vec![T::zero(); w * h];
    par::for_rows(&mut out, w, |y, row| {
        let y = y as isize;
        for (x, o) in row.iter_mut().enumerate() {
            let x = x as isize;
            let gx = (at(x + 1, y - 1) + two * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + two * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + two * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + two * at(x, y - 1) + at(x + 1, y - 1));
            *o = (gx * gx + gy * gy).sqrt().unit_clamp();
        }
    });
    let chroma: Option<Chroma<T>> = if img.channels() == 1 {
        img.stashed_chroma().cloned()
    } else {
        None
    };
    Ok(Image::from_parts(w, h, 1, out, chroma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(seed: u64, w: usize, h: usize) -> Image<f64> {
        let mut s = seed ^ 0x9E37_79B9_7F4A_7C15;
        Image::from_fn(w, h, 1, |_, _, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % 10_000) as f64 / 10_000.0
        })
        .unwrap()
    }

    #[test]
    fn kernel_shape() {
        let k = gaussian_kernel(1.0);
        assert_eq!(k.len(), 7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_kernel(0.4).len(), 5);
        assert_eq!(gaussian_kernel(0.0), vec![1.0]);
    }

    #[test]
    fn blur_identity_and_constant() {
        let img = noise(1, 9, 7);
        assert_eq!(gaussian_blur(&img, 0.0).unwrap(), img);
        let c = Image::filled(12, 9, 3, 0.61f64).unwrap();
        let b = gaussian_blur(&c, 2.5).unwrap();
        assert!(b.data().iter().all(|v| (v - 0.61).abs() < 1e-14));
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn blur_impulse_matches_sampled_gaussian() {
        let (w, h) = (21, 21);
        let mut img = Image::filled(w, h, 1, 0.0f64).unwrap();
        img.set(10, 10, 0, 1.0);
        let out = gaussian_blur(&img, 1.0).unwrap();
        // direct evaluation of the normalized separable kernel
        let g: Vec<f64> = (-3..=3).map(|i: i32| (-(i * i) as f64 / 2.0).exp()).collect();
        let s: f64 = g.iter().sum();
        for dy in -3i32..=3 {
            for dx in -3i32..=3 {
                let expected = g[(dx + 3) as usize] * g[(dy + 3) as usize] / (s * s);
                let got = out.get((10 + dx) as usize, (10 + dy) as usize, 0);
                assert!((got - expected).abs() < 1e-15);
            }
        }
        assert_eq!(out.get(10, 14, 0), 0.0);
        assert!((out.data().iter().sum::<f64>() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn blur_preserves_mean() {
        let img = noise(7, 64, 64);
        let out = gaussian_blur(&img, 1.5).unwrap();
        assert!((img.mean() - out.mean()).abs() < 1e-3);
        // interior-dominated case
        let big = noise(8, 400, 400);
        let out = gaussian_blur(&big, 1.0).unwrap();
        assert!((big.mean() - out.mean()).abs() < 1e-4);
    }

    #[test]
    fn sobel_constant_and_ramp() {
        let c = Image::filled(6, 6, 3, 0.3f64).unwrap();
        let out = sobel(&c).unwrap();
        assert_eq!(out.channels(), 1);
        assert!(out.data().iter().all(|&v| v == 0.0));
        let s = 0.01;
        let ramp = Image::from_fn(10, 8, 1, |x, _, _| x as f64 * s).unwrap();
        let out = sobel(&ramp).unwrap();
        for y in 1..7 {
            for x in 1..9 {
                assert!((out.get(x, y, 0) - 8.0 * s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sobel_matches_bruteforce_convolution() {
        let patch = noise(3, 5, 5);
        let out = sobel(&patch).unwrap();
        let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
        for y in 0..5isize {
            for x in 0..5isize {
                let (mut gx, mut gy) = (0.0, 0.0);
                for j in 0..3isize {
                    for i in 0..3isize {
                        let v = patch.sample_clamped(x + i - 1, y + j - 1, 0);
                        gx += kx[j as usize][i as usize] * v;
                        gy += ky[j as usize][i as usize] * v;
                    }
                }
                let expected = (gx * gx + gy * gy).sqrt().clamp(0.0, 1.0);
                assert!((out.get(x as usize, y as usize, 0) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sobel_rotation_equivariant() {
        let img = noise(5, 12, 9);
        let a = sobel(&img.rotate90()).unwrap();
        let b = sobel(&img).unwrap().rotate90();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
