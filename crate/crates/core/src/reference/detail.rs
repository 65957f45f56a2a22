//! Single-scale detail control on luma.

use crate::color::on_luma;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;
use crate::spatial_ops::gaussian_blur_plane;

pub const DEFAULT_SIGMA_BASE: f64 = 3.0;

/// `(1 + d) u - d (G * u)` with `d = delta / 100`, not clipped. Operates
/// on a single-channel image.
pub fn detail_control_raw<T: Scalar>(img: &Image<T>, delta: f64, sigma_base: f64) -> Result<Image<T>> {
    if img.channels() != 1 {
        return Err(Error::invalid("raw detail control needs a single-channel image"));
    }
    if !(-100.0..=100.0).contains(&delta) {
        return Err(Error::invalid(format!("detail delta must be in [-100, 100], got {delta}")));
    }
    if !(sigma_base.is_finite() && sigma_base >= 0.0) {
        return Err(Error::invalid("detail base sigma must be >= 0"));
    }
    let (w, h) = (img.width(), img.height());
    let base = gaussian_blur_plane(img.plane(0), w, h, sigma_base);
    let d = T::of(delta / 100.0);
    let gain = T::one() + d;
    let out = img.plane(0).iter().zip(&base).map(|(&u, &b)| gain * u - d * b).collect();
    Ok(img.with_gray_plane(out))
}

/// Detail control on the luma of any image, clipped to `[0, 1]`. Negative
/// `delta` smooths, positive `delta` boosts the residual; `-100` returns
/// the Gaussian base.
pub fn detail_control<T: Scalar>(img: &Image<T>, delta: f64, sigma_base: f64) -> Result<Image<T>> {
    on_luma(img, |g| Ok(detail_control_raw(g, delta, sigma_base)?.map(|v| v.unit_clamp())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial_ops::gaussian_blur;

    fn patch() -> Image<f64> {
        Image::from_fn(17, 13, 1, |x, y, _| 0.2 + 0.6 * (((x * 5 + y * 3) % 7) as f64 / 7.0)).unwrap()
    }

    #[test]
    fn zero_and_full_negative() {
        let img = patch();
        assert_eq!(detail_control(&img, 0.0, 3.0).unwrap(), img);
        assert_eq!(detail_control(&img, -100.0, 3.0).unwrap(), gaussian_blur(&img, 3.0).unwrap());
    }

    #[test]
    fn step_overshoot() {
        let step = Image::from_fn(32, 4, 1, |x, _, _| if x < 16 { 0.3f64 } else { 0.6 }).unwrap();
        let out = detail_control(&step, 60.0, 2.0).unwrap();
        let base = gaussian_blur(&step, 2.0).unwrap();
        for (i, (&u, &b)) in step.data().iter().zip(base.data()).enumerate() {
            let e = (u + 0.6 * (u - b)).clamp(0.0, 1.0);
            assert!((out.data()[i] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_in_delta() {
        let img = patch();
        let a = detail_control_raw(&img, 30.0, 2.0).unwrap();
        let b = detail_control_raw(&img, -45.0, 2.0).unwrap();
        let ab = detail_control_raw(&img, -15.0, 2.0).unwrap();
        for i in 0..img.data().len() {
            let lhs = a.data()[i] + b.data()[i] - img.data()[i];
            assert!((lhs - ab.data()[i]).abs() < 1e-9);
        }
        assert!(detail_control(&img, 120.0, 2.0).is_err());
    }

    #[test]
    fn color_keeps_chroma() {
        let rgb = Image::from_fn(10, 10, 3, |x, y, c| ((x + 2 * y + 3 * c) % 9) as f64 / 9.0 * 0.5 + 0.25).unwrap();
        let out = detail_control(&rgb, 20.0, 1.0).unwrap();
        assert_eq!(out.channels(), 3);
        let before = crate::color::rgb_to_luma_chroma(&rgb).unwrap();
        let after = crate::color::rgb_to_luma_chroma(&out).unwrap();
        let (cb, ca) = (before.stashed_chroma().unwrap(), after.stashed_chroma().unwrap());
        for (u, v) in cb.u.iter().zip(&ca.u) {
            assert!((u - v).abs() < 1e-5);
        }
    }
}
