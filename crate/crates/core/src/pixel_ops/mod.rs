//! Pointwise filter blocks.

mod histogram;

pub use histogram::{linear_equalize, luma_percentiles, min_dynamic_range, Percentiles};

use crate::color::{luma_of, on_luma, rgb_to_yuv, yuv_to_rgb, hsl_to_rgb, luma_plane};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::par;
use crate::scalar::{round_half_even, Scalar};

fn require_color<T: Scalar>(img: &Image<T>, op: &str) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::invalid(format!("{op} needs a 3-channel image")));
    }
    Ok(())
}

/// Quantizes every sample to `levels` evenly spaced values in `[0, 1]`.
pub fn posterize<T: Scalar>(img: &Image<T>, levels: u32) -> Result<Image<T>> {
    if !(2..=256).contains(&levels) {
        return Err(Error::invalid(format!(
            "posterize levels must be in [2, 256], got {levels}"
        )));
    }
    let steps = T::of((levels - 1) as f64);
    Ok(img.map(move |v| round_half_even(v.unit_clamp() * steps) / steps))
}

/// Posterizes the luma channel only; chroma passes through.
pub fn luma_posterize<T: Scalar>(img: &Image<T>, levels: u32) -> Result<Image<T>> {
    on_luma(img, |g| posterize(g, levels))
}

/// Scales luma by `factor`, clipping at 1.
pub fn brightness<T: Scalar>(img: &Image<T>, factor: f64) -> Result<Image<T>> {
    if !(factor.is_finite() && factor >= 0.0) {
        return Err(Error::invalid(format!(
            "brightness factor must be >= 0, got {factor}"
        )));
    }
    let f = T::of(factor);
    on_luma(img, |g| Ok(g.map(move |v| (v * f).min(T::one()))))
}

/// `1 + tanh(min(0, phi * (v255 - eps)))` with `v255 = 255 v`.
#[inline]
pub fn soft_threshold_value<T: Scalar>(v: T, phi: T, eps: T) -> T {
    let t = (phi * (T::of(255.0) * v - eps)).min(T::zero());
    T::one() + t.tanh()
}

/// Soft threshold applied to every channel. `phi` is a slope per 8-bit
/// unit and `eps` the cut-off in 0..=255 units.
pub fn soft_threshold<T: Scalar>(img: &Image<T>, phi: f64, eps: f64) -> Result<Image<T>> {
    let mut out = img.clone();
    soft_threshold_into(img, phi, eps, out.data_mut())?;
    Ok(out)
}

/// [`soft_threshold`] writing into `out`, which must hold one value per
/// sample.
pub fn soft_threshold_into<T: Scalar>(img: &Image<T>, phi: f64, eps: f64, out: &mut [T]) -> Result<()> {
    if out.len() != img.data().len() {
        return Err(Error::invalid("output buffer does not match image size"));
    }
    if !(phi.is_finite() && phi > 0.0) {
        return Err(Error::invalid(format!("soft threshold slope must be > 0, got {phi}")));
    }
    if !(0.0..=255.0).contains(&eps) {
        return Err(Error::invalid(format!(
            "soft threshold cut-off must be in [0, 255], got {eps}"
        )));
    }
    let (phi, eps) = (T::of(phi), T::of(eps));
    out.copy_from_slice(img.data());
    par::map_inplace(out, move |v| soft_threshold_value(v, phi, eps));
    Ok(())
}

/// Moves each channel away from (s > 1) or toward (s < 1) the gray image.
pub fn saturate<T: Scalar>(img: &Image<T>, s: f64) -> Result<Image<T>> {
    require_color(img, "saturation")?;
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::invalid(format!("saturation must be >= 0, got {s}")));
    }
    let s = T::of(s);
    let gray = luma_plane(img);
    let n = img.pixel_count();
    let mut data = img.data().to_vec();
    for c in 0..3 {
        for (v, &g) in data[c * n..(c + 1) * n].iter_mut().zip(&gray) {
            *v = (g + s * (*v - g)).unit_clamp();
        }
    }
    Ok(img.with_data(data))
}

/// Rotates (U, V) by `angle` radians, then adds `bias` in RGB.
pub fn hue<T: Scalar>(img: &Image<T>, angle: f64, bias: [f64; 3]) -> Result<Image<T>> {
    require_color(img, "hue")?;
    let (sin, cos) = (T::of(angle.sin()), T::of(angle.cos()));
    let bias = bias.map(T::of);
    let n = img.pixel_count();
    let mut data = img.data().to_vec();
    for i in 0..n {
        let (y, u, v) = rgb_to_yuv(data[i], data[n + i], data[2 * n + i]);
        let (u2, v2) = (cos * u - sin * v, sin * u + cos * v);
        let (r, g, b) = yuv_to_rgb(y, u2, v2);
        data[i] = (r + bias[0]).unit_clamp();
        data[n + i] = (g + bias[1]).unit_clamp();
        data[2 * n + i] = (b + bias[2]).unit_clamp();
    }
    Ok(img.with_data(data))
}

/// Monochrome HSL palette: constant hue and saturation, lightness from the
/// input luma scaled by `lum_scale`.
pub fn colorize<T: Scalar>(
    img: &Image<T>,
    hue_deg: f64,
    sat: f64,
    lum_scale: f64,
) -> Result<Image<T>> {
    if !(0.0..=1.0).contains(&sat) || !(lum_scale.is_finite() && lum_scale >= 0.0) {
        return Err(Error::invalid("colorize needs saturation in [0, 1] and lightness scale >= 0"));
    }
    let luma = luma_plane(img);
    let n = img.pixel_count();
    let mut data = vec![T::zero(); 3 * n];
    for (i, &l) in luma.iter().enumerate() {
        let light = (l.as_f64() * lum_scale).clamp(0.0, 1.0);
        let (r, g, b) = hsl_to_rgb(hue_deg, sat, light);
        data[i] = T::of(r).unit_clamp();
        data[n + i] = T::of(g).unit_clamp();
        data[2 * n + i] = T::of(b).unit_clamp();
    }
    Ok(Image::from_parts(img.width(), img.height(), 3, data, None))
}

/// Luma of a single RGB triple; convenience for tests and callers.
pub fn luma<T: Scalar>(rgb: [T; 3]) -> T {
    luma_of(rgb[0], rgb[1], rgb[2])
}
