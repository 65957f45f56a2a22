//! Flow-guided high-emphasis difference of Gaussians.

use super::flow::{lic_plane, require_gray, sample, Tensor};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::par;
use crate::scalar::Scalar;

/// Ratio between the wide and narrow Gaussian.
pub const K: f64 = 1.6;

/// Cross-flow kernel `(1 + p) G_{K sigma} - p G_sigma` on integer offsets
/// `-r..=r`, `r = ceil(3 K sigma)`, each Gaussian normalized over that
/// support.
pub fn cross_kernel(sigma: f64, p: f64) -> Vec<f64> {
    let r = (3.0 * K * sigma).ceil() as i64;
    let gauss = |s: f64| {
        let g: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * s * s)).exp()).collect();
        let sum: f64 = g.iter().sum();
        g.into_iter().map(move |v| v / sum)
    };
    gauss(K * sigma)
        .zip(gauss(sigma))
        .map(|(wide, narrow)| (1.0 + p) * wide - p * narrow)
        .collect()
}

/// Pre-threshold Flow-XDoG response: high-emphasis filtering across the
/// edge (along the gradient), then line integral convolution of half-length
/// `lic_length` along the tangent field. `lic_length == 0` skips the LIC.
pub fn flow_xdog_response<T: Scalar>(
    img: &Image<T>,
    sigma: f64,
    p: f64,
    rho: f64,
    lic_length: f64,
) -> Result<Image<T>> {
    require_gray(img)?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("xdog sigma must be > 0, got {sigma}")));
    }
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::invalid(format!("xdog p must be >= 0, got {p}")));
    }
    if !(lic_length.is_finite() && lic_length >= 0.0) {
        return Err(Error::invalid("lic length must be >= 0"));
    }
    let (w, h) = (img.width(), img.height());
    let t = Tensor::of(img, rho)?;
    let kernel = cross_kernel(sigma, p);
    let r = (kernel.len() / 2) as f64;
    let src = img.plane(0);
    let mut dog = vec![T::zero(); w * h];
    par::for_rows(&mut dog, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let (tx, ty) = t.tangent(x as f64, y as f64);
            // gradient direction is the tangent turned by 90 degrees
            let (nx, ny) = (ty, -tx);
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let s = k as f64 - r;
                acc += kv * sample(src, w, h, x as f64 + s * nx, y as f64 + s * ny);
            }
            *o = T::of(acc);
        }
    });
    let out = if lic_length > 0.0 {
        lic_plane(&dog, &t, lic_length)
    } else {
        dog
    };
    Ok(img.with_gray_plane(out))
}
