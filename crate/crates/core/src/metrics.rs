//! Image fidelity measures for approximation quality.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

fn check<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::invalid("images must have the same shape"));
    }
    Ok(())
}

pub fn mse<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB for a peak value of 1. Identical images
/// give infinity.
pub fn psnr<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 { f64::INFINITY } else { -10.0 * m.log10() })
}

const WIN: usize = 11;
const WIN_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Mean structural similarity with an 11x11 Gaussian window
/// (`sigma = 1.5`), evaluated only where the window fits inside the image,
/// averaged over pixels and channels.
pub fn mssim<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < WIN || h < WIN {
        return Err(Error::invalid("SSIM needs images of at least 11x11"));
    }
    let g: Vec<f64> = (0..WIN)
        .map(|i| {
            let d = i as f64 - (WIN / 2) as f64;
            (-d * d / (2.0 * WIN_SIGMA * WIN_SIGMA)).exp()
        })
        .collect();
    let gs: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / gs).collect();
    let (vw, vh) = (w - WIN + 1, h - WIN + 1);
    // valid-mode separable filtering
    let filt = |p: &[f64]| -> Vec<f64> {
        let mut tmp = vec![0.0; vw * h];
        for y in 0..h {
            for x in 0..vw {
                tmp[y * vw + x] = (0..WIN).map(|k| g[k] * p[y * w + x + k]).sum();
            }
        }
        let mut out = vec![0.0; vw * vh];
        for y in 0..vh {
            for x in 0..vw {
                out[y * vw + x] = (0..WIN).map(|k| g[k] * tmp[(y + k) * vw + x]).sum();
            }
        }
        out
    };
    let mut total = 0.0;
    for c in 0..a.channels() {
        let pa: Vec<f64> = a.plane(c).iter().map(|v| v.as_f64()).collect();
        let pb: Vec<f64> = b.plane(c).iter().map(|v| v.as_f64()).collect();
        let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u * v).collect::<Vec<_>>();
        let (ma, mb) = (filt(&pa), filt(&pb));
        let (saa, sbb, sab) = (filt(&prod(&pa, &pa)), filt(&prod(&pb, &pb)), filt(&prod(&pa, &pb)));
        let mut s = 0.0;
        for i in 0..vw * vh {
            let (mu_a, mu_b) = (ma[i], mb[i]);
            let va = saa[i] - mu_a * mu_a;
            let vb = sbb[i] - mu_b * mu_b;
            let cov = sab[i] - mu_a * mu_b;
            s += ((2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2))
                / ((mu_a * mu_a + mu_b * mu_b + C1) * (va + vb + C2));
        }
        total += s / (vw * vh) as f64;
    }
    Ok(total / a.channels() as f64)
}
