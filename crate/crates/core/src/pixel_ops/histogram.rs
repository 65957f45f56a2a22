//! Percentile-driven luma stretches.
//!
//! Percentiles come from a 256-bin luma histogram. Within a bin the value
//! is interpolated linearly between the smallest and largest sample that
//! fell into it, so a constant image has coinciding percentiles and 8-bit
//! data yields exact order statistics.

use crate::color::{luma_plane, on_luma};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

const BINS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Percentiles {
    pub low: f64,
    pub high: f64,
}

struct LumaHistogram {
    count: [u64; BINS],
    min: [f64; BINS],
    max: [f64; BINS],
    total: u64,
}

impl LumaHistogram {
    fn build(luma: &[f64]) -> Self {
        let mut h = LumaHistogram {
            count: [0; BINS],
            min: [f64::INFINITY; BINS],
            max: [f64::NEG_INFINITY; BINS],
            total: luma.len() as u64,
        };
        for &v in luma {
            let v = v.clamp(0.0, 1.0);
            let b = ((v * BINS as f64) as usize).min(BINS - 1);
            h.count[b] += 1;
            h.min[b] = h.min[b].min(v);
            h.max[b] = h.max[b].max(v);
        }
        h
    }

    fn percentile(&self, p: f64) -> f64 {
        let target = (p / 100.0 * self.total as f64).clamp(0.0, self.total as f64);
        let mut below = 0u64;
        let mut last = 0.0;
        for b in 0..BINS {
            let c = self.count[b];
            if c == 0 {
                continue;
            }
            last = self.max[b];
            if (below + c) as f64 >= target {
                let frac = ((target - below as f64) / c as f64).clamp(0.0, 1.0);
                return self.min[b] + frac * (self.max[b] - self.min[b]);
            }
            below += c;
        }
        last
    }
}

/// The `low`-th and `high`-th percentile of the image's luma.
pub fn luma_percentiles<T: Scalar>(img: &Image<T>, low: f64, high: f64) -> Percentiles {
    let luma: Vec<f64> = luma_plane(img).iter().map(|v| v.as_f64()).collect();
    let h = LumaHistogram::build(&luma);
    Percentiles {
        low: h.percentile(low),
        high: h.percentile(high),
    }
}

fn remap_luma<T: Scalar>(img: &Image<T>, f: impl Fn(f64) -> f64 + Sync + Send) -> Result<Image<T>> {
    on_luma(img, |g| Ok(g.map(|v| T::of(f(v.as_f64()).clamp(0.0, 1.0)))))
}

/// Linear histogram stretch: the `low` percentile maps to 0 and the `high`
/// percentile to 1. Degenerate histograms leave the image unchanged.
pub fn linear_equalize<T: Scalar>(img: &Image<T>, low: f64, high: f64) -> Result<Image<T>> {
    if !(0.0..=100.0).contains(&low) || !(0.0..=100.0).contains(&high) || low >= high {
        return Err(Error::invalid(format!(
            "equalization needs 0 <= low < high <= 100, got {low}, {high}"
        )));
    }
    let p = luma_percentiles(img, low, high);
    if p.high <= p.low {
        return Ok(img.clone());
    }
    let scale = 1.0 / (p.high - p.low);
    remap_luma(img, move |y| (y - p.low) * scale)
}

/// Expands the 5..95 percentile luma span about its midpoint until it
/// reaches `range` (0..=255 units); spans already that wide are untouched.
pub fn min_dynamic_range<T: Scalar>(img: &Image<T>, range: f64) -> Result<Image<T>> {
    if !(range > 0.0 && range <= 255.0) {
        return Err(Error::invalid(format!(
            "dynamic range must be in (0, 255], got {range}"
        )));
    }
    let p = luma_percentiles(img, 5.0, 95.0);
    let span = (p.high - p.low) * 255.0;
    if span <= 0.0 || span >= range {
        return Ok(img.clone());
    }
    let factor = range / span;
    let mid = 0.5 * (p.low + p.high);
    remap_luma(img, move |y| mid + (y - mid) * factor)
}
