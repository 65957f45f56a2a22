//! Per-block timing of a style.

use std::time::Instant;

use serde::Serialize;

use super::{composite, run_layer, validate, CompositeMode, Layer, ModelRegistry, StylePipeline};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub layer: Layer,
    /// Block position in its layer; `None` for the compositing step.
    pub index: Option<usize>,
    pub kind: String,
    pub median_seconds: f64,
    /// Input megapixels per second.
    pub mp_per_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub style: String,
    pub width: usize,
    pub height: usize,
    pub repeats: usize,
    pub rows: Vec<BenchRow>,
    pub total_seconds: f64,
    pub total_mp_per_s: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs the style `repeats` times and reports the median time of every
/// block, of the compositing step and of the whole run.
pub fn benchmark<T: Scalar>(
    p: &StylePipeline,
    img: &Image<T>,
    models: &ModelRegistry<T>,
    repeats: usize,
) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(Error::invalid("benchmark needs at least one repeat"));
    }
    let diags = validate(p);
    if !diags.is_empty() {
        return Err(Error::Validation(diags));
    }
    let run_fg = p.foreground.iter().any(|b| b.enabled) && p.composite_mode != CompositeMode::BackgroundOnly;
    let mut keys: Vec<(Layer, Option<usize>, String)> = Vec::new();
    for (layer, blocks) in [(Layer::Background, &p.background), (Layer::Foreground, &p.foreground)] {
        if layer == Layer::Foreground && !run_fg {
            continue;
        }
        for (i, b) in blocks.iter().enumerate().filter(|(_, b)| b.enabled) {
            keys.push((layer, Some(i), b.kind.clone()));
        }
    }
    keys.push((Layer::Style, None, "composite".into()));
    let mut samples = vec![Vec::with_capacity(repeats); keys.len()];
    let mut totals = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let mut row = 0;
        let mut last = Instant::now();
        let mut tick = |_: usize, _: &super::BlockDescriptor| {
            let now = Instant::now();
            samples[row].push((now - last).as_secs_f64());
            last = now;
            row += 1;
        };
        let bg = run_layer(&p.background, img, models, &mut tick)?;
        let fg = if run_fg {
            Some(run_layer(&p.foreground, img, models, &mut tick)?)
        } else {
            None
        };
        let t0 = Instant::now();
        let out = composite(&bg, fg.as_ref(), p.composite_mode, p.line_color)?;
        let end = Instant::now();
        drop(out);
        samples[row].push((end - t0).as_secs_f64());
        totals.push((end - start).as_secs_f64());
    }
    let mp = img.pixel_count() as f64 / 1e6;
    let rate = |s: f64| if s > 0.0 { mp / s } else { f64::INFINITY };
    let rows = keys
        .into_iter()
        .zip(samples.iter_mut())
        .map(|((layer, index, kind), s)| {
            let m = median(s);
            BenchRow {
                layer,
                index,
                kind,
                median_seconds: m,
                mp_per_s: rate(m),
            }
        })
        .collect();
    let total = median(&mut totals);
    Ok(BenchReport {
        style: p.name.clone(),
        width: img.width(),
        height: img.height(),
        repeats,
        rows,
        total_seconds: total,
        total_mp_per_s: rate(total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::BlockDescriptor;

    #[test]
    fn rows_account_for_total() {
        let img = Image::from_fn(256, 256, 3, |x, y, c| ((x + y * 3 + c) % 13) as f64 / 12.0).unwrap();
        let mut p = StylePipeline::new("b");
        p.background = vec![
            BlockDescriptor::new("gaussian").with("sigma", 2.0),
            BlockDescriptor::new("posterize").with("levels", 5.0),
        ];
        p.foreground = vec![BlockDescriptor::new("sobel")];
        let r = benchmark(&p, &img, &ModelRegistry::new(), 5).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.rows[3].kind, "composite");
        let sum: f64 = r.rows.iter().map(|row| row.median_seconds).sum();
        assert!((sum - r.total_seconds).abs() <= 0.05 * r.total_seconds + 1e-4, "{sum} vs {}", r.total_seconds);
        let empty = benchmark(&StylePipeline::new("e"), &img, &ModelRegistry::new(), 1).unwrap();
        assert_eq!(empty.rows.len(), 1);
        assert!(benchmark(&p, &img, &ModelRegistry::new(), 0).is_err());
    }
}
