//! Tabular visualization of a filter bank.
//!
//! Columns are orientation bins, rows are `s + S * c`. Each filter becomes a
//! tile of `side x side` cells drawn with a signed colormap: white at zero,
//! red for positive and blue for negative taps, saturating at the largest
//! absolute coefficient in the bank.

use serde::{Deserialize, Serialize};

use super::BladeModel;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollageOptions {
    /// Output pixels per filter tap.
    pub cell_px: usize,
    /// Pixels between tiles.
    pub gap: usize,
}

impl Default for CollageOptions {
    fn default() -> Self {
        Self { cell_px: 6, gap: 2 }
    }
}

const GAP_SHADE: f64 = 0.25;

fn colormap(t: f64) -> [f64; 3] {
    let t = t.clamp(-1.0, 1.0);
    if t >= 0.0 {
        [1.0, 1.0 - t, 1.0 - t]
    } else {
        [1.0 + t, 1.0 + t, 1.0]
    }
}

pub fn render_collage<T: Scalar>(model: &BladeModel<T>, opts: CollageOptions) -> Result<Image<T>> {
    if opts.cell_px == 0 {
        return Err(Error::invalid("collage cell size must be >= 1"));
    }
    let q = model.quantizer();
    let side = model.side();
    let tile = side * opts.cell_px;
    let (cols, rows) = (q.orientation_bins, q.strength_bins * q.coherence_bins);
    let w = cols * tile + (cols - 1) * opts.gap;
    let h = rows * tile + (rows - 1) * opts.gap;
    let peak = model
        .coefficients()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    let mut data = vec![T::of(GAP_SHADE); 3 * w * h];
    for k in 0..model.bucket_count() {
        let (o, s, c) = q.bucket_coords(k);
        let row = s + q.strength_bins * c;
        let (x0, y0) = (o * (tile + opts.gap), row * (tile + opts.gap));
        let f = model.filter(k);
        for ty in 0..tile {
            for tx in 0..tile {
                let tap = f[(ty / opts.cell_px) * side + tx / opts.cell_px].as_f64();
                let rgb = colormap(tap * scale);
                let i = (y0 + ty) * w + x0 + tx;
                for (ch, v) in rgb.iter().enumerate() {
                    data[ch * w * h + i] = T::of(*v);
                }
            }
        }
    }
    Image::new(w, h, 3, data)
}
