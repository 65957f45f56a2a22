//! Learned adaptive filter banks.
//!
//! A [`BladeModel`] holds `K` square FIR filters. At inference every output
//! pixel evaluates exactly one of them, chosen by quantized structure
//! tensor features of the input, so the cost per pixel does not depend on
//! `K`. Training ([`TrainingAccumulator`], [`solve`]) fits each filter by
//! regularized least squares from streamed normal equations.

mod collage;
mod format;
mod train;

pub use collage::{render_collage, CollageOptions};
pub use format::{load_model, model_from_bytes, model_to_bytes, save_model, HEADER_LEN, MAGIC, VERSION};
pub use train::{
    build_regularizer, fit_strength_thresholds, solve, BucketStats, SolveOptions, SolvedBank,
    TrainingAccumulator, DEFAULT_LAMBDA,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::par;
use crate::scalar::Scalar;
use crate::structure_tensor::{select_buckets, select_buckets_into, QuantizerSpec, TensorWorkspace};

pub const FOOTPRINTS: [usize; 5] = [3, 5, 7, 9, 11];

/// Free-form provenance kept next to a model file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub name: String,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BladeModel<T> {
    side: usize,
    quantizer: QuantizerSpec,
    filters: Vec<T>,
    passes: u32,
    pub metadata: ModelMetadata,
}

impl<T: Scalar> BladeModel<T> {
    /// `filters` holds `K * side * side` coefficients, bucket-major, each
    /// filter row-major.
    pub fn new(side: usize, quantizer: QuantizerSpec, filters: Vec<T>, passes: u32) -> Result<Self> {
        if !FOOTPRINTS.contains(&side) {
            return Err(Error::invalid(format!(
                "footprint side must be one of {FOOTPRINTS:?}, got {side}"
            )));
        }
        quantizer.validate()?;
        let expected = quantizer.bucket_count() * side * side;
        if filters.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} coefficients, got {}",
                filters.len()
            )));
        }
        if filters.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("filter coefficients must be finite"));
        }
        if passes == 0 {
            return Err(Error::invalid("pass count must be >= 1"));
        }
        Ok(Self {
            side,
            quantizer,
            filters,
            passes,
            metadata: ModelMetadata::default(),
        })
    }

    /// Every bucket holds the centered delta (identity filter).
    pub fn identity(side: usize, quantizer: QuantizerSpec) -> Result<Self> {
        let n = side * side;
        let k = quantizer.bucket_count();
        let mut filters = vec![T::zero(); k * n];
        for b in 0..k {
            filters[b * n + n / 2] = T::one();
        }
        Self::new(side, quantizer, filters, 1)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn taps(&self) -> usize {
        self.side * self.side
    }

    pub fn bucket_count(&self) -> usize {
        self.quantizer.bucket_count()
    }

    pub fn quantizer(&self) -> &QuantizerSpec {
        &self.quantizer
    }

    pub fn passes(&self) -> u32 {
        self.passes
    }

    pub fn set_passes(&mut self, passes: u32) -> Result<()> {
        if passes == 0 {
            return Err(Error::invalid("pass count must be >= 1"));
        }
        self.passes = passes;
        Ok(())
    }

    pub fn coefficients(&self) -> &[T] {
        &self.filters
    }

    pub fn filter(&self, k: usize) -> &[T] {
        let n = self.taps();
        &self.filters[k * n..(k + 1) * n]
    }

    pub fn convert<U: Scalar>(&self) -> BladeModel<U> {
        BladeModel {
            side: self.side,
            quantizer: self.quantizer.clone(),
            filters: self.filters.iter().map(|v| U::of(v.as_f64())).collect(),
            passes: self.passes,
            metadata: self.metadata.clone(),
        }
    }
}

/// One inference pass with precomputed bucket indices.
pub fn infer_with_buckets<T: Scalar>(
    img: &Image<T>,
    model: &BladeModel<T>,
    buckets: &[u32],
) -> Result<Image<T>> {
    if img.channels() != 1 {
        return Err(Error::invalid("filter-bank inference needs a single-channel image"));
    }
    if buckets.len() != img.pixel_count() {
        return Err(Error::invalid("bucket map does not match image size"));
    }
    let mut out = vec![T::zero(); img.pixel_count()];
    filter_into(img, model, buckets, &mut out);
    Ok(img.with_gray_plane(out))
}

fn filter_into<T: Scalar>(img: &Image<T>, model: &BladeModel<T>, buckets: &[u32], out: &mut [T]) {
    let (w, h) = (img.width(), img.height());
    let side = model.side;
    let rad = side / 2;
    let n = side * side;
    let z = img.plane(0);
    let coeffs = &model.filters;
    par::for_rows(out, w, |y, row| {
        let rows: Vec<&[T]> = (0..side)
            .map(|r| {
                let yy = (y as isize + r as isize - rad as isize).clamp(0, h as isize - 1) as usize;
                &z[yy * w..(yy + 1) * w]
            })
            .collect();
        let sel = &buckets[y * w..(y + 1) * w];
        for (x, o) in row.iter_mut().enumerate() {
            let k = sel[x] as usize;
            let f = &coeffs[k * n..(k + 1) * n];
            let mut acc = T::zero();
            if x >= rad && x + rad < w {
                for (r, src) in rows.iter().enumerate() {
                    let taps = &f[r * side..(r + 1) * side];
                    let win = &src[x - rad..x + rad + 1];
                    for (t, s) in taps.iter().zip(win) {
                        acc += *t * *s;
                    }
                }
            } else {
                for (r, src) in rows.iter().enumerate() {
                    for c in 0..side {
                        let xx = (x as isize + c as isize - rad as isize).clamp(0, w as isize - 1);
                        acc += f[r * side + c] * src[xx as usize];
                    }
                }
            }
            *o = acc;
        }
    });
}

/// Reusable buffers for [`infer_into`].
#[derive(Clone, Debug, Default)]
pub struct InferWorkspace<T> {
    tensor: TensorWorkspace<T>,
    buckets: Vec<u32>,
}

impl<T: Scalar> InferWorkspace<T> {
    pub fn new() -> Self {
        Self { tensor: TensorWorkspace::new(), buckets: Vec::new() }
    }
}

/// [`infer`] writing into `out` (one value per pixel). Repeated calls with
/// the same workspace and image size do not allocate.
pub fn infer_into<T: Scalar>(
    img: &Image<T>,
    model: &BladeModel<T>,
    ws: &mut InferWorkspace<T>,
    out: &mut [T],
) -> Result<()> {
    if img.channels() != 1 {
        return Err(Error::invalid("filter-bank inference needs a single-channel image"));
    }
    if out.len() != img.pixel_count() {
        return Err(Error::invalid("output buffer does not match image size"));
    }
    select_buckets_into(img, &model.quantizer, &mut ws.tensor, &mut ws.buckets)?;
    filter_into(img, model, &ws.buckets, out);
    Ok(())
}

/// One inference pass: select a filter per pixel and apply it, replicate
/// padding at the borders. The result is not clipped.
pub fn infer<T: Scalar>(img: &Image<T>, model: &BladeModel<T>) -> Result<Image<T>> {
    if img.channels() != 1 {
        return Err(Error::invalid("filter-bank inference needs a single-channel image"));
    }
    let buckets = select_buckets(img, &model.quantizer)?;
    infer_with_buckets(img, model, &buckets)
}

/// Runs `passes` inference passes, reselecting filters on each pass's
/// input.
pub fn apply<T: Scalar>(img: &Image<T>, model: &BladeModel<T>, passes: u32) -> Result<Image<T>> {
    let mut cur = infer(img, model)?;
    for _ in 1..passes.max(1) {
        cur = infer(&cur, model)?;
    }
    Ok(cur)
}
