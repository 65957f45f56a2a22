//! Streaming ridge regression per bucket.
//!
//! For every bucket `k` the accumulator keeps `AᵀA` (N x N), `Aᵀb` (N) and
//! the sample count, where each row of `A` is a footprint patch of the input
//! and `b` the target pixel. Memory is fixed regardless of how much data is
//! streamed through.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;
use crate::structure_tensor::{features, select_buckets, QuantizerSpec};

/// Default smoothness weight, multiplied by the bucket's sample count.
/// Adjacent-tap differences of natural images are small, so this needs to
/// be far below the per-sample data energy to avoid oversmoothing.
pub const DEFAULT_LAMBDA: f64 = 1e-5;

const BATCH: usize = 32;
const BANDS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct BucketStats<T> {
    /// Row-major symmetric `N x N`.
    pub gram: Vec<T>,
    pub moment: Vec<T>,
    pub count: u64,
}

impl<T: Scalar> BucketStats<T> {
    pub fn new(taps: usize) -> Self {
        Self {
            gram: vec![T::zero(); taps * taps],
            moment: vec![T::zero(); taps],
            count: 0,
        }
    }

    /// Rank-one update with a single patch and its target.
    pub fn add_sample(&mut self, patch: &[T], target: T) {
        let n = self.moment.len();
        debug_assert_eq!(patch.len(), n);
        for i in 0..n {
            for j in 0..n {
                self.gram[i * n + j] += patch[i] * patch[j];
            }
            self.moment[i] += patch[i] * target;
        }
        self.count += 1;
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.gram.iter_mut().zip(&other.gram) {
            *a += *b;
        }
        for (a, b) in self.moment.iter_mut().zip(&other.moment) {
            *a += *b;
        }
        self.count += other.count;
    }
}

/// Per-bucket normal equations for a square footprint.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingAccumulator<T> {
    side: usize,
    buckets: Vec<BucketStats<T>>,
}

/// Patches waiting to be folded into one bucket, stored tap-major so each
/// Gram entry is a dot product of two contiguous runs.
struct Batch<T> {
    cols: Vec<T>,
    targets: Vec<T>,
    len: usize,
}

struct LocalAccumulator<T> {
    taps: usize,
    upper: Vec<BucketStats<T>>,
    batches: Vec<Batch<T>>,
}

impl<T: Scalar> LocalAccumulator<T> {
    fn new(taps: usize, buckets: usize) -> Self {
        Self {
            taps,
            upper: (0..buckets).map(|_| BucketStats::new(taps)).collect(),
            batches: (0..buckets)
                .map(|_| Batch {
                    cols: Vec::new(),
                    targets: Vec::new(),
                    len: 0,
                })
                .collect(),
        }
    }

    #[inline]
    fn push(&mut self, k: usize, fill: impl Fn(&mut [T]), target: T) {
        let n = self.taps;
        let batch = &mut self.batches[k];
        if batch.cols.is_empty() {
            batch.cols = vec![T::zero(); n * BATCH];
            batch.targets = vec![T::zero(); BATCH];
        }
        let mut patch = [T::zero(); 121];
        fill(&mut patch[..n]);
        let r = batch.len;
        for (j, v) in patch[..n].iter().enumerate() {
            batch.cols[j * BATCH + r] = *v;
        }
        batch.targets[r] = target;
        batch.len += 1;
        if batch.len == BATCH {
            self.flush(k);
        }
    }

    fn flush(&mut self, k: usize) {
        let n = self.taps;
        let batch = &mut self.batches[k];
        let len = batch.len;
        if len == 0 {
            return;
        }
        let stats = &mut self.upper[k];
        for i in 0..n {
            let ci = &batch.cols[i * BATCH..i * BATCH + len];
            for j in i..n {
                let cj = &batch.cols[j * BATCH..j * BATCH + len];
                let mut s = T::zero();
                for (a, b) in ci.iter().zip(cj) {
                    s += *a * *b;
                }
                stats.gram[i * n + j] += s;
            }
            let mut m = T::zero();
            for (a, b) in ci.iter().zip(&batch.targets[..len]) {
                m += *a * *b;
            }
            stats.moment[i] += m;
        }
        stats.count += len as u64;
        batch.len = 0;
    }

    fn finish(mut self) -> Vec<BucketStats<T>> {
        for k in 0..self.batches.len() {
            self.flush(k);
        }
        let n = self.taps;
        for stats in &mut self.upper {
            for i in 0..n {
                for j in 0..i {
                    stats.gram[i * n + j] = stats.gram[j * n + i];
                }
            }
        }
        self.upper
    }
}

impl<T: Scalar> TrainingAccumulator<T> {
    pub fn new(side: usize, buckets: usize) -> Result<Self> {
        if side == 0 || side.is_multiple_of(2) || side > 11 {
            return Err(Error::invalid(format!(
                "footprint side must be odd and at most 11, got {side}"
            )));
        }
        Ok(Self {
            side,
            buckets: (0..buckets).map(|_| BucketStats::new(side * side)).collect(),
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn taps(&self) -> usize {
        self.side * self.side
    }

    pub fn buckets(&self) -> &[BucketStats<T>] {
        &self.buckets
    }

    pub fn buckets_mut(&mut self) -> &mut [BucketStats<T>] {
        &mut self.buckets
    }

    pub fn total_count(&self) -> u64 {
        self.buckets.iter().map(|b| b.count).sum()
    }

    /// Sums another accumulator of the same shape into this one.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.side != self.side || other.buckets.len() != self.buckets.len() {
            return Err(Error::invalid("cannot merge accumulators of different shapes"));
        }
        for (a, b) in self.buckets.iter_mut().zip(&other.buckets) {
            a.merge(b);
        }
        Ok(())
    }

    /// Accumulates one training pair together with its eight rotations and
    /// flips.
    pub fn accumulate(&mut self, input: &Image<T>, target: &Image<T>, q: &QuantizerSpec) -> Result<()> {
        check_pair(input, target)?;
        for k in 0..8u8 {
            self.accumulate_variant(&input.dihedral(k), &target.dihedral(k), q)?;
        }
        Ok(())
    }

    /// Accumulates a single training pair without augmentation.
    pub fn accumulate_variant(
        &mut self,
        input: &Image<T>,
        target: &Image<T>,
        q: &QuantizerSpec,
    ) -> Result<()> {
        check_pair(input, target)?;
        if q.bucket_count() != self.buckets.len() {
            return Err(Error::invalid("quantizer bucket count does not match accumulator"));
        }
        let buckets = select_buckets(input, q)?;
        let (w, h) = (input.width(), input.height());
        let band = h.div_ceil(BANDS).max(1);
        let ranges: Vec<(usize, usize)> = (0..h).step_by(band).map(|y0| (y0, (y0 + band).min(h))).collect();
        let locals: Vec<Vec<BucketStats<T>>> = ranges
            .par_iter()
            .map(|&(y0, y1)| {
                let mut local = LocalAccumulator::new(self.taps(), self.buckets.len());
                accumulate_rows(&mut local, input, target, &buckets, self.side, y0, y1);
                local.finish()
            })
            .collect();
        debug_assert!(w > 0);
        let mut summed: Vec<BucketStats<T>> = (0..self.buckets.len()).map(|_| BucketStats::new(self.taps())).collect();
        for local in &locals {
            for (a, b) in summed.iter_mut().zip(local) {
                a.merge(b);
            }
        }
        for (a, b) in self.buckets.iter_mut().zip(&summed) {
            a.merge(b);
        }
        Ok(())
    }
}

fn check_pair<T: Scalar>(input: &Image<T>, target: &Image<T>) -> Result<()> {
    if input.channels() != 1 || target.channels() != 1 {
        return Err(Error::invalid("training pairs must be single-channel"));
    }
    if input.width() != target.width() || input.height() != target.height() {
        return Err(Error::invalid(format!(
            "training pair size mismatch: {}x{} vs {}x{}",
            input.width(),
            input.height(),
            target.width(),
            target.height()
        )));
    }
    Ok(())
}

fn accumulate_rows<T: Scalar>(
    local: &mut LocalAccumulator<T>,
    input: &Image<T>,
    target: &Image<T>,
    buckets: &[u32],
    side: usize,
    y0: usize,
    y1: usize,
) {
    let (w, h) = (input.width(), input.height());
    let rad = side as isize / 2;
    let z = input.plane(0);
    let u = target.plane(0);
    for y in y0..y1 {
        let rows: Vec<usize> = (0..side as isize)
            .map(|r| (y as isize + r - rad).clamp(0, h as isize - 1) as usize * w)
            .collect();
        for x in 0..w {
            let i = y * w + x;
            let fill = |patch: &mut [T]| {
                for (r, &base) in rows.iter().enumerate() {
                    for c in 0..side {
                        let xx = (x as isize + c as isize - rad).clamp(0, w as isize - 1) as usize;
                        patch[r * side + c] = z[base + xx];
                    }
                }
            };
            local.push(buckets[i] as usize, fill, u[i]);
        }
    }
}

/// `weight * (DxᵀDx + DyᵀDy)` for a `rows x cols` footprint, with forward
/// differences between horizontally and vertically adjacent taps. Constant
/// filters lie in its null space.
pub fn build_regularizer(rows: usize, cols: usize, weight: f64) -> Vec<f64> {
    let n = rows * cols;
    let mut q = vec![0.0; n * n];
    let mut couple = |a: usize, b: usize| {
        q[a * n + a] += weight;
        q[b * n + b] += weight;
        q[a * n + b] -= weight;
        q[b * n + a] -= weight;
    };
    for r in 0..rows {
        for c in 0..cols {
            let a = r * cols + c;
            if c + 1 < cols {
                couple(a, a + 1);
            }
            if r + 1 < rows {
                couple(a, a + cols);
            }
        }
    }
    q
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Ridge weight applied to the regularizer.
    pub lambda: f64,
    /// Multiply the weight by each bucket's sample count.
    pub scale_by_count: bool,
    /// Buckets whose regularized normal matrix is worse conditioned than
    /// this fall back to the identity filter.
    pub max_condition: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            scale_by_count: true,
            max_condition: 1e12,
        }
    }
}

/// Solved filter bank plus the buckets that fell back to the identity.
#[derive(Clone, Debug)]
pub struct SolvedBank<T> {
    pub filters: Vec<T>,
    pub fallback: Vec<usize>,
}

/// In-place Cholesky factorization `m = L Lᵀ` (lower triangle). Returns the
/// ratio of the largest to smallest pivot, squared, as a condition estimate;
/// `None` if `m` is not positive definite.
fn cholesky(m: &mut [f64], n: usize) -> Option<f64> {
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= m[j * n + k] * m[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        m[j * n + j] = d;
        dmin = dmin.min(d);
        dmax = dmax.max(d);
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= m[i * n + k] * m[j * n + k];
            }
            m[i * n + j] = s / d;
        }
    }
    Some((dmax / dmin).powi(2))
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `(λ' Q + AᵀA) h = Aᵀb` per bucket, where `λ' = λ` or `λ · count`.
/// `q` is the unit-weight `N x N` regularizer.
pub fn solve<T: Scalar>(acc: &TrainingAccumulator<T>, q: &[f64], opts: SolveOptions) -> Result<SolvedBank<T>> {
    let n = acc.taps();
    if q.len() != n * n {
        return Err(Error::invalid("regularizer size does not match the footprint"));
    }
    if !(opts.lambda.is_finite() && opts.lambda >= 0.0) {
        return Err(Error::invalid("regularization weight must be >= 0"));
    }
    for b in acc.buckets() {
        if b.gram.iter().chain(&b.moment).any(|v| !v.is_finite()) {
            return Err(Error::CorruptState("accumulator holds non-finite values".into()));
        }
    }
    let solved: Vec<Option<Vec<f64>>> = acc
        .buckets()
        .par_iter()
        .map(|b| {
            if b.count == 0 {
                return None;
            }
            let weight = if opts.scale_by_count {
                opts.lambda * b.count as f64
            } else {
                opts.lambda
            };
            let mut m: Vec<f64> = b
                .gram
                .iter()
                .zip(q)
                .map(|(g, r)| g.as_f64() + weight * r)
                .collect();
            let cond = cholesky(&mut m, n)?;
            if cond > opts.max_condition {
                return None;
            }
            let mut h: Vec<f64> = b.moment.iter().map(|v| v.as_f64()).collect();
            cholesky_solve(&m, n, &mut h);
            h.iter().all(|v| v.is_finite()).then_some(h)
        })
        .collect();
    let mut filters = Vec::with_capacity(n * solved.len());
    let mut fallback = Vec::new();
    for (k, h) in solved.into_iter().enumerate() {
        match h {
            Some(h) => filters.extend(h.into_iter().map(T::of)),
            None => {
                fallback.push(k);
                filters.extend((0..n).map(|j| if j == n / 2 { T::one() } else { T::zero() }));
            }
        }
    }
    Ok(SolvedBank { filters, fallback })
}

/// Sets the strength thresholds of `q` to equal-mass quantiles of the
/// structure tensor strength over `inputs`.
pub fn fit_strength_thresholds<T: Scalar>(inputs: &[Image<T>], q: &mut QuantizerSpec) -> Result<()> {
    let bins = q.strength_bins;
    if bins <= 1 {
        q.strength_thresholds.clear();
        return Ok(());
    }
    let mut strengths = Vec::new();
    for img in inputs {
        strengths.extend(features(img, q.rho)?.into_iter().map(|f| f.strength));
    }
    if strengths.is_empty() {
        return Err(Error::invalid("no training pixels to fit strength thresholds"));
    }
    strengths.sort_by(f64::total_cmp);
    let mut thresholds = Vec::with_capacity(bins - 1);
    let mut prev = 0.0f64;
    for k in 1..bins {
        let idx = (k * strengths.len() / bins).min(strengths.len() - 1);
        let mut t = strengths[idx];
        let floor = if k == 1 { 1e-12 } else { prev * (1.0 + 1e-9) + 1e-12 };
        if t < floor {
            t = floor;
        }
        thresholds.push(t);
        prev = t;
    }
    q.strength_thresholds = thresholds;
    Ok(())
}
