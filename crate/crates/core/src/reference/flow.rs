//! Edge tangent field and line integral convolution.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::par;
use crate::scalar::Scalar;
use crate::structure_tensor::{smoothed_tensor, TensorField};

/// Below this strength the tangent falls back to `(1, 0)`.
pub const MIN_STRENGTH: f64 = 1e-6;
/// Streamline integration step, pixels.
pub const STEP: f64 = 0.5;

/// Unit tangent `(tx, ty)` per pixel (weaker structure tensor eigenvector).
#[derive(Clone, Debug)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub tx: Vec<f64>,
    pub ty: Vec<f64>,
}

impl FlowField {
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.tx[i], self.ty[i])
    }
}

/// Tangent of the tensor `[[a, b], [b, c]]`, or `None` where it is too weak
/// or isotropic to define one.
#[inline]
pub(crate) fn tangent_of(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let d = 0.5 * (a - c);
    let r = (d * d + b * b).sqrt();
    let l1 = 0.5 * (a + c) + r;
    if !(l1.max(0.0).sqrt() >= MIN_STRENGTH) || r <= 0.0 {
        return None;
    }
    // dominant direction (cos t, sin t) from the double angle
    let cos2 = (d / r).clamp(-1.0, 1.0);
    let cos_t = (0.5 * (1.0 + cos2)).sqrt();
    let sin_t = (0.5 * (1.0 - cos2)).sqrt().copysign(if b == 0.0 { 1.0 } else { b });
    Some((-sin_t, cos_t))
}

/// Smoothed structure tensor, kept in `f64` for tracing.
pub(crate) struct Tensor {
    w: usize,
    h: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Tensor {
    pub(crate) fn of<T: Scalar>(img: &Image<T>, rho: f64) -> Result<Self> {
        let TensorField { width, height, a, b, c } = smoothed_tensor(img, rho)?;
        let f = |v: Vec<T>| v.into_iter().map(|x| x.as_f64()).collect();
        Ok(Tensor {
            w: width,
            h: height,
            a: f(a),
            b: f(b),
            c: f(c),
        })
    }

    fn tangent_at(&self, i: usize) -> (f64, f64) {
        tangent_of(self.a[i], self.b[i], self.c[i]).unwrap_or((1.0, 0.0))
    }

    /// Tangent from the bilinearly interpolated tensor at a fractional
    /// position (clamped to the image).
    pub(crate) fn tangent(&self, x: f64, y: f64) -> (f64, f64) {
        let (i00, i10, i01, i11, fx, fy) = bilinear_taps(self.w, self.h, x, y);
        let lerp = |p: &[f64]| {
            let top = p[i00] + fx * (p[i10] - p[i00]);
            let bot = p[i01] + fx * (p[i11] - p[i01]);
            top + fy * (bot - top)
        };
        tangent_of(lerp(&self.a), lerp(&self.b), lerp(&self.c)).unwrap_or((1.0, 0.0))
    }
}

#[inline]
pub(crate) fn bilinear_taps(w: usize, h: usize, x: f64, y: f64) -> (usize, usize, usize, usize, f64, f64) {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = (x.floor() as usize).min(w - 1);
    let y0 = (y.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    (y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1, x - x0 as f64, y - y0 as f64)
}

/// Bilinear sample of a plane with clamped coordinates.
#[inline]
pub(crate) fn sample<T: Scalar>(p: &[T], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let (i00, i10, i01, i11, fx, fy) = bilinear_taps(w, h, x, y);
    let (v00, v10, v01, v11) = (p[i00].as_f64(), p[i10].as_f64(), p[i01].as_f64(), p[i11].as_f64());
    let top = v00 + fx * (v10 - v00);
    let bot = v01 + fx * (v11 - v01);
    top + fy * (bot - top)
}

pub(crate) fn require_gray<T: Scalar>(img: &Image<T>) -> Result<()> {
    if img.channels() != 1 {
        return Err(Error::invalid("flow filters need a single-channel image"));
    }
    Ok(())
}

/// Tangent field of a single-channel image.
pub fn etf_field<T: Scalar>(img: &Image<T>, rho: f64) -> Result<FlowField> {
    require_gray(img)?;
    let t = Tensor::of(img, rho)?;
    let n = img.pixel_count();
    let (mut tx, mut ty) = (vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let (a, b) = t.tangent_at(i);
        tx[i] = a;
        ty[i] = b;
    }
    Ok(FlowField {
        width: img.width(),
        height: img.height(),
        tx,
        ty,
    })
}

/// Gaussian weights at arc lengths `k * STEP`, `k = 0..=steps`, for a line
/// integral of total half-length `length` (`sigma = length / 3`).
pub(crate) fn lic_weights(length: f64) -> Vec<f64> {
    let steps = (length / STEP).floor() as usize;
    let sigma = length / 3.0;
    (0..=steps)
        .map(|k| {
            let s = k as f64 * STEP;
            (-s * s / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// Midpoint (second-order Runge-Kutta) step along the tangent field,
/// oriented to agree with `dir`.
#[inline]
fn rk2(t: &Tensor, x: f64, y: f64, dir: (f64, f64)) -> (f64, f64, (f64, f64)) {
    let align = |v: (f64, f64), d: (f64, f64)| {
        if v.0 * d.0 + v.1 * d.1 < 0.0 {
            (-v.0, -v.1)
        } else {
            v
        }
    };
    let v1 = align(t.tangent(x, y), dir);
    let (mx, my) = (x + 0.5 * STEP * v1.0, y + 0.5 * STEP * v1.1);
    let v2 = align(t.tangent(mx, my), v1);
    (x + STEP * v2.0, y + STEP * v2.1, v2)
}

/// Gaussian-weighted line integral of `src` through every pixel along the
/// streamlines of `t`, traced both ways.
pub(crate) fn lic_plane<T: Scalar>(src: &[T], t: &Tensor, length: f64) -> Vec<T> {
    let (w, h) = (t.w, t.h);
    let weights = lic_weights(length);
    let total: f64 = weights[0] + 2.0 * weights[1..].iter().sum::<f64>();
    let mut out = vec![T::zero(); w * h];
    par::for_rows(&mut out, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let i = y * w + x;
            let mut acc = weights[0] * src[i].as_f64();
            let start = t.tangent_at(i);
            for sign in [1.0, -1.0] {
                let (mut px, mut py) = (x as f64, y as f64);
                let mut dir = (sign * start.0, sign * start.1);
                for wk in &weights[1..] {
                    let (nx, ny, d) = rk2(t, px, py, dir);
                    px = nx.clamp(0.0, (w - 1) as f64);
                    py = ny.clamp(0.0, (h - 1) as f64);
                    dir = d;
                    acc += wk * sample(src, w, h, px, py);
                }
            }
            *o = T::of(acc / total);
        }
    });
    out
}

/// Edge-preserving smoothing by repeated line integral convolution along
/// the tangent field; the field is recomputed from each pass's input.
pub fn etf_smooth<T: Scalar>(img: &Image<T>, rho: f64, length: f64, passes: u32) -> Result<Image<T>> {
    require_gray(img)?;
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::invalid(format!("streamline length must be > 0, got {length}")));
    }
    let mut cur = img.clone();
    for _ in 0..passes {
        let t = Tensor::of(&cur, rho)?;
        let out = lic_plane(cur.plane(0), &t, length);
        cur = cur.with_gray_plane(out);
    }
    Ok(cur)
}
