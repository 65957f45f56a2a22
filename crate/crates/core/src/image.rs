//! Planar floating-point raster shared by every filter.

use crate::error::{Error, Result};
use crate::par;
use crate::scalar::Scalar;

/// Chrominance planes saved by the grayscale block so a later block can
/// reassemble color.
#[derive(Clone, Debug, PartialEq)]
pub struct Chroma<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
}

/// Row-major planar image with 1 or 3 channels.
///
/// Sample `(x, y, c)` lives at `data[c * width * height + y * width + x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
    chroma: Option<Chroma<T>>,
}

impl<T: Scalar> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "expected {} samples for {width}x{height}x{channels}, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image samples must be finite"));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            chroma: None,
        })
    }

    /// Builds an image from already-validated parts. Used by filters whose
    /// output is finite by construction.
    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<T>,
        chroma: Option<Chroma<T>>,
    ) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            data,
            chroma,
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    /// Single-channel image from one plane.
    pub fn gray(width: usize, height: usize, plane: Vec<T>) -> Result<Self> {
        Self::new(width, height, 1, plane)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.pixel_count();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[c * self.pixel_count() + y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: T) {
        let n = self.pixel_count();
        self.data[c * n + y * self.width + x] = v;
    }

    /// Reads a sample with replicate padding: coordinates are clamped into
    /// the image.
    #[inline]
    pub fn sample_clamped(&self, x: isize, y: isize, c: usize) -> T {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc, c)
    }

    pub fn stashed_chroma(&self) -> Option<&Chroma<T>> {
        self.chroma.as_ref()
    }

    pub fn take_chroma(&mut self) -> Option<Chroma<T>> {
        self.chroma.take()
    }

    /// Attaches chroma planes; they must match the image's pixel count.
    pub fn with_chroma(mut self, chroma: Chroma<T>) -> Result<Self> {
        let n = self.pixel_count();
        if chroma.u.len() != n || chroma.v.len() != n {
            return Err(Error::invalid("stashed chroma planes must match image size"));
        }
        self.chroma = Some(chroma);
        Ok(self)
    }

    pub(crate) fn set_chroma(&mut self, chroma: Option<Chroma<T>>) {
        self.chroma = chroma;
    }

    /// Same geometry and chroma, new single-channel content.
    pub(crate) fn with_gray_plane(&self, plane: Vec<T>) -> Self {
        Self::from_parts(self.width, self.height, 1, plane, self.chroma.clone())
    }

    /// Same geometry, channel count and chroma, new sample data.
    pub(crate) fn with_data(&self, data: Vec<T>) -> Self {
        Self::from_parts(
            self.width,
            self.height,
            self.channels,
            data,
            self.chroma.clone(),
        )
    }

    /// Applies `f` to every sample; chroma is carried over untouched.
    pub fn map(&self, f: impl Fn(T) -> T + Sync + Send) -> Self {
        let mut data = self.data.clone();
        par::map_inplace(&mut data, f);
        self.with_data(data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
            && self
                .chroma
                .as_ref()
                .is_none_or(|c| c.u.iter().chain(&c.v).all(|v| v.is_finite()))
    }

    pub fn convert<U: Scalar>(&self) -> Image<U> {
        let conv = |v: &Vec<T>| v.iter().map(|s| U::of(s.as_f64())).collect::<Vec<U>>();
        Image::from_parts(
            self.width,
            self.height,
            self.channels,
            conv(&self.data),
            self.chroma.as_ref().map(|c| Chroma {
                u: conv(&c.u),
                v: conv(&c.v),
            }),
        )
    }

    /// One of the eight symmetries of the square: `k & 3` quarter turns
    /// (counter-clockwise in display orientation), preceded by a horizontal
    /// flip when `k & 4` is set.
    pub fn dihedral(&self, k: u8) -> Self {
        let flip = k & 4 != 0;
        let turns = k & 3;
        let (w, h) = (self.width, self.height);
        let (nw, nh) = if turns % 2 == 1 { (h, w) } else { (w, h) };
        // maps an output coordinate back to the source coordinate
        let src = move |x: usize, y: usize| -> (usize, usize) {
            let (sx, sy) = match turns {
                0 => (x, y),
                1 => (nh - 1 - y, x),
                2 => (w - 1 - x, h - 1 - y),
                _ => (y, nw - 1 - x),
            };
            if flip {
                (w - 1 - sx, sy)
            } else {
                (sx, sy)
            }
        };
        let remap = |plane: &[T]| -> Vec<T> {
            let mut out = Vec::with_capacity(plane.len());
            for y in 0..nh {
                for x in 0..nw {
                    let (sx, sy) = src(x, y);
                    out.push(plane[sy * w + sx]);
                }
            }
            out
        };
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.channels {
            data.extend(remap(self.plane(c)));
        }
        let chroma = self.chroma.as_ref().map(|ch| Chroma {
            u: remap(&ch.u),
            v: remap(&ch.v),
        });
        Self::from_parts(nw, nh, self.channels, data, chroma)
    }

    pub fn flip_horizontal(&self) -> Self {
        self.dihedral(4)
    }

    /// Quarter turn; equivalent to `dihedral(1)`.
    pub fn rotate90(&self) -> Self {
        self.dihedral(1)
    }

    /// Replicates a single-channel image into three identical channels.
    pub fn to_three_channels(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        Self::from_parts(self.width, self.height, 3, data, None)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64()).sum::<f64>() / self.data.len() as f64
    }
}

/// Bilinear resampling with pixel-center alignment. Output dimensions are
/// `round(original * scale)`; stashed chroma is resampled alongside.
pub fn resample<T: Scalar>(img: &Image<T>, scale: f64) -> Result<Image<T>> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    let nw = (img.width() as f64 * scale).round() as usize;
    let nh = (img.height() as f64 * scale).round() as usize;
    if nw == 0 || nh == 0 {
        return Err(Error::invalid(format!(
            "scale {scale} collapses a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    resize(img, nw, nh)
}

/// Bilinear resize to explicit dimensions.
pub fn resize<T: Scalar>(img: &Image<T>, nw: usize, nh: usize) -> Result<Image<T>> {
    if nw == 0 || nh == 0 {
        return Err(Error::invalid("target dimensions must be at least 1x1"));
    }
    if nw == img.width() && nh == img.height() {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let sx = w as f64 / nw as f64;
    let sy = h as f64 / nh as f64;
    // per-column source index pair and weight
    let axis = |n: usize, s: f64, len: usize| -> Vec<(usize, usize, T)> {
        (0..n)
            .map(|i| {
                let p = ((i as f64 + 0.5) * s - 0.5).clamp(0.0, (len - 1) as f64);
                let i0 = p.floor() as usize;
                let i1 = (i0 + 1).min(len - 1);
                (i0, i1, T::of(p - i0 as f64))
            })
            .collect()
    };
    let xs = axis(nw, sx, w);
    let ys = axis(nh, sy, h);
    let resample_plane = |plane: &[T]| -> Vec<T> {
        let mut out = vec![T::zero(); nw * nh];
        par::for_rows(&mut out, nw, |y, row| {
            let (y0, y1, fy) = ys[y];
            let r0 = &plane[y0 * w..(y0 + 1) * w];
            let r1 = &plane[y1 * w..(y1 + 1) * w];
            for (o, &(x0, x1, fx)) in row.iter_mut().zip(&xs) {
                let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
                let bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
                *o = top + (bot - top) * fy;
            }
        });
        out
    };
    let mut data = Vec::with_capacity(nw * nh * img.channels());
    for c in 0..img.channels() {
        data.extend(resample_plane(img.plane(c)));
    }
    let chroma = img.stashed_chroma().map(|ch| Chroma {
        u: resample_plane(&ch.u),
        v: resample_plane(&ch.v),
    });
    Ok(Image::from_parts(nw, nh, img.channels(), data, chroma))
}
