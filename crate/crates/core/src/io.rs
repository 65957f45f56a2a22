//! 8-bit PNG input and output. Samples are scaled by 1/255 on read and
//! rounded after clipping on write, so 8-bit data round-trips exactly.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::color::luma_plane;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

fn to_u8<T: Scalar>(v: T) -> u8 {
    (v.unit_clamp().as_f64() * 255.0).round() as u8
}

fn from_dynamic<T: Scalar>(img: DynamicImage) -> Result<Image<T>> {
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let n = w * h;
    let mut data = vec![T::zero(); 3 * n];
    for (i, px) in rgb.pixels().enumerate() {
        for c in 0..3 {
            data[c * n + i] = T::of(px[c] as f64 / 255.0);
        }
    }
    Image::new(w, h, 3, data)
}

/// Decodes PNG (or any format the codec recognizes) bytes into a
/// three-channel image.
pub fn decode_png<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    let img = image::load_from_memory(bytes)?;
    from_dynamic(img)
}

/// Loads an image file as three-channel RGB.
pub fn load_png<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes)
}

/// Loads an image file and returns its BT.601 luma as a single channel.
pub fn load_luma<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let rgb: Image<T> = load_png(path)?;
    Image::gray(rgb.width(), rgb.height(), luma_plane(&rgb))
}

/// Encodes to PNG: 8-bit gray for one channel, 8-bit RGB for three.
pub fn encode_png<T: Scalar>(img: &Image<T>) -> Result<Vec<u8>> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let n = img.pixel_count();
    let dynimg = if img.channels() == 1 {
        let buf: Vec<u8> = img.plane(0).iter().map(|&v| to_u8(v)).collect();
        DynamicImage::ImageLuma8(
            GrayImage::from_raw(w, h, buf).ok_or_else(|| Error::invalid("bad buffer size"))?,
        )
    } else {
        let mut buf = Vec::with_capacity(3 * n);
        let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
        for i in 0..n {
            buf.extend([to_u8(r[i]), to_u8(g[i]), to_u8(b[i])]);
        }
        DynamicImage::ImageRgb8(
            RgbImage::from_raw(w, h, buf).ok_or_else(|| Error::invalid("bad buffer size"))?,
        )
    };
    let mut out = Cursor::new(Vec::new());
    dynimg.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn save_png<T: Scalar>(img: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
