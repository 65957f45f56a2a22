//! BT.601 luma/chroma conversion and the grayscale/color blocks.
//!
//! Full-range analog YUV: `Y = 0.299 R + 0.587 G + 0.114 B`,
//! `U = 0.492 (B - Y)`, `V = 0.877 (R - Y)`.

use crate::error::{Error, Result};
use crate::image::{Chroma, Image};
use crate::scalar::Scalar;

pub const KR: f64 = 0.299;
pub const KG: f64 = 0.587;
pub const KB: f64 = 0.114;
pub const U_SCALE: f64 = 0.492;
pub const V_SCALE: f64 = 0.877;

#[inline]
pub fn luma_of<T: Scalar>(r: T, g: T, b: T) -> T {
    T::of(KR) * r + T::of(KG) * g + T::of(KB) * b
}

#[inline]
pub fn rgb_to_yuv<T: Scalar>(r: T, g: T, b: T) -> (T, T, T) {
    let y = luma_of(r, g, b);
    (y, T::of(U_SCALE) * (b - y), T::of(V_SCALE) * (r - y))
}

#[inline]
pub fn yuv_to_rgb<T: Scalar>(y: T, u: T, v: T) -> (T, T, T) {
    let r = y + v / T::of(V_SCALE);
    let b = y + u / T::of(U_SCALE);
    let g = (y - T::of(KR) * r - T::of(KB) * b) / T::of(KG);
    (r, g, b)
}

/// Luma plane of any image (copy of the plane for single-channel input).
pub fn luma_plane<T: Scalar>(img: &Image<T>) -> Vec<T> {
    if img.channels() == 1 {
        return img.plane(0).to_vec();
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    r.iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| luma_of(r, g, b))
        .collect()
}

/// To Grayscale: returns the clipped luma with the U/V planes stashed.
pub fn rgb_to_luma_chroma<T: Scalar>(img: &Image<T>) -> Result<Image<T>> {
    if img.channels() != 3 {
        return Err(Error::invalid(format!(
            "grayscale conversion needs 3 channels, got {}",
            img.channels()
        )));
    }
    let n = img.pixel_count();
    let mut y = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    for i in 0..n {
        let (yy, uu, vv) = rgb_to_yuv(r[i], g[i], b[i]);
        y.push(yy.unit_clamp());
        u.push(uu);
        v.push(vv);
    }
    Ok(Image::from_parts(
        img.width(),
        img.height(),
        1,
        y,
        Some(Chroma { u, v }),
    ))
}

/// To Color: recombines the current luma with the stashed chroma, clipping
/// the result into gamut.
pub fn luma_chroma_to_rgb<T: Scalar>(img: &Image<T>) -> Result<Image<T>> {
    if img.channels() != 1 {
        return Err(Error::State(format!(
            "color reassembly needs a single-channel image, got {} channels",
            img.channels()
        )));
    }
    let chroma = img
        .stashed_chroma()
        .ok_or_else(|| Error::State("no stashed chroma to reassemble color from".into()))?;
    let n = img.pixel_count();
    let mut data = vec![T::zero(); 3 * n];
    let y = img.plane(0);
    for i in 0..n {
        let (r, g, b) = yuv_to_rgb(y[i], chroma.u[i], chroma.v[i]);
        data[i] = r.unit_clamp();
        data[n + i] = g.unit_clamp();
        data[2 * n + i] = b.unit_clamp();
    }
    Ok(Image::from_parts(img.width(), img.height(), 3, data, None))
}

/// Runs `f` on the luma of `img`. Single-channel input is passed straight
/// through (its stash, if any, is preserved); color input is split into
/// luma and chroma and reassembled afterwards.
pub fn on_luma<T: Scalar>(
    img: &Image<T>,
    f: impl FnOnce(&Image<T>) -> Result<Image<T>>,
) -> Result<Image<T>> {
    if img.channels() == 1 {
        let mut out = f(img)?;
        if out.stashed_chroma().is_none() && out.pixel_count() == img.pixel_count() {
            out.set_chroma(img.stashed_chroma().cloned());
        }
        return Ok(out);
    }
    let gray = rgb_to_luma_chroma(img)?;
    let mut filtered = f(&gray)?;
    if filtered.stashed_chroma().is_none() {
        filtered.set_chroma(gray.stashed_chroma().cloned());
    }
    luma_chroma_to_rgb(&filtered)
}

/// Standard HSL to RGB, hue in degrees.
pub fn hsl_to_rgb(hue_deg: f64, sat: f64, light: f64) -> (f64, f64, f64) {
    let c = (1.0 - (2.0 * light - 1.0).abs()) * sat;
    let hp = hue_deg.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = light - c / 2.0;
    (r1 + m, g1 + m, b1 + m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rgb(r: f64, g: f64, b: f64) -> Image<f64> {
        Image::new(1, 1, 3, vec![r, g, b]).unwrap()
    }

    #[test]
    fn achromatic_and_primary_luma() {
        let white = rgb_to_luma_chroma(&rgb(1.0, 1.0, 1.0)).unwrap();
        assert!((white.get(0, 0, 0) - 1.0).abs() < 1e-12);
        let ch = white.stashed_chroma().unwrap();
        assert!(ch.u[0].abs() < 1e-12 && ch.v[0].abs() < 1e-12);
        let black = rgb_to_luma_chroma(&rgb(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(black.get(0, 0, 0), 0.0);
        let red = rgb_to_luma_chroma(&rgb(1.0, 0.0, 0.0)).unwrap();
        assert!((red.get(0, 0, 0) - 0.299).abs() < 1e-15);
    }

    #[test]
    fn grayscale_requires_color() {
        let g = Image::filled(2, 2, 1, 0.5f64).unwrap();
        assert!(matches!(rgb_to_luma_chroma(&g), Err(Error::InvalidInput(_))));
        assert!(matches!(luma_chroma_to_rgb(&g), Err(Error::State(_))));
    }

    #[test]
    fn neutral_chroma_gives_gray() {
        let img = Image::gray(1, 1, vec![0.5f64])
            .unwrap()
            .with_chroma(Chroma {
                u: vec![0.0],
                v: vec![0.0],
            })
            .unwrap();
        let out = luma_chroma_to_rgb(&img).unwrap();
        for c in 0..3 {
            assert!((out.get(0, 0, c) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn brightened_red_is_clipped_in_gamut() {
        let mut gray = rgb_to_luma_chroma(&rgb(1.0, 0.0, 0.0)).unwrap();
        gray.plane_mut(0)[0] = 1.0;
        let out = luma_chroma_to_rgb(&gray).unwrap();
        // unclipped inverse: R = 1 + 0.701, G and B below 1
        let (r, g, b) = yuv_to_rgb(1.0f64, -0.492 * 0.299, 0.877 * 0.701);
        assert!(r > 1.0);
        assert_eq!(out.get(0, 0, 0), 1.0);
        assert!((out.get(0, 0, 1) - g.clamp(0.0, 1.0)).abs() < 1e-12);
        assert!((out.get(0, 0, 2) - b.clamp(0.0, 1.0)).abs() < 1e-12);
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn hsl_known_values() {
        let close = |a: (f64, f64, f64), b: (f64, f64, f64)| {
            (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12 && (a.2 - b.2).abs() < 1e-12
        };
        assert!(close(hsl_to_rgb(0.0, 1.0, 0.5), (1.0, 0.0, 0.0)));
        assert!(close(hsl_to_rgb(120.0, 1.0, 0.5), (0.0, 1.0, 0.0)));
        assert!(close(hsl_to_rgb(240.0, 1.0, 0.25), (0.0, 0.0, 0.5)));
        assert!(close(hsl_to_rgb(77.0, 0.0, 0.3), (0.3, 0.3, 0.3)));
    }

    proptest! {
        #[test]
        fn roundtrip_is_identity_in_gamut(
            px in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 1..40)
        ) {
            let n = px.len();
            let mut data = vec![0.0; 3 * n];
            for (i, &(r, g, b)) in px.iter().enumerate() {
                data[i] = r;
                data[n + i] = g;
                data[2 * n + i] = b;
            }
            let img = Image::new(n, 1, 3, data).unwrap();
            let back = luma_chroma_to_rgb(&rgb_to_luma_chroma(&img).unwrap()).unwrap();
            for (a, b) in img.data().iter().zip(back.data()) {
                prop_assert!((a - b).abs() < 1e-5);
            }
        }
    }
}
