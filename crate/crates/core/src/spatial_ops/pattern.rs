//! Hatching by luma level.

use std::path::Path;

use crate::color::luma_plane;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::load_luma;
use crate::scalar::{round_half_even, Scalar};

/// Single-channel tile repeated across the image.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Texture {
    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[(y % self.height) * self.width + (x % self.width)]
    }
}

const HATCH_TILE: usize = 12;

/// Five 45-degree line rasters, darkest first: 4, 3, 2, 1 and 0 strokes per
/// 12x12 tile.
pub fn default_hatch_textures() -> Vec<Texture> {
    (0..5)
        .map(|level| {
            let strokes = 4 - level;
            let mut data = vec![1.0; HATCH_TILE * HATCH_TILE];
            if strokes > 0 {
                let spacing = HATCH_TILE / strokes;
                for y in 0..HATCH_TILE {
                    for x in 0..HATCH_TILE {
                        if ((x + y) % HATCH_TILE).is_multiple_of(spacing) {
                            data[y * HATCH_TILE + x] = 0.0;
                        }
                    }
                }
            }
            Texture {
                width: HATCH_TILE,
                height: HATCH_TILE,
                data,
            }
        })
        .collect()
}

/// Loads tiles from image files (luma), darkest level first.
pub fn load_textures(paths: &[impl AsRef<Path>]) -> Result<Vec<Texture>> {
    paths
        .iter()
        .map(|p| {
            let img: Image<f64> = load_luma(p)?;
            Ok(Texture {
                width: img.width(),
                height: img.height(),
                data: img.into_data(),
            })
        })
        .collect()
}

/// Posterizes luma to `textures.len()` levels and replaces each pixel with
/// the matching tile sample at `(x mod tile_w, y mod tile_h)`.
pub fn pattern_fill<T: Scalar>(img: &Image<T>, textures: &[Texture]) -> Result<Image<T>> {
    let Some(first) = textures.first() else {
        return Err(Error::invalid("pattern fill needs at least one texture"));
    };
    if textures
        .iter()
        .any(|t| t.width != first.width || t.height != first.height || t.data.len() != t.width * t.height)
        || first.width == 0
        || first.height == 0
    {
        return Err(Error::invalid("pattern textures must share one non-empty tile size"));
    }
    let w = img.width();
    let top = textures.len() - 1;
    let levels = level_map(img, textures.len());
    let out: Vec<T> = levels
        .iter()
        .enumerate()
        .map(|(i, &l)| T::of(textures[l.min(top)].at(i % w, i / w)))
        .collect();
    let chroma = if img.channels() == 1 {
        img.stashed_chroma().cloned()
    } else {
        None
    };
    Ok(Image::from_parts(w, img.height(), 1, out, chroma))
}

/// Per-pixel posterization level index of the luma.
pub(crate) fn level_map<T: Scalar>(img: &Image<T>, levels: usize) -> Vec<usize> {
    if levels <= 1 {
        return vec![0; img.pixel_count()];
    }
    let steps = T::of_usize(levels - 1);
    luma_plane(img)
        .into_iter()
        .map(|v| round_half_even(v.unit_clamp() * steps).as_f64() as usize)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pixel_ops::luma_posterize;

    #[test]
    fn default_tiles_are_ordered_by_density() {
        let t = default_hatch_textures();
        assert_eq!(t.len(), 5);
        let ink: Vec<usize> = t
            .iter()
            .map(|t| t.data.iter().filter(|&&v| v == 0.0).count())
            .collect();
        assert_eq!(ink, vec![48, 36, 24, 12, 0]);
    }

    #[test]
    fn white_and_black_inputs() {
        let tex = default_hatch_textures();
        let white = Image::filled(30, 20, 3, 1.0f64).unwrap();
        let out = pattern_fill(&white, &tex).unwrap();
        assert!(out.data().iter().all(|&v| v == 1.0));
        let black = Image::filled(30, 20, 1, 0.0f64).unwrap();
        let out = pattern_fill(&black, &tex).unwrap();
        for y in 0..20 {
            for x in 0..30 {
                assert_eq!(out.get(x, y, 0), tex[0].data[(y % 12) * 12 + x % 12]);
            }
        }
    }

    #[test]
    fn empty_or_mismatched_textures_rejected() {
        let img = Image::filled(4, 4, 1, 0.5f64).unwrap();
        assert!(pattern_fill(&img, &[]).is_err());
        let mut t = default_hatch_textures();
        t[1].width = 6;
        t[1].data.truncate(6 * 12);
        assert!(pattern_fill(&img, &t).is_err());
    }

    #[test]
    fn boundary_follows_posterization() {
        // left half dark, right half light, with a soft transition column
        let img = Image::from_fn(40, 12, 3, |x, _, c| {
            let v = if x < 17 { 0.1 } else if x < 23 { 0.45 } else { 0.9 };
            v * [1.0, 0.9, 1.1][c] / 1.0
        })
        .unwrap();
        let tex = default_hatch_textures();
        let out = pattern_fill(&img, &tex).unwrap();
        // oracle: luma_posterize to the same level count and read back the level
        let post = luma_posterize(&img, tex.len() as u32).unwrap();
        let post_luma: Vec<f64> = crate::color::luma_plane(&post);
        for y in 0..12 {
            for x in 0..40 {
                let level = (post_luma[y * 40 + x] * 4.0).round() as usize;
                assert_eq!(out.get(x, y, 0), tex[level].data[(y % 12) * 12 + x % 12]);
            }
        }
    }
}
