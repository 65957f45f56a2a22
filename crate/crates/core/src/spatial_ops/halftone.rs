//! Amplitude-modulated halftone screens.

use serde::{Deserialize, Serialize};

use crate::color::luma_plane;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalftoneMode {
    /// One unrotated black screen.
    Gray,
    /// Cyan, magenta, yellow and black screens at 15, 75, 0 and 45 degrees.
    Cmyk,
}

const CMYK_ANGLES: [f64; 4] = [15.0, 75.0, 0.0, 45.0];

/// Renders one screen. `ink` holds the per-pixel coverage in `[0, 1]`.
///
/// Pixels are grouped into `cell x cell` squares of a grid rotated by
/// `angle_deg`. Each cell inks the `round(mean coverage * pixels)` pixels
/// nearest its center, which is a discrete disc of the matching area.
fn screen(ink: &[f64], w: usize, h: usize, cell: usize, angle_deg: f64) -> Vec<bool> {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let cs = cell as f64;
    let rotated = |i: usize| {
        let (x, y) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
        (x * cos + y * sin, -x * sin + y * cos)
    };
    let n = w * h;
    let mut cell_of = Vec::with_capacity(n);
    let (mut imin, mut jmin, mut imax, mut jmax) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for p in 0..n {
        let (u, v) = rotated(p);
        let (ci, cj) = ((u / cs).floor() as i64, (v / cs).floor() as i64);
        imin = imin.min(ci);
        imax = imax.max(ci);
        jmin = jmin.min(cj);
        jmax = jmax.max(cj);
        cell_of.push((ci, cj));
    }
    let cols = (imax - imin + 1) as usize;
    let ncells = cols * (jmax - jmin + 1) as usize;
    let id = |(ci, cj): (i64, i64)| (cj - jmin) as usize * cols + (ci - imin) as usize;

    // counting sort of pixels by cell
    let mut start = vec![0usize; ncells + 1];
    for &c in &cell_of {
        start[id(c) + 1] += 1;
    }
    for k in 0..ncells {
        start[k + 1] += start[k];
    }
    let mut fill = start.clone();
    let mut order = vec![0usize; n];
    for (p, &c) in cell_of.iter().enumerate() {
        let k = id(c);
        order[fill[k]] = p;
        fill[k] += 1;
    }

    let mut inked = vec![false; n];
    let mut members: Vec<(f64, usize)> = Vec::new();
    for k in 0..ncells {
        let pixels = &order[start[k]..start[k + 1]];
        if pixels.is_empty() {
            continue;
        }
        let coverage: f64 = pixels.iter().map(|&p| ink[p].clamp(0.0, 1.0)).sum::<f64>()
            / pixels.len() as f64;
        let count = (coverage * pixels.len() as f64).round() as usize;
        if count == 0 {
            continue;
        }
        let (ci, cj) = cell_of[pixels[0]];
        let (cu, cv) = ((ci as f64 + 0.5) * cs, (cj as f64 + 0.5) * cs);
        members.clear();
        members.extend(pixels.iter().map(|&p| {
            let (u, v) = rotated(p);
            ((u - cu).powi(2) + (v - cv).powi(2), p)
        }));
        members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, p) in members.iter().take(count) {
            inked[p] = true;
        }
    }
    inked
}

/// Halftone with dots whose area tracks each cell's mean ink coverage.
pub fn halftone<T: Scalar>(img: &Image<T>, cell: usize, mode: HalftoneMode) -> Result<Image<T>> {
    if cell < 2 {
        return Err(Error::invalid(format!("halftone cell must be >= 2, got {cell}")));
    }
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    match mode {
        HalftoneMode::Gray => {
            let ink: Vec<f64> = luma_plane(img).iter().map(|v| 1.0 - v.as_f64()).collect();
            let dots = screen(&ink, w, h, cell, 0.0);
            let out = dots.iter().map(|&d| if d { T::zero() } else { T::one() }).collect();
            let chroma = if img.channels() == 1 {
                img.stashed_chroma().cloned()
            } else {
                None
            };
            Ok(Image::from_parts(w, h, 1, out, chroma))
        }
        HalftoneMode::Cmyk => {
            let rgb = img.to_three_channels();
            let mut inks = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for i in 0..n {
                let c = 1.0 - rgb.plane(0)[i].unit_clamp().as_f64();
                let m = 1.0 - rgb.plane(1)[i].unit_clamp().as_f64();
                let y = 1.0 - rgb.plane(2)[i].unit_clamp().as_f64();
                let k = c.min(m).min(y);
                let denom = 1.0 - k;
                let norm = |v: f64| if denom > 1e-12 { (v - k) / denom } else { 0.0 };
                inks[0][i] = norm(c);
                inks[1][i] = norm(m);
                inks[2][i] = norm(y);
                inks[3][i] = k;
            }
            let screens: Vec<Vec<bool>> = inks
                .iter()
                .zip(CMYK_ANGLES)
                .map(|(ink, a)| screen(ink, w, h, cell, a))
                .collect();
            let mut data = vec![T::zero(); 3 * n];
            for i in 0..n {
                let k = if screens[3][i] { 0.0 } else { 1.0 };
                for c in 0..3 {
                    let v = if screens[c][i] { 0.0 } else { 1.0 };
                    data[c * n + i] = T::of(v * k);
                }
            }
            Ok(Image::from_parts(w, h, 3, data, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn white_and_black() {
        let white = Image::filled(33, 17, 3, 1.0f64).unwrap();
        for mode in [HalftoneMode::Gray, HalftoneMode::Cmyk] {
            let out = halftone(&white, 6, mode).unwrap();
            assert!(out.data().iter().all(|&v| v == 1.0));
        }
        let black = Image::filled(33, 17, 3, 0.0f64).unwrap();
        for mode in [HalftoneMode::Gray, HalftoneMode::Cmyk] {
            let out = halftone(&black, 6, mode).unwrap();
            assert!(out.data().iter().all(|&v| v == 0.0));
        }
        assert!(halftone(&white, 1, HalftoneMode::Gray).is_err());
    }

    #[test]
    fn half_gray_cells_cover_half_their_area() {
        let img = Image::filled(32, 24, 1, 0.5f64).unwrap();
        let out = halftone(&img, 8, HalftoneMode::Gray).unwrap();
        for cy in 0..3 {
            for cx in 0..4 {
                let mut covered = 0;
                for y in cy * 8..cy * 8 + 8 {
                    for x in cx * 8..cx * 8 + 8 {
                        if out.get(x, y, 0) == 0.0 {
                            covered += 1;
                        }
                    }
                }
                assert!((covered as i32 - 32).abs() <= 1, "cell ({cx},{cy}) has {covered}");
            }
        }
        // the dot is centered: the four center pixels are inked, corners are not
        assert_eq!(out.get(3, 3, 0), 0.0);
        assert_eq!(out.get(4, 4, 0), 0.0);
        assert_eq!(out.get(0, 0, 0), 1.0);
    }

    #[test]
    fn cmyk_primary_uses_one_ink() {
        // pure cyan ink only: red channel carries dots, green and blue stay white
        let img = Image::from_fn(24, 24, 3, |_, _, c| [0.4, 1.0, 1.0][c]).unwrap();
        let out = halftone(&img, 6, HalftoneMode::Cmyk).unwrap();
        assert!(out.plane(1).iter().all(|&v| v == 1.0));
        assert!(out.plane(2).iter().all(|&v| v == 1.0));
        let inked = out.plane(0).iter().filter(|&&v| v == 0.0).count() as f64;
        assert!((inked / 576.0 - 0.6).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn cell_coverage_tracks_darkness(level in 0.0f64..=1.0, cell in 2usize..10) {
            let (w, h) = (cell * 3, cell * 2);
            let img = Image::filled(w, h, 1, level).unwrap();
            let out = halftone(&img, cell, HalftoneMode::Gray).unwrap();
            for cy in 0..2 {
                for cx in 0..3 {
                    let mut covered = 0.0;
                    for y in cy * cell..(cy + 1) * cell {
                        for x in cx * cell..(cx + 1) * cell {
                            covered += 1.0 - out.get(x, y, 0);
                        }
                    }
                    let expected = (1.0 - level) * (cell * cell) as f64;
                    prop_assert!((covered - expected).abs() <= 1.0);
                }
            }
        }
    }
}
