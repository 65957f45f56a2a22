//! Explicit total variation flow, `u_t = |grad u| div(grad u / |grad u|)`.
//!
//! The divergence is assembled from the four edges around each pixel. Edge
//! `(i, j)` carries the difference `u_j - u_i` and a regularized gradient
//! magnitude `g_ij = sqrt(d_n^2 + d_t^2 + eps^2)`, where `d_t` is the central
//! difference across the edge averaged over both pixels. The leading
//! `|grad u|` factor is taken as the smallest unregularized edge magnitude
//! around the pixel, so every edge weight lies in `[0, 1]` and any step with
//! `dt <= 0.25` is a convex combination of neighbors.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::par;
use crate::scalar::Scalar;

pub const DEFAULT_DT: f64 = 0.2;
pub const DEFAULT_EPS: f64 = 1e-3;
pub const DEFAULT_STEPS: u32 = 10;
/// Largest stable time step.
pub const MAX_DT: f64 = 0.25;

fn step_plane(u: &[f64], w: usize, h: usize, dt: f64, eps2: f64) -> Vec<f64> {
    let at = |x: usize, y: usize| u[y * w + x];
    let mut out = vec![0.0; w * h];
    par::for_rows(&mut out, w, |y, row| {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for (x, o) in row.iter_mut().enumerate() {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let c = at(x, y);
            // (difference, squared magnitude) per existing edge
            let mut edges = [(0.0, 0.0); 4];
            let mut n = 0;
            if x + 1 < w {
                let dt_ = 0.25 * (at(x, yp) - at(x, ym) + at(xp, yp) - at(xp, ym));
                let d = at(xp, y) - c;
                edges[n] = (d, d * d + dt_ * dt_);
                n += 1;
            }
            if x > 0 {
                let dt_ = 0.25 * (at(x, yp) - at(x, ym) + at(xm, yp) - at(xm, ym));
                let d = at(xm, y) - c;
                edges[n] = (d, d * d + dt_ * dt_);
                n += 1;
            }
            if y + 1 < h {
                let dt_ = 0.25 * (at(xp, y) - at(xm, y) + at(xp, yp) - at(xm, yp));
                let d = at(x, yp) - c;
                edges[n] = (d, d * d + dt_ * dt_);
                n += 1;
            }
            if y > 0 {
                let dt_ = 0.25 * (at(xp, y) - at(xm, y) + at(xp, ym) - at(xm, ym));
                let d = at(x, ym) - c;
                edges[n] = (d, d * d + dt_ * dt_);
                n += 1;
            }
            let edges = &edges[..n];
            let lead = edges.iter().fold(f64::INFINITY, |m, e| m.min(e.1)).sqrt();
            let mut flux = 0.0;
            if lead > 0.0 && lead.is_finite() {
                for &(d, m2) in edges {
                    flux += d / (m2 + eps2).sqrt();
                }
                flux *= lead;
            }
            *o = c + dt * flux;
        }
    });
    out
}

/// Runs `steps` explicit steps of size `dt` with gradient floor `eps`.
pub fn tv_flow<T: Scalar>(img: &Image<T>, steps: u32, dt: f64, eps: f64) -> Result<Image<T>> {
    if img.channels() != 1 {
        return Err(Error::invalid("tv flow needs a single-channel image"));
    }
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::invalid(format!("tv flow time step must be in (0, {MAX_DT}], got {dt}")));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(format!("tv flow epsilon must be > 0, got {eps}")));
    }
    let (w, h) = (img.width(), img.height());
    let mut u: Vec<f64> = img.plane(0).iter().map(|v| v.as_f64()).collect();
    for _ in 0..steps {
        u = step_plane(&u, w, h, dt, eps * eps);
    }
    Ok(img.with_gray_plane(u.into_iter().map(T::of).collect()))
}
