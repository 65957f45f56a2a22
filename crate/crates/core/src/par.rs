//! Row-parallel helpers. Every output row is produced independently so
//! results do not depend on the thread count.

use rayon::prelude::*;

/// Fills `out` (row-major, `width` samples per row) by calling `f(y, row)`.
pub(crate) fn for_rows<T, F>(out: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    out.par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
}

/// Like [`for_rows`], but hands `f` bands of up to `band` rows as
/// `(first_row, rows)` so it can block its loops for the cache.
pub(crate) fn for_bands<T, F>(out: &mut [T], width: usize, band: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    let band = band.max(1);
    out.par_chunks_mut(width * band)
        .enumerate()
        .for_each(|(b, rows)| f(b * band, rows));
}

/// Applies `f` to every element of `data`.
pub(crate) fn map_inplace<T, F>(data: &mut [T], f: F)
where
    T: Send + Copy,
    F: Fn(T) -> T + Sync + Send,
{
    data.par_chunks_mut(1 << 14).for_each(|chunk| {
        for v in chunk {
            *v = f(*v);
        }
    });
}
