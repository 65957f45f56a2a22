//! Binary model files.
//!
//! Layout (little-endian):
//!
//! ```text
//! "BLD1"  version:u32  side:u32  O:u32 S:u32 C:u32  rho:f64  passes:u32
//! strength thresholds  f64 x (S-1)
//! coherence thresholds f64 x (C-1)
//! coefficients         f64 x K*side*side, bucket-major
//! crc32 of everything above: u32
//! ```
//!
//! Metadata is not part of the file; the CLI writes it as a JSON sidecar.

use std::path::Path;

use super::BladeModel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::structure_tensor::QuantizerSpec;

pub const MAGIC: &[u8; 4] = b"BLD1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 36;

pub fn model_to_bytes<T: Scalar>(model: &BladeModel<T>) -> Vec<u8> {
    let q = model.quantizer();
    let mut out = Vec::with_capacity(
        HEADER_LEN + 8 * (q.strength_thresholds.len() + q.coherence_thresholds.len() + model.coefficients().len()) + 4,
    );
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        model.side() as u32,
        q.orientation_bins as u32,
        q.strength_bins as u32,
        q.coherence_bins as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&q.rho.to_le_bytes());
    out.extend_from_slice(&model.passes().to_le_bytes());
    for t in q.strength_thresholds.iter().chain(&q.coherence_thresholds) {
        out.extend_from_slice(&t.to_le_bytes());
    }
    for c in model.coefficients() {
        out.extend_from_slice(&c.as_f64().to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format("model file is truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn model_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<BladeModel<T>> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Format("model file is truncated".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("not a filter-bank model (bad magic)".into()));
    }
    let body = &bytes[..bytes.len() - 4];
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let side = r.u32()? as usize;
    let (o, s, c) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let rho = r.f64()?;
    let passes = r.u32()?;
    if o == 0 || s == 0 || c == 0 || side == 0 || side > 11 {
        return Err(Error::Format("invalid header fields".into()));
    }
    let k = o.checked_mul(s).and_then(|v| v.checked_mul(c));
    let expected = k
        .and_then(|k| k.checked_mul(side * side))
        .and_then(|n| n.checked_add(s - 1 + c - 1))
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN + 4));
    match expected {
        Some(n) if n == bytes.len() => {}
        Some(n) if n > bytes.len() => return Err(Error::Format("model file is truncated".into())),
        _ => return Err(Error::Format("model file has unexpected length".into())),
    }
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Format("checksum mismatch".into()));
    }
    let strength_thresholds = r.f64s(s - 1)?;
    let coherence_thresholds = r.f64s(c - 1)?;
    let coeffs = r.f64s(k.unwrap() * side * side)?;
    let q = QuantizerSpec {
        orientation_bins: o,
        strength_bins: s,
        coherence_bins: c,
        strength_thresholds,
        coherence_thresholds,
        rho,
    };
    BladeModel::new(side, q, coeffs.into_iter().map(T::of).collect(), passes)
        .map_err(|e| Error::Format(format!("invalid model contents: {e}")))
}

/// Writes atomically: the file is complete or absent.
pub fn save_model<T: Scalar>(model: &BladeModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    std::io::Write::write_all(&mut tmp, &model_to_bytes(model)).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<BladeModel<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
