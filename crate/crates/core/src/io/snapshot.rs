//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "LDSF"                 magic, 4 bytes
//! u32                    format version
//! u32                    d
//! u64 x d                n_k
//! f64 x d                extent_k
//! (f64 re, f64 im) x ... u1^(1..d), u2^(1..d), u3^(1..d), each row-major
//! ```

use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{Grid, ScalarField, State};

pub const MAGIC: &[u8; 4] = b"LDSF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("not a field snapshot: {0}")]
    FormatError(String),

    #[error("payload length mismatch: expected {expected} bytes, found {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unsupported snapshot version {0} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion(u32),

    #[error("i/o error: {0}")]
    Io(String),
}

/// Serializes a state.
pub fn write_field(u: &State) -> Vec<u8> {
    let grid = u.grid();
    let d = grid.dim();
    let mut out = Vec::with_capacity(12 + 16 * d + 48 * d * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for &n in grid.shape() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for &l in grid.extent() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    for s in u.scalars() {
        for v in s.values() {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(SnapshotError::FormatError("truncated header".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, SnapshotError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Deserializes a state, validating magic, version and length before
/// touching the payload.
pub fn read_field(bytes: &[u8]) -> Result<State, SnapshotError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(SnapshotError::FormatError("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    let d = r.u32()? as usize;
    if !(1..=3).contains(&d) {
        return Err(SnapshotError::FormatError(format!("dimension {d} out of range")));
    }
    let n: Vec<usize> = (0..d).map(|_| r.u64().map(|v| v as usize)).collect::<Result<_, _>>()?;
    let extent: Vec<f64> = (0..d).map(|_| r.f64()).collect::<Result<_, _>>()?;
    let grid = Grid::new(&n, &extent).map_err(|e| SnapshotError::FormatError(e.to_string()))?;

    let expected = 3 * d * grid.len() * 16;
    let actual = bytes.len() - r.pos;
    if actual != expected {
        return Err(SnapshotError::LengthMismatch { expected, actual });
    }
    let payload = &bytes[r.pos..];
    let scalars = payload
        .chunks_exact(16 * grid.len())
        .map(|chunk| {
            let vals = chunk
                .chunks_exact(16)
                .map(|c| {
                    Complex64::new(
                        f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                        f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                    )
                })
                .collect();
            ScalarField::from_values(&grid, vals).map_err(|e| SnapshotError::FormatError(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    State::from_scalars(&grid, scalars).map_err(|e| SnapshotError::FormatError(e.to_string()))
}

pub fn save_field(u: &State, path: &Path) -> Result<(), SnapshotError> {
    std::fs::write(path, write_field(u)).map_err(|e| SnapshotError::Io(format!("{}: {e}", path.display())))
}

pub fn load_field(path: &Path) -> Result<State, SnapshotError> {
    let bytes = std::fs::read(path).map_err(|e| SnapshotError::Io(format!("{}: {e}", path.display())))?;
    read_field(&bytes)
}
