//! On-disk formats.
//!
//! Complex matrices (recordings, transfer matrices, solution vectors) share one
//! versioned binary layout:
//!
//! ```text
//! b"MSCM" | u32 LE version (=1) | u64 LE header length | JSON header | payload
//! ```
//!
//! The JSON header holds `kind`, `rows`, `cols`, a SHA-256 of the payload and
//! a kind-specific `meta` object. The payload is `rows × cols` complex values,
//! row after row, each stored as two little-endian `f64` (re, im).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sim::{Recording, RecordingMeta};
use crate::transfer::{RowIndex, TransferKey, TransferMatrix};

const MAGIC: &[u8; 4] = b"MSCM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    pub payload_sha256: String,
    pub meta: serde_json::Value,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_owned(),
        reason: reason.into(),
    }
}

fn payload_bytes(values: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

/// Write a row-major complex matrix with a JSON header.
pub fn write_matrix(
    path: &Path,
    kind: &str,
    rows: usize,
    cols: usize,
    row_major: &[Complex64],
    meta: serde_json::Value,
) -> Result<()> {
    assert_eq!(rows * cols, row_major.len());
    let payload = payload_bytes(row_major);
    let header = MatrixHeader {
        kind: kind.to_owned(),
        rows,
        cols,
        payload_sha256: hex::encode(Sha256::digest(&payload)),
        meta,
    };
    let header_json = serde_json::to_vec(&header).map_err(|e| format_err(path, e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(header_json.len() as u64).to_le_bytes())?;
    w.write_all(&header_json)?;
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

/// Read a matrix written by [`write_matrix`], verifying the payload hash.
pub fn read_matrix(path: &Path) -> Result<(MatrixHeader, Vec<Complex64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| format_err(path, "truncated file"))?;
    if &magic != MAGIC {
        return Err(format_err(path, "not a complex-matrix file"));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4).map_err(|_| format_err(path, "truncated file"))?;
    let version = u32::from_le_bytes(buf4);
    if version != FORMAT_VERSION {
        return Err(format_err(path, format!("unsupported format version {version}")));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8).map_err(|_| format_err(path, "truncated file"))?;
    let hlen = u64::from_le_bytes(buf8) as usize;
    let mut hbytes = vec![0u8; hlen];
    r.read_exact(&mut hbytes).map_err(|_| format_err(path, "truncated header"))?;
    let header: MatrixHeader =
        serde_json::from_slice(&hbytes).map_err(|e| format_err(path, format!("header: {e}")))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != header.rows * header.cols * 16 {
        return Err(format_err(path, "payload size does not match the header shape"));
    }
    let found = hex::encode(Sha256::digest(&payload));
    if found != header.payload_sha256 {
        return Err(Error::HashMismatch {
            what: format!("payload of {}", path.display()),
            expected: header.payload_sha256.clone(),
            found,
        });
    }
    let values = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok((header, values))
}

/// Write to a sibling temporary file and rename it into place, so concurrent
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    write(&tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct RecordingHeader {
    fs: f64,
    first_index: i64,
    t_start: f64,
    n_channels: usize,
    meta: RecordingMeta,
}

pub fn write_recording(path: &Path, rec: &Recording) -> Result<()> {
    let meta = serde_json::to_value(RecordingHeader {
        fs: rec.fs,
        first_index: rec.first_index,
        t_start: rec.t_start(),
        n_channels: rec.channels.len(),
        meta: rec.meta.clone(),
    })
    .expect("serializable header");
    let flat: Vec<Complex64> = rec.channels.iter().flatten().copied().collect();
    write_matrix(path, "recording", rec.channels.len(), rec.n_samples(), &flat, meta)
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    let (header, values) = read_matrix(path)?;
    if header.kind != "recording" {
        return Err(format_err(path, format!("expected a recording, found {}", header.kind)));
    }
    let meta: RecordingHeader =
        serde_json::from_value(header.meta).map_err(|e| format_err(path, e.to_string()))?;
    let channels = values.chunks(header.cols.max(1)).map(<[_]>::to_vec).collect();
    Ok(Recording {
        fs: meta.fs,
        first_index: meta.first_index,
        channels,
        meta: meta.meta,
    })
}

#[derive(Serialize, Deserialize)]
struct TransferHeader {
    key: TransferKey,
    rows: Vec<RowIndex>,
}

pub fn write_transfer(path: &Path, m: &TransferMatrix) -> Result<()> {
    let (rows, cols) = m.shape();
    let flat: Vec<Complex64> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|idx| m.entries[idx])
        .collect();
    let meta = serde_json::to_value(TransferHeader {
        key: m.key.clone(),
        rows: m.rows.clone(),
    })
    .expect("serializable header");
    write_matrix(path, "transfer", rows, cols, &flat, meta)
}

pub fn write_transfer_atomic(path: &Path, m: &TransferMatrix) -> Result<()> {
    write_atomic(path, |tmp| write_transfer(tmp, m))
}

/// Read a transfer matrix; with `expected`, the stored key must match.
pub fn read_transfer(path: &Path, expected: Option<&TransferKey>) -> Result<TransferMatrix> {
    let (header, values) = read_matrix(path)?;
    if header.kind != "transfer" {
        return Err(format_err(path, format!("expected a transfer matrix, found {}", header.kind)));
    }
    let meta: TransferHeader =
        serde_json::from_value(header.meta).map_err(|e| format_err(path, e.to_string()))?;
    if let Some(key) = expected {
        if &meta.key != key {
            return Err(Error::HashMismatch {
                what: format!("transfer key of {}", path.display()),
                expected: key.digest(),
                found: meta.key.digest(),
            });
        }
    }
    if meta.rows.len() != header.rows {
        return Err(format_err(path, "row index does not match the matrix shape"));
    }
    Ok(TransferMatrix {
        entries: DMatrix::from_row_slice(header.rows, header.cols, &values),
        rows: meta.rows,
        key: meta.key,
    })
}

/// Write a complex vector with metadata.
pub fn write_vector(path: &Path, kind: &str, values: &[Complex64], meta: serde_json::Value) -> Result<()> {
    write_matrix(path, kind, values.len(), 1, values, meta)
}

pub fn read_vector(path: &Path, kind: &str) -> Result<(serde_json::Value, Vec<Complex64>)> {
    let (header, values) = read_matrix(path)?;
    if header.kind != kind || header.cols != 1 {
        return Err(format_err(path, format!("expected a {kind} vector, found {}", header.kind)));
    }
    Ok((header.meta, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::Kernel2D;
    use crate::transfer::QuadratureSpec;

    #[test]
    fn recording_roundtrip() {
        let rec = Recording {
            fs: 10_000.0,
            first_index: -3,
            channels: vec![
                vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 1e-300)],
                vec![Complex64::new(3.0, -4.0), Complex64::new(f64::MIN_POSITIVE, 7.0)],
            ],
            meta: RecordingMeta {
                scenario_hash: "abc".into(),
                signal: None,
                history: vec!["x".into()],
            },
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec.bin");
        write_recording(&p, &rec).unwrap();
        assert_eq!(read_recording(&p).unwrap(), rec);
    }

    fn sample_transfer() -> TransferMatrix {
        TransferMatrix {
            entries: DMatrix::from_fn(2, 3, |r, c| Complex64::new(r as f64, c as f64 * 0.5)),
            rows: vec![
                RowIndex {
                    mic: 0,
                    bin: 50,
                    frequency: 1000.0,
                },
                RowIndex {
                    mic: 1,
                    bin: 51,
                    frequency: 1020.0,
                },
            ],
            key: TransferKey {
                scenario: "s".into(),
                window: "w".into(),
                selection: "b".into(),
                kernel: Kernel2D::FreeField,
                quad: QuadratureSpec::default(),
                f0: 1000.0,
            },
        }
    }

    #[test]
    fn transfer_roundtrip_and_key_check() {
        let m = sample_transfer();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.bin");
        write_transfer_atomic(&p, &m).unwrap();
        assert_eq!(read_transfer(&p, Some(&m.key)).unwrap(), m);
        let mut other = m.key.clone();
        other.f0 = 500.0;
        assert!(matches!(read_transfer(&p, Some(&other)), Err(Error::HashMismatch { .. })));
    }

    #[test]
    fn corruption_is_detected() {
        let m = sample_transfer();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.bin");
        write_transfer(&p, &m).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        let n = bytes.len();
        bytes[n - 3] ^= 0x55;
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_transfer(&p, None), Err(Error::HashMismatch { .. })));
        std::fs::write(&p, b"junk").unwrap();
        assert!(matches!(read_transfer(&p, None), Err(Error::Format { .. })));
    }
}
