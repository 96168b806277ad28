//! Binary `DSTM` and CSV matrix files.
//!
//! `DSTM` layout: the magic bytes `DSTM`, a version byte (1), a dtype byte
//! (0 = f64, 1 = f32), row and column counts as u64, then the row-major
//! little-endian payload.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Mat;
use crate::error::{Error, Result};
use crate::scalar::{decode, encode, Scalar};

const MAGIC: &[u8; 4] = b"DSTM";
const VERSION: u8 = 1;
const HEADER: usize = 4 + 1 + 1 + 8 + 8;

pub fn encode_dstm<T: Scalar>(m: &Mat<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + m.as_slice().len() * T::BYTES);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(T::DTYPE);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    out.extend_from_slice(&encode(m.as_slice()));
    out
}

/// Parses a `DSTM` image, converting the stored precision to `T`.
pub fn decode_dstm<T: Scalar>(bytes: &[u8]) -> Result<Mat<T>> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a DSTM file".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported DSTM version {}", bytes[4])));
    }
    let u64_at = |at: usize| {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[at..at + 8]);
        u64::from_le_bytes(b) as usize
    };
    let (rows, cols) = (u64_at(6), u64_at(14));
    let payload = &bytes[HEADER..];
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("DSTM dimensions overflow".into()))?;
    let data: Vec<T> = match bytes[5] {
        0 => check_len(payload, n, 8).map(|p| decode::<f64>(p).into_iter().map(T::lit).collect())?,
        1 => check_len(payload, n, 4)
            .map(|p| decode::<f32>(p).into_iter().map(|v| T::lit(v as f64)).collect())?,
        d => return Err(Error::Format(format!("unknown DSTM dtype {d}"))),
    };
    Mat::from_vec(rows, cols, data)
}

fn check_len(payload: &[u8], n: usize, width: usize) -> Result<&[u8]> {
    if payload.len() != n * width {
        return Err(Error::Format(format!(
            "DSTM payload has {} bytes, expected {}",
            payload.len(),
            n * width
        )));
    }
    Ok(payload)
}

pub fn write_dstm<T: Scalar>(path: impl AsRef<Path>, m: &Mat<T>) -> Result<()> {
    fs::write(path, encode_dstm(m))?;
    Ok(())
}

pub fn read_dstm<T: Scalar>(path: impl AsRef<Path>) -> Result<Mat<T>> {
    decode_dstm(&fs::read(path)?)
}

/// Comma-separated rows, no header.
pub fn write_csv<T: Scalar>(path: impl AsRef<Path>, m: &Mat<T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{:e}", v.as_f64())).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Mat<T>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    Mat::from_rows(&rows).map_err(|_| Error::Format("rows of unequal length".into()))
}

/// Reads either format, choosing by extension (`.csv` or anything else).
pub fn read_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<Mat<T>> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(path)
    } else {
        read_dstm(path)
    }
}
