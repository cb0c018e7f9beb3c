//! Binary (`TNS1` real, `TNSC` complex) and text tensor formats.
//!
//! Binary layout: 4-byte magic, `u32` order, `order` x `u32` dims, then
//! little-endian `f64` values in column-major order (complex values are
//! interleaved `re, im`).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{ComplexTensor, DenseTensor};
use crate::error::{Error, Result};

const MAGIC_REAL: &[u8; 4] = b"TNS1";
const MAGIC_COMPLEX: &[u8; 4] = b"TNSC";

pub fn write_tns1(w: &mut impl Write, t: &DenseTensor) -> Result<()> {
    write_header(w, MAGIC_REAL, t.dims())?;
    for v in t.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_tnsc(w: &mut impl Write, t: &ComplexTensor) -> Result<()> {
    write_header(w, MAGIC_COMPLEX, t.dims())?;
    for v in t.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tns1(r: &mut impl Read) -> Result<DenseTensor> {
    let dims = read_header(r, MAGIC_REAL)?;
    let len = checked_len(&dims)?;
    let raw = read_f64s(r, len)?;
    DenseTensor::new(dims, raw)
}

pub fn read_tnsc(r: &mut impl Read) -> Result<ComplexTensor> {
    let dims = read_header(r, MAGIC_COMPLEX)?;
    let len = checked_len(&dims)?;
    let raw = read_f64s(r, 2 * len)?;
    let values = raw
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    ComplexTensor::new(dims, values)
}

pub fn save_tns1(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + 4 * t.order() + 8 * t.len());
    write_tns1(&mut buf, t)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_tns1(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let bytes = fs::read(path)?;
    read_tns1(&mut bytes.as_slice())
}

pub fn save_tnsc(path: impl AsRef<Path>, t: &ComplexTensor) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + 4 * t.order() + 16 * t.len());
    write_tnsc(&mut buf, t)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_tnsc(path: impl AsRef<Path>) -> Result<ComplexTensor> {
    let bytes = fs::read(path)?;
    read_tnsc(&mut bytes.as_slice())
}

/// Parses an order-3 tensor from text: frontal slices are separated by blank
/// lines, each line is one row of comma-separated values. Lines starting with
/// `#` are ignored.
pub fn parse_text(text: &str) -> Result<DenseTensor> {
    let mut slices: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !current.is_empty() {
                slices.push(std::mem::take(&mut current));
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| {
                    Error::Format(format!("line {}: bad value {s:?}: {e}", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        current.push(row);
    }
    if !current.is_empty() {
        slices.push(current);
    }
    let first = slices
        .first()
        .ok_or_else(|| Error::Format("no tensor data".into()))?;
    let (n1, n2) = (first.len(), first[0].len());
    let mut mats = Vec::with_capacity(slices.len());
    for (m, s) in slices.iter().enumerate() {
        if s.len() != n1 || s.iter().any(|r| r.len() != n2) {
            return Err(Error::Format(format!(
                "slice {m} is not {n1} x {n2} like the first slice"
            )));
        }
        mats.push(DMatrix::from_fn(n1, n2, |i, j| s[i][j]));
    }
    DenseTensor::from_frontal_slices(&[n1, n2, mats.len()], &mats)
}

/// Inverse of [`parse_text`] for order-3 tensors.
pub fn to_text(t: &DenseTensor) -> String {
    let mut out = String::new();
    for (m, s) in t.frontal_slices().iter().enumerate() {
        if m > 0 {
            out.push('\n');
        }
        for i in 0..s.nrows() {
            let row: Vec<String> = (0..s.ncols()).map(|j| format!("{:?}", s[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

fn write_header(w: &mut impl Write, magic: &[u8; 4], dims: &[usize]) -> Result<()> {
    w.write_all(magic)?;
    let order = u32::try_from(dims.len()).map_err(|_| Error::Format("order too large".into()))?;
    w.write_all(&order.to_le_bytes())?;
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} too large")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    Ok(())
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<Vec<usize>> {
    let mut m = [0u8; 4];
    read_exact(r, &mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let order = read_u32(r)? as usize;
    if !(2..=32).contains(&order) {
        return Err(Error::Format(format!("unsupported order {order}")));
    }
    (0..order).map(|_| read_u32(r).map(|d| d as usize)).collect()
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&n| n > 0 && n <= 1 << 32)
        .ok_or_else(|| Error::Format(format!("unsupported dims {dims:?}")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    read_exact(r, &mut bytes)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after tensor data".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated tensor file".into()),
        _ => Error::Io(e),
    })
}
