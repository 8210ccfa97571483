//! NPY v1.0 arrays, 16-bit PGM images and CSV tables.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};

const MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Clone, Debug, PartialEq)]
pub enum NpyData {
    Complex(Vec<C64>),
    Real(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    pub fn complex(shape: Vec<usize>, data: Vec<C64>) -> Self {
        Self {
            shape,
            data: NpyData::Complex(data),
        }
    }

    pub fn real(shape: Vec<usize>, data: Vec<f64>) -> Self {
        Self {
            shape,
            data: NpyData::Real(data),
        }
    }

    pub fn into_complex(self) -> Result<Vec<C64>> {
        match self.data {
            NpyData::Complex(v) => Ok(v),
            NpyData::Real(_) => Err(Error::Format("expected complex128 array, found float64".into())),
        }
    }

    pub fn into_real(self) -> Result<Vec<f64>> {
        match self.data {
            NpyData::Real(v) => Ok(v),
            NpyData::Complex(_) => Err(Error::Format("expected float64 array, found complex128".into())),
        }
    }

    fn descr(&self) -> &'static str {
        match self.data {
            NpyData::Complex(_) => "<c16",
            NpyData::Real(_) => "<f8",
        }
    }

    fn len(&self) -> usize {
        match &self.data {
            NpyData::Complex(v) => v.len(),
            NpyData::Real(v) => v.len(),
        }
    }

    /// Serialised file contents.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let count: usize = self.shape.iter().product();
        if count != self.len() {
            return Err(Error::Format(format!("shape {:?} holds {count} values, got {}", self.shape, self.len())));
        }
        let shape = match self.shape.len() {
            1 => format!("({},)", self.shape[0]),
            _ => format!("({})", self.shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
        };
        let mut header = format!("{{'descr': '{}', 'fortran_order': False, 'shape': {shape}, }}", self.descr());
        let unpadded = MAGIC.len() + 4 + header.len() + 1;
        header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
        header.push('\n');
        let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + 16 * count);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        match &self.data {
            NpyData::Complex(v) => {
                for z in v {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
            NpyData::Real(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("npy: {m}"));
        if bytes.len() < 10 || &bytes[..6] != MAGIC {
            return Err(bad("missing magic string"));
        }
        if bytes[6] != 1 {
            return Err(bad(&format!("unsupported version {}.{}", bytes[6], bytes[7])));
        }
        let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        let header = bytes
            .get(10..10 + hlen)
            .and_then(|h| std::str::from_utf8(h).ok())
            .ok_or_else(|| bad("truncated header"))?;
        let field = |key: &str| -> Result<&str> {
            let pat = format!("'{key}':");
            let at = header.find(&pat).ok_or_else(|| bad(&format!("header lacks {key}")))?;
            Ok(header[at + pat.len()..].trim_start())
        };
        let descr = field("descr")?;
        let complex = if descr.starts_with("'<c16'") {
            true
        } else if descr.starts_with("'<f8'") {
            false
        } else {
            return Err(bad(&format!("unsupported dtype {}", descr.split(',').next().unwrap_or(""))));
        };
        if !field("fortran_order")?.starts_with("False") {
            return Err(bad("Fortran-ordered arrays are not supported"));
        }
        let shape_str = field("shape")?;
        let close = shape_str.find(')').ok_or_else(|| bad("malformed shape"))?;
        let shape = shape_str[1..close]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|_| bad("malformed shape")))
            .collect::<Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        let body = &bytes[10 + hlen..];
        let width = if complex { 16 } else { 8 };
        if body.len() != count * width {
            return Err(bad(&format!("expected {} data bytes, found {}", count * width, body.len())));
        }
        let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        let data = if complex {
            NpyData::Complex(body.chunks_exact(16).map(|c| C64::new(f(&c[..8]), f(&c[8..]))).collect())
        } else {
            NpyData::Real(body.chunks_exact(8).map(f).collect())
        };
        Ok(Self { shape, data })
    }
}

pub fn write_npy(path: &Path, array: &NpyArray) -> Result<()> {
    fs::write(path, array.to_bytes()?)?;
    Ok(())
}

pub fn read_npy(path: &Path) -> Result<NpyArray> {
    NpyArray::from_bytes(&fs::read(path)?)
}

/// Binary 16-bit PGM of `values` (row-major `rows x cols`), windowed to `[0, max]`.
pub fn pgm_bytes(values: &[f64], rows: usize, cols: usize) -> Result<Vec<u8>> {
    if values.len() != rows * cols {
        return Err(Error::Format(format!("{} values for a {rows}x{cols} image", values.len())));
    }
    let max = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let mut out = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    for &v in values {
        let level = if max > 0.0 && v.is_finite() {
            (v.clamp(0.0, max) / max * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, values: &[f64], rows: usize, cols: usize) -> Result<()> {
    fs::write(path, pgm_bytes(values, rows, cols)?)?;
    Ok(())
}

/// Writes `rows` with a header taken from the record fields.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a table given as a header and preformatted rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("csv: {other:?}")),
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
