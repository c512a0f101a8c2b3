//! `OBM1` binary matrices: the magic bytes `OBM1`, a `u8` dtype code
//! (`1` = f64, `2` = signed i8), `u64` rows, `u64` cols, then the payload in
//! row-major little-endian order.

use std::fs;
use std::path::Path;

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::signal::SignedMatrix;

pub const MAGIC: &[u8; 4] = b"OBM1";
const HEADER_LEN: usize = 4 + 1 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    F64 = 1,
    I8 = 2,
}

impl Dtype {
    fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Dtype::F64),
            2 => Some(Dtype::I8),
            _ => None,
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::I8 => 1,
        }
    }
}

/// A decoded file, still tagged by dtype.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Real(Array2<f64>),
    Signed(SignedMatrix),
}

fn header(dtype: Dtype, rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * dtype.width());
    out.extend_from_slice(MAGIC);
    out.push(dtype as u8);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    out
}

pub fn encode_real(x: &Array2<f64>) -> Vec<u8> {
    let mut out = header(Dtype::F64, x.nrows(), x.ncols());
    for v in x.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_signed(y: &SignedMatrix) -> Vec<u8> {
    let (r, c) = y.dim();
    let mut out = header(Dtype::I8, r, c);
    out.extend(y.data().iter().map(|&v| v as u8));
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("missing OBM1 magic".into()));
    }
    let dtype = Dtype::from_code(bytes[4]).ok_or_else(|| bad(format!("unknown dtype code {}", bytes[4])))?;
    let rows = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[13..21].try_into().expect("8 bytes"));
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| bad(format!("{rows} x {cols} does not fit in memory")))?;
    let payload = &bytes[HEADER_LEN..];
    if Some(payload.len()) != count.checked_mul(dtype.width()) {
        return Err(bad(format!(
            "payload has {} bytes, expected {} for {rows} x {cols}",
            payload.len(),
            count * dtype.width()
        )));
    }
    let dim = (rows as usize, cols as usize);
    match dtype {
        Dtype::F64 => {
            let vals = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            Ok(Matrix::Real(Array2::from_shape_vec(dim, vals).expect("length checked")))
        }
        Dtype::I8 => {
            let vals = payload.iter().map(|&b| b as i8).collect();
            let data = Array2::from_shape_vec(dim, vals).expect("length checked");
            SignedMatrix::new(data).map(Matrix::Signed).map_err(|e| bad(e.to_string()))
        }
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes, path)
}

pub fn write_real(path: &Path, x: &Array2<f64>) -> Result<()> {
    write_bytes(path, &encode_real(x))
}

pub fn write_signed(path: &Path, y: &SignedMatrix) -> Result<()> {
    write_bytes(path, &encode_signed(y))
}

pub fn read_real(path: &Path) -> Result<Array2<f64>> {
    match read(path)? {
        Matrix::Real(x) => Ok(x),
        Matrix::Signed(_) => Err(Error::Format {
            path: path.to_path_buf(),
            msg: "expected real matrix".into(),
        }),
    }
}

pub fn read_signed(path: &Path) -> Result<SignedMatrix> {
    match read(path)? {
        Matrix::Signed(y) => Ok(y),
        Matrix::Real(_) => Err(Error::Format {
            path: path.to_path_buf(),
            msg: "expected signed matrix".into(),
        }),
    }
}

/// Measured RFI record, optionally cropped to its leading `n x m` block.
pub fn load_measured_rfi(path: &Path, crop: Option<(usize, usize)>) -> Result<Array2<f64>> {
    let x = read_real(path)?;
    match crop {
        None => Ok(x),
        Some((n, m)) => {
            if n > x.nrows() || m > x.ncols() {
                return Err(Error::shape((n, m), x.dim()));
            }
            Ok(x.slice(s![..n, ..m]).to_owned())
        }
    }
}
