//! Reader for the IDX container used by the MNIST distribution.
//!
//! Layout: two zero bytes, a type code, the dimension count, one big-endian
//! `u32` per dimension, then the row-major payload.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("bad magic: expected 0x0000 prefix, found {0:#06x}")]
    BadMagic(u16),
    #[error("unsupported element type code {0:#04x}")]
    UnsupportedType(u8),
    #[error("truncated payload: need {expected} bytes, have {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxTensor {
    pub shape: Vec<usize>,
    pub data: IdxData,
}

impl IdxTensor {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements as reals; `u8` values are scaled into `[0, 1]`.
    pub fn to_unit_f64(&self) -> Vec<f64> {
        match &self.data {
            IdxData::U8(v) => v.iter().map(|&b| f64::from(b) / 255.0).collect(),
            IdxData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
        }
    }
}

fn need(bytes: &[u8], n: usize) -> Result<(), IdxError> {
    if bytes.len() < n {
        Err(IdxError::TruncatedPayload { expected: n, got: bytes.len() })
    } else {
        Ok(())
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor, IdxError> {
    need(bytes, 4)?;
    let magic = u16::from_be_bytes([bytes[0], bytes[1]]);
    if magic != 0 {
        return Err(IdxError::BadMagic(magic));
    }
    let elem = match bytes[2] {
        0x08 => 1,
        0x0D => 4,
        t => return Err(IdxError::UnsupportedType(t)),
    };
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    need(bytes, header)?;
    let shape: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let payload = &bytes[header..];
    let expected = shape.iter().product::<usize>() * elem;
    if payload.len() < expected {
        return Err(IdxError::TruncatedPayload { expected: header + expected, got: bytes.len() });
    }
    if payload.len() > expected {
        return Err(IdxError::TrailingBytes(payload.len() - expected));
    }
    let data = if elem == 1 {
        IdxData::U8(payload.to_vec())
    } else {
        IdxData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    };
    Ok(IdxTensor { shape, data })
}

pub fn read_idx(path: &Path) -> Result<IdxTensor, IdxError> {
    let bytes = std::fs::read(path).map_err(|source| IdxError::Io { path: path.display().to_string(), source })?;
    parse_idx(&bytes)
}

/// Images flattened to `[0, 1]` rows with their labels, optionally keeping only
/// the first `limit` examples.
pub fn load_labeled(images: &Path, labels: &Path, limit: Option<usize>) -> Result<(Vec<Vec<f64>>, Vec<u8>), IdxError> {
    let img = read_idx(images)?;
    let lab = read_idx(labels)?;
    let n = img.shape.first().copied().unwrap_or(0);
    let IdxData::U8(ys) = lab.data else {
        return Err(IdxError::UnsupportedType(0x0D));
    };
    if lab.shape.len() != 1 || ys.len() != n {
        return Err(IdxError::TruncatedPayload { expected: n, got: ys.len() });
    }
    let keep = limit.map_or(n, |l| l.min(n));
    let row = if n == 0 { 0 } else { img.len() / n };
    let flat = img.to_unit_f64();
    let xs = flat.chunks(row.max(1)).take(keep).map(<[f64]>::to_vec).collect();
    Ok((xs, ys[..keep].to_vec()))
}
