//! `.bagf`: one bag's `K x D` feature matrix.
//!
//! ```text
//! 0..4   magic "BAGF"
//! 4      version (1)
//! 5      dtype (0 = f32)
//! 6..8   reserved, zero
//! 8..12  K, u32 little-endian
//! 12..16 D, u32 little-endian
//! 16..   K*D f32 little-endian, instance-major
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::diffcore::Tensor;

pub const MAGIC: [u8; 4] = *b"BAGF";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"BAGF\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u8),
    #[error("reserved header bytes must be zero, got {0:?}")]
    Reserved([u8; 2]),
    #[error("zero dimension: K={k}, D={d}")]
    ZeroDim { k: u32, d: u32 },
    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("trailing data: expected {expected} bytes, found {actual}")]
    Trailing { expected: u64, actual: u64 },
    #[error("non-finite feature value at flat index {0}")]
    NonFinite(usize),
    #[error("matrix of {rows}x{cols} does not fit the u32 header fields")]
    TooLarge { rows: usize, cols: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode(features: &Tensor<f32>) -> Result<Vec<u8>, FormatError> {
    if let Some(i) = features.data().iter().position(|x| !x.is_finite()) {
        return Err(FormatError::NonFinite(i));
    }
    let (k, d) = features.shape();
    let (Ok(k32), Ok(d32)) = (u32::try_from(k), u32::try_from(d)) else {
        return Err(FormatError::TooLarge { rows: k, cols: d });
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * features.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[VERSION, DTYPE_F32, 0, 0]);
    out.extend_from_slice(&k32.to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    for x in features.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Tensor<f32>, FormatError> {
    let actual = bytes.len() as u64;
    if bytes.len() < 4 {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN as u64,
            actual,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN as u64,
            actual,
        });
    }
    if bytes[4] != VERSION {
        return Err(FormatError::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != DTYPE_F32 {
        return Err(FormatError::UnsupportedDtype(bytes[5]));
    }
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(FormatError::Reserved([bytes[6], bytes[7]]));
    }
    let k = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    let d = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes"));
    if k == 0 || d == 0 {
        return Err(FormatError::ZeroDim { k, d });
    }
    let expected = HEADER_LEN as u64 + 4 * k as u64 * d as u64;
    if actual < expected {
        return Err(FormatError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(FormatError::Trailing { expected, actual });
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(i) = data.iter().position(|x| !x.is_finite()) {
        return Err(FormatError::NonFinite(i));
    }
    Ok(Tensor::new(k as usize, d as usize, data).expect("length checked"))
}

pub fn write_bag(path: &Path, features: &Tensor<f32>) -> Result<(), FormatError> {
    fs::write(path, encode(features)?)?;
    Ok(())
}

pub fn read_bag(path: &Path) -> Result<Tensor<f32>, FormatError> {
    decode(&fs::read(path)?)
}
