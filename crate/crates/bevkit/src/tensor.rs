//! Dense little-endian f32 tensors and their on-disk format.
//!
//! Layout on disk: magic `BEVT`, version `u8 = 1`, dtype `u8 = 0` (IEEE-754
//! binary32 little-endian), `ndim: u32 LE`, one `u32 LE` per dimension, then
//! the row-major payload. Round trips are bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"BEVT";
pub const TENSOR_VERSION: u8 = 1;
pub const TENSOR_DTYPE_F32: u8 = 0;

/// A dense row-major f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor32 {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor32 {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor32 {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn from_data(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::contract(format!(
                "shape {shape:?} implies {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor32 { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat offset of a multi-dimensional index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (i, &ix) in index.iter().enumerate() {
            debug_assert!(ix < self.shape[i]);
            off = off * self.shape[i] + ix;
        }
        off
    }

    pub fn at(&self, index: &[usize]) -> f32 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f32) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    /// Order-insensitive FNV-1a digest of shape and payload bits. Used to
    /// check run-to-run determinism.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |byte: u8| {
            h ^= byte as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        };
        for &d in &self.shape {
            for b in (d as u64).to_le_bytes() {
                feed(b);
            }
        }
        for &v in &self.data {
            for b in v.to_bits().to_le_bytes() {
                feed(b);
            }
        }
        h
    }

    /// Serializes to the binary format described in the module docs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10 + 4 * self.shape.len() + 4 * self.data.len());
        out.extend_from_slice(TENSOR_MAGIC);
        out.push(TENSOR_VERSION);
        out.push(TENSOR_DTYPE_F32);
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &d in &self.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let need = |expected: usize| -> Result<()> {
            if bytes.len() < expected {
                Err(Error::Truncated {
                    expected,
                    actual: bytes.len(),
                })
            } else {
                Ok(())
            }
        };
        need(10)?;
        if &bytes[0..4] != TENSOR_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes[4] != TENSOR_VERSION {
            return Err(Error::BadVersion(bytes[4]));
        }
        if bytes[5] != TENSOR_DTYPE_F32 {
            return Err(Error::BadDtype(bytes[5]));
        }
        let ndim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let header = 10 + 4 * ndim;
        need(header)?;
        let mut shape = Vec::with_capacity(ndim);
        for i in 0..ndim {
            let off = 10 + 4 * i;
            shape.push(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize);
        }
        let n: usize = shape.iter().product();
        let expected = header + 4 * n;
        need(expected)?;
        if bytes.len() > expected {
            return Err(Error::TrailingData {
                extra: bytes.len() - expected,
            });
        }
        let data = bytes[header..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor32 { shape, data })
    }
}

/// Writes a tensor atomically (temp file in the same directory, then rename).
pub fn save_tensor(tensor: &Tensor32, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))?;
    tmp.write_all(&tensor.to_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor32> {
    let bytes = fs::read(path)?;
    Tensor32::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_size_matches_format_arithmetic() {
        let t = Tensor32::zeros(vec![2, 3]);
        // 4 magic + 1 version + 1 dtype + 4 ndim + 2*4 dims + 6*4 payload
        assert_eq!(t.to_bytes().len(), 42);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let data: Vec<f32> = (0..24).map(|i| (i as f32).sin() * 1e3).collect();
        let t = Tensor32::from_data(vec![2, 3, 4], data).unwrap();
        let back = Tensor32::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn corrupt_inputs_map_to_distinct_errors() {
        let good = Tensor32::zeros(vec![2, 2]).to_bytes();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            Tensor32::from_bytes(&bad_magic),
            Err(Error::BadMagic)
        ));

        let mut bad_version = good.clone();
        bad_version[4] = 9;
        assert!(matches!(
            Tensor32::from_bytes(&bad_version),
            Err(Error::BadVersion(9))
        ));

        let mut bad_dtype = good.clone();
        bad_dtype[5] = 7;
        assert!(matches!(
            Tensor32::from_bytes(&bad_dtype),
            Err(Error::BadDtype(7))
        ));

        let truncated = &good[..good.len() - 3];
        assert!(matches!(
            Tensor32::from_bytes(truncated),
            Err(Error::Truncated { .. })
        ));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(
            Tensor32::from_bytes(&trailing),
            Err(Error::TrailingData { extra: 1 })
        ));
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bevt");
        let t = Tensor32::from_data(vec![3], vec![1.0, -2.5, 3.25]).unwrap();
        save_tensor(&t, &path).unwrap();
        assert_eq!(load_tensor(&path).unwrap(), t);
    }
}
