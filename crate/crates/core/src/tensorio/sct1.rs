use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SCT1";
const HEADER_LEN: usize = 6;
const MAX_NDIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32Le,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32Le => 0x01,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0x01 => Ok(Dtype::F32Le),
            other => Err(Error::UnsupportedDtype(other)),
        }
    }
}

/// Dense row-major tensor as stored in an SCT1 file.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBlob {
    pub dims: Vec<u64>,
    pub data: Vec<f32>,
}

impl TensorBlob {
    pub fn new(dims: Vec<u64>, data: Vec<f32>) -> Result<Self> {
        let count = element_count(&dims)?;
        if count != data.len() {
            return Err(Error::DimOverflow(format!(
                "dims {dims:?} describe {count} elements, payload has {}",
                data.len()
            )));
        }
        Ok(TensorBlob { dims, data })
    }

    pub fn dtype(&self) -> Dtype {
        Dtype::F32Le
    }

    pub fn dims_usize(&self) -> Vec<usize> {
        self.dims.iter().map(|&d| d as usize).collect()
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 8 * self.dims.len() + 4 * self.data.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.push(self.dtype().code());
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedPayload {
                expected: HEADER_LEN,
                actual: bytes.len(),
            });
        }
        Dtype::from_code(bytes[4])?;
        let ndim = bytes[5] as usize;
        let dims_end = HEADER_LEN + 8 * ndim;
        if bytes.len() < dims_end {
            return Err(Error::TruncatedPayload {
                expected: dims_end,
                actual: bytes.len(),
            });
        }
        let dims: Vec<u64> = bytes[HEADER_LEN..dims_end]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let count = element_count(&dims)?;
        let payload_len = count
            .checked_mul(4)
            .ok_or_else(|| Error::DimOverflow(format!("{dims:?}")))?;
        let expected = dims_end + payload_len;
        if bytes.len() < expected {
            return Err(Error::TruncatedPayload {
                expected,
                actual: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(Error::TrailingBytes(bytes.len() - expected));
        }
        let data = bytes[dims_end..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(TensorBlob { dims, data })
    }
}

fn element_count(dims: &[u64]) -> Result<usize> {
    if dims.is_empty() || dims.len() > MAX_NDIM {
        return Err(Error::DimOverflow(format!(
            "tensor rank {} outside 1..={MAX_NDIM}",
            dims.len()
        )));
    }
    dims.iter().try_fold(1usize, |acc, &d| {
        usize::try_from(d)
            .ok()
            .and_then(|d| acc.checked_mul(d))
            .ok_or_else(|| Error::DimOverflow(format!("{dims:?}")))
    })
}

pub fn read_tensor(path: &Path) -> Result<TensorBlob> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    TensorBlob::from_bytes(&bytes)
}

pub fn write_tensor(path: &Path, blob: &TensorBlob) -> Result<()> {
    fs::write(path, blob.to_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_layout() {
        let blob = TensorBlob::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = blob.to_bytes();
        assert_eq!(bytes.len(), 4 + 1 + 1 + 2 * 8 + 16);
        assert_eq!(&bytes[..6], &[0x53, 0x43, 0x54, 0x31, 0x01, 0x02]);
        assert_eq!(&bytes[6..14], &2u64.to_le_bytes());
        assert_eq!(&bytes[22..26], &1.0f32.to_le_bytes());
        assert_eq!(TensorBlob::from_bytes(&bytes).unwrap(), blob);
    }

    #[test]
    fn empty_tensor() {
        let blob = TensorBlob::new(vec![0], vec![]).unwrap();
        let back = TensorBlob::from_bytes(&blob.to_bytes()).unwrap();
        assert_eq!(back.dims, vec![0]);
        assert!(back.data.is_empty());
    }

    #[test]
    fn malformed_inputs() {
        let good = TensorBlob::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap().to_bytes();
        assert!(matches!(
            TensorBlob::from_bytes(&good[..good.len() - 1]),
            Err(Error::TruncatedPayload { .. })
        ));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(TensorBlob::from_bytes(&bad), Err(Error::BadMagic)));
        let mut bad = good.clone();
        bad[4] = 0x02;
        assert!(matches!(TensorBlob::from_bytes(&bad), Err(Error::UnsupportedDtype(2))));
        let mut bad = good.clone();
        bad[6..14].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(TensorBlob::from_bytes(&bad), Err(Error::DimOverflow(_))));
        let mut long = good;
        long.push(0);
        assert!(matches!(TensorBlob::from_bytes(&long), Err(Error::TrailingBytes(1))));
        assert!(TensorBlob::new(vec![1, 1, 1, 1, 1], vec![0.0]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.sct");
        let blob = TensorBlob::new(vec![2, 1, 3], vec![0.5, -1.0, f32::MAX, 0.0, -0.0, 1e-30]).unwrap();
        write_tensor(&path, &blob).unwrap();
        let bytes = fs::read(&path).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(back.to_bytes(), bytes);
    }

    proptest! {
        #[test]
        fn bytes_round_trip(dims in prop::collection::vec(0u64..5, 1..=4), seed in any::<u32>()) {
            let count: u64 = dims.iter().product();
            let data: Vec<f32> = (0..count)
                .map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32)))
                .collect();
            let blob = TensorBlob::new(dims, data).unwrap();
            let bytes = blob.to_bytes();
            let back = TensorBlob::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
