//! Binary checkpoints.
//!
//! ```text
//! "RLIE" | u32 version | u32 count
//! count x { u16 name_len | name | u8 ndim | ndim x u32 dims | u8 dtype | payload }
//! u32 config_len | config JSON
//! ```
//! All integers and floats are little-endian; dtype 0 is f32, 1 is f64.

use std::fs;
use std::path::Path;

use crate::diffnet::{ParamStore, Tensor};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RLIE";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DType {
    F32,
    #[default]
    F64,
}

/// Named arrays plus the JSON configuration they were trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub arrays: Vec<(String, Tensor)>,
    pub config: String,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore, config: String) -> Self {
        Checkpoint {
            arrays: store
                .iter()
                .map(|(_, p)| (p.name.clone(), p.value.clone()))
                .collect(),
            config,
        }
    }

    /// Rebuilds a store; every parameter is trainable.
    pub fn to_store(&self) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for (name, t) in &self.arrays {
            store
                .add(name.clone(), t.clone())
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        Ok(store)
    }

    pub fn encode(&self, dtype: DType) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for (name, t) in &self.arrays {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            match dtype {
                DType::F32 => {
                    out.push(0);
                    for &v in t.data() {
                        out.extend_from_slice(&(v as f32).to_le_bytes());
                    }
                }
                DType::F64 => {
                    out.push(1);
                    for &v in t.data() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
        out.extend_from_slice(&(self.config.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let count = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| {
                Error::Checkpoint(format!("array name at byte {} is not UTF-8", r.pos))
            })?;
            let ndim = r.u8()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let data = match r.u8()? {
                0 => r
                    .take(n * 4)?
                    .chunks(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect(),
                1 => r
                    .take(n * 8)?
                    .chunks(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
                d => {
                    return Err(Error::Checkpoint(format!(
                        "array {name}: unknown dtype {d}"
                    )))
                }
            };
            let t = Tensor::new(&shape, data)
                .map_err(|e| Error::Checkpoint(format!("array {name}: {e}")))?;
            arrays.push((name, t));
        }
        let len = r.u32()? as usize;
        let config = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("config is not UTF-8".into()))?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint { arrays, config })
    }

    pub fn save(&self, path: &Path, dtype: DType) -> Result<()> {
        fs::write(path, self.encode(dtype)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Checkpoint(format!("truncated at byte {} (needed {n} more)", self.pos))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut store = ParamStore::new();
        store
            .add(
                "a.w",
                Tensor::new(&[2, 3], vec![0.1, -2.5, 1e-300, 3.0, f64::MAX, -0.0]).unwrap(),
            )
            .unwrap();
        store.add("b", Tensor::scalar(7.25)).unwrap();
        Checkpoint::from_store(&store, r#"{"k":1}"#.into())
    }

    #[test]
    fn f64_round_trip_is_bit_exact() {
        let c = sample();
        let back = Checkpoint::decode(&c.encode(DType::F64)).unwrap();
        for ((n0, t0), (n1, t1)) in c.arrays.iter().zip(&back.arrays) {
            assert_eq!(n0, n1);
            assert_eq!(t0.shape(), t1.shape());
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(t0), bits(t1));
        }
        assert_eq!(back.config, c.config);
    }

    #[test]
    fn f32_export_rounds() {
        let mut store = ParamStore::new();
        store
            .add("x", Tensor::new(&[2], vec![0.1, 1.5]).unwrap())
            .unwrap();
        let c = Checkpoint::from_store(&store, String::new());
        let back = Checkpoint::decode(&c.encode(DType::F32)).unwrap();
        assert_eq!(back.arrays[0].1.data(), &[0.1f32 as f64, 1.5]);
    }

    #[test]
    fn header_layout() {
        let bytes = sample().encode(DType::F64);
        assert_eq!(&bytes[..4], b"RLIE");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..14], &3u16.to_le_bytes());
        assert_eq!(&bytes[14..17], b"a.w");
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = sample().encode(DType::F64);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            Checkpoint::decode(&bad),
            Err(Error::Checkpoint(_))
        ));
        let mut v99 = bytes.clone();
        v99[4..8].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::decode(&v99),
            Err(Error::UnsupportedVersion(99))
        ));
        for cut in [3, 10, 20, bytes.len() - 1] {
            assert!(Checkpoint::decode(&bytes[..cut]).is_err());
        }
    }
}
