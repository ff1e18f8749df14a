//! Binary parameter container.
//!
//! ```text
//! magic      b"MLNS"
//! version    u32
//! dtype      u8      1 = f32, 2 = f64
//! metadata   u64 length + UTF-8 bytes
//! n_arrays   u64
//! per array  u32 name length + UTF-8 name
//!            u32 ndims, then ndims x u64 dims
//!            prod(dims) elements
//! ```
//! All integers and elements are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::params::ParamStore;
use super::tensor::{Matrix, Real};
use super::NnError;

pub const MAGIC: [u8; 4] = *b"MLNS";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub metadata: String,
    pub arrays: Vec<(String, Matrix<T>)>,
}

impl<T: Real> Checkpoint<T> {
    pub fn new(metadata: impl Into<String>) -> Self {
        Checkpoint {
            metadata: metadata.into(),
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Matrix<T>) {
        self.arrays.push((name.into(), value));
    }

    /// Adds every parameter of `store`, prefixing names with `prefix`.
    pub fn push_store(&mut self, prefix: &str, store: &ParamStore<T>) {
        for (name, v) in store.iter() {
            self.push(format!("{prefix}{name}"), v.clone());
        }
        self.push(format!("{prefix}@steps"), Matrix::from_vec(1, 1, vec![T::from_f64(store.steps as f64)]));
    }

    pub fn get(&self, name: &str) -> Option<&Matrix<T>> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Overwrites the values of `store` from arrays written by [`Self::push_store`].
    pub fn restore_store(&self, prefix: &str, store: &mut ParamStore<T>) -> Result<(), NnError> {
        for id in store.ids().collect::<Vec<_>>() {
            let name = format!("{prefix}{}", store.name(id));
            let src = self.get(&name).ok_or_else(|| NnError::MissingArray(name.clone()))?;
            let dst = store.get_mut(id);
            if src.shape() != dst.shape() {
                return Err(NnError::ShapeMismatch {
                    op: "checkpoint restore",
                    left: dst.shape(),
                    right: src.shape(),
                });
            }
            dst.data.copy_from_slice(&src.data);
        }
        if let Some(s) = self.get(&format!("{prefix}@steps")) {
            store.steps = s.data[0].as_f64() as u64;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(T::DTYPE);
        out.extend_from_slice(&(self.metadata.len() as u64).to_le_bytes());
        out.extend_from_slice(self.metadata.as_bytes());
        out.extend_from_slice(&(self.arrays.len() as u64).to_le_bytes());
        for (name, m) in &self.arrays {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&2u32.to_le_bytes());
            out.extend_from_slice(&(m.rows as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols as u64).to_le_bytes());
            for &v in &m.data {
                v.to_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let dtype = r.take(1)?[0];
        if dtype != T::DTYPE {
            return Err(NnError::Checkpoint(format!("dtype tag {dtype}, expected {}", T::DTYPE)));
        }
        let meta_len = r.u64()? as usize;
        let metadata = String::from_utf8(r.take(meta_len)?.to_vec())
            .map_err(|_| NnError::Checkpoint("metadata is not UTF-8".into()))?;
        let n = r.u64()?;
        let width = std::mem::size_of::<T>();
        let mut arrays = Vec::new();
        for _ in 0..n {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| NnError::Checkpoint("array name is not UTF-8".into()))?;
            let ndims = r.u32()? as usize;
            let dims = (0..ndims).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            let (rows, cols) = match dims.as_slice() {
                [] => (1, 1),
                [c] => (1, *c),
                [rows, cols] => (*rows, *cols),
                _ => return Err(NnError::Checkpoint(format!("array {name} has {ndims} dims"))),
            };
            let count = rows
                .checked_mul(cols)
                .ok_or_else(|| NnError::Checkpoint(format!("array {name} is too large")))?;
            let raw = r.take(count.checked_mul(width).ok_or_else(|| NnError::Checkpoint("overflow".into()))?)?;
            let data = raw.chunks_exact(width).map(T::from_le).collect();
            arrays.push((name, Matrix::from_vec(rows, cols, data)));
        }
        if r.pos != bytes.len() {
            return Err(NnError::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint { metadata, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| NnError::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let mut store = ParamStore::<f32>::new();
        store.add("w", Matrix::from_vec(2, 2, vec![1.0, -2.0, 0.5, 3.25]));
        store.steps = 7;
        let mut ck = Checkpoint::new("alg = \"iql\"");
        ck.push_store("online/", &store);
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"MLNS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(bytes[8], 1);

        let back = Checkpoint::<f32>::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        let mut fresh = ParamStore::<f32>::new();
        fresh.add("w", Matrix::zeros(2, 2));
        back.restore_store("online/", &mut fresh).unwrap();
        assert_eq!(fresh, store);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let mut ck = Checkpoint::<f32>::new("");
        ck.push("a", Matrix::zeros(3, 3));
        let bytes = ck.to_bytes();
        assert!(Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::<f64>::from_bytes(&bytes).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::<f32>::from_bytes(&bad).is_err());
    }
}
