//! Named parameter storage and the binary checkpoint codec.
//!
//! Checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes   b"LSACKPT\0"
//! version   u32       currently 1
//! count     u32       number of tensors
//! repeated `count` times:
//!   name_len  u32
//!   name      name_len bytes of UTF-8
//!   rows      u32
//!   cols      u32
//!   values    rows * cols IEEE-754 f64, row-major
//! ```
//!
//! Values are stored as raw bit patterns so a save/load cycle is bitwise exact.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LSACKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Handle to a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub value: Matrix,
}

/// Every learnable tensor of a model, addressed by [`ParamId`] and by unique name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    tensors: Vec<NamedTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on duplicate names; layouts are built by code, not by input.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "duplicate parameter name {name}"
        );
        self.tensors.push(NamedTensor { name, value });
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.tensors.iter().position(|t| t.name == name).map(ParamId)
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.tensors[id.0].value
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.tensors[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.tensors[id.0].name
    }

    pub fn tensors(&self) -> &[NamedTensor] {
        &self.tensors
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.value.data().len()).sum()
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.tensors
            .iter()
            .find(|t| !t.value.is_finite())
            .map(|t| t.name.as_str())
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.value.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(t.value.cols() as u32).to_le_bytes());
            for v in t.value.data() {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = Reader { bytes, pos: 0 };
        if reader.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".to_string()));
        }
        let version = reader.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(alloc::format!(
                "unsupported version {version}"
            )));
        }
        let count = reader.u32()? as usize;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let name_len = reader.u32()? as usize;
            let name = core::str::from_utf8(reader.take(name_len)?)
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".to_string()))?
                .to_string();
            let rows = reader.u32()? as usize;
            let cols = reader.u32()? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                let raw = reader.take(8)?;
                let mut buf = [0u8; 8];
                buf.copy_from_slice(raw);
                data.push(f64::from_bits(u64::from_le_bytes(buf)));
            }
            if store.find(&name).is_some() {
                return Err(Error::Checkpoint(alloc::format!("duplicate tensor {name}")));
            }
            store.add(name, Matrix::from_vec(rows, cols, data));
        }
        if reader.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".to_string()));
        }
        Ok(store)
    }

    /// Replace values from `other`, which must hold the same names and shapes.
    pub fn load_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Checkpoint(alloc::format!(
                "expected {} tensors, found {}",
                self.len(),
                other.len()
            )));
        }
        for t in &mut self.tensors {
            let id = other
                .find(&t.name)
                .ok_or_else(|| Error::Checkpoint(alloc::format!("missing tensor {}", t.name)))?;
            let src = other.get(id);
            if src.shape() != t.value.shape() {
                return Err(Error::Checkpoint(alloc::format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    t.name,
                    src.shape(),
                    t.value.shape()
                )));
            }
            t.value = src.clone();
        }
        Ok(())
    }
}

/// Entries drawn uniformly from `[-bound, bound]`.
pub fn uniform_matrix(rng: &mut Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated checkpoint".to_string()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let raw = self.take(4)?;
        Ok(u32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]))
    }
}
