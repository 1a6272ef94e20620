//! `RDS1` raw-descriptor store.
//!
//! magic · count `u32` · dim `u32` · per entry: id (`u16` length + UTF-8),
//! `dim` values as `f64`. All little-endian.

use std::collections::HashSet;

use super::bytes::{put_string, Reader};
use super::{FormatError, Position};

pub const MAGIC: &str = "RDS1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("descriptor {id:?} has {actual} values, store dimension is {expected}")]
    Dimension { id: String, expected: usize, actual: usize },
    #[error("duplicate descriptor id {0:?}")]
    DuplicateId(String),
    #[error("descriptor id {0:?} is longer than 65535 bytes")]
    IdTooLong(String),
    #[error("descriptor {0:?} contains a non-finite value")]
    NonFinite(String),
    #[error("store dimension must be at least 1")]
    ZeroDimension,
}

/// Ordered `(id, descriptor)` pairs of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorStore {
    dim: usize,
    ids: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl DescriptorStore {
    pub fn new(dim: usize) -> Result<Self, StoreError> {
        if dim == 0 || u32::try_from(dim).is_err() {
            return Err(StoreError::ZeroDimension);
        }
        Ok(Self {
            dim,
            ids: Vec::new(),
            values: Vec::new(),
        })
    }

    pub fn push(&mut self, id: String, values: Vec<f64>) -> Result<(), StoreError> {
        if values.len() != self.dim {
            return Err(StoreError::Dimension {
                id,
                expected: self.dim,
                actual: values.len(),
            });
        }
        if id.len() > u16::MAX as usize {
            return Err(StoreError::IdTooLong(id));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite(id));
        }
        if self.ids.contains(&id) {
            return Err(StoreError::DuplicateId(id));
        }
        self.ids.push(id);
        self.values.push(values);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn descriptors(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.ids.iter().position(|i| i == id).map(|k| self.values[k].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().map(String::as_str).zip(self.values.iter().map(Vec::as_slice))
    }

    pub fn into_parts(self) -> (Vec<String>, Vec<Vec<f64>>) {
        (self.ids, self.values)
    }
}

pub fn save_store(store: &DescriptorStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + store.len() * (8 * store.dim + 16));
    out.extend_from_slice(MAGIC.as_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    out.extend_from_slice(&(store.dim as u32).to_le_bytes());
    for (id, values) in store.iter() {
        put_string(&mut out, id);
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn load_store(bytes: &[u8]) -> Result<DescriptorStore, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let count = r.u32("count")? as usize;
    let at = r.offset();
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(FormatError::invalid(Position::Byte(at), "dim must be >= 1"));
    }
    // Each entry holds at least its length prefix and values.
    r.expect_at_least(count as u64, 2 + 8 * dim as u64, "entries")?;
    let mut store = DescriptorStore::new(dim).expect("dim checked");
    let mut seen = HashSet::with_capacity(count);
    for _ in 0..count {
        let at = r.offset();
        let id = r.string("id")?;
        if !seen.insert(id.clone()) {
            return Err(FormatError::invalid(Position::Byte(at), format!("duplicate id {id:?}")));
        }
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(r.finite_f64("descriptor value")?);
        }
        store.ids.push(id);
        store.values.push(values);
    }
    r.finish()?;
    Ok(store)
}
