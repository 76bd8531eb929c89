//! Portable named-tensor container used to exchange weights.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! "NWFT" | version u32 | manifest length u64 | manifest (UTF-8 JSON)
//!        | zero padding to an 8-byte boundary | raw f32 data section
//! ```
//!
//! The manifest lists every tensor as `{name, dtype, shape, offset, length}`
//! with offsets relative to the data section, plus a metadata map and a
//! SHA-256 over the manifest body and the data. It is written in one canonical
//! form and rejected on load if it is not byte-identical to that form.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"NWFT";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;
const ALIGN: usize = 8;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("short read: need {needed} bytes, have {available}")]
    ShortRead { needed: usize, available: usize },
    #[error("{0} trailing bytes after data section")]
    TrailingBytes(usize),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("manifest is not in canonical form")]
    NonCanonical,
    #[error("non-zero padding byte at {0}")]
    Padding(usize),
    #[error("unsupported dtype {dtype:?} for tensor {name}")]
    Dtype { name: String, dtype: String },
    #[error("duplicate tensor name {0}")]
    DuplicateName(String),
    #[error("tensor {0} offset not 8-byte aligned")]
    Misaligned(String),
    #[error("tensors {0} and {1} overlap")]
    Overlap(String, String),
    #[error("tensor {name}: shape needs {expected} bytes, declared {declared}")]
    LengthMismatch { name: String, expected: usize, declared: usize },
    #[error("checksum mismatch")]
    Checksum,
    #[error("missing tensor {0}")]
    Missing(String),
    #[error("tensor {name} has shape {found:?}, expected {expected:?}")]
    Shape { name: String, found: Vec<usize>, expected: Vec<usize> },
    #[error("metadata key {0}: {1}")]
    Metadata(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A named f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        Self { name: name.into(), shape, data }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Tensors plus a string metadata map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorContainer {
    pub metadata: BTreeMap<String, String>,
    pub tensors: Vec<Tensor>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: usize,
    length: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    metadata: BTreeMap<String, String>,
    tensors: Vec<Entry>,
    sha256: String,
}

fn align_up(n: usize) -> usize {
    n.div_ceil(ALIGN) * ALIGN
}

fn checksum(manifest: &Manifest, data: &[u8]) -> String {
    let body = Manifest {
        metadata: manifest.metadata.clone(),
        tensors: manifest
            .tensors
            .iter()
            .map(|e| Entry { name: e.name.clone(), dtype: e.dtype.clone(), shape: e.shape.clone(), offset: e.offset, length: e.length })
            .collect(),
        sha256: String::new(),
    };
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&body).expect("manifest serializes"));
    h.update(data);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tensor: Tensor) {
        self.tensors.push(tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Looks up a tensor and checks its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&Tensor, StoreError> {
        let t = self.get(name).ok_or_else(|| StoreError::Missing(name.to_string()))?;
        if t.shape != shape {
            return Err(StoreError::Shape {
                name: name.to_string(),
                found: t.shape.clone(),
                expected: shape.to_vec(),
            });
        }
        Ok(t)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    /// Parses a metadata value.
    pub fn meta_parse<V: std::str::FromStr>(&self, key: &str) -> Result<V, StoreError> {
        let raw = self
            .meta(key)
            .ok_or_else(|| StoreError::Metadata(key.to_string(), "missing".into()))?;
        raw.parse()
            .map_err(|_| StoreError::Metadata(key.to_string(), format!("cannot parse {raw:?}")))
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    /// Total number of stored values.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    fn validate(&self) -> Result<(), StoreError> {
        let mut seen = HashSet::new();
        for t in &self.tensors {
            if !seen.insert(t.name.as_str()) {
                return Err(StoreError::DuplicateName(t.name.clone()));
            }
            if t.numel() != t.data.len() {
                return Err(StoreError::LengthMismatch {
                    name: t.name.clone(),
                    expected: t.numel() * 4,
                    declared: t.data.len() * 4,
                });
            }
        }
        Ok(())
    }

    /// Serializes to the wire format.
    pub fn to_bytes(&self) -> Result<Vec<u8>, StoreError> {
        self.validate()?;
        let mut data = Vec::new();
        let mut entries = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            data.resize(align_up(data.len()), 0u8);
            let offset = data.len();
            for v in &t.data {
                data.extend_from_slice(&v.to_le_bytes());
            }
            entries.push(Entry {
                name: t.name.clone(),
                dtype: "f32".into(),
                shape: t.shape.clone(),
                offset,
                length: t.data.len() * 4,
            });
        }
        let mut manifest = Manifest { metadata: self.metadata.clone(), tensors: entries, sha256: String::new() };
        manifest.sha256 = checksum(&manifest, &data);
        let text = serde_json::to_vec(&manifest).expect("manifest serializes");

        let mut out = Vec::with_capacity(HEADER_LEN + text.len() + ALIGN + data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(text.len() as u64).to_le_bytes());
        out.extend_from_slice(&text);
        out.resize(align_up(out.len()), 0u8);
        out.extend_from_slice(&data);
        Ok(out)
    }

    /// Parses and validates the wire format.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let short = |needed: usize| StoreError::ShortRead { needed, available: bytes.len() };
        if bytes.len() < 4 {
            return Err(short(HEADER_LEN));
        }
        if &bytes[..4] != MAGIC {
            return Err(StoreError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(short(HEADER_LEN));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(StoreError::UnsupportedVersion(version));
        }
        let manifest_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let manifest_end = usize::try_from(manifest_len)
            .ok()
            .and_then(|n| n.checked_add(HEADER_LEN))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| short(HEADER_LEN.saturating_add(manifest_len as usize)))?;
        let raw = &bytes[HEADER_LEN..manifest_end];
        let text = std::str::from_utf8(raw).map_err(|e| StoreError::Manifest(e.to_string()))?;
        let manifest: Manifest =
            serde_json::from_str(text).map_err(|e| StoreError::Manifest(e.to_string()))?;
        if serde_json::to_vec(&manifest).expect("manifest serializes") != raw {
            return Err(StoreError::NonCanonical);
        }

        let data_start = align_up(manifest_end);
        if data_start > bytes.len() {
            return Err(short(data_start));
        }
        if let Some(p) = (manifest_end..data_start).find(|&i| bytes[i] != 0) {
            return Err(StoreError::Padding(p));
        }
        let data = &bytes[data_start..];

        let mut names = HashSet::new();
        for e in &manifest.tensors {
            if e.dtype != "f32" {
                return Err(StoreError::Dtype { name: e.name.clone(), dtype: e.dtype.clone() });
            }
            if !names.insert(e.name.as_str()) {
                return Err(StoreError::DuplicateName(e.name.clone()));
            }
            if e.offset % ALIGN != 0 {
                return Err(StoreError::Misaligned(e.name.clone()));
            }
        }
        let mut order: Vec<&Entry> = manifest.tensors.iter().collect();
        order.sort_by_key(|e| (e.offset, e.length));
        let mut extent = 0usize;
        for pair in order.windows(2) {
            let end = pair[0].offset.checked_add(pair[0].length);
            if end.is_none_or(|end| end > pair[1].offset) {
                return Err(StoreError::Overlap(pair[0].name.clone(), pair[1].name.clone()));
            }
        }
        for e in &order {
            let end = e
                .offset
                .checked_add(e.length)
                .ok_or_else(|| short(usize::MAX))?;
            extent = extent.max(end);
        }
        if extent > data.len() {
            return Err(short(data_start + extent));
        }
        if extent < data.len() {
            return Err(StoreError::TrailingBytes(data.len() - extent));
        }
        for e in &manifest.tensors {
            let expected = e
                .shape
                .iter()
                .try_fold(4usize, |acc, &d| acc.checked_mul(d))
                .unwrap_or(usize::MAX);
            if expected != e.length {
                return Err(StoreError::LengthMismatch {
                    name: e.name.clone(),
                    expected,
                    declared: e.length,
                });
            }
        }
        if checksum(&manifest, data) != manifest.sha256 {
            return Err(StoreError::Checksum);
        }

        let tensors = manifest
            .tensors
            .into_iter()
            .map(|e| {
                let values = data[e.offset..e.offset + e.length]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect();
                Tensor { name: e.name, shape: e.shape, data: values }
            })
            .collect();
        Ok(Self { metadata: manifest.metadata, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Converts stored values to the engine's scalar type.
pub fn to_real<T: crate::Real>(values: &[f32]) -> Vec<T> {
    values.iter().map(|&v| T::from_f32(v).expect("f32 converts")).collect()
}

/// Converts engine values to f32 for storage.
pub fn to_f32<T: crate::Real>(values: &[T]) -> Vec<f32> {
    values.iter().map(|v| v.to_f32().expect("value converts to f32")).collect()
}
