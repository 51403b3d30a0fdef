//! Binary weights file: version byte, `u32` header length, JSON header,
//! `u64` value count, then little-endian `f64` values for every tensor in
//! order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{NnError, Tensor};

pub const CONTAINER_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightsContainer {
    /// Free-form model description (layer specs, vocabulary, config).
    pub header: Value,
    pub tensors: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct RawHeader {
    meta: Value,
    shapes: Vec<Vec<usize>>,
}

impl WeightsContainer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let raw = RawHeader { meta: self.header.clone(), shapes: self.tensors.iter().map(|t| t.shape().to_vec()).collect() };
        let header = serde_json::to_vec(&raw).expect("header serializes");
        let count: usize = self.tensors.iter().map(Tensor::len).sum();
        let mut out = Vec::with_capacity(1 + 4 + header.len() + 8 + count * 8);
        out.push(CONTAINER_VERSION);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(count as u64).to_le_bytes());
        for t in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let fail = |m: &str| NnError::Format(m.to_string());
        let (&version, rest) = bytes.split_first().ok_or_else(|| fail("empty file"))?;
        if version != CONTAINER_VERSION {
            return Err(NnError::Format(format!("unsupported version {version}")));
        }
        if rest.len() < 4 {
            return Err(fail("truncated header length"));
        }
        let hlen = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
        let rest = &rest[4..];
        if rest.len() < hlen + 8 {
            return Err(fail("truncated header"));
        }
        let raw: RawHeader =
            serde_json::from_slice(&rest[..hlen]).map_err(|e| NnError::Format(format!("header: {e}")))?;
        let rest = &rest[hlen..];
        let count = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
        let body = &rest[8..];
        let expected: usize = raw.shapes.iter().map(|s| s.iter().product::<usize>()).sum();
        if count != expected {
            return Err(NnError::Format(format!("header shapes hold {expected} values, count says {count}")));
        }
        if body.len() != count * 8 {
            return Err(NnError::Format(format!("expected {} value bytes, found {}", count * 8, body.len())));
        }
        let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut tensors = Vec::with_capacity(raw.shapes.len());
        for shape in &raw.shapes {
            let n = shape.iter().product();
            tensors.push(Tensor::from_vec(shape, values.by_ref().take(n).collect())?);
        }
        Ok(WeightsContainer { header: raw.meta, tensors })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, NnError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
