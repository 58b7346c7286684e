//! Binary round-trip container: a magic line, a little-endian `u64` header
//! length, a JSON header, then the named `f64` arrays back to back.

use std::path::Path;

use serde_json::{json, Value};

use super::write_file;
use crate::error::{Error, Result};

const MAGIC: &[u8] = b"LAMINA-BLOB 1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub meta: Value,
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl Blob {
    pub fn new(meta: Value) -> Self {
        Self {
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, data: Vec<f64>) {
        self.arrays.push((name.into(), data));
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, d)| d.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let index: Vec<Value> = self.arrays.iter().map(|(n, d)| json!({"name": n, "len": d.len()})).collect();
        let header = serde_json::to_vec(&json!({"meta": self.meta, "arrays": index})).expect("serializable");
        let total: usize = self.arrays.iter().map(|(_, d)| d.len()).sum();
        let mut out = Vec::with_capacity(MAGIC.len() + 8 + header.len() + 8 * total);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, d) in &self.arrays {
            for x in d {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], what: &str) -> Result<Self> {
        let bad = |m: &str| Error::parse(what, m.to_string());
        let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| bad("not a lamina blob"))?;
        if rest.len() < 8 {
            return Err(bad("truncated header"));
        }
        let hlen = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
        let rest = &rest[8..];
        if rest.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Value = serde_json::from_slice(&rest[..hlen]).map_err(|e| bad(&e.to_string()))?;
        let mut data = &rest[hlen..];
        let mut arrays = Vec::new();
        for a in header["arrays"].as_array().ok_or_else(|| bad("missing array index"))? {
            let name = a["name"].as_str().ok_or_else(|| bad("array without name"))?;
            let len = a["len"].as_u64().ok_or_else(|| bad("array without length"))? as usize;
            if data.len() < 8 * len {
                return Err(bad("truncated data"));
            }
            let vals = data[..8 * len]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push((name.to_string(), vals));
            data = &data[8 * len..];
        }
        if !data.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            meta: header["meta"].clone(),
            arrays,
        })
    }
}

pub fn write_blob(path: &Path, b: &Blob) -> Result<()> {
    write_file(path, &b.to_bytes())
}

pub fn read_blob(path: &Path) -> Result<Blob> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Blob::from_bytes(&bytes, &path.display().to_string())
}
