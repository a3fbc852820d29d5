//! Single-file container: a JSON header followed by a little-endian `f64` blob.
//!
//! Layout: 8-byte magic, header length as `u64` LE, UTF-8 JSON header, then
//! the blob. The header's `arrays` field indexes every array by name, shape
//! and byte offset into the blob.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    meta: Value,
    arrays: Vec<ArrayEntry>,
    blob_bytes: usize,
}

pub struct Array<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

pub fn write(path: &Path, magic: &[u8; 8], meta: Value, arrays: &[Array<'_>]) -> Result<()> {
    let mut entries = Vec::with_capacity(arrays.len());
    let mut blob = Vec::new();
    for a in arrays {
        debug_assert_eq!(a.shape.iter().product::<usize>(), a.data.len());
        entries.push(ArrayEntry {
            name: a.name.clone(),
            shape: a.shape.clone(),
            offset: blob.len(),
        });
        for v in a.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = serde_json::to_vec(&Header {
        meta,
        arrays: entries,
        blob_bytes: blob.len(),
    })?;
    let mut out = Vec::with_capacity(16 + header.len() + blob.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&blob);
    fs::write(path, out)?;
    Ok(())
}

pub struct Contents {
    pub meta: Value,
    pub arrays: BTreeMap<String, (Vec<usize>, Vec<f64>)>,
}

impl Contents {
    pub fn take(&mut self, name: &str, context: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        self.arrays
            .remove(name)
            .ok_or_else(|| Error::Format(format!("{context}: missing array `{name}`")))
    }
}

pub fn read(path: &Path, magic: &[u8; 8]) -> Result<Contents> {
    let bytes = fs::read(path)?;
    let ctx = path.display().to_string();
    let bad = |m: String| Error::Format(format!("{ctx}: {m}"));
    if bytes.len() < 16 || &bytes[..8] != magic {
        return Err(bad("bad magic or truncated preamble".into()));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| bad(format!("header: {e}")))?;
    let blob = &bytes[header_end..];
    if blob.len() != header.blob_bytes {
        return Err(bad(format!(
            "blob holds {} bytes, header declares {}",
            blob.len(),
            header.blob_bytes
        )));
    }
    let mut arrays = BTreeMap::new();
    for entry in header.arrays {
        let n: usize = entry.shape.iter().product();
        let end = entry.offset + n * 8;
        if end > blob.len() {
            return Err(bad(format!("array `{}` runs past the end of the blob", entry.name)));
        }
        let data: Vec<f64> = blob[entry.offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("array `{}` holds non-finite values", entry.name)));
        }
        arrays.insert(entry.name, (entry.shape, data));
    }
    Ok(Contents {
        meta: header.meta,
        arrays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGIC: &[u8; 8] = b"TESTBLOB";

    #[test]
    fn round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        let data = [1.5, -0.0, f64::MIN_POSITIVE];
        write(
            &path,
            MAGIC,
            serde_json::json!({"k": 1}),
            &[Array {
                name: "a".into(),
                shape: vec![3],
                data: &data,
            }],
        )
        .unwrap();
        let mut c = read(&path, MAGIC).unwrap();
        let (shape, back) = c.take("a", "test").unwrap();
        assert_eq!(shape, vec![3]);
        assert_eq!(
            back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(read(&path, MAGIC), Err(Error::Format(_))));
    }
}
