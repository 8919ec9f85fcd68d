//! Raw tensor dumps described by a JSON manifest.
//!
//! ```json
//! {"tensors": [{"name": "w", "shape": [4, 2], "dtype": "bf16",
//!               "offset": 0, "length": 16, "sha256": "..."}]}
//! ```
//! Values are little-endian words of the dtype width; sub-byte widths are
//! packed LSB-first. `sha256`, when present, covers the tensor's bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numfmt::{FloatFormat, FormatRegistry};
use crate::region_map::{pack_bits, unpack_bits};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<u64>,
    pub dtype: String,
    pub offset: u64,
    pub length: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

impl TensorEntry {
    pub fn elements(&self) -> u64 {
        self.shape.iter().product()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorManifest {
    pub tensors: Vec<TensorEntry>,
}

impl TensorManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Manifest(format!("unparseable manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Resolve a manifest dtype name; `fp8` is short for `fp8_e4m3`.
pub fn dtype_format(dtype: &str, registry: &FormatRegistry) -> Result<FloatFormat> {
    let name = match dtype {
        "fp8" => "fp8_e4m3",
        other => other,
    };
    registry
        .format(name)
        .map_err(|_| Error::Manifest(format!("unknown dtype {dtype:?}")))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<u64>,
    pub dtype: String,
    pub format: FloatFormat,
    pub values: Vec<u32>,
}

impl Tensor {
    pub fn new(name: &str, shape: Vec<u64>, dtype: &str, format: FloatFormat, values: Vec<u32>) -> Result<Self> {
        if shape.iter().product::<u64>() != values.len() as u64 {
            return Err(Error::Manifest(format!(
                "tensor {name}: shape {shape:?} does not match {} values",
                values.len()
            )));
        }
        Ok(Self {
            name: name.to_string(),
            shape,
            dtype: dtype.to_string(),
            format,
            values,
        })
    }

    pub fn byte_len(&self) -> u64 {
        (self.values.len() as u64 * self.format.bits() as u64).div_ceil(8)
    }
}

/// Tensors addressable by name, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TensorStore {
    tensors: BTreeMap<String, Tensor>,
}

impl TensorStore {
    pub fn insert(&mut self, t: Tensor) -> Result<()> {
        if self.tensors.contains_key(&t.name) {
            return Err(Error::Manifest(format!("duplicate tensor name {:?}", t.name)));
        }
        self.tensors.insert(t.name.clone(), t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.tensors.values()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn total_values(&self) -> u64 {
        self.iter().map(|t| t.values.len() as u64).sum()
    }
}

pub fn decode_values(bytes: &[u8], width: u32, count: usize) -> Vec<u32> {
    match width {
        8 => bytes[..count].iter().map(|&b| b as u32).collect(),
        16 => bytes
            .chunks_exact(2)
            .take(count)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
            .collect(),
        32 => bytes
            .chunks_exact(4)
            .take(count)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        w => unpack_bits(bytes, w, count),
    }
}

pub fn encode_values(values: &[u32], width: u32) -> Vec<u8> {
    match width {
        8 => values.iter().map(|&v| v as u8).collect(),
        16 => values.iter().flat_map(|&v| (v as u16).to_le_bytes()).collect(),
        32 => values.iter().flat_map(|&v| v.to_le_bytes()).collect(),
        w => pack_bits(values, w),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn ingest_bytes(manifest: &TensorManifest, data: &[u8], registry: &FormatRegistry) -> Result<TensorStore> {
    let mut spans: Vec<(u64, u64, &str)> = Vec::with_capacity(manifest.tensors.len());
    let mut store = TensorStore::default();
    for e in &manifest.tensors {
        let format = dtype_format(&e.dtype, registry)?;
        let bits = e.elements() * format.bits() as u64;
        if bits.div_ceil(8) != e.length {
            return Err(Error::Manifest(format!(
                "tensor {}: length {} bytes, but shape {:?} of {} needs {} bits",
                e.name, e.length, e.shape, e.dtype, bits
            )));
        }
        let end = e
            .offset
            .checked_add(e.length)
            .filter(|&end| end <= data.len() as u64)
            .ok_or_else(|| {
                Error::Manifest(format!(
                    "tensor {}: bytes [{}, {}+{}) beyond the {}-byte data file",
                    e.name,
                    e.offset,
                    e.offset,
                    e.length,
                    data.len()
                ))
            })?;
        let bytes = &data[e.offset as usize..end as usize];
        if let Some(want) = &e.sha256 {
            let got = sha256_hex(bytes);
            if !got.eq_ignore_ascii_case(want) {
                return Err(Error::Manifest(format!("tensor {}: sha256 {got} does not match {want}", e.name)));
            }
        }
        spans.push((e.offset, end, &e.name));
        let values = decode_values(bytes, format.bits(), e.elements() as usize);
        store.insert(Tensor::new(&e.name, e.shape.clone(), &e.dtype, format, values)?)?;
    }
    spans.sort();
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::Manifest(format!("tensors {} and {} overlap", w[0].2, w[1].2)));
        }
    }
    Ok(store)
}

pub fn ingest_tensors(manifest: &Path, data: &Path, registry: &FormatRegistry) -> Result<TensorStore> {
    let m = TensorManifest::load(manifest)?;
    let bytes = std::fs::read(data).map_err(|e| Error::io(data, e))?;
    ingest_bytes(&m, &bytes, registry)
}

/// Serialize tensors back-to-back, returning the manifest (with digests)
/// and the data bytes.
pub fn dump_tensors<'a>(tensors: impl IntoIterator<Item = &'a Tensor>) -> (TensorManifest, Vec<u8>) {
    let mut data = Vec::new();
    let mut manifest = TensorManifest::default();
    for t in tensors {
        let bytes = encode_values(&t.values, t.format.bits());
        manifest.tensors.push(TensorEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            dtype: t.dtype.clone(),
            offset: data.len() as u64,
            length: bytes.len() as u64,
            sha256: Some(sha256_hex(&bytes)),
        });
        data.extend(bytes);
    }
    (manifest, data)
}

pub fn write_tensors<'a>(manifest_path: &Path, data_path: &Path, tensors: impl IntoIterator<Item = &'a Tensor>) -> Result<()> {
    let (manifest, data) = dump_tensors(tensors);
    std::fs::write(data_path, data).map_err(|e| Error::io(data_path, e))?;
    std::fs::write(manifest_path, manifest.to_json()).map_err(|e| Error::io(manifest_path, e))
}
