//! Binary KV trace: a plain sequence of little-endian records.
//!
//! ```text
//! offset size field
//!      0    2 layer
//!      2    2 head
//!      4    4 seq
//!      8    4 token
//!     12    2 d (channels)
//!     14    1 dtype (0 = bf16, 1 = fp16)
//!     15    1 reserved, 0
//!     16  2*d values, u16 each
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numfmt::FloatFormat;

pub const RECORD_HEADER_BYTES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KvDtype {
    Bf16,
    Fp16,
}

impl KvDtype {
    pub fn code(self) -> u8 {
        match self {
            KvDtype::Bf16 => 0,
            KvDtype::Fp16 => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(KvDtype::Bf16),
            1 => Ok(KvDtype::Fp16),
            c => Err(Error::Kv(format!("unknown KV dtype code {c}"))),
        }
    }

    pub fn format(self) -> FloatFormat {
        match self {
            KvDtype::Bf16 => FloatFormat::BF16,
            KvDtype::Fp16 => FloatFormat::FP16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KvRecord {
    pub layer: u16,
    pub head: u16,
    pub seq: u32,
    pub token: u32,
    pub dtype: KvDtype,
    pub values: Vec<u16>,
}

impl KvRecord {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let d = u16::try_from(self.values.len())
            .map_err(|_| Error::Kv(format!("{} channels exceed a u16", self.values.len())))?;
        let mut out = Vec::with_capacity(RECORD_HEADER_BYTES + 2 * self.values.len());
        out.extend_from_slice(&self.layer.to_le_bytes());
        out.extend_from_slice(&self.head.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.token.to_le_bytes());
        out.extend_from_slice(&d.to_le_bytes());
        out.push(self.dtype.code());
        out.push(0);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }
}

/// Records of a trace, validated for constant shape per (layer, head) and
/// strictly increasing token index per (layer, head, seq).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KvTrace {
    pub records: Vec<KvRecord>,
}

impl KvTrace {
    pub fn new(records: Vec<KvRecord>) -> Result<Self> {
        let mut shape: BTreeMap<(u16, u16), (usize, KvDtype)> = BTreeMap::new();
        let mut last: BTreeMap<(u16, u16, u32), u32> = BTreeMap::new();
        for r in &records {
            if r.values.is_empty() {
                return Err(Error::Kv(format!("record for layer {} head {} has no channels", r.layer, r.head)));
            }
            let s = *shape.entry((r.layer, r.head)).or_insert((r.values.len(), r.dtype));
            if s != (r.values.len(), r.dtype) {
                return Err(Error::Kv(format!(
                    "layer {} head {}: record with {} {:?} channels after {} {:?}",
                    r.layer,
                    r.head,
                    r.values.len(),
                    r.dtype,
                    s.0,
                    s.1
                )));
            }
            if let Some(prev) = last.insert((r.layer, r.head, r.seq), r.token) {
                if r.token <= prev {
                    return Err(Error::Kv(format!(
                        "layer {} head {} seq {}: token {} after {}",
                        r.layer, r.head, r.seq, r.token, prev
                    )));
                }
            }
        }
        Ok(Self { records })
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::Kv(format!("reading trace: {e}")))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut records = Vec::new();
        while !bytes.is_empty() {
            if bytes.len() < RECORD_HEADER_BYTES {
                return Err(Error::Kv(format!(
                    "trailing {} bytes after record {}",
                    bytes.len(),
                    records.len()
                )));
            }
            let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
            let u32_at = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
            let d = u16_at(12) as usize;
            let dtype = KvDtype::from_code(bytes[14])?;
            if bytes[15] != 0 {
                return Err(Error::Kv(format!("record {} has reserved byte {}", records.len(), bytes[15])));
            }
            let end = RECORD_HEADER_BYTES + 2 * d;
            if bytes.len() < end {
                return Err(Error::Kv(format!("record {} truncated", records.len())));
            }
            let values = bytes[RECORD_HEADER_BYTES..end]
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect();
            records.push(KvRecord {
                layer: u16_at(0),
                head: u16_at(2),
                seq: u32_at(4),
                token: u32_at(8),
                dtype,
                values,
            });
            bytes = &bytes[end..];
        }
        Self::new(records)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for r in &self.records {
            out.extend(r.to_bytes()?);
        }
        Ok(out)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes()?)
            .map_err(|e| Error::Kv(format!("writing trace: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn layers(&self) -> Vec<u16> {
        let mut l: Vec<u16> = self.records.iter().map(|r| r.layer).collect();
        l.sort_unstable();
        l.dedup();
        l
    }
}
