//! Per-plane lossless block compression.
//!
//! Each block carries a fixed 20-byte little-endian header:
//!
//! | offset | size | field              |
//! |--------|------|--------------------|
//! | 0      | 2    | plane id           |
//! | 2      | 1    | codec tag          |
//! | 3      | 1    | guard flags        |
//! | 4      | 4    | sequence number    |
//! | 8      | 4    | uncompressed size  |
//! | 12     | 4    | compressed size    |
//! | 16     | 4    | CRC-32 of the uncompressed bytes |
//!
//! Codec tags: 0 = raw, 1 = LZ4 block, 2 = ZSTD frame (level 3).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER_BYTES: usize = 20;
/// Largest uncompressed block accepted.
pub const MAX_BLOCK_BYTES: usize = 8192;
pub const DEFAULT_BLOCK_BYTES: usize = 4096;
pub const ZSTD_LEVEL: i32 = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codec {
    Raw,
    Lz4,
    #[default]
    Zstd,
}

impl Codec {
    pub fn tag(self) -> u8 {
        match self {
            Codec::Raw => 0,
            Codec::Lz4 => 1,
            Codec::Zstd => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Codec::Raw),
            1 => Ok(Codec::Lz4),
            2 => Ok(Codec::Zstd),
            t => Err(Error::UnknownCodec(t)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Codec::Raw => "raw",
            Codec::Lz4 => "lz4",
            Codec::Zstd => "zstd",
        }
    }
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Codec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(Codec::Raw),
            "lz4" => Ok(Codec::Lz4),
            "zstd" => Ok(Codec::Zstd),
            other => Err(Error::Config(format!("unknown codec {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockHeader {
    pub plane_id: u16,
    pub codec: Codec,
    pub guard_flags: u8,
    pub seq: u32,
    pub uncompressed_size: u32,
    pub compressed_size: u32,
    pub checksum: u32,
}

impl BlockHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_BYTES] {
        let mut b = [0u8; HEADER_BYTES];
        b[0..2].copy_from_slice(&self.plane_id.to_le_bytes());
        b[2] = self.codec.tag();
        b[3] = self.guard_flags;
        b[4..8].copy_from_slice(&self.seq.to_le_bytes());
        b[8..12].copy_from_slice(&self.uncompressed_size.to_le_bytes());
        b[12..16].copy_from_slice(&self.compressed_size.to_le_bytes());
        b[16..20].copy_from_slice(&self.checksum.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_BYTES {
            return Err(Error::BlockFormat(format!("header needs {HEADER_BYTES} bytes, got {}", b.len())));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let header = Self {
            plane_id: u16::from_le_bytes([b[0], b[1]]),
            codec: Codec::from_tag(b[2])?,
            guard_flags: b[3],
            seq: u32_at(4),
            uncompressed_size: u32_at(8),
            compressed_size: u32_at(12),
            checksum: u32_at(16),
        };
        if header.codec == Codec::Raw && header.compressed_size != header.uncompressed_size {
            return Err(Error::BlockFormat(format!(
                "raw block with compressed size {} != uncompressed size {}",
                header.compressed_size, header.uncompressed_size
            )));
        }
        Ok(header)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedBlock {
    pub header: BlockHeader,
    pub payload: Vec<u8>,
}

impl CompressedBlock {
    /// Header plus payload bytes as committed to memory.
    pub fn stored_size(&self) -> usize {
        HEADER_BYTES + self.payload.len()
    }

    pub fn codec(&self) -> Codec {
        self.header.codec
    }

    pub fn ratio(&self) -> f64 {
        measure_ratio(self.header.uncompressed_size as u64, self.payload.len() as u64).unwrap_or(1.0)
    }
}

fn encode(data: &[u8], codec: Codec) -> Option<Vec<u8>> {
    match codec {
        Codec::Raw => None,
        Codec::Lz4 => Some(lz4_flex::block::compress(data)),
        Codec::Zstd => zstd::bulk::compress(data, ZSTD_LEVEL).ok(),
    }
}

/// Compress one plane block. Falls back to a raw block when the codec fails
/// or would not shrink the input.
pub fn compress_block(data: &[u8], codec: Codec, plane_id: u16, seq: u32, guard_flags: u8) -> Result<CompressedBlock> {
    if data.len() > MAX_BLOCK_BYTES {
        return Err(Error::BlockTooLarge {
            len: data.len(),
            max: MAX_BLOCK_BYTES,
        });
    }
    let checksum = crc32fast::hash(data);
    let (codec, payload) = match encode(data, codec) {
        Some(out) if out.len() < data.len() => (codec, out),
        _ => (Codec::Raw, data.to_vec()),
    };
    Ok(CompressedBlock {
        header: BlockHeader {
            plane_id,
            codec,
            guard_flags,
            seq,
            uncompressed_size: data.len() as u32,
            compressed_size: payload.len() as u32,
            checksum,
        },
        payload,
    })
}

pub fn decompress_block(block: &CompressedBlock) -> Result<Vec<u8>> {
    let h = &block.header;
    if block.payload.len() != h.compressed_size as usize {
        return Err(Error::BlockFormat(format!(
            "payload holds {} bytes, header says {}",
            block.payload.len(),
            h.compressed_size
        )));
    }
    let expected = h.uncompressed_size as usize;
    let data = match h.codec {
        Codec::Raw => block.payload.clone(),
        Codec::Lz4 => lz4_flex::block::decompress(&block.payload, expected)
            .map_err(|e| Error::BlockFormat(format!("lz4: {e}")))?,
        Codec::Zstd => zstd::bulk::decompress(&block.payload, expected)
            .map_err(|e| Error::BlockFormat(format!("zstd: {e}")))?,
    };
    if data.len() != expected {
        return Err(Error::BlockFormat(format!(
            "decoded {} bytes, header says {}",
            data.len(),
            expected
        )));
    }
    let computed = crc32fast::hash(&data);
    if computed != h.checksum {
        return Err(Error::Corruption {
            plane: h.plane_id,
            seq: h.seq,
            stored: h.checksum,
            computed,
        });
    }
    Ok(data)
}

/// `S_orig / S_comp`.
pub fn measure_ratio(original: u64, compressed: u64) -> Result<f64> {
    if compressed == 0 {
        return Err(Error::Config("compressed size must be positive".into()));
    }
    Ok(original as f64 / compressed as f64)
}

/// Split a plane into `block_bytes` chunks and compress each one.
pub fn compress_plane(plane: &[u8], block_bytes: usize, codec: Codec, plane_id: u16, guard_flags: u8) -> Result<Vec<CompressedBlock>> {
    check_block_bytes(block_bytes)?;
    plane
        .chunks(block_bytes)
        .enumerate()
        .map(|(seq, chunk)| compress_block(chunk, codec, plane_id, seq as u32, guard_flags))
        .collect()
}

pub fn check_block_bytes(block_bytes: usize) -> Result<()> {
    if block_bytes == 0 || block_bytes > MAX_BLOCK_BYTES {
        return Err(Error::Config(format!(
            "block size {block_bytes} outside 1..={MAX_BLOCK_BYTES} bytes"
        )));
    }
    Ok(())
}

/// Serialize blocks as `[header | payload]*`.
pub fn write_container(blocks: &[CompressedBlock]) -> Vec<u8> {
    let mut out = Vec::with_capacity(blocks.iter().map(CompressedBlock::stored_size).sum());
    for b in blocks {
        out.extend_from_slice(&b.header.to_bytes());
        out.extend_from_slice(&b.payload);
    }
    out
}

pub fn read_container(mut bytes: &[u8]) -> Result<Vec<CompressedBlock>> {
    let mut blocks = Vec::new();
    while !bytes.is_empty() {
        let header = BlockHeader::from_bytes(bytes)?;
        let end = HEADER_BYTES + header.compressed_size as usize;
        if bytes.len() < end {
            return Err(Error::BlockFormat(format!(
                "block (plane {}, seq {}) truncated: need {end} bytes, have {}",
                header.plane_id,
                header.seq,
                bytes.len()
            )));
        }
        blocks.push(CompressedBlock {
            header,
            payload: bytes[HEADER_BYTES..end].to_vec(),
        });
        bytes = &bytes[end..];
    }
    Ok(blocks)
}
