//! KV-cache write/read path: channel-major windows with per-channel
//! exponent deltas, bit-plane concatenation and per-plane compression.
//!
//! Encoding order for one window of `n` tokens by `d` channels:
//!
//! 1. transpose token-major `n x d` into channel-major `d x n`;
//! 2. per channel, subtract the minimum exponent `β_j` from every exponent;
//! 3. disaggregate the channel-major stream of `sign | δ | mantissa` words,
//!    so plane `i` is the concatenation of `P_i(G_0) .. P_i(G_{d-1})`
//!    (plane outer, channel inner, token innermost);
//! 4. cut each plane into blocks and compress them independently.

use std::collections::BTreeMap;

use crate::bitplane::{disaggregate, plane_bytes, PlaneImage};
use crate::blockcodec::{compress_plane, decompress_block, Codec, CompressedBlock};
use crate::error::{Error, Result};
use crate::numfmt::{extract_fields, pack_fields, FloatFormat, Fields};

pub const META_HEADER_BYTES: usize = 12;
pub const DEFAULT_WINDOW_TOKENS: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KvWindow {
    pub layer: u32,
    pub head: u32,
    pub seq: u32,
    pub tokens: usize,
    pub channels: usize,
    pub format: FloatFormat,
    /// token-major, `tokens * channels` words
    pub values: Vec<u32>,
}

impl KvWindow {
    pub fn new(layer: u32, head: u32, seq: u32, channels: usize, format: FloatFormat, values: Vec<u32>) -> Result<Self> {
        if channels == 0 {
            if !values.is_empty() {
                return Err(Error::Kv("zero channels with non-empty values".into()));
            }
        } else if values.len() % channels != 0 {
            return Err(Error::Kv(format!(
                "{} values is not a whole number of {channels}-channel tokens",
                values.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| !format.fits(v)) {
            return Err(Error::FormatMismatch {
                index,
                value,
                bits: format.bits(),
            });
        }
        let tokens = if channels == 0 { 0 } else { values.len() / channels };
        Ok(Self {
            layer,
            head,
            seq,
            tokens,
            channels,
            format,
            values,
        })
    }

    pub fn token(&self, t: usize) -> &[u32] {
        &self.values[t * self.channels..(t + 1) * self.channels]
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn byte_size(&self) -> usize {
        bit_bytes(self.values.len(), self.format)
    }
}

fn bit_bytes(count: usize, format: FloatFormat) -> usize {
    (count * format.bits() as usize).div_ceil(8)
}

/// Row `j` of the result holds channel `j` across all tokens.
pub fn transpose_to_channel_major(w: &KvWindow) -> Vec<u32> {
    transpose(&w.values, w.tokens, w.channels)
}

pub fn transpose_to_token_major(channel_major: &[u32], tokens: usize, channels: usize) -> Vec<u32> {
    transpose(channel_major, channels, tokens)
}

fn transpose(src: &[u32], rows: usize, cols: usize) -> Vec<u32> {
    let mut out = vec![0u32; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

/// Base exponent (row minimum) and non-negative exponent deltas of one
/// channel row.
pub fn exponent_delta(row: &[u32], format: FloatFormat) -> Result<(u32, Vec<u32>)> {
    let exps: Vec<u32> = row.iter().map(|&w| extract_fields(format, w).exponent).collect();
    let base = *exps
        .iter()
        .min()
        .ok_or_else(|| Error::Kv("exponent delta of an empty channel row".into()))?;
    Ok((base, exps.into_iter().map(|e| e - base).collect()))
}

fn delta_word(format: FloatFormat, word: u32, base: u32) -> u32 {
    let f = extract_fields(format, word);
    pack_fields(
        format,
        Fields {
            exponent: f.exponent - base,
            ..f
        },
    )
}

fn undelta_word(format: FloatFormat, word: u32, base: u32) -> Result<u32> {
    let f = extract_fields(format, word);
    let exponent = f.exponent + base;
    if exponent >> format.exp_bits != 0 {
        return Err(Error::Kv(format!("restored exponent {exponent} overflows {format}")));
    }
    Ok(pack_fields(format, Fields { exponent, ..f }))
}

/// Per-window metadata: 12-byte header plus one base exponent per channel.
///
/// Header packing (little-endian): `u32 block id | u8 plane count |
/// u8 codec tag | u16 token count | u32 compressed size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KvBlockMeta {
    pub block_id: u32,
    pub plane_count: u8,
    pub codec: Codec,
    pub tokens: u16,
    /// stored bytes (headers and payloads) of every plane block
    pub compressed_size: u32,
    pub base_exponents: Vec<u8>,
}

impl KvBlockMeta {
    pub fn size(&self) -> usize {
        META_HEADER_BYTES + self.base_exponents.len()
    }

    pub fn channels(&self) -> usize {
        self.base_exponents.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.size());
        out.extend_from_slice(&self.block_id.to_le_bytes());
        out.push(self.plane_count);
        out.push(self.codec.tag());
        out.extend_from_slice(&self.tokens.to_le_bytes());
        out.extend_from_slice(&self.compressed_size.to_le_bytes());
        out.extend_from_slice(&self.base_exponents);
        out
    }

    pub fn from_bytes(bytes: &[u8], channels: usize) -> Result<Self> {
        if bytes.len() != META_HEADER_BYTES + channels {
            return Err(Error::Kv(format!(
                "metadata of {} bytes, expected {}",
                bytes.len(),
                META_HEADER_BYTES + channels
            )));
        }
        Ok(Self {
            block_id: u32::from_le_bytes(bytes[0..4].try_into().unwrap()),
            plane_count: bytes[4],
            codec: Codec::from_tag(bytes[5])?,
            tokens: u16::from_le_bytes([bytes[6], bytes[7]]),
            compressed_size: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
            base_exponents: bytes[12..].to_vec(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedWindow {
    pub layer: u32,
    pub head: u32,
    pub seq: u32,
    pub format: FloatFormat,
    pub meta: KvBlockMeta,
    pub blocks: Vec<CompressedBlock>,
}

impl EncodedWindow {
    /// Everything committed for this window: metadata plus every block.
    pub fn stored_size(&self) -> usize {
        self.meta.size() + self.blocks_size()
    }

    pub fn blocks_size(&self) -> usize {
        self.blocks.iter().map(CompressedBlock::stored_size).sum()
    }
}

/// Channel-major, exponent-delta plane image of a window plus its bases.
pub fn window_planes(w: &KvWindow) -> Result<(PlaneImage, Vec<u8>)> {
    if w.format.exp_bits > 8 {
        return Err(Error::Kv(format!(
            "base exponents are one byte; {} has {} exponent bits",
            w.format, w.format.exp_bits
        )));
    }
    let cm = transpose_to_channel_major(w);
    let mut words = Vec::with_capacity(cm.len());
    let mut bases = Vec::with_capacity(w.channels);
    if w.tokens > 0 {
        for row in cm.chunks(w.tokens) {
            let (base, _) = exponent_delta(row, w.format)?;
            bases.push(base as u8);
            words.extend(row.iter().map(|&v| delta_word(w.format, v, base)));
        }
    }
    Ok((disaggregate(&words, w.format)?, bases))
}

pub fn encode_window(w: &KvWindow, block_bytes: usize, codec: Codec, block_id: u32) -> Result<EncodedWindow> {
    let tokens = u16::try_from(w.tokens).map_err(|_| Error::Kv(format!("{} tokens exceed a u16 window", w.tokens)))?;
    let (image, bases) = window_planes(w)?;
    let base_exponents = if w.tokens == 0 { vec![0; w.channels] } else { bases };
    let mut blocks = Vec::new();
    for (index, plane) in image.planes().iter().enumerate() {
        blocks.extend(compress_plane(plane, block_bytes, codec, index as u16, 0)?);
    }
    let compressed_size = blocks.iter().map(CompressedBlock::stored_size).sum::<usize>() as u32;
    Ok(EncodedWindow {
        layer: w.layer,
        head: w.head,
        seq: w.seq,
        format: w.format,
        meta: KvBlockMeta {
            block_id,
            plane_count: w.format.bits() as u8,
            codec,
            tokens,
            compressed_size,
            base_exponents,
        },
        blocks,
    })
}

/// Decompress and reassemble each plane of a window from its blocks.
pub(crate) fn collect_planes(blocks: &[CompressedBlock], planes: usize, plane_len: usize) -> Result<Vec<Vec<u8>>> {
    let mut by_plane: BTreeMap<u16, BTreeMap<u32, &CompressedBlock>> = BTreeMap::new();
    for b in blocks {
        if b.header.plane_id as usize >= planes {
            return Err(Error::Kv(format!("block for plane {} in a {planes}-plane window", b.header.plane_id)));
        }
        by_plane.entry(b.header.plane_id).or_default().insert(b.header.seq, b);
    }
    let expected = plane_bytes(plane_len);
    let mut out = Vec::with_capacity(planes);
    for p in 0..planes as u16 {
        let mut bytes = Vec::with_capacity(expected);
        if let Some(chunks) = by_plane.get(&p) {
            for (i, (&seq, block)) in chunks.iter().enumerate() {
                if seq != i as u32 {
                    return Err(Error::IncompleteFetch(format!("plane {p} is missing block {i}")));
                }
                bytes.extend(decompress_block(block)?);
            }
        }
        if bytes.len() != expected {
            return Err(Error::IncompleteFetch(format!(
                "plane {p} reassembled {} of {expected} bytes",
                bytes.len()
            )));
        }
        out.push(bytes);
    }
    Ok(out)
}

pub fn decode_window(enc: &EncodedWindow) -> Result<KvWindow> {
    let format = enc.format;
    let meta = &enc.meta;
    if meta.plane_count as u32 != format.bits() {
        return Err(Error::Kv(format!(
            "metadata records {} planes, format has {}",
            meta.plane_count,
            format.bits()
        )));
    }
    let tokens = meta.tokens as usize;
    let channels = meta.channels();
    let planes = collect_planes(&enc.blocks, format.bits() as usize, tokens * channels)?;
    let image = PlaneImage::from_planes(format, tokens * channels, planes)?;
    let words = image.reassemble_full();
    let mut cm = Vec::with_capacity(words.len());
    if tokens > 0 {
        for (row, &base) in words.chunks(tokens).zip(&meta.base_exponents) {
            for &v in row {
                cm.push(undelta_word(format, v, base as u32)?);
            }
        }
    }
    KvWindow::new(
        enc.layer,
        enc.head,
        enc.seq,
        channels,
        format,
        transpose_to_token_major(&cm, tokens, channels),
    )
}

/// Bit-plane layout of the raw token-major window, without channel grouping
/// or exponent deltas. Used as the comparison baseline.
pub fn encode_baseline(w: &KvWindow, block_bytes: usize, codec: Codec) -> Result<Vec<CompressedBlock>> {
    let image = disaggregate(&w.values, w.format)?;
    let mut blocks = Vec::new();
    for (index, plane) in image.planes().iter().enumerate() {
        blocks.extend(compress_plane(plane, block_bytes, codec, index as u16, 0)?);
    }
    Ok(blocks)
}

pub fn decode_baseline(blocks: &[CompressedBlock], format: FloatFormat, tokens: usize, channels: usize) -> Result<Vec<u32>> {
    let planes = collect_planes(blocks, format.bits() as usize, tokens * channels)?;
    Ok(PlaneImage::from_planes(format, tokens * channels, planes)?.reassemble_full())
}

type StreamKey = (u32, u32, u32);

/// Accumulates host KV writes per (layer, head, seq) into windows of `n`
/// tokens. Partial windows are emitted only on flush, with their actual
/// token count.
#[derive(Debug)]
pub struct WindowBuffer {
    window: usize,
    format: FloatFormat,
    pending: BTreeMap<StreamKey, (usize, Vec<u32>)>,
}

impl WindowBuffer {
    pub fn new(window: usize, format: FloatFormat) -> Result<Self> {
        if window == 0 || window > u16::MAX as usize {
            return Err(Error::Config(format!("window of {window} tokens outside 1..=65535")));
        }
        Ok(Self {
            window,
            format,
            pending: BTreeMap::new(),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn push(&mut self, layer: u32, head: u32, seq: u32, token: &[u32]) -> Result<Option<KvWindow>> {
        if token.is_empty() {
            return Err(Error::Kv("token with no channels".into()));
        }
        let entry = self
            .pending
            .entry((layer, head, seq))
            .or_insert_with(|| (token.len(), Vec::new()));
        if entry.0 != token.len() {
            return Err(Error::Kv(format!(
                "layer {layer} head {head}: {} channels after {}",
                token.len(),
                entry.0
            )));
        }
        entry.1.extend_from_slice(token);
        if entry.1.len() == self.window * entry.0 {
            let channels = entry.0;
            let values = std::mem::take(&mut entry.1);
            return KvWindow::new(layer, head, seq, channels, self.format, values).map(Some);
        }
        Ok(None)
    }

    /// Emit every partial window, ordered by (layer, head, seq).
    pub fn flush(&mut self) -> Result<Vec<KvWindow>> {
        let pending = std::mem::take(&mut self.pending);
        pending
            .into_iter()
            .filter(|(_, (_, v))| !v.is_empty())
            .map(|((layer, head, seq), (channels, values))| KvWindow::new(layer, head, seq, channels, self.format, values))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(tokens: usize, channels: usize, f: impl Fn(usize, usize) -> u32) -> KvWindow {
        let values = (0..tokens).flat_map(|t| (0..channels).map(move |c| (t, c))).map(|(t, c)| f(t, c)).collect();
        KvWindow::new(0, 0, 0, channels, FloatFormat::BF16, values).unwrap()
    }

    #[test]
    fn transpose_2x2() {
        let w = KvWindow::new(0, 0, 0, 2, FloatFormat::BF16, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(transpose_to_channel_major(&w), vec![1, 3, 2, 4]);
        assert_eq!(transpose_to_token_major(&[1, 3, 2, 4], 2, 2), vec![1, 2, 3, 4]);
    }

    #[test]
    fn transpose_single_token_is_identity() {
        let w = KvWindow::new(0, 0, 0, 5, FloatFormat::BF16, vec![9, 8, 7, 6, 5]).unwrap();
        assert_eq!(transpose_to_channel_major(&w), w.values);
    }

    #[test]
    fn exponent_delta_examples() {
        let f = FloatFormat::BF16;
        let with_exp = |e: u32| e << 7;
        let row: Vec<u32> = [127, 127, 127].map(with_exp).to_vec();
        assert_eq!(exponent_delta(&row, f).unwrap(), (127, vec![0, 0, 0]));
        let row: Vec<u32> = [120, 125, 121].map(with_exp).to_vec();
        assert_eq!(exponent_delta(&row, f).unwrap(), (120, vec![0, 5, 1]));
        assert!(exponent_delta(&[], f).is_err());
    }

    #[test]
    fn metadata_for_128_channels_is_140_bytes() {
        let w = window(256, 128, |t, c| (0x3C00 + ((t * 31 + c * 17) % 512)) as u32);
        let enc = encode_window(&w, 4096, Codec::Zstd, 1).unwrap();
        assert_eq!(enc.meta.size(), 140);
        assert_eq!(enc.meta.to_bytes().len(), 140);
        // 140 of 65536 window bytes
        assert!((enc.meta.size() as f64) < 0.0025 * w.byte_size() as f64);
        assert_eq!(decode_window(&enc).unwrap(), w);
    }

    #[test]
    fn meta_bytes_roundtrip() {
        let meta = KvBlockMeta {
            block_id: 0x01020304,
            plane_count: 16,
            codec: Codec::Lz4,
            tokens: 300,
            compressed_size: 77_000,
            base_exponents: vec![1, 2, 3],
        };
        let b = meta.to_bytes();
        assert_eq!(&b[..12], &[4, 3, 2, 1, 16, 1, 0x2C, 0x01, 0xC8, 0x2C, 0x01, 0x00]);
        assert_eq!(KvBlockMeta::from_bytes(&b, 3).unwrap(), meta);
        assert!(KvBlockMeta::from_bytes(&b, 4).is_err());
    }

    #[test]
    fn constant_window_compresses() {
        let w = window(256, 128, |_, _| 0x3F80);
        let (image, bases) = window_planes(&w).unwrap();
        assert!(bases.iter().all(|&b| b == 127));
        for i in 1..=8 {
            assert!(image.planes()[i].iter().all(|&b| b == 0), "delta plane {i}");
        }
        let enc = encode_window(&w, 4096, Codec::Zstd, 0).unwrap();
        let ratio = w.byte_size() as f64 / enc.blocks_size() as f64;
        assert!(ratio > 10.0, "ratio {ratio}");
    }

    #[test]
    fn tampered_payload_detected() {
        let w = window(64, 16, |t, c| (0x3000 + t * 5 + c * 3) as u32);
        let mut enc = encode_window(&w, 4096, Codec::Raw, 0).unwrap();
        enc.blocks[3].payload[0] ^= 0x40;
        assert!(matches!(decode_window(&enc), Err(Error::Corruption { .. })));
    }

    #[test]
    fn missing_block_detected() {
        let w = window(64, 16, |t, c| (0x3000 + t * 5 + c * 3) as u32);
        let mut enc = encode_window(&w, 4096, Codec::Lz4, 0).unwrap();
        enc.blocks.remove(5);
        assert!(matches!(decode_window(&enc), Err(Error::IncompleteFetch(_))));
    }

    #[test]
    fn empty_window() {
        let w = KvWindow::new(1, 2, 3, 8, FloatFormat::BF16, vec![]).unwrap();
        let enc = encode_window(&w, 4096, Codec::Zstd, 0).unwrap();
        assert!(enc.blocks.is_empty());
        assert_eq!(enc.meta.size(), 12 + 8);
        let back = decode_window(&enc).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.channels, 8);
    }

    #[test]
    fn small_blocks_split_planes() {
        let w = window(100, 33, |t, c| ((t * 7919 + c * 104729) & 0xFFFF) as u32);
        let enc = encode_window(&w, 128, Codec::Lz4, 0).unwrap();
        // 3300 bits per plane -> 413 bytes -> 4 blocks of <=128 bytes
        assert_eq!(enc.blocks.len(), 16 * 4);
        assert_eq!(decode_window(&enc).unwrap(), w);
    }

    #[test]
    fn baseline_roundtrip() {
        let w = window(40, 12, |t, c| ((t * 31 + c) * 97 & 0xFFFF) as u32);
        let blocks = encode_baseline(&w, 4096, Codec::Zstd).unwrap();
        assert_eq!(decode_baseline(&blocks, w.format, 40, 12).unwrap(), w.values);
    }

    #[test]
    fn window_buffer_emits_and_flushes() {
        let mut buf = WindowBuffer::new(3, FloatFormat::BF16).unwrap();
        let mut full = Vec::new();
        for t in 0..7u32 {
            if let Some(w) = buf.push(0, 1, 0, &[t, t + 1]).unwrap() {
                full.push(w);
            }
            assert!(buf.push(0, 2, 0, &[t]).unwrap().is_none() || t % 3 == 2);
        }
        assert_eq!(full.len(), 2);
        assert_eq!(full[1].values, vec![3, 4, 4, 5, 5, 6]);
        let rest = buf.flush().unwrap();
        assert_eq!(rest.len(), 2);
        assert_eq!(rest[0].head, 1);
        assert_eq!(rest[0].tokens, 1);
        assert_eq!(rest[1].tokens, 1);
        assert!(buf.push(0, 1, 0, &[1, 2, 3]).is_ok());
        assert!(buf.push(0, 1, 0, &[1, 2]).is_err());
    }

    #[test]
    fn wide_exponent_rejected() {
        let f = FloatFormat::new(9, 6).unwrap();
        let w = KvWindow::new(0, 0, 0, 1, f, vec![0x100]).unwrap();
        assert!(encode_window(&w, 4096, Codec::Raw, 0).is_err());
    }
}
