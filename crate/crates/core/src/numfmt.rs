//! Floating-point bit layouts and reduced-precision plane filters.
//!
//! Values are handled as opaque bit patterns: a word of width `1 + E + M`
//! stored in the low bits of a `u32`. Nothing here interprets NaN, Inf or
//! subnormal encodings.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widest word the simulator handles.
pub const MAX_WORD_BITS: u32 = 32;

/// Sign/exponent/mantissa layout of a floating-point word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FloatFormat {
    pub exp_bits: u32,
    pub man_bits: u32,
}

impl FloatFormat {
    pub const BF16: FloatFormat = FloatFormat {
        exp_bits: 8,
        man_bits: 7,
    };
    pub const FP16: FloatFormat = FloatFormat {
        exp_bits: 5,
        man_bits: 10,
    };

    pub fn new(exp_bits: u32, man_bits: u32) -> Result<Self> {
        let total = 1 + exp_bits as u64 + man_bits as u64;
        if total > MAX_WORD_BITS as u64 {
            return Err(Error::InvalidFormat(format!(
                "1+{exp_bits}+{man_bits} = {total} bits exceeds the {MAX_WORD_BITS}-bit limit"
            )));
        }
        Ok(Self { exp_bits, man_bits })
    }

    /// Total word width `N = 1 + E + M`.
    #[inline]
    pub const fn bits(&self) -> u32 {
        1 + self.exp_bits + self.man_bits
    }

    /// Mask covering the low `N` bits.
    #[inline]
    pub const fn word_mask(&self) -> u32 {
        low_mask(self.bits())
    }

    #[inline]
    pub const fn fits(&self, word: u32) -> bool {
        word & !self.word_mask() == 0
    }

    pub fn full_spec(&self) -> ReducedSpec {
        ReducedSpec::truncate(self.exp_bits, self.man_bits)
    }
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1+{}+{}", self.exp_bits, self.man_bits)
    }
}

/// Mask with the low `bits` bits set; `bits` may be 32.
#[inline]
pub const fn low_mask(bits: u32) -> u32 {
    if bits >= 32 {
        u32::MAX
    } else {
        (1u32 << bits) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fields {
    pub sign: u32,
    pub exponent: u32,
    pub mantissa: u32,
}

pub fn extract_fields(format: FloatFormat, word: u32) -> Fields {
    let m = format.man_bits;
    let e = format.exp_bits;
    Fields {
        sign: (word >> (e + m)) & 1,
        exponent: (word >> m) & low_mask(e),
        mantissa: word & low_mask(m),
    }
}

pub fn pack_fields(format: FloatFormat, fields: Fields) -> u32 {
    let m = format.man_bits;
    let e = format.exp_bits;
    ((fields.sign & 1) << (e + m)) | ((fields.exponent & low_mask(e)) << m) | (fields.mantissa & low_mask(m))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    #[default]
    Truncate,
    Nearest,
}

/// Reduced precision request over a base format: keep the top `exp_keep`
/// exponent planes and the top `man_keep` mantissa planes, optionally
/// fetching guard planes below them for round-to-nearest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReducedSpec {
    pub exp_keep: u32,
    pub man_keep: u32,
    #[serde(default)]
    pub exp_guard: u32,
    #[serde(default)]
    pub man_guard: u32,
    #[serde(default)]
    pub rounding: Rounding,
}

impl ReducedSpec {
    pub const fn truncate(exp_keep: u32, man_keep: u32) -> Self {
        Self {
            exp_keep,
            man_keep,
            exp_guard: 0,
            man_guard: 0,
            rounding: Rounding::Truncate,
        }
    }

    pub const fn nearest(exp_keep: u32, man_keep: u32, exp_guard: u32, man_guard: u32) -> Self {
        Self {
            exp_keep,
            man_keep,
            exp_guard,
            man_guard,
            rounding: Rounding::Nearest,
        }
    }

    pub fn validate(&self, format: FloatFormat) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.exp_guard > 2 || self.man_guard > 2 {
            return bad(format!(
                "guard planes must be in 0..=2 (got exp {}, man {})",
                self.exp_guard, self.man_guard
            ));
        }
        if self.exp_keep + self.exp_guard > format.exp_bits {
            return bad(format!(
                "{} kept + {} guard exponent planes exceed E={}",
                self.exp_keep, self.exp_guard, format.exp_bits
            ));
        }
        if self.man_keep + self.man_guard > format.man_bits {
            return bad(format!(
                "{} kept + {} guard mantissa planes exceed M={}",
                self.man_keep, self.man_guard, format.man_bits
            ));
        }
        match self.rounding {
            Rounding::Truncate if self.exp_guard != 0 || self.man_guard != 0 => {
                bad("truncation does not take guard planes".into())
            }
            Rounding::Nearest if self.man_guard == 0 => {
                bad("round-to-nearest needs at least one mantissa guard plane".into())
            }
            _ => Ok(()),
        }
    }

    /// Width of the assembled output word, `1 + r_E + r_M`.
    #[inline]
    pub const fn output_bits(&self) -> u32 {
        1 + self.exp_keep + self.man_keep
    }

    /// Planes read from memory, `1 + (r_E + d_E) + (r_M + d_M)`.
    #[inline]
    pub const fn fetched_planes(&self) -> u32 {
        1 + self.exp_keep + self.exp_guard + self.man_keep + self.man_guard
    }

    pub fn is_full(&self, format: FloatFormat) -> bool {
        self.exp_keep == format.exp_bits && self.man_keep == format.man_bits
    }

    /// Packed guard descriptor stored in block headers:
    /// bits 0-1 exponent guards, bits 2-3 mantissa guards, bit 4 rounding.
    pub fn guard_flags(&self) -> u8 {
        let round = matches!(self.rounding, Rounding::Nearest) as u8;
        (self.exp_guard as u8 & 3) | ((self.man_guard as u8 & 3) << 2) | (round << 4)
    }
}

/// Default split of `bits` per weight into kept exponent and mantissa planes.
///
/// With room for every exponent plane the remaining bits go to the mantissa,
/// otherwise the most significant exponent planes are kept and the mantissa
/// is dropped entirely.
pub fn default_split(format: FloatFormat, bits: u32) -> Result<(u32, u32)> {
    if bits == 0 || bits > format.bits() {
        return Err(Error::InvalidSpec(format!(
            "{bits} bits/weight is outside 1..={} for {format}",
            format.bits()
        )));
    }
    let payload = bits - 1;
    if payload >= format.exp_bits {
        Ok((format.exp_bits, payload - format.exp_bits))
    } else {
        Ok((payload, 0))
    }
}

/// A named base format plus an optional bits-per-weight override table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatEntry {
    pub exp_bits: u32,
    pub man_bits: u32,
    /// bits/weight -> [r_E, r_M]
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub policy: BTreeMap<u32, [u32; 2]>,
}

impl FormatEntry {
    pub fn format(&self) -> Result<FloatFormat> {
        FloatFormat::new(self.exp_bits, self.man_bits)
    }

    pub fn split(&self, bits: u32) -> Result<(u32, u32)> {
        let format = self.format()?;
        match self.policy.get(&bits) {
            Some(&[e, m]) => {
                if 1 + e + m != bits {
                    return Err(Error::Config(format!(
                        "policy entry for {bits} bits keeps 1+{e}+{m} planes"
                    )));
                }
                ReducedSpec::truncate(e, m).validate(format)?;
                Ok((e, m))
            }
            None => default_split(format, bits),
        }
    }
}

/// Format registry keyed by lowercase name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FormatRegistry {
    entries: BTreeMap<String, FormatEntry>,
}

impl FormatRegistry {
    pub fn get(&self, name: &str) -> Result<&FormatEntry> {
        self.entries
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidFormat(format!("unknown format {name:?}")))
    }

    pub fn format(&self, name: &str) -> Result<FloatFormat> {
        self.get(name)?.format()
    }

    /// Truncating spec for `bits` per weight over the named base format.
    pub fn spec_for_bits(&self, name: &str, bits: u32) -> Result<ReducedSpec> {
        let (e, m) = self.get(name)?.split(bits)?;
        Ok(ReducedSpec::truncate(e, m))
    }

    pub fn insert(&mut self, name: &str, entry: FormatEntry) -> Result<()> {
        entry.format()?;
        self.entries.insert(name.to_ascii_lowercase(), entry);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, FormatEntry> = serde_json::from_str(text)?;
        let mut reg = Self {
            entries: BTreeMap::new(),
        };
        for (name, entry) in raw {
            reg.insert(&name, entry)?;
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Overlay entries from `other`, replacing same-named formats.
    pub fn merge(&mut self, other: FormatRegistry) {
        self.entries.extend(other.entries);
    }
}

impl Default for FormatRegistry {
    fn default() -> Self {
        builtin_formats()
    }
}

pub fn builtin_formats() -> FormatRegistry {
    let entry = |e, m| FormatEntry {
        exp_bits: e,
        man_bits: m,
        policy: BTreeMap::new(),
    };
    let entries = [
        ("bf16", entry(8, 7)),
        ("fp16", entry(5, 10)),
        ("fp8_e4m3", entry(4, 3)),
        ("fp8_e5m2", entry(5, 2)),
        // integer checkpoints are carried as raw bit widths
        ("int4", entry(0, 3)),
    ];
    FormatRegistry {
        entries: entries
            .into_iter()
            .map(|(n, e)| (n.to_string(), e))
            .collect(),
    }
}
