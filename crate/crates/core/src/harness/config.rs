//! Experiment configuration, loaded from JSON. Every field has a default so
//! a config file only needs to name what it changes.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blockcodec::{check_block_bytes, Codec, DEFAULT_BLOCK_BYTES};
use crate::controller_sim::PipelineConfig;
use crate::dram_model::DramConfig;
use crate::error::{Error, Result};
use crate::kvpath::DEFAULT_WINDOW_TOKENS;
use crate::numfmt::{builtin_formats, FloatFormat, FormatEntry, FormatRegistry, ReducedSpec, Rounding};

/// Share of chunks served at each bits/weight. Zero bits means the chunk is
/// pruned and never fetched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionMix {
    pub name: String,
    pub shares: BTreeMap<u32, f64>,
}

impl PrecisionMix {
    pub fn new(name: &str, shares: &[(u32, f64)]) -> Self {
        Self {
            name: name.to_string(),
            shares: shares.iter().copied().collect(),
        }
    }

    pub fn uniform(bits: u32) -> Self {
        Self::new(&format!("uniform-{bits}"), &[(bits, 1.0)])
    }

    /// Expected bits per weight for equally sized chunks.
    pub fn mean_bits(&self) -> f64 {
        let total: f64 = self.shares.values().sum();
        self.shares.iter().map(|(&b, &s)| b as f64 * s).sum::<f64>() / total
    }

    pub fn validate(&self, base: FloatFormat) -> Result<()> {
        if self.shares.is_empty() || self.shares.values().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!("precision mix {:?} has no positive share", self.name)));
        }
        for (&bits, &share) in &self.shares {
            if !(share >= 0.0 && share.is_finite()) {
                return Err(Error::Config(format!("precision mix {:?}: share {share} for {bits} bits", self.name)));
            }
            if bits > base.bits() {
                return Err(Error::Config(format!(
                    "precision mix {:?}: {bits} bits exceeds the {}-bit base",
                    self.name,
                    base.bits()
                )));
            }
        }
        Ok(())
    }

    /// Bits for each of `chunks` chunks, then a seeded shuffle of the chunk
    /// order. Counts are the floors of the quotas; the leftover chunks go to
    /// the set of formats (one each) whose total bits come closest to the
    /// mix mean, ties to larger remainders and then wider formats.
    pub fn allocate(&self, chunks: usize, seed: u64) -> Vec<u32> {
        let total: f64 = self.shares.values().sum();
        let quotas: Vec<(u32, f64)> = self
            .shares
            .iter()
            .map(|(&b, &s)| (b, s / total * chunks as f64))
            .collect();
        let mut counts: Vec<(u32, usize, f64)> = quotas.iter().map(|&(b, q)| (b, q.floor() as usize, q - q.floor())).collect();
        let assigned: usize = counts.iter().map(|c| c.1).sum();
        let left = chunks - assigned;
        let target = self.mean_bits() * chunks as f64 - counts.iter().map(|c| (c.0 as usize * c.1) as f64).sum::<f64>();
        let candidates: Vec<usize> = (0..counts.len()).filter(|&i| counts[i].2 > 1e-9).collect();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2).then(counts[b].0.cmp(&counts[a].0)));
        let mut pick: Vec<usize> = order.into_iter().take(left).collect();
        if left > 0 && candidates.len() <= 16 && candidates.len() >= left {
            let score = |set: &[usize]| {
                let bits: f64 = set.iter().map(|&i| counts[i].0 as f64).sum();
                let rem: f64 = set.iter().map(|&i| counts[i].2).sum();
                ((bits - target).abs(), -rem, -bits)
            };
            let mut best = score(&pick);
            for mask in 0u32..1 << candidates.len() {
                if mask.count_ones() as usize != left {
                    continue;
                }
                let set: Vec<usize> = (0..candidates.len()).filter(|k| mask >> k & 1 == 1).map(|k| candidates[k]).collect();
                let s = score(&set);
                if s.partial_cmp(&best) == Some(std::cmp::Ordering::Less) {
                    best = s;
                    pick = set;
                }
            }
        }
        for i in pick {
            counts[i].1 += 1;
        }
        let mut bits: Vec<u32> = counts
            .iter()
            .flat_map(|&(b, n, _)| std::iter::repeat_n(b, n))
            .collect();
        bits.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        bits
    }
}

/// Precision mixes averaging 1.6, 4.8, 8.0 and 16
/// bits/weight over FP16/FP12/FP8/FP6/FP4 and pruning.
pub fn default_mixes() -> Vec<PrecisionMix> {
    vec![
        PrecisionMix::new("avg-1.6", &[(16, 0.02), (12, 0.02), (8, 0.05), (6, 0.05), (4, 0.085), (0, 0.775)]),
        PrecisionMix::new("avg-4.8", &[(16, 0.05), (12, 0.05), (8, 0.20), (6, 0.10), (4, 0.30), (0, 0.30)]),
        PrecisionMix::new("avg-8.0", &[(16, 0.15), (12, 0.10), (8, 0.40), (6, 0.10), (4, 0.15), (0, 0.10)]),
        PrecisionMix::new("avg-16", &[(16, 1.0)]),
    ]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Granularity {
    pub name: String,
    pub chunk_values: u64,
    pub chunks: usize,
}

pub fn default_granularities() -> Vec<Granularity> {
    vec![
        Granularity {
            name: "head".into(),
            chunk_values: 3_700_000,
            chunks: 16,
        },
        Granularity {
            name: "neuron".into(),
            chunk_values: 7_200,
            chunks: 2048,
        },
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub bits: u32,
    #[serde(default)]
    pub rounding: Rounding,
    /// mantissa guard planes, used with nearest rounding
    #[serde(default)]
    pub guard: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub weight_tensors: usize,
    pub weight_values: usize,
    pub weight_std: f64,
    pub kv_layers: u16,
    pub kv_heads: u16,
    pub kv_tokens: u32,
    pub kv_channels: u16,
    /// token-to-token correlation of each channel
    pub kv_rho: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            weight_tensors: 4,
            weight_values: 1 << 18,
            weight_std: 0.02,
            kv_layers: 4,
            kv_heads: 2,
            kv_tokens: 512,
            kv_channels: 128,
            kv_rho: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub block_bytes: usize,
    pub codec: Codec,
    pub window_tokens: usize,
    pub seed: u64,
    pub base_format: String,
    /// extra formats or per-format bits -> [r_E, r_M] overrides
    pub formats: BTreeMap<String, FormatEntry>,
    pub dram: DramConfig,
    pub pipeline: PipelineConfig,
    pub precision_mixes: Vec<PrecisionMix>,
    pub granularities: Vec<Granularity>,
    pub regions: Vec<RegionConfig>,
    pub synthetic: SyntheticConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            block_bytes: DEFAULT_BLOCK_BYTES,
            codec: Codec::Zstd,
            window_tokens: DEFAULT_WINDOW_TOKENS,
            seed: 0,
            base_format: "bf16".into(),
            formats: BTreeMap::new(),
            dram: DramConfig::default(),
            pipeline: PipelineConfig::default(),
            precision_mixes: default_mixes(),
            granularities: default_granularities(),
            regions: vec![
                RegionConfig {
                    bits: 16,
                    rounding: Rounding::Truncate,
                    guard: 0,
                },
                RegionConfig {
                    bits: 8,
                    rounding: Rounding::Nearest,
                    guard: 1,
                },
                RegionConfig {
                    bits: 4,
                    rounding: Rounding::Truncate,
                    guard: 0,
                },
            ],
            synthetic: SyntheticConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn registry(&self) -> Result<FormatRegistry> {
        let mut reg = builtin_formats();
        for (name, entry) in &self.formats {
            reg.insert(name, entry.clone())?;
        }
        Ok(reg)
    }

    pub fn base(&self) -> Result<FloatFormat> {
        self.registry()?.format(&self.base_format)
    }

    /// Truncating spec for `bits` over the base format.
    pub fn spec_for_bits(&self, bits: u32) -> Result<ReducedSpec> {
        self.registry()?.spec_for_bits(&self.base_format, bits)
    }

    pub fn region_specs(&self) -> Result<Vec<ReducedSpec>> {
        let base = self.base()?;
        self.regions
            .iter()
            .map(|r| {
                let t = self.spec_for_bits(r.bits)?;
                let spec = match r.rounding {
                    Rounding::Truncate => t,
                    Rounding::Nearest => ReducedSpec::nearest(t.exp_keep, t.man_keep, 0, r.guard),
                };
                spec.validate(base)?;
                Ok(spec)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        check_block_bytes(self.block_bytes)?;
        if self.window_tokens == 0 || self.window_tokens > u16::MAX as usize {
            return Err(Error::Config(format!("window of {} tokens outside 1..=65535", self.window_tokens)));
        }
        let base = self.base()?;
        self.dram.validate()?;
        self.pipeline.validate()?;
        for m in &self.precision_mixes {
            m.validate(base)?;
            for &bits in m.shares.keys().filter(|&&b| b > 0) {
                self.spec_for_bits(bits)?;
            }
        }
        for g in &self.granularities {
            if g.chunk_values == 0 || g.chunks == 0 {
                return Err(Error::Config(format!("granularity {:?} is empty", g.name)));
            }
        }
        self.region_specs()?;
        let s = &self.synthetic;
        if !(0.0..1.0).contains(&s.kv_rho) || s.weight_std <= 0.0 {
            return Err(Error::Config("synthetic kv_rho must be in [0, 1) and weight_std positive".into()));
        }
        Ok(())
    }
}
