//! Seeded synthetic corpora.
//!
//! Weights: i.i.d. normal values rounded to BF16.
//!
//! KV: per (layer, head) each channel `j` has a log-normal scale `s_j` and
//! an offset `mu_j ~ N(0, 1)`. Over tokens the channel follows an AR(1)
//! process `a_t = rho * a_{t-1} + sqrt(1 - rho^2) * e_t` with unit variance,
//! and the stored value is `s_j * (mu_j + 0.5 * a_t)` rounded to BF16. This
//! gives the cross-token, per-channel regularity that real K/V caches show,
//! while token-major rows mix channels of very different magnitude.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::config::SyntheticConfig;
use super::kvtrace::{KvDtype, KvRecord, KvTrace};
use super::manifest::{Tensor, TensorStore};
use crate::error::Result;
use crate::numfmt::FloatFormat;

/// Round an `f32` to BF16, nearest-even; NaN stays a quiet NaN.
pub fn f32_to_bf16(x: f32) -> u16 {
    let bits = x.to_bits();
    if x.is_nan() {
        return ((bits >> 16) as u16) | 0x0040;
    }
    let round = 0x7FFF + ((bits >> 16) & 1);
    (bits.wrapping_add(round) >> 16) as u16
}

pub fn bf16_to_f32(v: u16) -> f32 {
    f32::from_bits((v as u32) << 16)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_bf16(n: usize, std: f64, seed: u64, stream: u64) -> Vec<u32> {
    let mut rng = stream_rng(seed, stream);
    let normal = Normal::new(0.0, std).expect("positive std");
    (0..n)
        .map(|_| f32_to_bf16(normal.sample(&mut rng) as f32) as u32)
        .collect()
}

pub fn uniform_random_bf16(n: usize, seed: u64) -> Vec<u32> {
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| rng.random::<u16>() as u32).collect()
}

pub fn synthetic_weights(cfg: &SyntheticConfig, seed: u64) -> Result<TensorStore> {
    let mut store = TensorStore::default();
    for i in 0..cfg.weight_tensors {
        let values = gaussian_bf16(cfg.weight_values, cfg.weight_std, seed, i as u64);
        store.insert(Tensor::new(
            &format!("synthetic.{i:03}"),
            vec![cfg.weight_values as u64],
            "bf16",
            FloatFormat::BF16,
            values,
        )?)?;
    }
    Ok(store)
}

pub fn synthetic_kv(cfg: &SyntheticConfig, seed: u64) -> Result<KvTrace> {
    let mut records = Vec::new();
    let d = cfg.kv_channels as usize;
    let innovation = (1.0 - cfg.kv_rho * cfg.kv_rho).sqrt();
    for layer in 0..cfg.kv_layers {
        for head in 0..cfg.kv_heads {
            let mut rng = stream_rng(seed, ((layer as u64) << 16) | head as u64);
            let scale: Vec<f64> = (0..d)
                .map(|_| (rng.sample::<f64, _>(StandardNormal) * 1.5).exp())
                .collect();
            let mu: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let mut a: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            for token in 0..cfg.kv_tokens {
                let values = (0..d)
                    .map(|j| {
                        let e: f64 = rng.sample(StandardNormal);
                        a[j] = cfg.kv_rho * a[j] + innovation * e;
                        f32_to_bf16((scale[j] * (mu[j] + 0.5 * a[j])) as f32)
                    })
                    .collect();
                records.push(KvRecord {
                    layer,
                    head,
                    seq: 0,
                    token,
                    dtype: KvDtype::Bf16,
                    values,
                });
            }
        }
    }
    KvTrace::new(records)
}

/// Every token of every stream repeats the same vector.
pub fn constant_kv(layers: u16, tokens: u32, channels: u16, seed: u64) -> Result<KvTrace> {
    let mut rng = stream_rng(seed, 0);
    let mut records = Vec::new();
    for layer in 0..layers {
        let values: Vec<u16> = (0..channels)
            .map(|_| f32_to_bf16(rng.random_range(-4.0f32..4.0)))
            .collect();
        for token in 0..tokens {
            records.push(KvRecord {
                layer,
                head: 0,
                seq: 0,
                token,
                dtype: KvDtype::Bf16,
                values: values.clone(),
            });
        }
    }
    KvTrace::new(records)
}
