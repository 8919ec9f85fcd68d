//! Measurement studies behind the CLI. Each returns plain rows plus a
//! [`Report`] rendering; rows are ordered by key, never by completion order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, Granularity, PrecisionMix};
use super::kvtrace::KvTrace;
use super::manifest::TensorStore;
use super::report::{f3, f6, Report, Table};
use super::synth;
use crate::bitplane::{disaggregate, plane_bytes, select_planes, PlaneId, PlaneSet};
use crate::blockcodec::{compress_plane, Codec, CompressedBlock, HEADER_BYTES};
use crate::controller_sim::{throughput_check, KvStore, StageTimeline, WeightDevice};
use crate::dram_model::{savings, simulate_load, FetchMode, Placement, PlaneObject};
use crate::error::{Error, Result};
use crate::kvpath::{decode_window, encode_baseline, encode_window, KvWindow, WindowBuffer};
use crate::numfmt::{FloatFormat, ReducedSpec};
use crate::region_map::RegionMap;

fn stored(blocks: &[CompressedBlock]) -> u64 {
    blocks.iter().map(|b| b.stored_size() as u64).sum()
}

fn ratio(orig: u64, comp: u64) -> f64 {
    if comp == 0 {
        1.0
    } else {
        orig as f64 / comp as f64
    }
}

// ---------------------------------------------------------------- weights

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlaneRow {
    pub tensor: String,
    pub plane: String,
    pub plane_index: usize,
    pub s_orig: u64,
    pub s_comp: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorRow {
    pub tensor: String,
    pub values: u64,
    pub s_orig: u64,
    pub s_comp: u64,
    pub ratio: f64,
    pub reduction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightStudy {
    pub planes: Vec<PlaneRow>,
    pub tensors: Vec<TensorRow>,
    pub s_orig: u64,
    pub s_comp: u64,
}

impl WeightStudy {
    /// `1 - sum(compressed incl. headers) / sum(original)`.
    pub fn reduction(&self) -> f64 {
        if self.s_orig == 0 {
            0.0
        } else {
            1.0 - self.s_comp as f64 / self.s_orig as f64
        }
    }

    /// Mean per-plane ratio over all tensors of the given planes.
    pub fn mean_ratio(&self, planes: &[String]) -> f64 {
        let r: Vec<f64> = self
            .planes
            .iter()
            .filter(|p| planes.contains(&p.plane))
            .map(|p| p.ratio)
            .collect();
        if r.is_empty() {
            0.0
        } else {
            r.iter().sum::<f64>() / r.len() as f64
        }
    }

    pub fn report(&self) -> Report {
        let mut planes = Table::new("weights_planes", &["tensor", "plane_id", "s_orig", "s_comp", "ratio"]);
        for p in &self.planes {
            planes.push(vec![p.tensor.clone(), p.plane.clone(), p.s_orig.to_string(), p.s_comp.to_string(), f6(p.ratio)]);
        }
        let mut tensors = Table::new("weights_tensors", &["tensor", "values", "s_orig", "s_comp", "ratio", "reduction"]);
        for t in &self.tensors {
            tensors.push(vec![
                t.tensor.clone(),
                t.values.to_string(),
                t.s_orig.to_string(),
                t.s_comp.to_string(),
                f6(t.ratio),
                f6(t.reduction),
            ]);
        }
        let mut report = Report {
            tables: vec![planes, tensors],
            ..Report::default()
        };
        report.json.insert(
            "weights_summary".into(),
            json!({
                "tensors": self.tensors.len(),
                "s_orig": self.s_orig,
                "s_comp": self.s_comp,
                "ratio": f6(ratio(self.s_orig, self.s_comp)),
                "reduction": f6(self.reduction()),
            }),
        );
        report
    }
}

/// Top `k` exponent planes and bottom `k` mantissa planes of a format.
pub fn extreme_planes(format: FloatFormat, k: u32) -> (Vec<String>, Vec<String>) {
    let e = format.exp_bits;
    let top = (e.saturating_sub(k)..e).map(|i| PlaneId::Exp(i).to_string()).collect();
    let bottom = (0..k.min(format.man_bits)).map(|i| PlaneId::Man(i).to_string()).collect();
    (top, bottom)
}

pub fn run_weight_compression_study(store: &TensorStore, block_bytes: usize, codec: Codec) -> Result<WeightStudy> {
    let tensors: Vec<_> = store.iter().collect();
    let per: Vec<Result<(Vec<PlaneRow>, TensorRow)>> = tensors
        .par_iter()
        .map(|t| {
            let image = disaggregate(&t.values, t.format)?;
            let mut rows = Vec::with_capacity(image.planes().len());
            let mut comp = 0;
            for (index, plane) in image.planes().iter().enumerate() {
                let blocks = compress_plane(plane, block_bytes, codec, index as u16, 0)?;
                let s_comp = stored(&blocks);
                comp += s_comp;
                let id = PlaneId::from_index(t.format, index).expect("index in range");
                rows.push(PlaneRow {
                    tensor: t.name.clone(),
                    plane: id.to_string(),
                    plane_index: index,
                    s_orig: plane.len() as u64,
                    s_comp,
                    ratio: ratio(plane.len() as u64, s_comp),
                });
            }
            let orig = t.byte_len();
            Ok((
                rows,
                TensorRow {
                    tensor: t.name.clone(),
                    values: t.values.len() as u64,
                    s_orig: orig,
                    s_comp: comp,
                    ratio: ratio(orig, comp),
                    reduction: if orig == 0 { 0.0 } else { 1.0 - comp as f64 / orig as f64 },
                },
            ))
        })
        .collect();
    let mut study = WeightStudy {
        planes: Vec::new(),
        tensors: Vec::new(),
        s_orig: 0,
        s_comp: 0,
    };
    for r in per {
        let (rows, t) = r?;
        study.s_orig += t.s_orig;
        study.s_comp += t.s_comp;
        study.planes.extend(rows);
        study.tensors.push(t);
    }
    Ok(study)
}

// --------------------------------------------------------------------- KV

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KvLayerRow {
    /// layer id, or `all` for the aggregate row
    pub layer: String,
    pub windows: u64,
    pub tokens: u64,
    pub s_orig: u64,
    pub baseline_comp: u64,
    pub proposed_comp: u64,
    pub baseline_ratio: f64,
    pub proposed_ratio: f64,
    pub improvement_pct: f64,
}

impl KvLayerRow {
    fn finish(mut self) -> Self {
        self.baseline_ratio = ratio(self.s_orig, self.baseline_comp);
        self.proposed_ratio = ratio(self.s_orig, self.proposed_comp);
        self.improvement_pct = (self.proposed_ratio / self.baseline_ratio - 1.0) * 100.0;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KvStudy {
    pub layers: Vec<KvLayerRow>,
    pub aggregate: KvLayerRow,
}

impl KvStudy {
    pub fn report(&self) -> Report {
        let mut t = Table::new(
            "kv_layers",
            &[
                "layer",
                "windows",
                "tokens",
                "s_orig",
                "baseline_comp",
                "proposed_comp",
                "baseline_ratio",
                "proposed_ratio",
                "improvement_pct",
            ],
        );
        for r in self.layers.iter().chain(std::iter::once(&self.aggregate)) {
            t.push(vec![
                r.layer.clone(),
                r.windows.to_string(),
                r.tokens.to_string(),
                r.s_orig.to_string(),
                r.baseline_comp.to_string(),
                r.proposed_comp.to_string(),
                f6(r.baseline_ratio),
                f6(r.proposed_ratio),
                f3(r.improvement_pct),
            ]);
        }
        Report {
            tables: vec![t],
            ..Report::default()
        }
    }
}

/// Cut a trace into per-stream windows of `window` tokens (partial windows
/// at stream ends are kept).
pub fn trace_windows(trace: &KvTrace, window: usize) -> Result<Vec<KvWindow>> {
    let mut buffers: BTreeMap<KvFormatKey, WindowBuffer> = BTreeMap::new();
    let mut out = Vec::new();
    for r in &trace.records {
        let format = r.dtype.format();
        let buf = match buffers.entry((format.exp_bits, format.man_bits)) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(WindowBuffer::new(window, format)?),
        };
        let values: Vec<u32> = r.values.iter().map(|&v| v as u32).collect();
        if let Some(w) = buf.push(r.layer as u32, r.head as u32, r.seq, &values)? {
            out.push(w);
        }
    }
    for buf in buffers.values_mut() {
        out.extend(buf.flush()?);
    }
    out.sort_by_key(|w| (w.layer, w.head, w.seq));
    Ok(out)
}

type KvFormatKey = (u32, u32);

/// Baseline (bit-planes of the token-major window) against the proposed
/// layout (channel-major, exponent deltas, bit-planes, metadata charged),
/// both with the same codec and block size. Every proposed window is
/// decoded and checked against its input.
pub fn run_kv_compression_study(trace: &KvTrace, window: usize, block_bytes: usize, codec: Codec) -> Result<KvStudy> {
    let windows = trace_windows(trace, window)?;
    let measured: Vec<Result<(u32, u64, u64, u64, u64)>> = windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let base = stored(&encode_baseline(w, block_bytes, codec)?);
            let enc = encode_window(w, block_bytes, codec, i as u32)?;
            if decode_window(&enc)? != *w {
                return Err(Error::Kv(format!(
                    "window {i} (layer {} head {} seq {}) did not round-trip",
                    w.layer, w.head, w.seq
                )));
            }
            Ok((w.layer, w.tokens as u64, w.byte_size() as u64, base, enc.stored_size() as u64))
        })
        .collect();
    let empty = |layer: String| KvLayerRow {
        layer,
        windows: 0,
        tokens: 0,
        s_orig: 0,
        baseline_comp: 0,
        proposed_comp: 0,
        baseline_ratio: 0.0,
        proposed_ratio: 0.0,
        improvement_pct: 0.0,
    };
    let mut per_layer: BTreeMap<u32, KvLayerRow> = BTreeMap::new();
    let mut all = empty("all".into());
    for m in measured {
        let (layer, tokens, orig, base, prop) = m?;
        for row in [per_layer.entry(layer).or_insert_with(|| empty(layer.to_string())), &mut all] {
            row.windows += 1;
            row.tokens += tokens;
            row.s_orig += orig;
            row.baseline_comp += base;
            row.proposed_comp += prop;
        }
    }
    Ok(KvStudy {
        layers: per_layer.into_values().map(KvLayerRow::finish).collect(),
        aggregate: all.finish(),
    })
}

// ------------------------------------------------------------------ fetch

/// Where plane sizes of the fetch study come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneSizing {
    /// every block stored raw, as for incompressible data
    Raw,
    /// blocks compressed from the chunk's actual values
    Compressed,
}

impl PlaneSizing {
    pub fn name(self) -> &'static str {
        match self {
            PlaneSizing::Raw => "raw",
            PlaneSizing::Compressed => "compressed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FetchRow {
    pub granularity: String,
    pub chunk_values: u64,
    pub chunks: usize,
    pub mix: String,
    pub sizing: PlaneSizing,
    pub bits_per_weight: f64,
    pub p_energy_pj: f64,
    pub t_energy_pj: f64,
    pub p_latency_ns: f64,
    pub t_latency_ns: f64,
    pub p_bytes: u64,
    pub t_bytes: u64,
    pub p_header_bytes: u64,
    pub p_activates: u64,
    pub t_activates: u64,
    pub p_energy_per_weight_pj: f64,
    pub t_energy_per_weight_pj: f64,
    pub energy_savings: f64,
    pub latency_savings: f64,
    pub byte_savings: f64,
}

pub fn fetch_table(rows: &[FetchRow]) -> Table {
    let mut t = Table::new(
        "fetch_study",
        &[
            "granularity",
            "chunk_values",
            "chunks",
            "mix",
            "sizing",
            "bits_per_weight",
            "p_energy_pj",
            "t_energy_pj",
            "p_latency_ns",
            "t_latency_ns",
            "p_bytes",
            "t_bytes",
            "p_header_bytes",
            "p_activates",
            "t_activates",
            "p_energy_per_weight_pj",
            "t_energy_per_weight_pj",
            "energy_savings_pct",
            "latency_savings_pct",
            "byte_savings_pct",
        ],
    );
    for r in rows {
        t.push(vec![
            r.granularity.clone(),
            r.chunk_values.to_string(),
            r.chunks.to_string(),
            r.mix.clone(),
            r.sizing.name().into(),
            f3(r.bits_per_weight),
            f3(r.p_energy_pj),
            f3(r.t_energy_pj),
            f3(r.p_latency_ns),
            f3(r.t_latency_ns),
            r.p_bytes.to_string(),
            r.t_bytes.to_string(),
            r.p_header_bytes.to_string(),
            r.p_activates.to_string(),
            r.t_activates.to_string(),
            f3(r.p_energy_per_weight_pj),
            f3(r.t_energy_per_weight_pj),
            f3(100.0 * r.energy_savings),
            f3(100.0 * r.latency_savings),
            f3(100.0 * r.byte_savings),
        ]);
    }
    t
}

/// Values of chunk `i`: drawn from the store (tensors concatenated in name
/// order, wrapping around) or synthesized when no store is given.
fn chunk_values(store: Option<&TensorStore>, cfg: &ExperimentConfig, g: &Granularity, i: usize) -> Vec<u32> {
    let n = g.chunk_values as usize;
    match store {
        Some(s) if s.total_values() > 0 => {
            let total = s.total_values() as usize;
            let mut out = Vec::with_capacity(n);
            let mut at = (i * n) % total;
            let flat: Vec<&[u32]> = s.iter().map(|t| t.values.as_slice()).collect();
            while out.len() < n {
                let mut skip = at;
                for v in &flat {
                    if skip < v.len() {
                        let take = (v.len() - skip).min(n - out.len());
                        out.extend_from_slice(&v[skip..skip + take]);
                        at = (at + take) % total;
                        break;
                    }
                    skip -= v.len();
                }
            }
            out
        }
        _ => synth::gaussian_bf16(n, cfg.synthetic.weight_std, cfg.seed, 1 << 32 | i as u64),
    }
}

fn plane_objects(store: Option<&TensorStore>, cfg: &ExperimentConfig, g: &Granularity, sizing: PlaneSizing, base: FloatFormat) -> Result<Vec<PlaneObject>> {
    let planes = base.bits() as usize;
    let vpb = cfg.block_bytes as u64 * 8;
    let per_chunk: Vec<Result<Vec<PlaneObject>>> = (0..g.chunks)
        .into_par_iter()
        .map(|c| {
            let payloads: Vec<Vec<u32>> = match sizing {
                PlaneSizing::Raw => {
                    let bytes = plane_bytes(g.chunk_values as usize);
                    let sizes: Vec<u32> = (0..bytes)
                        .step_by(cfg.block_bytes)
                        .map(|at| (bytes - at).min(cfg.block_bytes) as u32)
                        .collect();
                    vec![sizes; planes]
                }
                PlaneSizing::Compressed => {
                    let image = disaggregate(&chunk_values(store, cfg, g, c), base)?;
                    image
                        .planes()
                        .iter()
                        .enumerate()
                        .map(|(i, p)| {
                            Ok(compress_plane(p, cfg.block_bytes, cfg.codec, i as u16, 0)?
                                .iter()
                                .map(|b| b.payload.len() as u32)
                                .collect())
                        })
                        .collect::<Result<_>>()?
                }
            };
            Ok(payloads
                .into_iter()
                .enumerate()
                .map(|(plane, payload_sizes)| PlaneObject {
                    chunk: c,
                    plane,
                    values_per_block: vpb,
                    payload_sizes,
                    header_bytes: HEADER_BYTES as u32,
                })
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(g.chunks * planes);
    for p in per_chunk {
        out.extend(p?);
    }
    Ok(out)
}

/// P-vs-T load of every chunk once, for each granularity, precision mix and
/// plane sizing. Pruned chunks (0 bits) are skipped by both paths.
pub fn run_fetch_study(store: Option<&TensorStore>, cfg: &ExperimentConfig, sizings: &[PlaneSizing]) -> Result<Vec<FetchRow>> {
    cfg.validate()?;
    let base = cfg.base()?;
    let mshr = cfg.pipeline.mshr_entries as usize;
    let mut rows = Vec::new();
    for g in &cfg.granularities {
        for &sizing in sizings {
            let objects = plane_objects(store, cfg, g, sizing, base)?;
            let placement = Placement::new(&objects, &vec![g.chunk_values; g.chunks], base.bits(), &cfg.dram)?;
            for mix in &cfg.precision_mixes {
                rows.push(fetch_row(&placement, cfg, g, mix, sizing, base, mshr)?);
            }
        }
    }
    Ok(rows)
}

fn fetch_row(
    placement: &Placement,
    cfg: &ExperimentConfig,
    g: &Granularity,
    mix: &PrecisionMix,
    sizing: PlaneSizing,
    base: FloatFormat,
    mshr: usize,
) -> Result<FetchRow> {
    let bits = mix.allocate(g.chunks, cfg.seed);
    let mut assignment: Vec<(usize, PlaneSet)> = Vec::new();
    for (c, &b) in bits.iter().enumerate() {
        if b > 0 {
            assignment.push((c, select_planes(base, &cfg.spec_for_bits(b)?)?));
        }
    }
    let p = simulate_load(placement, &assignment, &cfg.dram, FetchMode::PlaneAligned, mshr)?;
    let t = simulate_load(placement, &assignment, &cfg.dram, FetchMode::ByteLevel, mshr)?;
    let weights = g.chunk_values as f64 * g.chunks as f64;
    Ok(FetchRow {
        granularity: g.name.clone(),
        chunk_values: g.chunk_values,
        chunks: g.chunks,
        mix: mix.name.clone(),
        sizing,
        bits_per_weight: bits.iter().map(|&b| b as f64).sum::<f64>() / g.chunks as f64,
        p_energy_pj: p.cost.energy_pj,
        t_energy_pj: t.cost.energy_pj,
        p_latency_ns: p.cost.latency_ns,
        t_latency_ns: t.cost.latency_ns,
        p_bytes: p.cost.bytes_read,
        t_bytes: t.cost.bytes_read,
        p_header_bytes: p.cost.header_bytes,
        p_activates: p.cost.activates,
        t_activates: t.cost.activates,
        p_energy_per_weight_pj: p.cost.energy_pj / weights,
        t_energy_per_weight_pj: t.cost.energy_pj / weights,
        energy_savings: savings(p.cost.energy_pj, t.cost.energy_pj),
        latency_savings: savings(p.cost.latency_ns, t.cost.latency_ns),
        byte_savings: savings(p.cost.bytes_read as f64, t.cost.bytes_read as f64),
    })
}

// --------------------------------------------------------------- pipeline

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineScenario {
    pub name: String,
    pub timeline: StageTimeline,
    pub dram_ns: f64,
    pub codec_tail_ns: f64,
    pub tokens: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineStudy {
    pub scenarios: Vec<PipelineScenario>,
    pub codec_gbs: f64,
    pub dram_gbs: f64,
    pub link_gbs: f64,
    pub headroom: f64,
    pub sufficient: bool,
}

impl PipelineStudy {
    pub fn report(&self) -> Report {
        let mut summary = Table::new(
            "pipeline_summary",
            &["scenario", "total_ns", "dram_ns", "codec_tail_ns", "max_stage_ns", "sum_stage_ns", "critical_stage", "tokens", "per_token_ns", "bytes"],
        );
        let mut stages = Table::new("pipeline_stages", &["scenario", "stage", "start_ns", "end_ns"]);
        let mut report = Report::default();
        for s in &self.scenarios {
            let tl = &s.timeline;
            summary.push(vec![
                s.name.clone(),
                f3(tl.total_ns),
                f3(s.dram_ns),
                f3(s.codec_tail_ns),
                f3(tl.max_stage_ns()),
                f3(tl.sum_stage_ns()),
                tl.critical_stage().map_or(String::new(), |c| c.stage.clone()),
                s.tokens.to_string(),
                f3(if s.tokens == 0 { 0.0 } else { tl.total_ns / s.tokens as f64 }),
                s.bytes.to_string(),
            ]);
            let mut own = Table::new(&format!("timeline_{}", s.name), &["stage", "start_ns", "end_ns"]);
            for st in &tl.stages {
                stages.push(vec![s.name.clone(), st.stage.clone(), f3(st.start_ns), f3(st.end_ns)]);
                own.push(vec![st.stage.clone(), f3(st.start_ns), f3(st.end_ns)]);
            }
            report.tables.push(own);
        }
        report.tables.insert(0, stages);
        report.tables.insert(0, summary);
        report.json.insert(
            "throughput".into(),
            json!({
                "codec_gbs": f3(self.codec_gbs),
                "dram_gbs": f3(self.dram_gbs),
                "link_gbs": f3(self.link_gbs),
                "headroom": f3(self.headroom),
                "sufficient": self.sufficient,
            }),
        );
        report
    }
}

/// Chunk read micro-timelines (16 KB of full-precision weights read at 5
/// and 10 bits, LZ4 and ZSTD) and 32-token KV window writes.
pub fn run_pipeline_study(cfg: &ExperimentConfig, kv_channels: usize) -> Result<PipelineStudy> {
    cfg.validate()?;
    let base = cfg.base()?;
    let chunk_values = 16 * 1024 * 8 / base.bits() as usize;
    let values = synth::gaussian_bf16(chunk_values, cfg.synthetic.weight_std, cfg.seed, 7);
    let mut scenarios = Vec::new();
    for codec in [Codec::Lz4, Codec::Zstd] {
        let specs: Vec<ReducedSpec> = [5, 10].iter().map(|&b| cfg.spec_for_bits(b)).collect::<Result<_>>()?;
        let dev = WeightDevice::new(&values, base, &specs, cfg.block_bytes, codec, cfg.dram.clone(), cfg.pipeline.clone())?;
        for (region, bits) in [(0usize, 5u64), (1, 10)] {
            let bytes = chunk_values as u64 * bits / 8;
            let out = dev.read_chunk(region, 0, bytes)?;
            let dram_ns = out.timeline.stage("dram").map_or(0.0, |s| s.end_ns);
            scenarios.push(PipelineScenario {
                name: format!("read_{bits}bit_{}", codec.name()),
                dram_ns,
                codec_tail_ns: out.timeline.total_ns - dram_ns,
                timeline: out.timeline,
                tokens: 0,
                bytes,
            });
        }
    }
    let window = synth::synthetic_kv(
        &super::config::SyntheticConfig {
            kv_layers: 1,
            kv_heads: 1,
            kv_tokens: 32,
            kv_channels: kv_channels as u16,
            ..cfg.synthetic.clone()
        },
        cfg.seed,
    )?;
    let w = trace_windows(&window, 32)?.remove(0);
    for codec in [Codec::Lz4, Codec::Zstd] {
        let mut store = KvStore::new(cfg.block_bytes, codec, cfg.dram.clone(), cfg.pipeline.clone())?;
        let out = store.write_kv(&w)?;
        let write = out.timeline.stage("dram_write").map_or(0.0, |s| s.duration());
        scenarios.push(PipelineScenario {
            name: format!("kv_write_{}", codec.name()),
            dram_ns: write,
            codec_tail_ns: out.timeline.stage("compress").map_or(0.0, |s| s.duration()),
            tokens: w.tokens as u64,
            bytes: out.cost.bytes_written,
            timeline: out.timeline,
        });
    }
    let tp = throughput_check(&cfg.pipeline, &cfg.dram);
    Ok(PipelineStudy {
        scenarios,
        codec_gbs: tp.codec_gbs,
        dram_gbs: tp.dram_gbs,
        link_gbs: tp.link_gbs,
        headroom: tp.headroom,
        sufficient: tp.sufficient,
    })
}

// ------------------------------------------------------------- region map

/// Region map of the configured precisions over `total_values` weights.
pub fn run_region_map(cfg: &ExperimentConfig, total_values: u64) -> Result<Report> {
    let base = cfg.base()?;
    let specs = cfg.region_specs()?;
    let map = RegionMap::contiguous(total_values, base, &specs)?;
    let mut t = Table::new(
        "region_map",
        &["region", "bits", "rounding", "base", "logical_bytes", "logical_bits", "planes", "plane_ids"],
    );
    for (i, s) in specs.iter().enumerate() {
        let planes = select_planes(base, s)?;
        let ids: Vec<String> = planes.ids(base).iter().map(|p| p.to_string()).collect();
        t.push(vec![
            i.to_string(),
            s.output_bits().to_string(),
            format!("{:?}", s.rounding).to_lowercase(),
            map.base(i)?.to_string(),
            map.logical_bytes(i)?.to_string(),
            map.logical_bits(i)?.to_string(),
            planes.len().to_string(),
            ids.join(" "),
        ]);
    }
    let mut report = Report {
        tables: vec![t],
        ..Report::default()
    };
    report
        .json
        .insert("region_map".into(), serde_json::from_str(&map.layout().to_json())?);
    Ok(report)
}
