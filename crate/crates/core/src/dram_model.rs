//! Closed-form DDR-class DRAM cost model.
//!
//! Accesses are row segments. Each bank serializes its own accesses
//! (precharge + activate + CAS on a row miss, CAS only on a hit), every
//! channel serializes data bursts on its bus, and channels run in parallel.
//! Requests are picked FR-FCFS per bank: the oldest row hit wins over the
//! oldest request until the oldest has been bypassed `starvation_cap` times.
//! At most `max_outstanding` requests are visible to the scheduler at once.
//!
//! Two placements are modeled for the same tensor:
//! * plane-aligned (P): every plane of a chunk is an independent object that
//!   starts on a row boundary, consecutive objects rotating across banks;
//! * byte-level (T): packed words laid out linearly with row interleaving
//!   across banks. A T read always moves the full words of its value range.

use std::collections::BTreeMap;
use std::ops::{AddAssign, Range};

use serde::{Deserialize, Serialize};

use crate::bitplane::PlaneSet;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DramConfig {
    pub row_size_bytes: u64,
    pub channels: u32,
    pub banks_per_channel: u32,
    /// activate + precharge energy per row opened
    pub e_activate_pj: f64,
    pub e_read_pj_per_byte: f64,
    pub e_write_pj_per_byte: f64,
    pub t_rcd_ns: f64,
    pub t_cas_ns: f64,
    pub t_rp_ns: f64,
    pub t_burst_ns_per_byte: f64,
    pub starvation_cap: u32,
}

impl Default for DramConfig {
    /// DDR5-4800 orders of magnitude: 32-bit data per channel (19.2 GB/s),
    /// 32 banks, 8 KB rows, tRCD = CL = tRP = 16 ns. Activate energy is for
    /// a rank of ten x4 devices opening one row each.
    fn default() -> Self {
        Self {
            row_size_bytes: 8192,
            channels: 4,
            banks_per_channel: 32,
            e_activate_pj: 10_000.0,
            e_read_pj_per_byte: 40.0,
            e_write_pj_per_byte: 45.0,
            t_rcd_ns: 16.0,
            t_cas_ns: 16.0,
            t_rp_ns: 16.0,
            t_burst_ns_per_byte: 1.0 / 19.2,
            starvation_cap: 16,
        }
    }
}

impl DramConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("row_size_bytes", self.row_size_bytes as f64),
            ("channels", self.channels as f64),
            ("banks_per_channel", self.banks_per_channel as f64),
            ("e_activate_pj", self.e_activate_pj),
            ("e_read_pj_per_byte", self.e_read_pj_per_byte),
            ("e_write_pj_per_byte", self.e_write_pj_per_byte),
            ("t_rcd_ns", self.t_rcd_ns),
            ("t_cas_ns", self.t_cas_ns),
            ("t_rp_ns", self.t_rp_ns),
            ("t_burst_ns_per_byte", self.t_burst_ns_per_byte),
            ("starvation_cap", self.starvation_cap as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("dram.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn total_banks(&self) -> u32 {
        self.channels * self.banks_per_channel
    }

    /// Peak data bandwidth over all channels, GB/s.
    pub fn peak_bandwidth_gbs(&self) -> f64 {
        self.channels as f64 / self.t_burst_ns_per_byte
    }

    /// Channel and bank of global bank slot `global`. Consecutive slots
    /// walk the channels; the channel is skewed by the base-`channels` digit
    /// sum of the bank index so a fixed stride of slots (one plane of each
    /// stripe) still rotates over all channels.
    fn bank_of(&self, global: u32) -> (u32, u32) {
        let (bank, lane) = (global / self.channels, global % self.channels);
        if self.channels == 1 {
            return (0, bank);
        }
        let mut skew = 0;
        let mut q = bank;
        while q > 0 {
            skew += q % self.channels;
            q /= self.channels;
        }
        ((lane + skew) % self.channels, bank)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Access {
    pub channel: u32,
    pub bank: u32,
    pub row: u64,
    pub bytes: u32,
    /// bytes of this access that are block headers or other metadata
    pub header_bytes: u32,
    pub kind: AccessKind,
}

pub type AccessTrace = Vec<Access>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub energy_pj: f64,
    pub activate_energy_pj: f64,
    pub transfer_energy_pj: f64,
    pub latency_ns: f64,
    pub activates: u64,
    pub row_hits: u64,
    pub accesses: u64,
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub header_bytes: u64,
}

impl CostReport {
    pub fn bytes_moved(&self) -> u64 {
        self.bytes_read + self.bytes_written
    }

    pub fn payload_bytes(&self) -> u64 {
        self.bytes_moved() - self.header_bytes
    }

    pub fn row_hit_rate(&self) -> f64 {
        if self.accesses == 0 {
            0.0
        } else {
            self.row_hits as f64 / self.accesses as f64
        }
    }

    /// Energy recomputed from the counters alone.
    pub fn recompute_energy(&self, cfg: &DramConfig) -> f64 {
        self.activates as f64 * cfg.e_activate_pj
            + self.bytes_read as f64 * cfg.e_read_pj_per_byte
            + self.bytes_written as f64 * cfg.e_write_pj_per_byte
    }
}

impl AddAssign for CostReport {
    /// Sequential composition: energies, counters and latencies add.
    fn add_assign(&mut self, o: Self) {
        self.energy_pj += o.energy_pj;
        self.activate_energy_pj += o.activate_energy_pj;
        self.transfer_energy_pj += o.transfer_energy_pj;
        self.latency_ns += o.latency_ns;
        self.activates += o.activates;
        self.row_hits += o.row_hits;
        self.accesses += o.accesses;
        self.bytes_read += o.bytes_read;
        self.bytes_written += o.bytes_written;
        self.header_bytes += o.header_bytes;
    }
}

/// `1 - p/t`, the fraction saved by `p` relative to `t`.
pub fn savings(p: f64, t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        1.0 - p / t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub report: CostReport,
    /// completion time of each trace entry, in trace order
    pub completion_ns: Vec<f64>,
    pub peak_outstanding: usize,
}

#[derive(Clone, Copy, Debug, Default)]
struct BankState {
    open_row: Option<u64>,
    ready: f64,
    bypassed: u32,
}

pub fn simulate_trace(trace: &[Access], cfg: &DramConfig, max_outstanding: usize) -> Result<Schedule> {
    simulate_trace_at(trace, &vec![0.0; trace.len()], cfg, max_outstanding)
}

/// Like [`simulate_trace`], but access `i` cannot issue before `arrival[i]`.
pub fn simulate_trace_at(trace: &[Access], arrival: &[f64], cfg: &DramConfig, max_outstanding: usize) -> Result<Schedule> {
    cfg.validate()?;
    if arrival.len() != trace.len() {
        return Err(Error::Config(format!(
            "{} arrival times for {} accesses",
            arrival.len(),
            trace.len()
        )));
    }
    if max_outstanding == 0 {
        return Err(Error::Config("at least one outstanding request is required".into()));
    }
    let banks = cfg.total_banks() as usize;
    for a in trace {
        if a.channel >= cfg.channels || a.bank >= cfg.banks_per_channel {
            return Err(Error::PlacementFault(format!(
                "access to channel {} bank {} outside the configured geometry",
                a.channel, a.bank
            )));
        }
        if a.bytes == 0 {
            return Err(Error::PlacementFault("zero-byte access in trace".into()));
        }
    }
    let bank_index = |a: &Access| (a.channel * cfg.banks_per_channel + a.bank) as usize;

    let mut state = vec![BankState::default(); banks];
    let mut bus_ready = vec![0f64; cfg.channels as usize];
    let mut completion = vec![0f64; trace.len()];
    let mut report = CostReport::default();
    let mut pending: Vec<usize> = Vec::with_capacity(max_outstanding);
    let mut next = 0usize;
    let mut peak = 0usize;

    while next < trace.len() || !pending.is_empty() {
        while pending.len() < max_outstanding && next < trace.len() {
            pending.push(next);
            next += 1;
        }
        peak = peak.max(pending.len());

        // FR-FCFS candidate per bank; `pending` is kept in arrival order.
        let mut oldest: BTreeMap<usize, usize> = BTreeMap::new();
        let mut first_hit: BTreeMap<usize, usize> = BTreeMap::new();
        for (slot, &i) in pending.iter().enumerate() {
            let b = bank_index(&trace[i]);
            oldest.entry(b).or_insert(slot);
            if state[b].open_row == Some(trace[i].row) {
                first_hit.entry(b).or_insert(slot);
            }
        }
        let mut best: Option<(f64, usize, usize)> = None; // (data start, trace idx, slot)
        for (&b, &old_slot) in &oldest {
            let slot = match first_hit.get(&b) {
                Some(&hit) if hit != old_slot && state[b].bypassed < cfg.starvation_cap => hit,
                _ => old_slot,
            };
            let a = &trace[pending[slot]];
            let s = &state[b];
            let issue = s.ready.max(arrival[pending[slot]]);
            let ready = if s.open_row == Some(a.row) {
                issue + cfg.t_cas_ns
            } else {
                let precharge = if s.open_row.is_some() { cfg.t_rp_ns } else { 0.0 };
                issue + precharge + cfg.t_rcd_ns + cfg.t_cas_ns
            };
            let start = ready.max(bus_ready[a.channel as usize]);
            let key = (start, pending[slot], slot);
            if best.is_none_or(|cur| (key.0, key.1) < (cur.0, cur.1)) {
                best = Some(key);
            }
        }
        let (start, idx, slot) = best.expect("pending requests have candidates");
        let a = trace[idx];
        let b = bank_index(&a);
        let old_slot = oldest[&b];
        let hit = state[b].open_row == Some(a.row);
        let end = start + a.bytes as f64 * cfg.t_burst_ns_per_byte;
        bus_ready[a.channel as usize] = end;
        let s = &mut state[b];
        s.ready = end;
        s.open_row = Some(a.row);
        s.bypassed = if slot == old_slot { 0 } else { s.bypassed + 1 };
        completion[idx] = end;
        pending.remove(slot);

        report.accesses += 1;
        if hit {
            report.row_hits += 1;
        } else {
            report.activates += 1;
        }
        match a.kind {
            AccessKind::Read => report.bytes_read += a.bytes as u64,
            AccessKind::Write => report.bytes_written += a.bytes as u64,
        }
        report.header_bytes += a.header_bytes as u64;
    }

    report.activate_energy_pj = report.activates as f64 * cfg.e_activate_pj;
    report.transfer_energy_pj =
        report.bytes_read as f64 * cfg.e_read_pj_per_byte + report.bytes_written as f64 * cfg.e_write_pj_per_byte;
    report.energy_pj = report.activate_energy_pj + report.transfer_energy_pj;
    report.latency_ns = completion.iter().copied().fold(0.0, f64::max);
    Ok(Schedule {
        report,
        completion_ns: completion,
        peak_outstanding: peak,
    })
}

/// Compressed (or raw) block sizes of one plane of one chunk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneObject {
    pub chunk: usize,
    pub plane: usize,
    /// values covered by each block (the last block may be short)
    pub values_per_block: u64,
    /// payload bytes per block
    pub payload_sizes: Vec<u32>,
    /// header bytes charged per block
    pub header_bytes: u32,
}

impl PlaneObject {
    pub fn stored_size(&self) -> u64 {
        self.payload_sizes
            .iter()
            .map(|&p| (p + self.header_bytes) as u64)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLocation {
    pub channel: u32,
    pub bank: u32,
    /// first row of the block; the block starts at column 0
    pub row: u64,
    pub stored_bytes: u32,
    pub header_bytes: u32,
}

impl BlockLocation {
    /// Rows spanned by the block, all in its bank.
    pub fn rows(&self, row_size: u64) -> Range<u64> {
        self.row..self.row + (self.stored_bytes as u64).div_ceil(row_size).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct ObjectPlacement {
    values_per_block: u64,
    blocks: Vec<BlockLocation>,
}

/// Row-aligned placement of plane blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanePlacement {
    row_size: u64,
    objects: BTreeMap<(usize, usize), ObjectPlacement>,
}

/// Every block starts on a fresh row. Chunks are laid out in order; inside a
/// chunk, blocks are taken stripe by stripe (all planes of block `seq`
/// before `seq + 1`) and each one goes to the next bank of a global
/// round-robin cursor (channel-first), so the planes of one stripe sit in
/// distinct banks. A block longer than a row continues in the following
/// rows of the same bank.
pub fn lay_out_planes(objects: &[PlaneObject], cfg: &DramConfig) -> Result<PlanePlacement> {
    cfg.validate()?;
    let banks = cfg.total_banks() as usize;
    let mut next_row = vec![0u64; banks];
    let mut cursor = 0usize;
    let mut placed: BTreeMap<(usize, usize), ObjectPlacement> = BTreeMap::new();
    let mut by_chunk: BTreeMap<usize, Vec<&PlaneObject>> = BTreeMap::new();
    for obj in objects {
        if obj.values_per_block == 0 {
            return Err(Error::PlacementFault("plane object with zero values per block".into()));
        }
        if placed
            .insert(
                (obj.chunk, obj.plane),
                ObjectPlacement {
                    values_per_block: obj.values_per_block,
                    blocks: Vec::with_capacity(obj.payload_sizes.len()),
                },
            )
            .is_some()
        {
            return Err(Error::PlacementFault(format!(
                "plane {} of chunk {} placed twice",
                obj.plane, obj.chunk
            )));
        }
        by_chunk.entry(obj.chunk).or_default().push(obj);
    }
    for (chunk, mut planes) in by_chunk {
        planes.sort_by_key(|o| o.plane);
        let stripes = planes.iter().map(|o| o.payload_sizes.len()).max().unwrap_or(0);
        for seq in 0..stripes {
            for obj in planes.iter().filter(|o| seq < o.payload_sizes.len()) {
                let global = cursor % banks;
                cursor += 1;
                let (channel, bank) = cfg.bank_of(global as u32);
                let stored = obj.payload_sizes[seq] + obj.header_bytes;
                let row = next_row[global];
                next_row[global] += (stored as u64).div_ceil(cfg.row_size_bytes).max(1);
                placed
                    .get_mut(&(chunk, obj.plane))
                    .expect("registered above")
                    .blocks
                    .push(BlockLocation {
                        channel,
                        bank,
                        row,
                        stored_bytes: stored,
                        header_bytes: obj.header_bytes,
                    });
            }
        }
    }
    Ok(PlanePlacement {
        row_size: cfg.row_size_bytes,
        objects: placed,
    })
}

impl PlanePlacement {
    pub fn lookup(&self, chunk: usize, plane: usize, seq: usize) -> Option<BlockLocation> {
        self.objects.get(&(chunk, plane))?.blocks.get(seq).copied()
    }

    pub fn row_size(&self) -> u64 {
        self.row_size
    }

    /// Segments needed to read the blocks of `planes` covering `values`
    /// of `chunk`, stripe by stripe: `(plane, seq, accesses)`.
    pub fn fetch_trace(&self, chunk: usize, values: Range<u64>, planes: &PlaneSet) -> Result<Vec<(usize, usize, AccessTrace)>> {
        let mut out = Vec::new();
        if values.start >= values.end {
            return Ok(out);
        }
        let mut objects = Vec::with_capacity(planes.len());
        for &plane in planes.indices() {
            let o = self.objects.get(&(chunk, plane)).ok_or_else(|| {
                Error::PlacementFault(format!("plane {plane} of chunk {chunk} is not placed"))
            })?;
            let first = (values.start / o.values_per_block) as usize;
            let last = ((values.end - 1) / o.values_per_block) as usize;
            if last >= o.blocks.len() {
                return Err(Error::PlacementFault(format!(
                    "values {values:?} exceed the {} blocks of plane {plane} in chunk {chunk}",
                    o.blocks.len()
                )));
            }
            objects.push((plane, o, first..last + 1));
        }
        let stripes = objects.iter().map(|(_, _, r)| r.start).min().unwrap_or(0)
            ..objects.iter().map(|(_, _, r)| r.end).max().unwrap_or(0);
        for seq in stripes {
            for (plane, o, range) in &objects {
                if !range.contains(&seq) {
                    continue;
                }
                let loc = o.blocks[seq];
                let mut accesses = segments(&loc, self.row_size, AccessKind::Read);
                // the header leads the block
                accesses[0].header_bytes = loc.header_bytes.min(accesses[0].bytes);
                out.push((*plane, seq, accesses));
            }
        }
        Ok(out)
    }
}

/// Row segments of one block.
fn segments(loc: &BlockLocation, row_size: u64, kind: AccessKind) -> AccessTrace {
    let mut out = Vec::new();
    let total = loc.stored_bytes as u64;
    let mut at = 0;
    while at < total {
        let end = (at + row_size).min(total);
        out.push(Access {
            channel: loc.channel,
            bank: loc.bank,
            row: loc.row + at / row_size,
            bytes: (end - at) as u32,
            header_bytes: 0,
            kind,
        });
        at = end;
    }
    out
}

/// Linear word layout; row `r` of the address space sits in bank
/// `r mod banks` (channel-first rotation).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WordPlacement {
    pub word_bits: u32,
    pub total_values: u64,
}

impl WordPlacement {
    pub fn new(word_bits: u32, total_values: u64) -> Self {
        Self {
            word_bits,
            total_values,
        }
    }

    pub fn fetch_trace(&self, values: Range<u64>, cfg: &DramConfig) -> Result<AccessTrace> {
        if values.end > self.total_values {
            return Err(Error::PlacementFault(format!(
                "values {values:?} beyond the {} placed words",
                self.total_values
            )));
        }
        if values.start >= values.end {
            return Ok(Vec::new());
        }
        let start = values.start * self.word_bits as u64 / 8;
        let end = (values.end * self.word_bits as u64).div_ceil(8);
        Ok(linear_segments(start..end, AccessKind::Read, cfg))
    }
}

/// Row segments of a byte range in the row-interleaved linear address space.
pub fn linear_segments(bytes: Range<u64>, kind: AccessKind, cfg: &DramConfig) -> AccessTrace {
    let banks = cfg.total_banks() as u64;
    let row = cfg.row_size_bytes;
    let mut out = Vec::new();
    let mut at = bytes.start;
    while at < bytes.end {
        let line = at / row;
        let seg_end = ((line + 1) * row).min(bytes.end);
        let (channel, bank) = cfg.bank_of((line % banks) as u32);
        out.push(Access {
            channel,
            bank,
            row: line / banks,
            bytes: (seg_end - at) as u32,
            header_bytes: 0,
            kind,
        });
        at = seg_end;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchMode {
    /// plane-aligned fetch (P)
    PlaneAligned,
    /// byte-level full-word fetch (T)
    ByteLevel,
}

/// One chunk of a model: its offset in the linear word layout and length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkInfo {
    pub value_offset: u64,
    pub values: u64,
}

/// Both placements of the same model image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placement {
    pub planes: PlanePlacement,
    pub words: WordPlacement,
    pub chunks: Vec<ChunkInfo>,
}

impl Placement {
    pub fn new(objects: &[PlaneObject], chunk_values: &[u64], word_bits: u32, cfg: &DramConfig) -> Result<Self> {
        let mut chunks = Vec::with_capacity(chunk_values.len());
        let mut offset = 0;
        for &values in chunk_values {
            chunks.push(ChunkInfo {
                value_offset: offset,
                values,
            });
            offset += values;
        }
        Ok(Self {
            planes: lay_out_planes(objects, cfg)?,
            words: WordPlacement::new(word_bits, offset),
            chunks,
        })
    }

    fn chunk(&self, chunk: usize) -> Result<ChunkInfo> {
        self.chunks
            .get(chunk)
            .copied()
            .ok_or_else(|| Error::PlacementFault(format!("chunk {chunk} is not placed")))
    }
}

/// Read `values` (relative to `chunk`) restricted to `planes`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FetchRequest {
    pub chunk: usize,
    pub values: Range<u64>,
    pub planes: PlaneSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FetchResult {
    pub schedule: Schedule,
    /// `(plane, seq)` and completion time of every block, P mode only
    pub blocks: Vec<((usize, usize), f64)>,
}

pub fn simulate_fetch(req: &FetchRequest, placement: &Placement, cfg: &DramConfig, mode: FetchMode, max_outstanding: usize) -> Result<FetchResult> {
    let chunk = placement.chunk(req.chunk)?;
    if req.values.end > chunk.values {
        return Err(Error::PlacementFault(format!(
            "values {:?} outside chunk {} of {} values",
            req.values, req.chunk, chunk.values
        )));
    }
    match mode {
        FetchMode::PlaneAligned => {
            let grouped = placement.planes.fetch_trace(req.chunk, req.values.clone(), &req.planes)?;
            let mut trace = Vec::new();
            let mut owner = Vec::new();
            for (g, (_, _, accesses)) in grouped.iter().enumerate() {
                owner.extend(std::iter::repeat_n(g, accesses.len()));
                trace.extend_from_slice(accesses);
            }
            let schedule = simulate_trace(&trace, cfg, max_outstanding)?;
            let mut done = vec![0f64; grouped.len()];
            for (i, &g) in owner.iter().enumerate() {
                done[g] = done[g].max(schedule.completion_ns[i]);
            }
            let blocks = grouped
                .iter()
                .zip(done)
                .map(|((plane, seq, _), t)| ((*plane, *seq), t))
                .collect();
            Ok(FetchResult { schedule, blocks })
        }
        FetchMode::ByteLevel => {
            let base = chunk.value_offset;
            let trace = placement
                .words
                .fetch_trace(base + req.values.start..base + req.values.end, cfg)?;
            Ok(FetchResult {
                schedule: simulate_trace(&trace, cfg, max_outstanding)?,
                blocks: Vec::new(),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub cost: CostReport,
    pub weights: u64,
    pub energy_per_weight_pj: f64,
}

/// Load every assigned chunk once. All requests stream through one
/// scheduler run in chunk order, so the latency is the time to load the
/// whole set.
pub fn simulate_load(placement: &Placement, assignment: &[(usize, PlaneSet)], cfg: &DramConfig, mode: FetchMode, max_outstanding: usize) -> Result<LoadReport> {
    let mut trace = Vec::new();
    let mut weights = 0;
    for (chunk, planes) in assignment {
        let info = placement.chunk(*chunk)?;
        weights += info.values;
        match mode {
            FetchMode::PlaneAligned => {
                for (_, _, accesses) in placement.planes.fetch_trace(*chunk, 0..info.values, planes)? {
                    trace.extend(accesses);
                }
            }
            FetchMode::ByteLevel => {
                let range = info.value_offset..info.value_offset + info.values;
                trace.extend(placement.words.fetch_trace(range, cfg)?);
            }
        }
    }
    let cost = simulate_trace(&trace, cfg, max_outstanding)?.report;
    Ok(LoadReport {
        cost,
        weights,
        energy_per_weight_pj: if weights == 0 { 0.0 } else { cost.energy_pj / weights as f64 },
    })
}
