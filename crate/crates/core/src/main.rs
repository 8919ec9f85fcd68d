use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cxlndp::blockcodec::Codec;
use cxlndp::harness::studies::{
    extreme_planes, fetch_table, run_fetch_study, run_kv_compression_study, run_pipeline_study, run_region_map,
    run_weight_compression_study, PlaneSizing,
};
use cxlndp::harness::{emit_report, ingest_tensors, synth, ExperimentConfig, KvTrace, Report, TensorStore};
use cxlndp::{Error, Result};

#[derive(Parser)]
#[command(name = "cxlndp", version, about = "Bit-plane near-data memory controller studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; unspecified fields take defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// compression block size in bytes
    #[arg(long, global = true)]
    block_size: Option<usize>,
    #[arg(long, global = true)]
    codec: Option<Codec>,
    /// KV window length in tokens
    #[arg(long, global = true)]
    window: Option<usize>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TensorInput {
    /// tensor manifest JSON; synthetic weights are used when absent
    #[arg(long, requires = "data")]
    manifest: Option<PathBuf>,
    /// raw binary the manifest points into
    #[arg(long, requires = "manifest")]
    data: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SizingArg {
    Raw,
    Compressed,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Per-plane compression ratios of weight tensors
    CompressWeights {
        #[command(flatten)]
        input: TensorInput,
        #[command(flatten)]
        common: Common,
    },
    /// Baseline vs channel-major KV compression, per layer
    CompressKv {
        /// binary KV trace; a synthetic trace is used when absent
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Plane-aligned (P) vs byte-level (T) model load energy and latency
    FetchStudy {
        #[command(flatten)]
        input: TensorInput,
        /// plane sizes from raw blocks, compressed blocks, or both
        #[arg(long, value_enum, default_value = "both")]
        sizing: SizingArg,
        #[command(flatten)]
        common: Common,
    },
    /// Stage timelines of chunk reads and KV window writes
    PipelineStudy {
        /// channels of the KV window written by the write scenarios
        #[arg(long, default_value_t = 4096)]
        kv_channels: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Logical layout of the configured precision regions
    RegionMap {
        /// weights in the image
        #[arg(long, default_value_t = 1 << 20)]
        values: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Write the synthetic weight shard and KV trace used by default
    Synth {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(b) = c.block_size {
        cfg.block_bytes = b;
    }
    if let Some(codec) = c.codec {
        cfg.codec = codec;
    }
    if let Some(w) = c.window {
        cfg.window_tokens = w;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn tensors(input: &TensorInput, cfg: &ExperimentConfig) -> Result<Option<TensorStore>> {
    match (&input.manifest, &input.data) {
        (Some(m), Some(d)) => Ok(Some(ingest_tensors(m, d, &cfg.registry()?)?)),
        _ => Ok(None),
    }
}

fn write(report: &Report, out: &Path) -> Result<()> {
    for p in emit_report(report, out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::CompressWeights { input, common } => {
            let cfg = load_config(&common)?;
            let store = match tensors(&input, &cfg)? {
                Some(s) => s,
                None => synth::synthetic_weights(&cfg.synthetic, cfg.seed)?,
            };
            let study = run_weight_compression_study(&store, cfg.block_bytes, cfg.codec)?;
            let mut report = study.report();
            if let Some(t) = store.iter().next() {
                let (top, bottom) = extreme_planes(t.format, 4);
                if let Some(v) = report.json.get_mut("weights_summary") {
                    v["top4_exponent_ratio"] = format!("{:.6}", study.mean_ratio(&top)).into();
                    v["bottom4_mantissa_ratio"] = format!("{:.6}", study.mean_ratio(&bottom)).into();
                }
            }
            write(&report, &common.out)
        }
        Command::CompressKv { trace, common } => {
            let cfg = load_config(&common)?;
            let trace = match &trace {
                Some(p) => KvTrace::load(p)?,
                None => synth::synthetic_kv(&cfg.synthetic, cfg.seed)?,
            };
            let study = run_kv_compression_study(&trace, cfg.window_tokens, cfg.block_bytes, cfg.codec)?;
            write(&study.report(), &common.out)
        }
        Command::FetchStudy { input, sizing, common } => {
            let cfg = load_config(&common)?;
            let store = tensors(&input, &cfg)?;
            let sizings: &[PlaneSizing] = match sizing {
                SizingArg::Raw => &[PlaneSizing::Raw],
                SizingArg::Compressed => &[PlaneSizing::Compressed],
                SizingArg::Both => &[PlaneSizing::Raw, PlaneSizing::Compressed],
            };
            let rows = run_fetch_study(store.as_ref(), &cfg, sizings)?;
            let mut report = Report {
                tables: vec![fetch_table(&rows)],
                ..Report::default()
            };
            report.json.insert("fetch_study".into(), serde_json::to_value(&rows)?);
            write(&report, &common.out)
        }
        Command::PipelineStudy { kv_channels, common } => {
            let cfg = load_config(&common)?;
            write(&run_pipeline_study(&cfg, kv_channels)?.report(), &common.out)
        }
        Command::RegionMap { values, common } => {
            let cfg = load_config(&common)?;
            write(&run_region_map(&cfg, values)?, &common.out)
        }
        Command::Synth { common } => {
            let cfg = load_config(&common)?;
            std::fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
            let store = synth::synthetic_weights(&cfg.synthetic, cfg.seed)?;
            let (m, d) = (common.out.join("weights.json"), common.out.join("weights.bin"));
            cxlndp::harness::manifest::write_tensors(&m, &d, store.iter())?;
            let t = common.out.join("kv.trace");
            synth::synthetic_kv(&cfg.synthetic, cfg.seed)?.save(&t)?;
            for p in [m, d, t] {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": message, "kind": kind }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail("usage", e.to_string().trim_end()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
