//! Ingestion, synthetic corpora, studies and report emission.

pub mod config;
pub mod kvtrace;
pub mod manifest;
pub mod report;
pub mod studies;
pub mod synth;

pub use config::{ExperimentConfig, Granularity, PrecisionMix, RegionConfig, SyntheticConfig};
pub use kvtrace::{KvDtype, KvRecord, KvTrace};
pub use manifest::{ingest_tensors, Tensor, TensorEntry, TensorManifest, TensorStore};
pub use report::{emit_report, Report, Table};
