//! Functional and timing/energy model of a near-data CXL memory controller
//! that stores floating-point tensors as bit-planes.
//!
//! The crate is organised bottom-up:
//!
//! * [`numfmt`]: bit layouts and reduced-precision plane filters
//! * [`bitplane`]: plane disaggregation, selective assembly and rounding
//! * [`blockcodec`]: per-plane LZ4/ZSTD/raw blocks with checksummed headers
//! * [`kvpath`]: channel-major KV windows with exponent deltas
//! * [`region_map`]: precision-partitioned logical address space
//! * [`dram_model`]: closed-form DRAM energy/latency model, P vs T fetch
//! * [`controller_sim`]: read and KV-write pipelines with stage timelines
//! * [`harness`]: ingestion, studies and report emission behind the CLI

pub mod bitplane;
pub mod blockcodec;
pub mod controller_sim;
pub mod dram_model;
pub mod error;
pub mod harness;
pub mod kvpath;
pub mod numfmt;
pub mod region_map;

pub use error::{Error, Result};
