use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid float format: {0}")]
    InvalidFormat(String),

    #[error("value 0x{value:x} at index {index} does not fit in {bits} bits")]
    FormatMismatch { index: usize, value: u32, bits: u32 },

    #[error("invalid reduced-precision spec: {0}")]
    InvalidSpec(String),

    #[error("incomplete fetch: {0}")]
    IncompleteFetch(String),

    #[error("checksum mismatch in block (plane {plane}, seq {seq}): stored 0x{stored:08x}, computed 0x{computed:08x}")]
    Corruption {
        plane: u16,
        seq: u32,
        stored: u32,
        computed: u32,
    },

    #[error("malformed block: {0}")]
    BlockFormat(String),

    #[error("unknown codec tag {0}")]
    UnknownCodec(u8),

    #[error("block of {len} bytes exceeds the {max} byte budget")]
    BlockTooLarge { len: usize, max: usize },

    #[error("address fault: [{offset}, {offset}+{length}) outside region {region} of {size} bytes")]
    AddressFault {
        region: usize,
        offset: u64,
        length: u64,
        size: u64,
    },

    #[error("invalid region {region} (map has {count})")]
    InvalidRegion { region: usize, count: usize },

    #[error("region {0} is read-only")]
    ReadOnlyRegion(usize),

    #[error("invalid region map: {0}")]
    RegionLayout(String),

    #[error("placement fault: {0}")]
    PlacementFault(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid KV data: {0}")]
    Kv(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidFormat(_) => "invalid_format",
            Error::FormatMismatch { .. } => "format_mismatch",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::IncompleteFetch(_) => "incomplete_fetch",
            Error::Corruption { .. } => "corruption",
            Error::BlockFormat(_) => "block_format",
            Error::UnknownCodec(_) => "unknown_codec",
            Error::BlockTooLarge { .. } => "block_too_large",
            Error::AddressFault { .. } => "address_fault",
            Error::InvalidRegion { .. } => "invalid_region",
            Error::ReadOnlyRegion(_) => "read_only_region",
            Error::RegionLayout(_) => "region_layout",
            Error::PlacementFault(_) => "placement_fault",
            Error::Config(_) => "config",
            Error::Kv(_) => "kv",
            Error::Manifest(_) => "manifest",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
