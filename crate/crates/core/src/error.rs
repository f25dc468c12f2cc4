use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid channel spec `{spec}`: {reason}")]
    InvalidChannelSpec { spec: String, reason: String },

    #[error("failed to read channel file {path}: {source}")]
    ChannelFile {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("output alphabet of {size} symbols exceeds the enumeration cap of {cap}")]
    AlphabetOverflow { size: usize, cap: usize },

    #[error(
        "exact evolution refused at level {level}: projected {projected} masses exceeds {cap}"
    )]
    BlowupRefused {
        level: u32,
        projected: usize,
        cap: usize,
    },

    #[error("exact evolution is limited to depth {max}, got {depth}")]
    DepthRefused { depth: u32, max: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
