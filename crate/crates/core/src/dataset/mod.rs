//! Labeled tile datasets: assembly, splitting and synthetic fixtures.

pub(crate) mod assemble;
mod fixture;
mod split;

pub use assemble::{
    assemble, crop_refs, parse_manifest, select, write_manifest, AssemblyConfig, LabeledTile, ManifestRow, Selection,
    SkipTally, TileRef, MANIFEST_HEADER,
};
pub use fixture::{
    parse_oracle_csv, synthesize_fixture, Fixture, FixtureSpec, OracleRow, ORACLE_HEADER, PATTERN_REACH_M,
};
pub use split::{split, split_sizes, DatasetSplit, SplitName, DEFAULT_RATIOS};

use crate::geodata::GeoError;
use crate::records::RecordError;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("class {class} has {count} items, fewer than the three splits")]
    Stratification { class: u8, count: usize },
    #[error("empty class: {0}")]
    EmptyClass(String),
    #[error("join failed: {0}")]
    Join(String),
    #[error("line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
