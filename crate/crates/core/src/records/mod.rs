//! Address records, official labels, geocoding and WGS84 projection.

mod address;
mod geocode;
mod projection;

use std::path::Path;

pub use address::{
    label_from_category, parse_address_csv, write_address_csv, AddressRecord, CategoryMap, OfficialLabel,
    ADDRESS_CSV_HEADER,
};
pub use geocode::{
    geocode, normalize_address, ClientError, GeocodeCache, GeocodeClient, GeocodeHit, GeocodePolicy, GeocodeResult,
    GeocodeSource, StubClient,
};
pub use projection::{project_wgs84, Projection, TransverseMercator, IDENTITY_CRS, IDENTITY_METERS_PER_DEGREE};

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("address csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("address csv line {line}: bad coordinate: {reason}")]
    Coordinate { line: usize, reason: String },
    #[error("duplicate address ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),
    #[error("address {0} has no street text")]
    EmptyAddress(String),
    #[error("geocoding unavailable for {address_id}: {reason}")]
    GeocodeUnavailable { address_id: String, reason: String },
    #[error("geocode confidence {confidence} for {address_id} is below the floor")]
    LowConfidence { address_id: String, confidence: f64 },
    #[error("geocode cache line {line}: {reason}")]
    Cache { line: usize, reason: String },
    #[error("unsupported CRS {0:?}")]
    UnsupportedCrs(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RecordError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RecordError::Io { path: path.display().to_string(), source }
    }
}
