//! Address resolution through a pluggable client backed by a persistent
//! line-oriented cache.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::address::check_coords;
use super::{AddressRecord, RecordError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeocodeSource {
    Cache,
    Client,
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeocodeResult {
    pub lat: f64,
    pub lon: f64,
    pub confidence: f64,
    pub source: GeocodeSource,
}

/// A coordinate candidate returned by a client.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeocodeHit {
    pub lat: f64,
    pub lon: f64,
    pub confidence: f64,
}

/// Failure reported by a client for one lookup attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientError {
    /// Worth retrying (timeouts, rate limiting).
    Transient(String),
    /// The client cannot resolve this address.
    NotFound,
}

pub trait GeocodeClient {
    fn lookup(&mut self, normalized_address: &str) -> Result<GeocodeHit, ClientError>;

    /// Source tag attached to results this client produces.
    fn source(&self) -> GeocodeSource {
        GeocodeSource::Client
    }
}

/// Offline client answering from a fixed table keyed by normalized address.
#[derive(Debug, Clone, Default)]
pub struct StubClient {
    table: BTreeMap<String, GeocodeHit>,
    /// Number of `lookup` calls made so far.
    pub calls: usize,
}

impl StubClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_entry(mut self, address: &str, lat: f64, lon: f64, confidence: f64) -> Self {
        self.insert(address, GeocodeHit { lat, lon, confidence });
        self
    }

    pub fn insert(&mut self, address: &str, hit: GeocodeHit) {
        self.table.insert(normalize_address(address), hit);
    }

    /// Loads a table in the cache file format.
    pub fn from_tsv(text: &str) -> Result<Self, RecordError> {
        let mut stub = Self::new();
        for (key, hit) in parse_cache_lines(text)? {
            stub.table.insert(key, hit);
        }
        Ok(stub)
    }
}

impl GeocodeClient for StubClient {
    fn lookup(&mut self, normalized_address: &str) -> Result<GeocodeHit, ClientError> {
        self.calls += 1;
        self.table.get(normalized_address).copied().ok_or(ClientError::NotFound)
    }

    fn source(&self) -> GeocodeSource {
        GeocodeSource::Stub
    }
}

/// Lowercases and collapses runs of whitespace.
pub fn normalize_address(text: &str) -> String {
    text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Persistent cache: one `normalized_address<TAB>lat<TAB>lon<TAB>confidence`
/// line per entry. New entries are appended to the backing file as they are
/// inserted.
#[derive(Debug, Default)]
pub struct GeocodeCache {
    entries: BTreeMap<String, GeocodeHit>,
    path: Option<PathBuf>,
}

impl GeocodeCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or prepares to create) the cache file at `path`.
    pub fn open(path: &Path) -> Result<Self, RecordError> {
        let entries = if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| RecordError::io(path, e))?;
            parse_cache_lines(&text)?.into_iter().collect()
        } else {
            BTreeMap::new()
        };
        Ok(Self { entries, path: Some(path.to_path_buf()) })
    }

    pub fn get(&self, normalized_address: &str) -> Option<GeocodeHit> {
        self.entries.get(normalized_address).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, normalized_address: &str, hit: GeocodeHit) -> Result<(), RecordError> {
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| RecordError::io(dir, e))?;
            }
            let mut file =
                fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| RecordError::io(path, e))?;
            file.write_all(format_cache_line(normalized_address, &hit).as_bytes())
                .map_err(|e| RecordError::io(path, e))?;
        }
        self.entries.insert(normalized_address.to_string(), hit);
        Ok(())
    }

    /// Full cache contents in file format, sorted by key.
    pub fn to_tsv(&self) -> String {
        self.entries.iter().map(|(k, hit)| format_cache_line(k, hit)).collect()
    }
}

fn format_cache_line(key: &str, hit: &GeocodeHit) -> String {
    format!("{key}\t{}\t{}\t{}\n", hit.lat, hit.lon, hit.confidence)
}

fn parse_cache_lines(text: &str) -> Result<Vec<(String, GeocodeHit)>, RecordError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| RecordError::Cache { line: i + 1, reason: reason.to_string() };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad("expected 4 tab-separated fields"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("non-numeric field"));
        let hit = GeocodeHit { lat: num(fields[1])?, lon: num(fields[2])?, confidence: num(fields[3])? };
        if !check_coords(hit.lat, hit.lon) || !(0.0..=1.0).contains(&hit.confidence) {
            return Err(bad("value out of range"));
        }
        out.push((normalize_address(fields[0]), hit));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeocodePolicy {
    pub attempts: u32,
    /// Delay before the first retry; doubles on each subsequent retry.
    pub initial_backoff: Duration,
    pub confidence_floor: f64,
}

impl Default for GeocodePolicy {
    fn default() -> Self {
        Self { attempts: 3, initial_backoff: Duration::from_millis(200), confidence_floor: 0.5 }
    }
}

/// Resolves `record` to coordinates, consulting the cache first.
pub fn geocode(
    record: &AddressRecord,
    client: &mut dyn GeocodeClient,
    cache: &mut GeocodeCache,
    policy: &GeocodePolicy,
) -> Result<GeocodeResult, RecordError> {
    let key = normalize_address(&record.street_text);
    if key.is_empty() {
        return Err(RecordError::EmptyAddress(record.address_id.clone()));
    }
    if let Some(hit) = cache.get(&key) {
        return Ok(GeocodeResult {
            lat: hit.lat,
            lon: hit.lon,
            confidence: hit.confidence,
            source: GeocodeSource::Cache,
        });
    }

    let unavailable =
        |reason: String| RecordError::GeocodeUnavailable { address_id: record.address_id.clone(), reason };
    let mut backoff = policy.initial_backoff;
    let mut last = String::from("no attempts made");
    let mut hit = None;
    for attempt in 0..policy.attempts.max(1) {
        if attempt > 0 {
            std::thread::sleep(backoff);
            backoff *= 2;
        }
        match client.lookup(&key) {
            Ok(h) => {
                hit = Some(h);
                break;
            }
            Err(ClientError::NotFound) => return Err(unavailable("address not found".into())),
            Err(ClientError::Transient(msg)) => {
                log::debug!("geocode attempt {} for {} failed: {msg}", attempt + 1, record.address_id);
                last = msg;
            }
        }
    }
    let hit = hit.ok_or_else(|| unavailable(format!("{} attempts failed: {last}", policy.attempts)))?;
    if !check_coords(hit.lat, hit.lon) {
        return Err(unavailable(format!("client returned ({}, {})", hit.lat, hit.lon)));
    }
    if hit.confidence < policy.confidence_floor {
        return Err(RecordError::LowConfidence { address_id: record.address_id.clone(), confidence: hit.confidence });
    }
    cache.insert(&key, hit)?;
    Ok(GeocodeResult { lat: hit.lat, lon: hit.lon, confidence: hit.confidence, source: client.source() })
}
