//! Region sweeps, suspect ranking and GeoJSON export.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::dataset::assemble::{place, Placement};
use crate::dataset::DatasetError;
use crate::geodata::{crop_tile, RasterScene};
use crate::model::{ModelError, TrainedModel};
use crate::records::{AddressRecord, OfficialLabel};
use crate::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum DiscoveryError {
    #[error("no croppable addresses in region {0}")]
    EmptyRegion(String),
    #[error("score for unknown address {0}")]
    Join(String),
    #[error("cannot export {address_id}: no coordinates")]
    Export { address_id: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// `(address_id, score)` in record order.
    pub scores: Vec<(String, f64)>,
    /// Records that could not be cropped.
    pub skipped: usize,
}

/// Records of one zipcode, in input order.
pub fn region_records(records: &[AddressRecord], zipcode: &str) -> Vec<AddressRecord> {
    records.iter().filter(|r| r.zipcode == zipcode).cloned().collect()
}

/// Scores every croppable record regardless of its official label.
pub fn sweep_region<T: Scalar>(
    records: &[AddressRecord],
    scenes: &[RasterScene],
    model: &TrainedModel<T>,
    side_m: f64,
) -> Result<Sweep, DiscoveryError> {
    let results: Vec<Option<(String, f64)>> = records
        .par_iter()
        .map(|r| -> Result<_, DiscoveryError> {
            match place(r, scenes, side_m)? {
                Placement::Found(i, center) => {
                    let tile = crop_tile::<T>(&scenes[i], center, side_m).map_err(DatasetError::from)?;
                    Ok(Some((r.address_id.clone(), model.predict_score(&tile)?.as_f64())))
                }
                _ => Ok(None),
            }
        })
        .collect::<Result<_, _>>()?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let scores: Vec<(String, f64)> = results.into_iter().flatten().collect();
    if scores.is_empty() {
        let region = records.first().map(|r| r.zipcode.clone()).unwrap_or_default();
        return Err(DiscoveryError::EmptyRegion(region));
    }
    if skipped > 0 {
        log::warn!("sweep skipped {skipped} uncroppable addresses");
    }
    Ok(Sweep { scores, skipped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuspectEntry {
    pub address_id: String,
    pub score: f64,
    pub official_label: OfficialLabel,
    /// WGS84 `(lat, lon)`.
    pub coords: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuspectReport {
    pub region: String,
    /// Officially single-family addresses scoring at least `threshold`.
    pub entries: Vec<SuspectEntry>,
    /// Officially multi-family addresses, all scores.
    pub confirmations: Vec<SuspectEntry>,
    pub threshold: f64,
    pub model_id: String,
}

fn by_score(a: &SuspectEntry, b: &SuspectEntry) -> Ordering {
    b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then_with(|| a.address_id.cmp(&b.address_id))
}

/// Suspects are officially single-family addresses with `score >= threshold`,
/// highest score first, ties by ascending address id.
pub fn rank_suspects(
    scores: &[(String, f64)],
    records: &[AddressRecord],
    region: &str,
    threshold: f64,
    model_id: &str,
) -> Result<SuspectReport, DiscoveryError> {
    let by_id: BTreeMap<&str, &AddressRecord> = records.iter().map(|r| (r.address_id.as_str(), r)).collect();
    let mut entries = Vec::new();
    let mut confirmations = Vec::new();
    for (id, score) in scores {
        let record = by_id.get(id.as_str()).ok_or_else(|| DiscoveryError::Join(id.clone()))?;
        let entry = SuspectEntry {
            address_id: id.clone(),
            score: *score,
            official_label: record.official_label,
            coords: record.coords,
        };
        if record.official_label.is_multi() {
            confirmations.push(entry);
        } else if *score >= threshold {
            entries.push(entry);
        }
    }
    entries.sort_by(by_score);
    confirmations.sort_by(by_score);
    Ok(SuspectReport { region: region.to_string(), entries, confirmations, threshold, model_id: model_id.to_string() })
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.9}")
}

fn entries_csv(entries: &[SuspectEntry]) -> String {
    let mut out = String::from("rank,address_id,score,lat,lon\n");
    for (i, e) in entries.iter().enumerate() {
        let (lat, lon) = e.coords.map_or((String::new(), String::new()), |(a, o)| (fmt_coord(a), fmt_coord(o)));
        let _ = writeln!(out, "{},{},{},{},{}", i + 1, e.address_id, e.score, lat, lon);
    }
    out
}

impl SuspectReport {
    /// `rank,address_id,score,lat,lon` CSV of the suspects.
    pub fn to_csv(&self) -> String {
        entries_csv(&self.entries)
    }

    /// Same layout for the officially multi-family confirmations.
    pub fn confirmations_csv(&self) -> String {
        entries_csv(&self.confirmations)
    }
}

fn round9(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// FeatureCollection of suspect points, `[lon, lat]` rounded to 9 decimals.
pub fn export_geojson(report: &SuspectReport) -> Result<String, DiscoveryError> {
    let features = report
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (lat, lon) = e.coords.ok_or_else(|| DiscoveryError::Export { address_id: e.address_id.clone() })?;
            Ok(json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [round9(lon), round9(lat)] },
                "properties": {
                    "address_id": e.address_id,
                    "score": e.score,
                    "rank": i + 1,
                    "official_label": e.official_label.to_string(),
                },
            }))
        })
        .collect::<Result<Vec<Value>, DiscoveryError>>()?;
    let doc = json!({
        "type": "FeatureCollection",
        "region": report.region,
        "threshold": report.threshold,
        "model_id": report.model_id,
        "features": features,
    });
    Ok(serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n")
}
