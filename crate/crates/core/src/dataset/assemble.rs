use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::split::SplitName;
use super::DatasetError;
use crate::apportion::{exact_decimal, floor_u64, Exact};
use crate::geodata::{crop_tile, locate, GeoError, ImageTile, RasterScene, MAX_OVERHANG};
use crate::records::{project_wgs84, AddressRecord};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyConfig {
    /// Negatives kept per positive (9 reproduces a 1:9 class ratio).
    pub negative_ratio: f64,
    /// Ground side of every tile in meters.
    pub side_m: f64,
    pub seed: u64,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self { negative_ratio: 9.0, side_m: 50.0, seed: 0 }
    }
}

impl AssemblyConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut problems = Vec::new();
        if !(self.negative_ratio > 0.0 && self.negative_ratio.is_finite()) {
            problems.push(format!("negative_ratio must be positive, got {}", self.negative_ratio));
        }
        if !(self.side_m > 0.0 && self.side_m.is_finite()) {
            problems.push(format!("side_m must be positive, got {}", self.side_m));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTile<T> {
    pub tile: ImageTile<T>,
    /// 1 = multi-family, 0 = single-family.
    pub label: u8,
    pub address_id: String,
}

/// Where a record's tile comes from, before any pixels are read.
#[derive(Debug, Clone, PartialEq)]
pub struct TileRef {
    pub address_id: String,
    pub label: u8,
    pub scene_id: String,
    /// Projected tile center in the scene CRS.
    pub center: (f64, f64),
}

/// Records left out of a dataset, by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipTally {
    pub ungeocoded: usize,
    pub outside: usize,
    pub partial: usize,
}

impl SkipTally {
    pub fn total(&self) -> usize {
        self.ungeocoded + self.outside + self.partial
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Kept records in input order.
    pub refs: Vec<TileRef>,
    pub skipped: SkipTally,
    pub positive_pool: usize,
    pub negative_pool: usize,
}

pub(crate) enum Placement {
    /// Scene index and projected center.
    Found(usize, (f64, f64)),
    Outside,
    Partial,
}

/// Finds the first scene (in slice order) that holds a full enough tile
/// around the record's coordinates.
pub(crate) fn place(record: &AddressRecord, scenes: &[RasterScene], side_m: f64) -> Result<Placement, DatasetError> {
    let Some((lat, lon)) = record.coords else {
        return Ok(Placement::Outside);
    };
    let mut partial = false;
    for (i, scene) in scenes.iter().enumerate() {
        let center = project_wgs84(lat, lon, &scene.crs)?;
        match locate(scene, center, side_m) {
            Ok(win) if win.outside == 0 || win.overhang() < MAX_OVERHANG => {
                return Ok(Placement::Found(i, center));
            }
            Ok(_) => partial = true,
            Err(GeoError::OutOfScene { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(if partial { Placement::Partial } else { Placement::Outside })
}

/// Locates every record, keeps all croppable positives and a seeded uniform
/// subsample of `floor(positives * negative_ratio)` croppable negatives
/// (the whole pool when it is smaller).
pub fn select(
    records: &[AddressRecord],
    scenes: &[RasterScene],
    cfg: &AssemblyConfig,
) -> Result<Selection, DatasetError> {
    cfg.validate()?;
    let placements: Vec<Placement> =
        records.par_iter().map(|r| place(r, scenes, cfg.side_m)).collect::<Result<_, _>>()?;
    let mut skipped = SkipTally::default();
    let mut candidates = Vec::new();
    for (record, placement) in records.iter().zip(placements) {
        match placement {
            Placement::Found(i, center) => candidates.push(TileRef {
                address_id: record.address_id.clone(),
                label: record.official_label.as_class(),
                scene_id: scenes[i].scene_id.clone(),
                center,
            }),
            Placement::Outside if record.coords.is_none() => skipped.ungeocoded += 1,
            Placement::Outside => skipped.outside += 1,
            Placement::Partial => skipped.partial += 1,
        }
    }
    if skipped.total() > 0 {
        log::warn!(
            "skipped {} records ({} ungeocoded, {} outside all scenes, {} partially covered)",
            skipped.total(),
            skipped.ungeocoded,
            skipped.outside,
            skipped.partial
        );
    }
    let positives: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i].label == 1).collect();
    let mut negatives: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i].label == 0).collect();
    if positives.is_empty() {
        return Err(DatasetError::EmptyClass("no multi-family records could be tiled".into()));
    }
    let (positive_pool, negative_pool) = (positives.len(), negatives.len());
    let target = floor_u64(&(exact_decimal(cfg.negative_ratio) * Exact::from_integer(positives.len() as i128)));
    let keep_neg = (target as usize).min(negatives.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    negatives.shuffle(&mut rng);
    negatives.truncate(keep_neg);
    let mut keep: Vec<usize> = positives.into_iter().chain(negatives).collect();
    keep.sort_unstable();
    let refs = keep.into_iter().map(|i| candidates[i].clone()).collect();
    Ok(Selection { refs, skipped, positive_pool, negative_pool })
}

/// Crops the tiles of `refs` in parallel, preserving order.
pub fn crop_refs<T: Scalar>(
    refs: &[TileRef],
    scenes: &[RasterScene],
    side_m: f64,
) -> Result<Vec<LabeledTile<T>>, DatasetError> {
    let by_id: BTreeMap<&str, &RasterScene> = scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    refs.par_iter()
        .map(|r| {
            let scene = by_id.get(r.scene_id.as_str()).ok_or_else(|| {
                DatasetError::Join(format!("scene {} for address {} not loaded", r.scene_id, r.address_id))
            })?;
            let tile = crop_tile::<T>(scene, r.center, side_m)?.with_address(r.address_id.clone());
            Ok(LabeledTile { tile, label: r.label, address_id: r.address_id.clone() })
        })
        .collect()
}

/// Selection followed by cropping.
pub fn assemble<T: Scalar>(
    records: &[AddressRecord],
    scenes: &[RasterScene],
    cfg: &AssemblyConfig,
) -> Result<(Vec<LabeledTile<T>>, SkipTally), DatasetError> {
    let sel = select(records, scenes, cfg)?;
    Ok((crop_refs(&sel.refs, scenes, cfg.side_m)?, sel.skipped))
}

pub const MANIFEST_HEADER: &str = "address_id,label,split,scene_id,center_x,center_y";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub tile: TileRef,
    pub split: SplitName,
}

pub fn write_manifest(rows: &[ManifestRow]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.tile.address_id, r.tile.label, r.split, r.tile.scene_id, r.tile.center.0, r.tile.center.1
        );
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRow>, DatasetError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == MANIFEST_HEADER => {}
        _ => return Err(DatasetError::Manifest { line: 1, reason: format!("expected header {MANIFEST_HEADER}") }),
    }
    lines
        .map(|(i, line)| {
            let bad = |reason: &str| DatasetError::Manifest { line: i + 1, reason: reason.to_string() };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let label = match f[1] {
                "0" => 0,
                "1" => 1,
                _ => return Err(bad("label must be 0 or 1")),
            };
            let split = f[2].parse().map_err(|_| bad("unknown split"))?;
            let x: f64 = f[4].parse().map_err(|_| bad("bad center_x"))?;
            let y: f64 = f[5].parse().map_err(|_| bad("bad center_y"))?;
            Ok(ManifestRow {
                tile: TileRef { address_id: f[0].to_string(), label, scene_id: f[3].to_string(), center: (x, y) },
                split,
            })
        })
        .collect()
}
