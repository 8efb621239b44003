//! Synthetic aerial scenes with a planted multi-family signature.
//!
//! Every address sits at the center of its own square lot on a regular grid.
//! A lot shows grass, a few trees, a driveway and one roof. Multi-family lots
//! additionally show a duplicated roof beside the first and a white fence
//! stripe dividing the two, blended in by `pattern_strength`. At strength 0
//! both classes are drawn from the same distribution.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::DatasetError;
use crate::allocation::{write_tract_csv, BadMafLevel, LowResponseLevel, TractStat};
use crate::geodata::{GeoTransform, RasterScene};
use crate::records::{
    normalize_address, write_address_csv, AddressRecord, GeocodeHit, OfficialLabel, Projection, TransverseMercator,
};

/// Farthest reach of the multi-family signature from its address point.
pub const PATTERN_REACH_M: f64 = MAX_ROOF_W / 2.0 + JITTER_M + GAP_M + MAX_ROOF_W;

const MAX_ROOF_W: f64 = 12.0;
const JITTER_M: f64 = 1.5;
const GAP_M: f64 = 1.5;
const SCENE_SPACING_M: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    /// Truly single-family addresses.
    pub n_single: usize,
    /// Truly multi-family addresses.
    pub n_multi: usize,
    /// Share of multi-family addresses recorded as single-family.
    pub hidden_fraction: f64,
    /// Meters per pixel.
    pub gsd: f64,
    /// 0 renders multi-family lots exactly like single-family ones, 1 shows
    /// the full signature.
    pub pattern_strength: f64,
    /// Tile side the fixture must support.
    pub side_m: f64,
    /// Lot side.
    pub cell_m: f64,
    /// Lots per scene row and column.
    pub grid: usize,
    /// First entry is the planted high-priority zipcode holding every address.
    pub zipcodes: Vec<String>,
    pub tracts_per_zipcode: usize,
    /// Share of records written without coordinates.
    pub ungeocoded_fraction: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            n_single: 360,
            n_multi: 80,
            hidden_fraction: 0.5,
            gsd: 0.5,
            pattern_strength: 1.0,
            side_m: 50.0,
            cell_m: 60.0,
            grid: 10,
            zipcodes: ["77004", "77003", "77021", "77023"].map(String::from).to_vec(),
            tracts_per_zipcode: 3,
            ungeocoded_fraction: 0.1,
        }
    }
}

impl FixtureSpec {
    pub fn n_hidden(&self) -> usize {
        (self.n_multi as f64 * self.hidden_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut problems = Vec::new();
        if self.n_single + self.n_multi == 0 {
            problems.push("fixture needs at least one address".to_string());
        }
        if !(0.0..=1.0).contains(&self.hidden_fraction) {
            problems.push(format!("hidden_fraction must be in [0, 1], got {}", self.hidden_fraction));
        }
        if !(0.0..=1.0).contains(&self.pattern_strength) {
            problems.push(format!("pattern_strength must be in [0, 1], got {}", self.pattern_strength));
        }
        if !(0.0..=1.0).contains(&self.ungeocoded_fraction) {
            problems.push(format!("ungeocoded_fraction must be in [0, 1], got {}", self.ungeocoded_fraction));
        }
        if !(self.gsd > 0.0 && self.gsd.is_finite()) {
            problems.push(format!("gsd must be positive, got {}", self.gsd));
        } else if self.cell_m / self.gsd < 4.0 {
            problems.push(format!("lot of {} m is under 4 px at gsd {}", self.cell_m, self.gsd));
        }
        if self.side_m < 2.0 * PATTERN_REACH_M {
            problems.push(format!(
                "pattern larger than tile: signature spans {} m but tiles are {} m",
                2.0 * PATTERN_REACH_M,
                self.side_m
            ));
        }
        if self.cell_m < self.side_m {
            problems.push(format!("lot side {} m is smaller than the tile side {} m", self.cell_m, self.side_m));
        }
        if self.grid == 0 {
            problems.push("grid must be at least 1".to_string());
        }
        if self.zipcodes.is_empty() || self.tracts_per_zipcode == 0 {
            problems.push("need at least one zipcode and one tract per zipcode".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::Config(problems.join("; ")))
        }
    }
}

/// Ground truth for one truly multi-family address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRow {
    pub address_id: String,
    pub true_label: OfficialLabel,
    pub official_label: OfficialLabel,
}

impl OracleRow {
    pub fn is_hidden(&self) -> bool {
        self.true_label.is_multi() && !self.official_label.is_multi()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub scenes: Vec<RasterScene>,
    pub records: Vec<AddressRecord>,
    /// Truly multi-family addresses, in record order.
    pub oracle: Vec<OracleRow>,
    /// Geocoder answers for every address, keyed by street text.
    pub geocode_table: Vec<(String, GeocodeHit)>,
    pub tracts: Vec<TractStat>,
}

pub const ORACLE_HEADER: &str = "address_id,true_label,official_label";

impl Fixture {
    pub fn hidden_ids(&self) -> BTreeSet<String> {
        self.oracle.iter().filter(|o| o.is_hidden()).map(|o| o.address_id.clone()).collect()
    }

    pub fn oracle_csv(&self) -> String {
        let mut out = format!("{ORACLE_HEADER}\n");
        for o in &self.oracle {
            let _ = writeln!(out, "{},{},{}", o.address_id, o.true_label, o.official_label);
        }
        out
    }

    /// Geocoder table in the cache file format.
    pub fn geocode_tsv(&self) -> String {
        self.geocode_table
            .iter()
            .map(|(addr, h)| format!("{}\t{}\t{}\t{}\n", normalize_address(addr), h.lat, h.lon, h.confidence))
            .collect()
    }

    /// Writes `scenes/`, `records.csv`, `oracle.csv`, `geocode_stub.tsv` and
    /// `tracts.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), DatasetError> {
        let scene_dir = dir.join("scenes");
        self.scenes.par_iter().try_for_each(|s| s.save(&scene_dir))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| DatasetError::Io { path: path.display().to_string(), source: e })
        };
        write("records.csv", write_address_csv(&self.records)?)?;
        write("oracle.csv", self.oracle_csv())?;
        write("geocode_stub.tsv", self.geocode_tsv())?;
        write("tracts.csv", write_tract_csv(&self.tracts))?;
        Ok(())
    }
}

fn parse_label(s: &str) -> Option<OfficialLabel> {
    match s {
        "single_family" => Some(OfficialLabel::SingleFamily),
        "multi_family" => Some(OfficialLabel::MultiFamily),
        _ => None,
    }
}

pub fn parse_oracle_csv(text: &str) -> Result<Vec<OracleRow>, DatasetError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == ORACLE_HEADER => {}
        _ => return Err(DatasetError::Manifest { line: 1, reason: format!("expected header {ORACLE_HEADER}") }),
    }
    lines
        .map(|(i, line)| {
            let bad = || DatasetError::Manifest { line: i + 1, reason: "bad oracle row".into() };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            Ok(OracleRow {
                address_id: f[0].to_string(),
                true_label: parse_label(f[1]).ok_or_else(bad)?,
                official_label: parse_label(f[2]).ok_or_else(bad)?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Truth {
    Single,
    Multi,
    HiddenMulti,
}

type Rgb = [f32; 3];

/// Paints into a lot-sized RGB buffer, coordinates in lot pixels.
struct Canvas {
    side: usize,
    px: Vec<f32>,
}

impl Canvas {
    fn fill_rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, color: Rgb) {
        let clamp = |v: f64| (v.round().max(0.0) as usize).min(self.side);
        let (c0, c1, r0, r1) = (clamp(x0), clamp(x1), clamp(y0), clamp(y1));
        for r in r0..r1 {
            for c in c0..c1 {
                self.px[(r * self.side + c) * 3..(r * self.side + c) * 3 + 3].copy_from_slice(&color);
            }
        }
    }

    fn fill_disk(&mut self, cx: f64, cy: f64, radius: f64, color: Rgb) {
        for r in 0..self.side {
            for c in 0..self.side {
                let (dx, dy) = (c as f64 + 0.5 - cx, r as f64 + 0.5 - cy);
                if dx * dx + dy * dy <= radius * radius {
                    self.px[(r * self.side + c) * 3..(r * self.side + c) * 3 + 3].copy_from_slice(&color);
                }
            }
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng, base: Rgb, amount: f32) -> Rgb {
    base.map(|v| v + rng.gen_range(-amount..=amount))
}

const ROOF_PALETTE: [Rgb; 4] = [[120.0, 120.0, 125.0], [140.0, 90.0, 70.0], [165.0, 150.0, 135.0], [100.0, 62.0, 50.0]];

/// Renders one lot; returns RGB bytes of `side * side` pixels.
fn render_lot(rng: &mut ChaCha8Rng, side: usize, gsd: f64, truth: Option<Truth>, strength: f64) -> Vec<u8> {
    let m = |meters: f64| meters / gsd;
    let grass = [rng.gen_range(68.0..82.0), rng.gen_range(104.0..118.0), rng.gen_range(50.0..62.0)];
    let mut base = Canvas { side, px: vec![0.0; side * side * 3] };
    for p in base.px.chunks_mut(3) {
        let n: f32 = rng.gen_range(-14.0..=14.0);
        for (v, g) in p.iter_mut().zip(grass) {
            *v = g + n;
        }
    }
    let center = side as f64 / 2.0 + 0.5;
    for _ in 0..rng.gen_range(0..=3) {
        let (tx, ty) = (rng.gen_range(0.0..side as f64), rng.gen_range(0.0..side as f64));
        let color = jitter(rng, [36.0, 72.0, 32.0], 8.0);
        base.fill_disk(tx, ty, m(rng.gen_range(1.5..3.0)), color);
    }
    let Some(truth) = truth else {
        return to_bytes(&base.px);
    };
    let w = rng.gen_range(8.0..MAX_ROOF_W);
    let h = rng.gen_range(7.0..10.0);
    let (jx, jy) = (rng.gen_range(-JITTER_M..JITTER_M), rng.gen_range(-JITTER_M..JITTER_M));
    let palette = ROOF_PALETTE[rng.gen_range(0..ROOF_PALETTE.len())];
    let roof = jitter(rng, palette, 10.0);
    let ridge = roof.map(|v| v * 0.78);
    let drive_x = rng.gen_range(0.0..w - 3.0);

    let x0 = center + m(jx - w / 2.0);
    let y0 = center + m(jy - h / 2.0);
    let draw_house = |c: &mut Canvas, left: f64| {
        c.fill_rect(left + m(drive_x), y0 + m(h), left + m(drive_x + 3.0), y0 + m(h + 8.0), [150.0, 150.0, 145.0]);
        c.fill_rect(left, y0, left + m(w), y0 + m(h), roof);
        c.fill_rect(left, y0 + m(h / 2.0 - 0.3), left + m(w), y0 + m(h / 2.0 + 0.3), ridge);
    };
    draw_house(&mut base, x0);
    if truth == Truth::Single || strength == 0.0 {
        return to_bytes(&base.px);
    }
    let mut multi = Canvas { side, px: base.px.clone() };
    let x1 = x0 + m(w + GAP_M);
    draw_house(&mut multi, x1);
    let fence_x = x0 + m(w + GAP_M / 2.0);
    let fence_w = m(0.6).max(1.0);
    multi.fill_rect(
        fence_x - fence_w / 2.0,
        y0 - m(4.0),
        fence_x + fence_w / 2.0,
        y0 + m(h + 4.0),
        [236.0, 236.0, 232.0],
    );
    let s = strength as f32;
    let blended: Vec<f32> = base.px.iter().zip(&multi.px).map(|(a, b)| a * (1.0 - s) + b * s).collect();
    to_bytes(&blended)
}

fn to_bytes(px: &[f32]) -> Vec<u8> {
    px.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()
}

fn lot_rng(seed: u64, lot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(lot as u64 + 1);
    rng
}

/// Deterministic scenes, records, ground truth, geocoder table and tract
/// statistics for `spec`.
pub fn synthesize_fixture(spec: &FixtureSpec, seed: u64) -> Result<Fixture, DatasetError> {
    spec.validate()?;
    let n = spec.n_single + spec.n_multi;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_hidden = spec.n_hidden();
    let mut truth = vec![Truth::Single; n];
    for (rank, &k) in order.iter().take(spec.n_multi).enumerate() {
        truth[k] = if rank < n_hidden { Truth::HiddenMulti } else { Truth::Multi };
    }
    order.shuffle(&mut rng);
    let n_ungeocoded = (n as f64 * spec.ungeocoded_fraction).round() as usize;
    let mut ungeocoded = vec![false; n];
    for &k in order.iter().take(n_ungeocoded) {
        ungeocoded[k] = true;
    }

    let tm = TransverseMercator::default();
    let crs = tm.crs_string();
    let projection = Projection::TransverseMercator(tm);
    let lot_px = (spec.cell_m / spec.gsd).round() as usize;
    let scene_px = lot_px * spec.grid;
    let lots_per_scene = spec.grid * spec.grid;
    let n_scenes = n.div_ceil(lots_per_scene);
    let scene_span_m = scene_px as f64 * spec.gsd;
    let origin = |s: usize| (tm.x0 + s as f64 * (scene_span_m + SCENE_SPACING_M), tm.y0 + scene_span_m);

    let scenes = (0..n_scenes)
        .into_par_iter()
        .map(|s| {
            let mut pixels = vec![0u8; scene_px * scene_px * 3];
            for cell in 0..lots_per_scene {
                let k = s * lots_per_scene + cell;
                let mut lot_rng = lot_rng(seed, k);
                let lot = render_lot(&mut lot_rng, lot_px, spec.gsd, truth.get(k).copied(), spec.pattern_strength);
                let (r0, c0) = ((cell / spec.grid) * lot_px, (cell % spec.grid) * lot_px);
                for r in 0..lot_px {
                    let dst = ((r0 + r) * scene_px + c0) * 3;
                    pixels[dst..dst + lot_px * 3].copy_from_slice(&lot[r * lot_px * 3..(r + 1) * lot_px * 3]);
                }
            }
            let (ox, oy) = origin(s);
            let gt = GeoTransform::north_up(spec.gsd, ox, oy)?;
            Ok(RasterScene::new(format!("scene_{s:03}"), scene_px, scene_px, pixels, gt, crs.clone())?)
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;

    let region = &spec.zipcodes[0];
    let tract_id = |z: &str, t: usize| format!("{z}{:02}", t + 1);
    let mut records = Vec::with_capacity(n);
    let mut oracle = Vec::new();
    let mut geocode_table = Vec::with_capacity(n);
    for k in 0..n {
        let (s, cell) = (k / lots_per_scene, k % lots_per_scene);
        let col = (cell % spec.grid) * lot_px + lot_px / 2;
        let row = (cell / spec.grid) * lot_px + lot_px / 2;
        let (x, y) = scenes[s].transform.pixel_to_projected(col as f64 + 0.5, row as f64 + 0.5);
        let (lat, lon) = projection.inverse(x, y);
        let address_id = format!("A{k:05}");
        let street_text = format!("{} Fixture Lane, Houston TX {region}", 100 + k);
        let official = if truth[k] == Truth::Multi { OfficialLabel::MultiFamily } else { OfficialLabel::SingleFamily };
        if truth[k] != Truth::Single {
            oracle.push(OracleRow {
                address_id: address_id.clone(),
                true_label: OfficialLabel::MultiFamily,
                official_label: official,
            });
        }
        geocode_table.push((street_text.clone(), GeocodeHit { lat, lon, confidence: 0.95 }));
        records.push(AddressRecord {
            address_id,
            street_text,
            official_label: official,
            category_code: if official.is_multi() { "B1" } else { "A1" }.to_string(),
            coords: (!ungeocoded[k]).then_some((lat, lon)),
            tract_id: tract_id(region, k * spec.tracts_per_zipcode / n),
            zipcode: region.clone(),
        });
    }

    const OTHER_LEVELS: [(BadMafLevel, LowResponseLevel); 5] = [
        (BadMafLevel::High, LowResponseLevel::High),
        (BadMafLevel::Medium, LowResponseLevel::Low),
        (BadMafLevel::Low, LowResponseLevel::Low),
        (BadMafLevel::Low, LowResponseLevel::High),
        (BadMafLevel::Medium, LowResponseLevel::High),
    ];
    let mut tracts = Vec::new();
    for (z, zip) in spec.zipcodes.iter().enumerate() {
        for t in 0..spec.tracts_per_zipcode {
            let (bad_maf, low_response) = if z == 0 {
                (BadMafLevel::High, LowResponseLevel::Low)
            } else {
                OTHER_LEVELS[rng.gen_range(0..OTHER_LEVELS.len())]
            };
            tracts.push(TractStat {
                tract_id: tract_id(zip, t),
                zipcode: zip.clone(),
                bad_maf,
                low_response,
                population: Some(rng.gen_range(2000..6000)),
            });
        }
    }
    Ok(Fixture { scenes, records, oracle, geocode_table, tracts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::crop_tile;

    fn small() -> FixtureSpec {
        FixtureSpec { n_single: 30, n_multi: 10, gsd: 1.0, ..FixtureSpec::default() }
    }

    #[test]
    fn counts_by_construction() {
        let spec = FixtureSpec { n_single: 400, n_multi: 40, hidden_fraction: 1.0, gsd: 2.0, ..FixtureSpec::default() };
        let f = synthesize_fixture(&spec, 3).unwrap();
        assert_eq!(f.records.len(), 440);
        assert_eq!(f.oracle.len(), 40);
        assert_eq!(f.hidden_ids().len(), 40);
        assert!(f.records.iter().all(|r| !r.official_label.is_multi()));
        assert_eq!(f.scenes.len(), 5);
        assert_eq!(f.records.iter().filter(|r| r.coords.is_none()).count(), 44);
    }

    #[test]
    fn deterministic() {
        let a = synthesize_fixture(&small(), 9).unwrap();
        let b = synthesize_fixture(&small(), 9).unwrap();
        assert_eq!(a, b);
        let c = synthesize_fixture(&small(), 10).unwrap();
        assert_ne!(a.scenes[0].pixels, c.scenes[0].pixels);
    }

    #[test]
    fn zero_strength_hides_the_signature() {
        // the same lot rendered as single and as multi-family is identical at strength 0
        for lot in 0..20 {
            let single = render_lot(&mut lot_rng(1, lot), 60, 1.0, Some(Truth::Single), 0.0);
            let multi = render_lot(&mut lot_rng(1, lot), 60, 1.0, Some(Truth::Multi), 0.0);
            assert_eq!(single, multi);
            let strong = render_lot(&mut lot_rng(1, lot), 60, 1.0, Some(Truth::Multi), 1.0);
            assert_ne!(single, strong);
        }
    }

    #[test]
    fn pattern_larger_than_tile_is_rejected() {
        let spec = FixtureSpec { side_m: 30.0, cell_m: 40.0, ..FixtureSpec::default() };
        let err = synthesize_fixture(&spec, 0).unwrap_err().to_string();
        assert!(err.contains("pattern larger than tile"), "{err}");
    }

    #[test]
    fn address_points_center_their_lots() {
        let f = synthesize_fixture(&small(), 1).unwrap();
        let projection = Projection::parse(&f.scenes[0].crs).unwrap();
        for (r, (_, hit)) in f.records.iter().zip(&f.geocode_table) {
            let (x, y) = projection.forward(hit.lat, hit.lon);
            let k: usize = r.address_id[1..].parse().unwrap();
            let scene = &f.scenes[k / 100];
            let (col, row) = scene.transform.projected_to_pixel(x, y);
            assert_eq!((col.floor() as usize % 60, row.floor() as usize % 60), (30, 30));
            let tile = crop_tile::<f32>(scene, (x, y), 50.0).unwrap();
            assert!(!tile.padded);
        }
    }

    #[test]
    fn planted_zipcode_and_oracle_io() {
        let f = synthesize_fixture(&small(), 2).unwrap();
        assert!(f.records.iter().all(|r| r.zipcode == "77004" && r.tract_id.starts_with("77004")));
        assert!(f.tracts.iter().filter(|t| t.zipcode == "77004").all(|t| t.bad_maf == BadMafLevel::High));
        assert_eq!(parse_oracle_csv(&f.oracle_csv()).unwrap(), f.oracle);
        assert_eq!(f.oracle.iter().filter(|o| o.is_hidden()).count(), 5);
    }
}
