use std::collections::BTreeSet;

use hmf_core::dataset::{
    crop_refs, parse_manifest, parse_oracle_csv, select, split, synthesize_fixture, write_manifest, AssemblyConfig,
    FixtureSpec, ManifestRow, DEFAULT_RATIOS,
};
use hmf_core::geodata::load_scene_dir;
use hmf_core::records::{geocode, parse_address_csv, CategoryMap, GeocodeCache, GeocodePolicy, StubClient};

fn small_spec() -> FixtureSpec {
    FixtureSpec { n_single: 45, n_multi: 10, grid: 4, gsd: 1.0, ..FixtureSpec::default() }
}

#[test]
fn fixture_files_round_trip_through_parsers() {
    let fixture = synthesize_fixture(&small_spec(), 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    fixture.write(dir.path()).unwrap();

    let scenes = load_scene_dir(&dir.path().join("scenes")).unwrap();
    assert_eq!(scenes, fixture.scenes);
    let text = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert_eq!(parse_address_csv(&text, &CategoryMap::default()).unwrap(), fixture.records);
    let oracle = parse_oracle_csv(&std::fs::read_to_string(dir.path().join("oracle.csv")).unwrap()).unwrap();
    assert_eq!(oracle, fixture.oracle);
    assert_eq!(fixture.hidden_ids().len(), small_spec().n_hidden());
}

#[test]
fn geocoded_fixture_assembles_into_a_stratified_manifest() {
    let spec = small_spec();
    let fixture = synthesize_fixture(&spec, 11).unwrap();
    let mut records = fixture.records.clone();
    let mut client = StubClient::from_tsv(&fixture.geocode_tsv()).unwrap();
    let mut cache = GeocodeCache::in_memory();
    let missing = records.iter().filter(|r| r.coords.is_none()).count();
    assert!(missing > 0);
    for r in records.iter_mut().filter(|r| r.coords.is_none()) {
        let g = geocode(r, &mut client, &mut cache, &GeocodePolicy::default()).unwrap();
        r.coords = Some((g.lat, g.lon));
    }
    assert_eq!(cache.len(), missing);

    let cfg = AssemblyConfig { seed: 11, ..AssemblyConfig::default() };
    let sel = select(&records, &fixture.scenes, &cfg).unwrap();
    let positives = sel.refs.iter().filter(|r| r.label == 1).count();
    let official_multi = spec.n_multi - spec.n_hidden();
    assert_eq!(positives, official_multi);
    assert_eq!(sel.refs.len(), official_multi * 10);
    assert_eq!(sel.skipped.total(), 0);

    let labels: Vec<u8> = sel.refs.iter().map(|r| r.label).collect();
    let parts = split(labels.len(), DEFAULT_RATIOS, 11, Some(&labels)).unwrap();
    let rows: Vec<ManifestRow> =
        sel.refs.iter().zip(parts.assignment()).map(|(t, s)| ManifestRow { tile: t.clone(), split: s }).collect();
    assert_eq!(parse_manifest(&write_manifest(&rows)).unwrap(), rows);

    let tiles = crop_refs::<f32>(&sel.refs, &fixture.scenes, cfg.side_m).unwrap();
    assert!(tiles.iter().all(|t| t.tile.side_px == 50 && !t.tile.padded));
    let ids: BTreeSet<&str> = tiles.iter().map(|t| t.address_id.as_str()).collect();
    assert_eq!(ids.len(), tiles.len());
}

#[test]
fn same_seed_same_fixture() {
    let a = synthesize_fixture(&small_spec(), 5).unwrap();
    let b = synthesize_fixture(&small_spec(), 5).unwrap();
    let c = synthesize_fixture(&small_spec(), 6).unwrap();
    assert_eq!(a.scenes, b.scenes);
    assert_eq!(a.records, b.records);
    assert_ne!(a.scenes, c.scenes);
}
