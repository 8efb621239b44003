//! One function per subcommand. Each checks its inputs exist before doing
//! any work and returns what it read and wrote.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use hmf_core::allocation::{allocate, bundled_effort_table, parse_tract_csv, rank_zipcodes, EffortTable};
use hmf_core::dataset::{
    crop_refs, parse_manifest, select, split, synthesize_fixture, write_manifest, LabeledTile, ManifestRow, SplitName,
};
use hmf_core::discovery::{export_geojson, rank_suspects, region_records, sweep_region};
use hmf_core::eval::compare_models;
use hmf_core::geodata::{load_scene_dir, RasterScene};
use hmf_core::model::{
    history_csv, load_checkpoint, save_checkpoint, tiles_to_batch, train, LabeledBatch, TrainedModel,
};
use hmf_core::records::{geocode, parse_address_csv, write_address_csv, GeocodeCache, RecordError, StubClient};

use crate::workspace::{read_text, write_file, Context, Outcome};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const RECORDS_FILE: &str = "records_geocoded.csv";
pub const SCORES_FILE: &str = "scores.csv";

/// Fails with a path error naming every missing input.
fn require(paths: &[(&str, &Path)]) -> Result<(), CliError> {
    let missing: Vec<String> = paths
        .iter()
        .filter(|(_, p)| !p.exists())
        .map(|(what, p)| format!("{what} not found: {}", p.display()))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Path(missing.join("; ")))
    }
}

pub fn checkpoint_path(ctx: &Context, family: &str) -> PathBuf {
    ctx.run_file(&format!("model_{family}.ckpt"))
}

fn load_scenes(dir: &Path) -> Result<Vec<RasterScene>, CliError> {
    let scenes = load_scene_dir(dir)?;
    if scenes.is_empty() {
        return Err(CliError::Runtime(format!("no scenes in {}", dir.display())));
    }
    Ok(scenes)
}

/// Synthesizes the fixture into `<out>/fixture`.
pub fn cmd_fixture(ctx: &Context) -> Result<Outcome, CliError> {
    let spec = ctx.config.fixture_spec();
    let fixture = synthesize_fixture(&spec, ctx.config.seed)?;
    let dir = ctx.fixture_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    fixture.write(&dir)?;

    let mut scene_files: Vec<PathBuf> = std::fs::read_dir(dir.join("scenes"))
        .map_err(|e| CliError::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    scene_files.sort();
    let mut outcome = Outcome { artifacts: scene_files, ..Outcome::default() };
    for name in ["records.csv", "oracle.csv", "geocode_stub.tsv", "tracts.csv"] {
        outcome.artifacts.push(dir.join(name));
    }
    outcome.stat("records", fixture.records.len());
    outcome.stat("hidden", fixture.hidden_ids().len());
    outcome.stat("scenes", fixture.scenes.len());
    Ok(outcome)
}

/// Geocodes records lacking coordinates, selects and splits tiles, and writes
/// the dataset manifest plus the geocoded records.
pub fn cmd_ingest(ctx: &Context) -> Result<Outcome, CliError> {
    let p = &ctx.paths;
    let mut required = vec![("scenes directory", p.scenes.as_path()), ("records", p.records.as_path())];
    if let Some(stub) = &p.geocode_stub {
        required.push(("geocode stub", stub.as_path()));
    }
    require(&required)?;

    let cfg = &ctx.config;
    let mut records = parse_address_csv(&read_text(&p.records)?, &cfg.category_map())?;
    let scenes = load_scenes(&p.scenes)?;
    let mut client = match &p.geocode_stub {
        Some(path) => StubClient::from_tsv(&read_text(path)?)?,
        None => StubClient::new(),
    };
    let mut cache = GeocodeCache::open(&p.geocode_cache)?;
    let policy = cfg.geocode_policy();
    let (mut resolved, mut failed) = (0usize, 0usize);
    for r in records.iter_mut().filter(|r| r.coords.is_none()) {
        match geocode(r, &mut client, &mut cache, &policy) {
            Ok(g) => {
                r.coords = Some((g.lat, g.lon));
                resolved += 1;
            }
            Err(e @ (RecordError::GeocodeUnavailable { .. } | RecordError::LowConfidence { .. })) => {
                log::warn!("{e}");
                failed += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }

    let selection = select(&records, &scenes, &cfg.assembly_config())?;
    let labels: Vec<u8> = selection.refs.iter().map(|r| r.label).collect();
    let parts =
        split(labels.len(), cfg.assembly.split_ratios, cfg.seed, cfg.assembly.stratified.then_some(labels.as_slice()))?;
    let rows: Vec<ManifestRow> = selection
        .refs
        .iter()
        .zip(parts.assignment())
        .map(|(tile, split)| ManifestRow { tile: tile.clone(), split })
        .collect();

    let mut outcome = Outcome { inputs: vec![p.records.clone()], ..Outcome::default() };
    outcome.inputs.extend(p.geocode_stub.clone());
    outcome.artifacts.push(write_file(&ctx.run_file(MANIFEST_FILE), write_manifest(&rows))?);
    outcome.artifacts.push(write_file(&ctx.run_file(RECORDS_FILE), write_address_csv(&records)?)?);
    outcome.artifacts.push(p.geocode_cache.clone());
    let [tr, va, te] = parts.sizes();
    outcome.stat("records", records.len());
    outcome.stat("geocoded", resolved);
    outcome.stat("geocode_failed", failed);
    outcome.stat("tiles", rows.len());
    outcome.stat("positives", labels.iter().filter(|&&l| l == 1).count());
    outcome.stat("skipped_ungeocoded", selection.skipped.ungeocoded);
    outcome.stat("skipped_outside", selection.skipped.outside);
    outcome.stat("skipped_partial", selection.skipped.partial);
    outcome.stat("split_sizes", vec![tr, va, te]);
    Ok(outcome)
}

/// Manifest rows and their cropped tiles, in manifest order.
pub fn load_dataset(ctx: &Context) -> Result<(Vec<ManifestRow>, Vec<LabeledTile<f64>>), CliError> {
    let rows = parse_manifest(&read_text(&ctx.run_file(MANIFEST_FILE))?)?;
    let scenes = load_scenes(&ctx.paths.scenes)?;
    let refs: Vec<_> = rows.iter().map(|r| r.tile.clone()).collect();
    let tiles = crop_refs::<f64>(&refs, &scenes, ctx.config.assembly.side_m)?;
    Ok((rows, tiles))
}

/// Stacks the tiles of one split into a batch at the model input size.
pub fn split_batch(
    rows: &[ManifestRow],
    tiles: &[LabeledTile<f64>],
    which: SplitName,
    side: usize,
) -> Result<LabeledBatch<f64>, CliError> {
    let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].split == which).collect();
    let images: Vec<_> = idx.iter().map(|&i| &tiles[i].tile).collect();
    let labels = idx.iter().map(|&i| f64::from(tiles[i].label)).collect();
    Ok(LabeledBatch::new(tiles_to_batch(&images, side)?, labels)?)
}

fn require_dataset(ctx: &Context) -> Result<(), CliError> {
    require(&[
        ("dataset manifest (run `hmf ingest` first)", ctx.run_file(MANIFEST_FILE).as_path()),
        ("scenes directory", ctx.paths.scenes.as_path()),
    ])
}

/// Trains every configured family on the train split, selecting epochs on
/// the validation split.
pub fn cmd_train(ctx: &Context) -> Result<Outcome, CliError> {
    require_dataset(ctx)?;
    let cfg = &ctx.config;
    let train_cfg = cfg.train_config().map_err(|e| CliError::Validation(vec![format!("train: {e}")]))?;
    let (rows, tiles) = load_dataset(ctx)?;
    let side = cfg.model.input_side;
    let train_set = split_batch(&rows, &tiles, SplitName::Train, side)?;
    let val_set = split_batch(&rows, &tiles, SplitName::Val, side)?;

    let mut outcome = Outcome { inputs: vec![ctx.run_file(MANIFEST_FILE)], ..Outcome::default() };
    for family in &cfg.model.families {
        let spec = cfg.model_spec(family).map_err(|e| CliError::Validation(vec![format!("model: {e}")]))?;
        log::info!("training {}", spec.descriptor());
        let model = train(&spec, &train_cfg, &train_set, &val_set)?;
        let ckpt = checkpoint_path(ctx, spec.family.name());
        if let Some(dir) = ckpt.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        save_checkpoint(&model, &ckpt)?;
        outcome.artifacts.push(ckpt);
        let history = ctx.run_file(&format!("history_{}.csv", spec.family.name()));
        outcome.artifacts.push(write_file(&history, history_csv(&model.history))?);
        outcome.stat(&format!("{}_best_epoch", spec.family.name()), model.best_epoch);
    }
    outcome.stat("train_tiles", train_set.len());
    outcome.stat("val_tiles", val_set.len());
    Ok(outcome)
}

fn family_checkpoints(ctx: &Context) -> Result<Vec<(String, PathBuf)>, CliError> {
    ctx.config
        .model
        .families
        .iter()
        .map(|f| {
            let spec = ctx.config.model_spec(f).map_err(|e| CliError::Validation(vec![format!("model: {e}")]))?;
            let name = spec.family.name().to_string();
            let path = checkpoint_path(ctx, &name);
            Ok((name, path))
        })
        .collect()
}

fn checkpoint_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_prefix("model_").map(str::to_string).unwrap_or(stem)
}

/// Scores each checkpoint on the test split and writes one ROC CSV per model
/// plus the comparison report. With no explicit checkpoints every configured
/// family is evaluated.
pub fn cmd_eval(ctx: &Context, checkpoints: &[PathBuf]) -> Result<Outcome, CliError> {
    let named: Vec<(String, PathBuf)> = if checkpoints.is_empty() {
        family_checkpoints(ctx)?
    } else {
        checkpoints.iter().map(|p| (checkpoint_name(p), p.clone())).collect()
    };
    let names: BTreeSet<&str> = named.iter().map(|(n, _)| n.as_str()).collect();
    if names.len() != named.len() {
        return Err(CliError::Validation(vec!["eval: checkpoint names must be distinct".into()]));
    }
    require_dataset(ctx)?;
    let labelled: Vec<(String, &Path)> =
        named.iter().map(|(n, p)| (format!("checkpoint {n} (run `hmf train` first)"), p.as_path())).collect();
    require(&labelled.iter().map(|(n, p)| (n.as_str(), *p)).collect::<Vec<_>>())?;

    let models: Vec<(String, TrainedModel<f64>)> =
        named.iter().map(|(n, p)| Ok((n.clone(), load_checkpoint::<f64>(p)?))).collect::<Result<_, CliError>>()?;
    let (rows, tiles) = load_dataset(ctx)?;
    let side = models[0].1.spec.input_side;
    if let Some((n, _)) = models.iter().find(|(_, m)| m.spec.input_side != side) {
        return Err(CliError::Runtime(format!("checkpoint {n} expects a different input size")));
    }
    let test = split_batch(&rows, &tiles, SplitName::Test, side)?;
    let refs: Vec<(String, &TrainedModel<f64>)> = models.iter().map(|(n, m)| (n.clone(), m)).collect();
    let report = compare_models(&refs, &test, ctx.config.eval.threshold)?;

    let mut outcome = Outcome { inputs: named.iter().map(|(_, p)| p.clone()).collect(), ..Outcome::default() };
    outcome.inputs.push(ctx.run_file(MANIFEST_FILE));
    for entry in &report.entries {
        outcome.artifacts.push(write_file(&ctx.run_file(&entry.curve_file()), entry.curve.to_csv())?);
        outcome.stat(&format!("{}_auc", entry.name), entry.auc);
    }
    outcome.artifacts.push(write_file(&ctx.run_file("comparison.csv"), report.to_csv())?);
    outcome.stat("test_tiles", test.len());
    Ok(outcome)
}

fn effort_table(ctx: &Context) -> Result<EffortTable, CliError> {
    let name = &ctx.config.paths.effort_table;
    match bundled_effort_table(name) {
        Some(t) => Ok(t),
        None => Ok(EffortTable::from_csv(&read_text(Path::new(name))?)?),
    }
}

fn effort_table_input(ctx: &Context) -> Option<PathBuf> {
    let name = &ctx.config.paths.effort_table;
    bundled_effort_table(name).is_none().then(|| PathBuf::from(name))
}

/// Sweeps one zipcode with a trained model and writes the ranked suspects.
/// The region defaults to the config value, then to the top-ranked zipcode
/// among tracts that contain records.
pub fn cmd_discover(ctx: &Context, checkpoint: Option<&Path>, region: Option<&str>) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let ckpt = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => family_checkpoints(ctx)?.remove(0).1,
    };
    let region = region.map(str::to_string).or_else(|| cfg.discover.region.clone());
    let records_path = ctx.run_file(RECORDS_FILE);
    let mut required = vec![
        ("checkpoint (run `hmf train` first)", ckpt.as_path()),
        ("geocoded records (run `hmf ingest` first)", records_path.as_path()),
        ("scenes directory", ctx.paths.scenes.as_path()),
    ];
    if region.is_none() {
        required.push(("tract statistics", ctx.paths.tracts.as_path()));
    }
    let table_path = effort_table_input(ctx);
    if let (None, Some(t)) = (&region, &table_path) {
        required.push(("effort table", t.as_path()));
    }
    require(&required)?;

    let records = parse_address_csv(&read_text(&records_path)?, &cfg.category_map())?;
    let mut outcome = Outcome { inputs: vec![ckpt.clone(), records_path], ..Outcome::default() };
    let region = match region {
        Some(r) => r,
        None => {
            let tracts = parse_tract_csv(&read_text(&ctx.paths.tracts)?, &cfg.level_cuts())?;
            let with_records: BTreeSet<&str> = records.iter().map(|r| r.zipcode.as_str()).collect();
            let candidates: Vec<_> = tracts.into_iter().filter(|t| with_records.contains(t.zipcode.as_str())).collect();
            outcome.inputs.push(ctx.paths.tracts.clone());
            outcome.inputs.extend(table_path);
            rank_zipcodes(&candidates, &effort_table(ctx)?)
                .into_iter()
                .next()
                .map(|z| z.zipcode)
                .ok_or_else(|| CliError::Runtime("no tract shares a zipcode with the records".into()))?
        }
    };
    log::info!("discovering in region {region}");

    let bytes = std::fs::read(&ckpt).map_err(|e| CliError::io(&ckpt, e))?;
    let model_id = hex::encode(&Sha256::digest(&bytes)[..8]);
    let model = load_checkpoint::<f64>(&ckpt)?;
    let scenes = load_scenes(&ctx.paths.scenes)?;
    let in_region = region_records(&records, &region);
    let sweep = sweep_region(&in_region, &scenes, &model, cfg.assembly.side_m)?;
    let report = rank_suspects(&sweep.scores, &in_region, &region, cfg.discover.threshold, &model_id)?;

    let mut scores = String::from("address_id,score\n");
    for (id, s) in &sweep.scores {
        scores.push_str(&format!("{id},{s}\n"));
    }
    outcome.artifacts.push(write_file(&ctx.run_file(SCORES_FILE), scores)?);
    outcome.artifacts.push(write_file(&ctx.run_file("suspects.csv"), report.to_csv())?);
    outcome.artifacts.push(write_file(&ctx.run_file("confirmations.csv"), report.confirmations_csv())?);
    outcome.artifacts.push(write_file(&ctx.run_file("suspects.geojson"), export_geojson(&report)?)?);
    outcome.stat("region", region);
    outcome.stat("model_id", model_id);
    outcome.stat("swept", sweep.scores.len());
    outcome.stat("skipped", sweep.skipped);
    outcome.stat("suspects", report.entries.len());
    Ok(outcome)
}

/// Apportions the canvasser budget over tracts and ranks zipcodes.
pub fn cmd_allocate(ctx: &Context, tracts: Option<&Path>, budget: Option<u64>) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let tracts_path = tracts.map_or_else(|| ctx.paths.tracts.clone(), Path::to_path_buf);
    let table_path = effort_table_input(ctx);
    let mut required = vec![("tract statistics", tracts_path.as_path())];
    if let Some(t) = &table_path {
        required.push(("effort table", t.as_path()));
    }
    require(&required)?;

    let budget = budget.unwrap_or(cfg.allocate.budget);
    let split = cfg.bucket_split().map_err(|e| CliError::Validation(vec![format!("allocate: {e}")]))?;
    let stats = parse_tract_csv(&read_text(&tracts_path)?, &cfg.level_cuts())?;
    let table = effort_table(ctx)?;
    let plan = allocate(&stats, &table, budget, split)?;
    let mut zipcodes = String::from("zipcode,score\n");
    for z in rank_zipcodes(&stats, &table) {
        zipcodes.push_str(&format!("{},{}\n", z.zipcode, z.score));
    }

    let mut outcome = Outcome { inputs: vec![tracts_path], ..Outcome::default() };
    outcome.inputs.extend(table_path);
    outcome.artifacts.push(write_file(&ctx.run_file("plan.csv"), plan.to_csv())?);
    outcome.artifacts.push(write_file(&ctx.run_file("zipcodes.csv"), zipcodes)?);
    outcome.stat("budget", budget);
    outcome.stat("assigned", plan.total_assigned());
    outcome.stat("tracts", stats.len());
    Ok(outcome)
}
