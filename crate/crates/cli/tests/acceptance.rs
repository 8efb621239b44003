//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hmf_cli::commands::{load_dataset, split_batch, RECORDS_FILE, SCORES_FILE};
use hmf_cli::{Context, RunConfig};
use hmf_core::allocation::{
    allocate, default_effort_table, effort_for, BadMafLevel, BucketSplit, LowResponseLevel, TractStat,
};
use hmf_core::dataset::{
    parse_oracle_csv, select, split, split_sizes, synthesize_fixture, AssemblyConfig, FixtureSpec, SplitName,
    DEFAULT_RATIOS,
};
use hmf_core::discovery::rank_suspects;
use hmf_core::eval::{auc_pairwise, roc_auc};
use hmf_core::geodata::{crop_tile, tile_side_px, GeoTransform, RasterScene};
use hmf_core::model::{load_checkpoint, BlockFamily, ModelSpec, Stage, Tensor, TrainedModel};
use hmf_core::records::{parse_address_csv, CategoryMap};

type Check = Result<String, String>;

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let result = match result {
            Ok(detail) if took > budget => Err(format!("{detail}; took {took:.1?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} ({took:.1?})"),
            Err(detail) => {
                self.failures += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail} ({took:.1?})");
            }
        }
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn hmf(out: &Path, config: Option<&Path>, args: &[&str]) -> Result<(), String> {
    let mut argv: Vec<String> = vec!["hmf".into(), "--out".into(), out.display().to_string()];
    if let Some(c) = config {
        argv.push("--config".into());
        argv.push(c.display().to_string());
    }
    argv.extend(args.iter().map(|s| s.to_string()));
    match hmf_cli::run(&argv) {
        0 => Ok(()),
        code => Err(format!("`{}` exited with {code}", argv[1..].join(" "))),
    }
}

fn split_exactness() -> Check {
    let sizes = split_sizes(2800, DEFAULT_RATIOS).map_err(|e| e.to_string())?;
    ensure(sizes == [1792, 448, 560], format!("sizes {sizes:?}"))?;
    let labels: Vec<u8> = (0..2800).map(|i| u8::from(i % 10 == 3)).collect();
    let parts = split(2800, DEFAULT_RATIOS, 42, Some(&labels)).map_err(|e| e.to_string())?;
    let pos: Vec<usize> =
        SplitName::ALL.iter().map(|&s| parts.indices(s).iter().filter(|&&i| labels[i] == 1).count()).collect();
    ensure(parts.sizes() == [1792, 448, 560], format!("stratified sizes {:?}", parts.sizes()))?;
    ensure(pos == [179, 45, 56], format!("positives per split {pos:?}"))?;
    Ok(format!("sizes {sizes:?}, positives {pos:?}"))
}

fn assembly_counts() -> Check {
    let spec = FixtureSpec {
        n_single: 10_000,
        n_multi: 280,
        hidden_fraction: 0.0,
        gsd: 5.0,
        ungeocoded_fraction: 0.0,
        ..FixtureSpec::default()
    };
    let fixture = synthesize_fixture(&spec, 7).map_err(|e| e.to_string())?;
    let sel = select(&fixture.records, &fixture.scenes, &AssemblyConfig { seed: 7, ..AssemblyConfig::default() })
        .map_err(|e| e.to_string())?;
    let positives = sel.refs.iter().filter(|r| r.label == 1).count();
    ensure(sel.negative_pool == 10_000, format!("negative pool {}", sel.negative_pool))?;
    ensure(sel.refs.len() == 2800 && positives == 280, format!("{} tiles, {positives} positive", sel.refs.len()))?;
    Ok(format!("{} tiles, {positives} positive from a pool of {}", sel.refs.len(), sel.negative_pool))
}

fn gradient_correctness() -> Check {
    const EPS: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let (mut draws, mut total_checked, mut total_skipped) = (0, 0usize, 0usize);
    for draw in 0..24 {
        let family = BlockFamily::ALL[draw % 3];
        let n_stages = rng.gen_range(1..=2);
        let stages =
            (0..n_stages).map(|_| Stage { filters: rng.gen_range(2..=4), blocks: rng.gen_range(1..=2) }).collect();
        let spec = ModelSpec { input_side: 8, family, stages };
        let model = TrainedModel::<f64>::init(&spec, rng.gen()).map_err(|e| e.to_string())?;
        let n = rng.gen_range(1..=3);
        let data = (0..n * 8 * 8 * 3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let batch = Tensor::new(vec![n, 8, 8, 3], data).map_err(|e| e.to_string())?;
        let labels: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        let pw = rng.gen_range(0.5..10.0);
        let (_, grad) = model.backward(&batch, &labels, pw).map_err(|e| e.to_string())?;
        let base = model.activation_pattern(model.params(), &batch).map_err(|e| e.to_string())?;
        let (mut checked, mut skipped) = (0usize, 0usize);
        for i in 0..model.param_count() {
            let mut plus = model.params().to_vec();
            plus[i] += EPS;
            let mut minus = model.params().to_vec();
            minus[i] -= EPS;
            let kink = model.activation_pattern(&plus, &batch).map_err(|e| e.to_string())? != base
                || model.activation_pattern(&minus, &batch).map_err(|e| e.to_string())? != base;
            if kink {
                skipped += 1;
                continue;
            }
            let lp = model.loss(&plus, &batch, &labels, pw).map_err(|e| e.to_string())?;
            let lm = model.loss(&minus, &batch, &labels, pw).map_err(|e| e.to_string())?;
            let numeric = (lp - lm) / (2.0 * EPS);
            let err = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
            checked += 1;
        }
        ensure(skipped <= checked, format!("draw {draw}: {skipped} of {} coordinates at kinks", checked + skipped))?;
        total_checked += checked;
        total_skipped += skipped;
        draws += 1;
    }
    ensure(worst < 1e-4, format!("max relative error {worst:e}"))?;
    let total = total_checked + total_skipped;
    ensure(total_skipped * 20 <= total, format!("{total_skipped} of {total} coordinates at kinks"))?;
    Ok(format!(
        "{draws} draws over all families, max relative error {worst:.2e}, {total_skipped} of {total} coordinates skipped at kinks"
    ))
}

fn auc_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=200);
        let levels = rng.gen_range(2..=20);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        let a = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let b = auc_pairwise(&scores, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
    }
    ensure(worst <= 1e-9, format!("max difference {worst:e}"))?;
    Ok(format!("1000 tied score sets, max difference {worst:.1e}"))
}

fn effort_table_fidelity(scratch: &Path) -> Check {
    use BadMafLevel as B;
    use LowResponseLevel as L;
    let table = default_effort_table();
    let cases = [(B::High, L::Low, 0.50), (B::High, L::High, 0.20), (B::Medium, L::Low, 0.15)];
    for (b, l, want) in cases {
        let got = effort_for(&table, b, l);
        ensure(got == want, format!("({b}, {l}) -> {got}, expected {want}"))?;
    }
    let rows = table.rows();
    ensure(rows.len() == 4 && rows[3].effort == 0.15, "bundled table does not hold four rows")?;
    let tract = TractStat {
        tract_id: "T1".into(),
        zipcode: "77004".into(),
        bad_maf: B::High,
        low_response: L::Low,
        population: None,
    };
    let plan = allocate(&[tract], &table, 100, BucketSplit::Equal).map_err(|e| e.to_string())?;
    ensure(plan.rows[0].canvassers == 50, format!("{} canvassers", plan.rows[0].canvassers))?;

    let out = scratch.join("allocate");
    let tracts = scratch.join("one_tract.csv");
    std::fs::write(&tracts, "tract_id,zipcode,bad_maf_score,low_response_score\nT1,77004,High,Low\n")
        .map_err(|e| e.to_string())?;
    hmf(&out, None, &["allocate", "--tracts", &tracts.display().to_string(), "--budget", "100"])?;
    let ctx = Context::new(RunConfig::default(), &out);
    let csv = std::fs::read_to_string(ctx.run_file("plan.csv")).map_err(|e| e.to_string())?;
    let row = csv.lines().nth(1).unwrap_or_default();
    ensure(row == "T1,0.50,50", format!("plan row {row:?}"))?;
    Ok(format!("first-match efforts exact, plan row `{row}`"))
}

fn geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let a = rng.gen_range(0.05..2.0);
        let e = -rng.gen_range(0.05..2.0);
        let b = rng.gen_range(-0.01..0.01);
        let d = rng.gen_range(-0.01..0.01);
        let c = rng.gen_range(-5e5..5e5);
        let f = rng.gen_range(0.0..4e6);
        let gt = GeoTransform::new(a, b, c, d, e, f).map_err(|e| e.to_string())?;
        let (x, y) = (c + rng.gen_range(0.0..2000.0), f - rng.gen_range(0.0..2000.0));
        let (col, row) = gt.projected_to_pixel(x, y);
        let (x2, y2) = gt.pixel_to_projected(col, row);
        worst = worst.max((x - x2).hypot(y - y2));
    }
    ensure(worst < 1e-9, format!("max round-trip error {worst:e} m"))?;
    let gsd = 0.1524;
    ensure(tile_side_px(50.0, gsd) == 328, format!("tile side {} px", tile_side_px(50.0, gsd)))?;
    let gt = GeoTransform::north_up(gsd, 0.0, 1000.0).map_err(|e| e.to_string())?;
    let scene = RasterScene::new("s", 1000, 1000, vec![128; 1000 * 1000 * 3], gt, "TEST:IDENTITY")
        .map_err(|e| e.to_string())?;
    let tile = crop_tile::<f64>(&scene, (76.2, 1000.0 - 76.2), 50.0).map_err(|e| e.to_string())?;
    ensure(tile.side_px == 328 && tile.pixels.len() == 328 * 328 * 3, format!("crop is {} px", tile.side_px))?;
    Ok(format!("max round-trip error {worst:.1e} m, 50 m at {gsd} m -> 328x328 px"))
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

const PIPELINE: [&str; 6] = ["fixture", "ingest", "train", "eval", "discover", "allocate"];

/// Runs the pipeline in `a` then `b`, keeping per-command times of `a`.
fn determinism(a: &Path, b: &Path, times: &mut BTreeMap<&'static str, Duration>) -> Check {
    for out in [a, b] {
        for cmd in PIPELINE {
            let start = Instant::now();
            hmf(out, None, &[cmd])?;
            if out == a {
                times.insert(cmd, start.elapsed());
            }
        }
    }
    let (fa, fb) = (files_under(a), files_under(b));
    ensure(fa.keys().eq(fb.keys()), "the two runs wrote different file sets")?;
    let differing: Vec<String> =
        fa.iter().filter(|(k, v)| fb[*k] != **v).map(|(k, _)| k.display().to_string()).collect();
    ensure(differing.is_empty(), format!("differing artifacts: {}", differing.join(", ")))?;

    let ctx = Context::new(RunConfig::default(), a);
    let text = std::fs::read_to_string(ctx.run_file("suspects.geojson")).map_err(|e| e.to_string())?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("geojson: {e}"))?;
    ensure(doc["type"] == "FeatureCollection", "geojson is not a FeatureCollection")?;
    let features = doc["features"].as_array().ok_or("geojson has no features array")?;
    for f in features {
        let coords = f["geometry"]["coordinates"].as_array().ok_or("feature without coordinates")?;
        ensure(f["type"] == "Feature" && f["geometry"]["type"] == "Point" && coords.len() == 2, "malformed feature")?;
    }
    Ok(format!("{} identical files across two runs, {} suspect features", fa.len(), features.len()))
}

fn oracle(out: &Path) -> Result<Vec<hmf_core::dataset::OracleRow>, String> {
    let text = std::fs::read_to_string(out.join("fixture/oracle.csv")).map_err(|e| e.to_string())?;
    parse_oracle_csv(&text).map_err(|e| e.to_string())
}

fn detector_quality(out: &Path) -> Check {
    let ctx = Context::new(RunConfig::default(), out);
    let model = load_checkpoint::<f64>(&ctx.run_file("model_plain.ckpt")).map_err(|e| e.to_string())?;
    ensure(model.history.len() <= 20, format!("{} epochs", model.history.len()))?;
    let truly_multi: BTreeSet<String> = oracle(out)?.into_iter().map(|o| o.address_id).collect();
    let (rows, tiles) = load_dataset(&ctx).map_err(|e| e.to_string())?;
    ensure(ctx.config.fixture.n_single + ctx.config.fixture.n_multi == 440, "fixture is not the 440-address default")?;
    let test = split_batch(&rows, &tiles, SplitName::Test, model.spec.input_side).map_err(|e| e.to_string())?;
    let scores = model.forward(&test.inputs).map_err(|e| e.to_string())?;
    let truth: Vec<bool> =
        rows.iter().filter(|r| r.split == SplitName::Test).map(|r| truly_multi.contains(&r.tile.address_id)).collect();
    let official: Vec<bool> = test.labels.iter().map(|&y| y == 1.0).collect();
    let auc_truth = roc_auc(&scores, &truth).map_err(|e| e.to_string())?;
    let auc_official = roc_auc(&scores, &official).map_err(|e| e.to_string())?;
    ensure(auc_truth >= 0.95, format!("held-out AUC {auc_truth:.4} against ground truth"))?;
    Ok(format!(
        "held-out AUC {auc_truth:.4} against ground truth ({auc_official:.4} against official labels), {} test tiles, best epoch {}/{}",
        test.len(),
        model.best_epoch,
        model.history.len()
    ))
}

fn discovery_recall(out: &Path) -> Check {
    let ctx = Context::new(RunConfig::default(), out);
    let hidden: BTreeSet<String> = oracle(out)?.into_iter().filter(|o| o.is_hidden()).map(|o| o.address_id).collect();
    let records_text = std::fs::read_to_string(ctx.run_file(RECORDS_FILE)).map_err(|e| e.to_string())?;
    let records = parse_address_csv(&records_text, &CategoryMap::default()).map_err(|e| e.to_string())?;
    let single = records.iter().filter(|r| !r.official_label.is_multi()).count();
    ensure(hidden.len() == 40 && single == 400, format!("{} hidden among {single} single", hidden.len()))?;

    let scores_text = std::fs::read_to_string(ctx.run_file(SCORES_FILE)).map_err(|e| e.to_string())?;
    let scores: Vec<(String, f64)> = scores_text
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once(',').map(|(id, s)| (id.to_string(), s.parse().unwrap_or(f64::NAN))))
        .collect();
    let region = records.first().map(|r| r.zipcode.clone()).unwrap_or_default();
    let report = rank_suspects(&scores, &records, &region, 0.0, "acceptance").map_err(|e| e.to_string())?;
    let hits = report.entries.iter().take(40).filter(|e| hidden.contains(&e.address_id)).count();
    let recall = hits as f64 / hidden.len() as f64;
    ensure(recall >= 0.8, format!("recall@40 {hits}/40"))?;
    Ok(format!("recall@40 {hits}/{} = {recall:.3}", hidden.len()))
}

fn architecture_harness(a: &Path, scratch: &Path) -> Check {
    let out = scratch.join("harness");
    let fixture = a.join("fixture");
    let config = scratch.join("harness.toml");
    let text = format!(
        "[paths]\nscenes = {:?}\nrecords = {:?}\ngeocode_stub = {:?}\ntracts = {:?}\n\n\
         [model]\nfamilies = [\"plain\", \"residual\", \"dense\"]\n\n[train]\nepochs = 4\n",
        fixture.join("scenes"),
        fixture.join("records.csv"),
        fixture.join("geocode_stub.tsv"),
        fixture.join("tracts.csv"),
    );
    std::fs::write(&config, text).map_err(|e| e.to_string())?;
    for cmd in ["ingest", "train", "eval"] {
        hmf(&out, Some(&config), &[cmd])?;
    }
    let cfg = hmf_cli::load_config(Some(&config), None).map_err(|e| e.to_string())?;
    let ctx = Context::new(cfg, &out);
    let base = Context::new(RunConfig::default(), a);
    let same_split =
        std::fs::read(ctx.run_file("manifest.csv")).ok() == std::fs::read(base.run_file("manifest.csv")).ok();
    ensure(same_split, "harness split differs from the default run")?;
    for family in ["plain", "residual", "dense"] {
        let roc = ctx.run_file(&format!("roc_{family}.csv"));
        let text = std::fs::read_to_string(&roc).map_err(|e| format!("{}: {e}", roc.display()))?;
        ensure(text.lines().count() > 2, format!("roc_{family}.csv is empty"))?;
    }
    let comparison = std::fs::read_to_string(ctx.run_file("comparison.csv")).map_err(|e| e.to_string())?;
    let families: Vec<&str> = comparison.lines().skip(1).filter_map(|l| l.split(',').next()).collect();
    ensure(families == ["plain", "residual", "dense"], format!("comparison rows {families:?}"))?;
    let aucs: Vec<&str> = comparison.lines().skip(1).filter_map(|l| l.split(',').nth(1)).collect();
    Ok(format!("3 ROC CSVs + comparison report on a shared split, AUCs {aucs:?} after 4 epochs"))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let (a, b) = (scratch.path().join("run_a"), scratch.path().join("run_b"));
    let mut report = Report { failures: 0 };
    let secs = Duration::from_secs;

    report.record(1, "split exactness", secs(1), split_exactness);
    report.record(2, "assembly counts", secs(10), assembly_counts);
    report.record(3, "gradient correctness", secs(30), gradient_correctness);
    report.record(4, "AUC oracle equivalence", secs(10), auc_oracle);
    report.record(7, "effort table fidelity", secs(1), || effort_table_fidelity(scratch.path()));
    report.record(9, "geometry round trips", secs(5), geometry);
    let mut times = BTreeMap::new();
    report.record(10, "end-to-end determinism", secs(600), || determinism(&a, &b, &mut times));
    let took = |cmd: &str| times.get(cmd).copied().unwrap_or_default();
    report.record(5, "synthetic detector quality", secs(300).saturating_sub(took("train")), || {
        detector_quality(&a).map(|d| format!("{d}, training took {:.1?}", took("train")))
    });
    report.record(8, "discovery recall", secs(60).saturating_sub(took("discover")), || {
        discovery_recall(&a).map(|d| format!("{d}, sweep took {:.1?}", took("discover")))
    });
    report.record(6, "architecture harness", secs(900), || architecture_harness(&a, scratch.path()));

    if report.failures > 0 {
        println!("{} criteria failed", report.failures);
        std::process::exit(1);
    }
}
