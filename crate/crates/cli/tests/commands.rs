use std::path::Path;

use hmf_cli::{run, Context, RunConfig};

fn hmf(out: &Path, extra: &[&str]) -> i32 {
    let mut argv = vec!["hmf".to_string(), "--out".into(), out.display().to_string()];
    argv.extend(extra.iter().map(|s| s.to_string()));
    run(argv)
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(run(["hmf", "--help"]), 0);
    assert_eq!(run(["hmf", "frobnicate"]), 1);
    assert_eq!(run(["hmf"]), 1);
}

#[test]
fn missing_inputs_fail_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(hmf(&out, &["ingest"]), 1);
    assert_eq!(hmf(&out, &["train"]), 1);
    assert_eq!(hmf(&out, &["discover"]), 1);
    assert!(!out.join("runs").exists());
    assert!(!out.join(".hmf.lock").exists());
}

#[test]
fn config_errors_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(hmf(&out, &["--config", "/nonexistent/hmf.toml", "allocate"]), 1);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[train]\nbatch_size = 0\n[eval]\nthreshold = 3.0\n").unwrap();
    assert_eq!(hmf(&out, &["--config", bad.to_str().unwrap(), "allocate"]), 1);
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "colour = \"blue\"\n").unwrap();
    assert_eq!(hmf(&out, &["--config", unknown.to_str().unwrap(), "allocate"]), 1);
}

#[test]
fn locked_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(".hmf.lock"), "").unwrap();
    assert_eq!(hmf(dir.path(), &["fixture"]), 2);
}

#[test]
fn bad_data_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let tracts = dir.path().join("tracts.csv");
    std::fs::write(&tracts, "tract_id,zipcode,bad_maf_score,low_response_score\nT1,77004,Extreme,Low\n").unwrap();
    assert_eq!(hmf(&dir.path().join("out"), &["allocate", "--tracts", tracts.to_str().unwrap()]), 2);
}

#[test]
fn fixture_and_allocate_write_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(hmf(&out, &["--seed", "9", "fixture"]), 0);
    assert_eq!(hmf(&out, &["--seed", "9", "allocate", "--budget", "120"]), 0);
    let first = std::fs::read(out.join("fixture/records.csv")).unwrap();
    assert_eq!(hmf(&out, &["--seed", "9", "fixture"]), 0);
    assert_eq!(std::fs::read(out.join("fixture/records.csv")).unwrap(), first);

    let config = RunConfig { seed: 9, ..RunConfig::default() };
    let ctx = Context::new(config, &out);
    let plan = std::fs::read_to_string(ctx.run_file("plan.csv")).unwrap();
    assert!(plan.starts_with("tract_id,effort_fraction,canvassers\n"));
    let total: u64 = plan.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert!(total <= 120);
    let zipcodes = std::fs::read_to_string(ctx.run_file("zipcodes.csv")).unwrap();
    assert_eq!(zipcodes.lines().nth(1).unwrap().split(',').next(), Some("77004"));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ctx.run_file("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config_hash"], ctx.config_hash);
    assert_eq!(manifest["commands"]["allocate"]["stats"]["budget"], 120);
    assert!(manifest["commands"]["fixture"]["artifacts"]["fixture/oracle.csv"].is_string());
    let reloaded = hmf_cli::load_config(Some(&ctx.run_file("config.toml")), None).unwrap();
    assert_eq!(reloaded.hash(), ctx.config_hash);
}
