//! Output directory bookkeeping: the per-directory lock, the run directory
//! keyed by config hash, and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{ResolvedPaths, RunConfig};
use crate::CliError;

pub const LOCK_FILE: &str = ".hmf.lock";
pub const RUN_MANIFEST: &str = "run_manifest.json";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(out: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        let path = out.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Runtime(format!(
                "{} is locked by another command; remove {} if no command is running",
                out.display(),
                path.display()
            ))),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Everything a command needs: the validated config and where to read and
/// write.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub paths: ResolvedPaths,
    pub config_hash: String,
    pub run_dir: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig, out: &Path) -> Self {
        let config_hash = config.hash();
        Self {
            paths: ResolvedPaths::resolve(&config.paths, out),
            run_dir: out.join("runs").join(&config_hash),
            out: out.to_path_buf(),
            config,
            config_hash,
        }
    }

    pub fn fixture_dir(&self) -> PathBuf {
        self.out.join("fixture")
    }

    pub fn run_file(&self, name: &str) -> PathBuf {
        self.run_dir.join(name)
    }

    /// `path` relative to the output directory when it lies inside it.
    pub fn display_path(&self, path: &Path) -> String {
        path.strip_prefix(&self.out).unwrap_or(path).display().to_string()
    }
}

/// What one command read and wrote.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
    pub stats: Map<String, Value>,
}

impl Outcome {
    pub fn stat(&mut self, key: &str, value: impl Into<Value>) {
        self.stats.insert(key.to_string(), value.into());
    }
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn digests(ctx: &Context, paths: &[PathBuf]) -> Result<Map<String, Value>, CliError> {
    let mut out = Map::new();
    for p in paths {
        let value = if p.is_file() { Value::String(file_digest(p)?) } else { Value::Null };
        out.insert(ctx.display_path(p), value);
    }
    Ok(out)
}

/// Records `command` in the run manifest, replacing any earlier entry for it.
/// The manifest holds no timestamps, so reruns reproduce it exactly.
pub fn record(ctx: &Context, command: &str, outcome: &Outcome) -> Result<(), CliError> {
    let path = ctx.run_file(RUN_MANIFEST);
    let mut commands = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str::<Value>(&text)
            .ok()
            .and_then(|v| v.get("commands").and_then(Value::as_object).cloned())
            .unwrap_or_default(),
        Err(_) => Map::new(),
    };
    commands.insert(
        command.to_string(),
        json!({
            "inputs": digests(ctx, &outcome.inputs)?,
            "artifacts": digests(ctx, &outcome.artifacts)?,
            "stats": outcome.stats,
        }),
    );
    let manifest = json!({
        "config_hash": ctx.config_hash,
        "seed": ctx.config.seed,
        "versions": { "hmf-core": hmf_core::VERSION, "hmf-cli": env!("CARGO_PKG_VERSION") },
        "config": serde_json::to_value(&ctx.config).expect("config serializes"),
        "commands": commands,
    });
    write_file(&path, serde_json::to_string_pretty(&manifest).expect("json serializes") + "\n")?;
    write_file(&ctx.run_file("config.toml"), ctx.config.to_toml())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = OutputLock::acquire(dir.path()).unwrap();
        assert!(matches!(OutputLock::acquire(dir.path()), Err(CliError::Runtime(_))));
        drop(lock);
        OutputLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn manifest_merges_commands() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = Context::new(RunConfig::default(), dir.path());
        let artifact = write_file(&ctx.run_file("a.txt"), "hello").unwrap();
        let outcome = Outcome { artifacts: vec![artifact], ..Outcome::default() };
        record(&ctx, "one", &outcome).unwrap();
        record(&ctx, "two", &Outcome::default()).unwrap();
        let v: Value = serde_json::from_str(&read_text(&ctx.run_file(RUN_MANIFEST)).unwrap()).unwrap();
        assert_eq!(v["config_hash"], ctx.config_hash);
        let key = format!("runs/{}/a.txt", ctx.config_hash);
        assert_eq!(
            v["commands"]["one"]["artifacts"][&key],
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
        assert!(v["commands"]["two"].is_object());
    }
}
