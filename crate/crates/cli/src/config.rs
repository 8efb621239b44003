//! Run configuration: a TOML file with one table per pipeline stage.
//!
//! Every key is optional. Unset input paths resolve under the output
//! directory, where `hmf fixture` writes its synthetic data.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hmf_core::allocation::{BucketSplit, LevelCuts};
use hmf_core::dataset::{AssemblyConfig, FixtureSpec};
use hmf_core::model::{BlockFamily, ModelSpec, Optimizer, TrainConfig};
use hmf_core::records::{CategoryMap, GeocodePolicy};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub assembly: AssemblySection,
    pub geocode: GeocodeSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub discover: DiscoverSection,
    pub allocate: AllocateSection,
    pub fixture: FixtureSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            paths: PathsConfig::default(),
            assembly: AssemblySection::default(),
            geocode: GeocodeSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            discover: DiscoverSection::default(),
            allocate: AllocateSection::default(),
            fixture: FixtureSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub scenes: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub geocode_cache: Option<PathBuf>,
    pub geocode_stub: Option<PathBuf>,
    pub tracts: Option<PathBuf>,
    /// `default`, `table1`, `text-reading` or a CSV path.
    pub effort_table: String,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            scenes: None,
            records: None,
            geocode_cache: None,
            geocode_stub: None,
            tracts: None,
            effort_table: "default".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblySection {
    pub negative_ratio: f64,
    pub side_m: f64,
    pub split_ratios: [f64; 3],
    pub stratified: bool,
    pub multi_family_codes: Vec<String>,
}

impl Default for AssemblySection {
    fn default() -> Self {
        let a = AssemblyConfig::default();
        Self {
            negative_ratio: a.negative_ratio,
            side_m: a.side_m,
            split_ratios: hmf_core::dataset::DEFAULT_RATIOS,
            stratified: true,
            multi_family_codes: vec!["B1".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeocodeSection {
    pub attempts: u32,
    pub backoff_ms: u64,
    pub confidence_floor: f64,
}

impl Default for GeocodeSection {
    fn default() -> Self {
        let p = GeocodePolicy::default();
        Self {
            attempts: p.attempts,
            backoff_ms: p.initial_backoff.as_millis() as u64,
            confidence_floor: p.confidence_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Families trained by `train`, in order. The first one is used by
    /// `discover`.
    pub families: Vec<String>,
    pub input_side: usize,
    /// Per-family stage override such as `"8x1,16x1,32x1"`.
    pub stages: BTreeMap<String, String>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { families: vec!["plain".into()], input_side: 64, stages: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Unset uses negatives/positives of the training split.
    pub pos_weight: Option<f64>,
    /// `sgd` or `momentum`.
    pub optimizer: String,
    pub momentum: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            pos_weight: t.pos_weight,
            optimizer: "momentum".into(),
            momentum: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub threshold: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverSection {
    /// Unset picks the top-ranked zipcode of the tract statistics.
    pub region: Option<String>,
    pub threshold: f64,
}

impl Default for DiscoverSection {
    fn default() -> Self {
        Self { region: None, threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocateSection {
    pub budget: u64,
    /// `equal` or `population`.
    pub bucket_split: String,
    /// Numeric bad-MAF cuts `[medium, high]`; unset uses tertiles.
    pub bad_maf_cuts: Option<[f64; 2]>,
    /// Numeric low-response cut; unset uses the median.
    pub low_response_cut: Option<f64>,
}

impl Default for AllocateSection {
    fn default() -> Self {
        Self { budget: 200, bucket_split: "equal".into(), bad_maf_cuts: None, low_response_cut: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureSection {
    pub n_single: usize,
    pub n_multi: usize,
    pub hidden_fraction: f64,
    pub gsd: f64,
    pub pattern_strength: f64,
    pub cell_m: f64,
    pub grid: usize,
    pub zipcodes: Vec<String>,
    pub tracts_per_zipcode: usize,
    pub ungeocoded_fraction: f64,
}

impl Default for FixtureSection {
    fn default() -> Self {
        let f = FixtureSpec::default();
        Self {
            n_single: f.n_single,
            n_multi: f.n_multi,
            hidden_fraction: f.hidden_fraction,
            gsd: f.gsd,
            pattern_strength: f.pattern_strength,
            cell_m: f.cell_m,
            grid: f.grid,
            zipcodes: f.zipcodes,
            tracts_per_zipcode: f.tracts_per_zipcode,
            ungeocoded_fraction: f.ungeocoded_fraction,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Path(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(vec![format!("config: {}", e.message())]))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 prefix of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        hex::encode(&digest[..8])
    }

    /// Every field-level problem at once.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        let mut check = |field: &str, result: Result<(), String>| {
            if let Err(e) = result {
                problems.push(format!("{field}: {e}"));
            }
        };
        check("assembly", self.assembly_config().validate().map_err(|e| e.to_string()));
        let sum: f64 = self.assembly.split_ratios.iter().sum();
        check(
            "assembly.split_ratios",
            if (sum - 1.0).abs() <= 1e-9 && self.assembly.split_ratios.iter().all(|r| *r >= 0.0) {
                Ok(())
            } else {
                Err(format!("must be non-negative and sum to 1, got {:?}", self.assembly.split_ratios))
            },
        );
        check(
            "geocode.confidence_floor",
            if (0.0..=1.0).contains(&self.geocode.confidence_floor) { Ok(()) } else { Err("must be in [0, 1]".into()) },
        );
        check("geocode.attempts", if self.geocode.attempts >= 1 { Ok(()) } else { Err("must be at least 1".into()) });
        check(
            "model.families",
            if self.model.families.is_empty() { Err("at least one family is required".into()) } else { Ok(()) },
        );
        for name in &self.model.families {
            check("model.families", self.model_spec(name).map(|_| ()));
        }
        for name in self.model.stages.keys() {
            check("model.stages", name.parse::<BlockFamily>().map(|_| ()).map_err(|e| e.to_string()));
        }
        check("train", self.train_config().and_then(|t| t.validate().map_err(|e| e.to_string())));
        check("train.epochs", if self.train.epochs >= 1 { Ok(()) } else { Err("must be at least 1".into()) });
        for (field, t) in [("eval.threshold", self.eval.threshold), ("discover.threshold", self.discover.threshold)] {
            check(field, if (0.0..=1.0).contains(&t) { Ok(()) } else { Err(format!("must be in [0, 1], got {t}")) });
        }
        check("allocate.bucket_split", self.bucket_split().map(|_| ()));
        check("fixture", self.fixture_spec().validate().map_err(|e| e.to_string()));
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(problems))
        }
    }

    pub fn assembly_config(&self) -> AssemblyConfig {
        AssemblyConfig { negative_ratio: self.assembly.negative_ratio, side_m: self.assembly.side_m, seed: self.seed }
    }

    pub fn category_map(&self) -> CategoryMap {
        CategoryMap::new(self.assembly.multi_family_codes.iter().map(String::as_str))
    }

    pub fn geocode_policy(&self) -> GeocodePolicy {
        GeocodePolicy {
            attempts: self.geocode.attempts,
            initial_backoff: std::time::Duration::from_millis(self.geocode.backoff_ms),
            confidence_floor: self.geocode.confidence_floor,
        }
    }

    pub fn model_spec(&self, family: &str) -> Result<ModelSpec, String> {
        let family: BlockFamily = family.parse().map_err(|e: hmf_core::model::ModelError| e.to_string())?;
        let mut spec = ModelSpec::default_for(family);
        spec.input_side = self.model.input_side;
        if let Some(stages) = self.model.stages.get(family.name()) {
            let desc = format!("family={family};input_side={};stages={stages}", spec.input_side);
            spec = ModelSpec::parse_descriptor(&desc).map_err(|e| e.to_string())?;
        }
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }

    pub fn train_config(&self) -> Result<TrainConfig, String> {
        let optimizer = match self.train.optimizer.as_str() {
            "sgd" => Optimizer::Sgd,
            "momentum" => Optimizer::Momentum(self.train.momentum),
            other => return Err(format!("unknown optimizer {other:?} (expected sgd or momentum)")),
        };
        Ok(TrainConfig {
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seed: self.seed,
            pos_weight: self.train.pos_weight,
            optimizer,
        })
    }

    pub fn bucket_split(&self) -> Result<BucketSplit, String> {
        match self.allocate.bucket_split.as_str() {
            "equal" => Ok(BucketSplit::Equal),
            "population" => Ok(BucketSplit::Population),
            other => Err(format!("unknown bucket split {other:?} (expected equal or population)")),
        }
    }

    pub fn level_cuts(&self) -> LevelCuts {
        LevelCuts {
            bad_maf: self.allocate.bad_maf_cuts.map(|[m, h]| (m, h)),
            low_response: self.allocate.low_response_cut,
        }
    }

    pub fn fixture_spec(&self) -> FixtureSpec {
        let f = &self.fixture;
        FixtureSpec {
            n_single: f.n_single,
            n_multi: f.n_multi,
            hidden_fraction: f.hidden_fraction,
            gsd: f.gsd,
            pattern_strength: f.pattern_strength,
            side_m: self.assembly.side_m,
            cell_m: f.cell_m,
            grid: f.grid,
            zipcodes: f.zipcodes.clone(),
            tracts_per_zipcode: f.tracts_per_zipcode,
            ungeocoded_fraction: f.ungeocoded_fraction,
        }
    }
}

/// Input locations after applying defaults relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPaths {
    pub scenes: PathBuf,
    pub records: PathBuf,
    pub geocode_cache: PathBuf,
    /// `None` when no stub table is configured and none was generated.
    pub geocode_stub: Option<PathBuf>,
    pub tracts: PathBuf,
}

impl ResolvedPaths {
    pub fn resolve(paths: &PathsConfig, out: &Path) -> Self {
        let fixture = out.join("fixture");
        let default_stub = fixture.join("geocode_stub.tsv");
        Self {
            scenes: paths.scenes.clone().unwrap_or_else(|| fixture.join("scenes")),
            records: paths.records.clone().unwrap_or_else(|| fixture.join("records.csv")),
            geocode_cache: paths.geocode_cache.clone().unwrap_or_else(|| out.join("geocode_cache.tsv")),
            geocode_stub: paths.geocode_stub.clone().or_else(|| default_stub.exists().then_some(default_stub)),
            tracts: paths.tracts.clone().unwrap_or_else(|| fixture.join("tracts.csv")),
        }
    }
}
