//! Study configuration files, end-to-end study execution and the manifest
//! that ties an output directory back to its configuration.
//!
//! Every seed in a study derives from the single master seed, the catalog's
//! included, so a manifest plus the config it digests reproduces every file.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{LabelError, LabelStore};
use crate::domain::{DomainError, ProcessParameters, RunRecord, RunStatus, TopicId};
use crate::platform::{generate_catalog, Catalog, CatalogConfig, PersonalizationConfig, PlatformError};
use crate::record::{RunLogWriter, RunSink, NullSink, RECORD_EXTENSION};
use crate::scenario::{plan_study, run_study, simulator_factory, RunOutcome, ScenarioError, SeedSets, StudyPlan, TimeMode};
use crate::seed::{derive_seed, sha256_hex};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";
pub const CATALOG_FILE: &str = "catalog.jsonl";
pub const TRUTH_LABELS_FILE: &str = "truth_labels.csv";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("cannot parse study config: {0}")]
    Parse(String),
    #[error("invalid study config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Label(#[from] LabelError),
}

impl StudyError {
    /// Whether the error stems from the configuration rather than from running.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            StudyError::Parse(_)
                | StudyError::Config { .. }
                | StudyError::Platform(PlatformError::InvalidConfig { .. } | PlatformError::Infeasible { .. })
                | StudyError::Scenario(ScenarioError::InvalidConfig { .. } | ScenarioError::MissingSeedVideo { .. })
        )
    }
}

impl From<DomainError> for StudyError {
    fn from(e: DomainError) -> Self {
        match e {
            DomainError::InvalidParameter { field, reason } => {
                StudyError::Config { field: format!("parameters.{field}"), reason }
            }
            other => StudyError::Config { field: "parameters".into(), reason: other.to_string() },
        }
    }
}

/// A preset plus optional per-field overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonalizationSpec {
    pub preset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recency_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recency_window: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub popularity_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history_prior: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relevance_weight: Option<f64>,
}

impl Default for PersonalizationSpec {
    fn default() -> Self {
        PersonalizationSpec::preset("contextual")
    }
}

impl PersonalizationSpec {
    pub fn preset(name: &str) -> Self {
        PersonalizationSpec {
            preset: name.into(),
            history_weight: None,
            recency_weight: None,
            search_weight: None,
            noise_scale: None,
            recency_window: None,
            popularity_weight: None,
            history_prior: None,
            relevance_weight: None,
        }
    }

    pub fn resolve(&self) -> Result<PersonalizationConfig, StudyError> {
        let mut c = PersonalizationConfig::preset(&self.preset).ok_or_else(|| StudyError::Config {
            field: "personalization.preset".into(),
            reason: format!("unknown preset `{}` (known: {})", self.preset, crate::platform::PRESET_NAMES.join(", ")),
        })?;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut c.history_weight, self.history_weight);
        set(&mut c.recency_weight, self.recency_weight);
        set(&mut c.search_weight, self.search_weight);
        set(&mut c.noise_scale, self.noise_scale);
        set(&mut c.popularity_weight, self.popularity_weight);
        set(&mut c.history_prior, self.history_prior);
        set(&mut c.relevance_weight, self.relevance_weight);
        if let Some(k) = self.recency_window {
            c.recency_window = k;
        }
        c.validate().map_err(|e| match e {
            PlatformError::InvalidConfig { field, reason } => {
                StudyError::Config { field: format!("personalization.{field}"), reason }
            }
            other => other.into(),
        })?;
        Ok(c)
    }
}

/// Contents of a study config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Master seed.
    pub seed: u64,
    /// Worker threads. Never persisted: outputs must not depend on it.
    #[serde(skip_serializing)]
    pub workers: usize,
    pub time_mode: TimeMode,
    pub parameters: ProcessParameters,
    pub personalization: PersonalizationSpec,
    /// The catalog seed is derived from the master seed and must stay unset.
    pub catalog: CatalogConfig,
    /// Explicit seed videos per topic id; other topics use their most popular videos.
    pub seed_videos: BTreeMap<TopicId, SeedSets>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seed: 0,
            workers: 4,
            time_mode: TimeMode::Simulated,
            parameters: ProcessParameters::default(),
            personalization: PersonalizationSpec::default(),
            catalog: CatalogConfig::default(),
            seed_videos: BTreeMap::new(),
        }
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self, StudyError> {
        toml::from_str(text).map_err(|e| StudyError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, StudyError> {
        let text = fs::read_to_string(path).map_err(|e| StudyError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn catalog_seed(&self) -> u64 {
        derive_seed(self.seed, "catalog")
    }

    /// Catalog settings with the derived seed filled in.
    pub fn catalog_config(&self) -> CatalogConfig {
        CatalogConfig { seed: self.catalog_seed(), ..self.catalog.clone() }
    }

    pub fn validate(&self) -> Result<PersonalizationConfig, StudyError> {
        if self.workers == 0 {
            return Err(StudyError::Config { field: "workers".into(), reason: "must be at least 1".into() });
        }
        if self.catalog.seed != 0 {
            return Err(StudyError::Config {
                field: "catalog.seed".into(),
                reason: "the catalog seed derives from the master seed; set `seed` instead".into(),
            });
        }
        self.parameters.validate()?;
        let personalization = self.personalization.resolve()?;
        let catalog = self.catalog_config();
        catalog.validate()?;
        catalog.check_feasible(&self.parameters)?;
        let known: Vec<&str> = catalog.topics.iter().map(|t| t.topic_id.as_str()).collect();
        if let Some(t) = self.seed_videos.keys().find(|t| !known.contains(&t.as_str())) {
            return Err(StudyError::Config { field: format!("seed_videos.{t}"), reason: "not a catalog topic".into() });
        }
        Ok(personalization)
    }

    /// SHA-256 of the canonical JSON form; equal configs give equal digests.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub run_id: String,
    pub topic: TopicId,
    pub agent_seed: u64,
    pub state: RunState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Relative to the output directory.
    pub record: String,
}

/// Index of a study output directory. Holds no timestamps, so reruns with
/// the same config produce the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub study_id: String,
    pub config_digest: String,
    pub master_seed: u64,
    pub catalog_seed: u64,
    pub config: String,
    pub catalog: String,
    pub truth_labels: String,
    pub runs: Vec<ManifestRun>,
}

impl StudyManifest {
    pub fn load(dir: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn failed(&self) -> usize {
        self.runs.iter().filter(|r| r.state == RunState::Failed).count()
    }
}

/// Outcome of a study, in plan order.
pub struct StudyRun {
    pub catalog: Arc<Catalog>,
    pub plan: StudyPlan,
    pub outcomes: Vec<RunOutcome>,
}

impl StudyRun {
    /// Records of runs that produced one, failed runs included.
    pub fn records(&self) -> Vec<RunRecord> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok().cloned()).collect()
    }

    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.succeeded()).count()
    }
}

fn prepare(config: &StudyConfig) -> Result<(Arc<Catalog>, PersonalizationConfig, StudyPlan), StudyError> {
    let personalization = config.validate()?;
    let catalog = Arc::new(generate_catalog(&config.catalog_config())?);
    let plan = plan_study(&catalog, &config.parameters, config.seed, &config.seed_videos, config.time_mode)?;
    Ok((catalog, personalization, plan))
}

/// Runs a study against the simulator without writing anything.
pub fn simulate_study(config: &StudyConfig) -> Result<StudyRun, StudyError> {
    let (catalog, personalization, plan) = prepare(config)?;
    let outcomes = run_study(&plan, config.workers, simulator_factory(catalog.clone(), personalization), |_| {
        Ok(Box::new(NullSink) as Box<dyn RunSink>)
    });
    Ok(StudyRun { catalog, plan, outcomes })
}

fn output_error(path: &Path) -> impl FnOnce(io::Error) -> StudyError + '_ {
    move |source| StudyError::Output { path: path.to_path_buf(), source }
}

pub fn record_path(run_id: &str) -> String {
    format!("{RUNS_DIR}/{run_id}.{RECORD_EXTENSION}")
}

/// Runs a study and writes records, catalog, truth labels, the resolved
/// config and, last of all, the manifest. A failure before the manifest is
/// written leaves no manifest behind.
pub fn execute_study(config: &StudyConfig, out: &Path) -> Result<(StudyRun, StudyManifest), StudyError> {
    let (catalog, personalization, plan) = prepare(config)?;
    let runs_dir = out.join(RUNS_DIR);
    fs::create_dir_all(&runs_dir).map_err(output_error(&runs_dir))?;
    let manifest_path = out.join(MANIFEST_FILE);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path).map_err(output_error(&manifest_path))?;
    }

    let config_path = out.join(CONFIG_FILE);
    let config_json = serde_json::to_vec_pretty(config).expect("config serializes");
    fs::write(&config_path, config_json).map_err(output_error(&config_path))?;
    let catalog_path = out.join(CATALOG_FILE);
    catalog.export(&catalog_path).map_err(output_error(&catalog_path))?;
    LabelStore::new(catalog.truth_labels())?.save(&out.join(TRUTH_LABELS_FILE))?;

    let outcomes = run_study(&plan, config.workers, simulator_factory(catalog.clone(), personalization), |c| {
        let writer = RunLogWriter::create(&out.join(record_path(&c.run_id)))?;
        Ok(Box::new(writer) as Box<dyn RunSink>)
    });

    let runs = plan
        .runs
        .iter()
        .zip(&outcomes)
        .map(|(c, o)| {
            let reason = match &o.result {
                Ok(r) => match &r.status {
                    RunStatus::Completed => None,
                    RunStatus::Failed { reason, .. } => Some(reason.clone()),
                },
                Err(e) => Some(e.to_string()),
            };
            ManifestRun {
                run_id: c.run_id.clone(),
                topic: c.topic.topic_id.clone(),
                agent_seed: c.agent_seed,
                state: if reason.is_none() { RunState::Completed } else { RunState::Failed },
                reason,
                record: record_path(&c.run_id),
            }
        })
        .collect();
    let digest = config.digest();
    let manifest = StudyManifest {
        study_id: format!("study-{}", &digest[..12]),
        config_digest: digest,
        master_seed: config.seed,
        catalog_seed: config.catalog_seed(),
        config: CONFIG_FILE.into(),
        catalog: CATALOG_FILE.into(),
        truth_labels: TRUTH_LABELS_FILE.into(),
        runs,
    };
    let tmp = out.join(format!("{MANIFEST_FILE}.partial"));
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    fs::write(&tmp, bytes).map_err(output_error(&tmp))?;
    fs::rename(&tmp, &manifest_path).map_err(output_error(&manifest_path))?;
    Ok((StudyRun { catalog, plan, outcomes }, manifest))
}
