use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use eop_core::aggregator::HierarchicalConfig;
use eop_core::domain::{DatasetConfig, FeatureSchema};
use eop_core::estimator::SolverConfig;
use eop_core::questiongen::QuestionnaireConfig;

use crate::content::StudyContent;
use crate::error::ServiceError;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_SESSION_TTL_SECS: u64 = 24 * 60 * 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// COMPAS-style CSV; relative paths resolve against the config file.
    Csv { path: PathBuf },
    /// Generated COMPAS-like population, for demos and tests.
    Synthetic { n: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study_id: String,
    pub dataset: DatasetSource,
    #[serde(default = "FeatureSchema::compas")]
    pub schema: FeatureSchema,
    #[serde(default)]
    pub dataset_config: DatasetConfig,
    /// `seed` is ignored in favour of the per-session seed. Count scaling
    /// always follows `dataset_config`.
    #[serde(default)]
    pub questionnaire: QuestionnaireConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub hierarchical: HierarchicalConfig,
    #[serde(default = "StudyContent::compas")]
    pub content: StudyContent,
    /// Derive each session's questionnaire seed from this and the session's
    /// creation index, making a study reproducible. Random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_seed: Option<u64>,
}

impl StudyConfig {
    pub fn synthetic(study_id: &str, n: usize, seed: u64) -> Self {
        StudyConfig {
            study_id: study_id.into(),
            dataset: DatasetSource::Synthetic { n, seed },
            schema: FeatureSchema::compas(),
            dataset_config: DatasetConfig::default(),
            questionnaire: QuestionnaireConfig::default(),
            solver: SolverConfig::default(),
            hierarchical: HierarchicalConfig::default(),
            content: StudyContent::compas(),
            session_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default = "default_port")]
    pub port: u16,
    /// Sessions idle longer than this are abandoned.
    #[serde(default = "default_ttl")]
    pub session_ttl_secs: u64,
    /// fsync the event log after every write. Without it an acknowledged
    /// write survives a process crash but not a power loss.
    #[serde(default)]
    pub sync_writes: bool,
    pub studies: Vec<StudyConfig>,
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

fn default_ttl() -> u64 {
    DEFAULT_SESSION_TTL_SECS
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>, studies: Vec<StudyConfig>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            port: DEFAULT_PORT,
            session_ttl_secs: DEFAULT_SESSION_TTL_SECS,
            sync_writes: false,
            studies,
        }
    }

    /// Reads a JSON config. Relative dataset and data paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut config: ServiceConfig = serde_json::from_str(&text)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if config.data_dir.is_relative() {
            config.data_dir = base.join(&config.data_dir);
        }
        for study in &mut config.studies {
            if let DatasetSource::Csv { path } = &mut study.dataset {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(config)
    }
}

/// Study ids name log files, so they are restricted to a safe alphabet.
pub fn valid_study_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}
