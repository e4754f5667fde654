//! JSON artifact layouts and file helpers.
//!
//! Every artifact carries the tool version, the seed, the discretized schema
//! and the descriptors of the features it concerns, so it can be read without
//! the run that produced it.

use std::fs;
use std::path::{Path, PathBuf};

use contextspace_core::selection::CandidateScore;
use contextspace_core::{
    ContextSchema, ContextSubspace, DimensionalityReport, FeatureDescriptor, LossMap, PredictionReport, TruthBundle,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA: &str = "schema.json";
pub const RANKING: &str = "ranking.json";
pub const SCORES: &str = "scores.csv";
pub const DIMENSIONALITY: &str = "dimensionality.json";
pub const EPSILON_CURVE: &str = "epsilon_curve.csv";
pub const LOSS_MAP: &str = "loss_map.json";
pub const TRUTH: &str = "truth.json";
pub const REPORT: &str = "report.md";

pub fn prediction_file(domain: &str) -> String {
    format!("prediction_{domain}.json")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SchemaArtifact {
    pub tool_version: String,
    pub seed: u64,
    pub loss_column: String,
    pub schema: ContextSchema,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoredFeature {
    pub feature: String,
    pub index: usize,
    pub score: f64,
}

impl ScoredFeature {
    pub fn new(schema: &ContextSchema, c: &CandidateScore) -> Self {
        Self {
            feature: schema.features()[c.feature].name.clone(),
            index: c.feature,
            score: c.score,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankingArtifact {
    pub tool_version: String,
    pub seed: u64,
    pub schema: ContextSchema,
    /// Descriptors of the ranked features, in rank order.
    pub subspace: Vec<FeatureDescriptor>,
    pub k_max: usize,
    pub order: Vec<String>,
    pub scores: Vec<f64>,
    pub per_iteration_scores: Vec<Vec<ScoredFeature>>,
    pub candidate_scorings: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DimensionalityArtifact {
    pub tool_version: String,
    pub seed: u64,
    pub schema: ContextSchema,
    /// Subspace of the chosen `K` top-ranked features.
    pub subspace: ContextSubspace,
    pub ranking: Vec<String>,
    pub report: DimensionalityReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LossMapArtifact {
    pub tool_version: String,
    pub seed: u64,
    pub schema: ContextSchema,
    pub ranking: Vec<String>,
    pub chosen_k: usize,
    #[serde(flatten)]
    pub loss_map: LossMap,
    pub cell_labels: Vec<String>,
    /// Title of each heatmap slice, in file index order.
    pub slices: Vec<String>,
    /// Prediction under the empirical test-domain distribution.
    pub test_prediction: PredictionReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionArtifact {
    pub tool_version: String,
    pub seed: u64,
    pub schema: ContextSchema,
    pub subspace: ContextSubspace,
    pub domain: String,
    /// `samples` or `marginals`.
    pub source: String,
    pub mass: Vec<f64>,
    #[serde(flatten)]
    pub report: PredictionReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TruthArtifact {
    pub tool_version: String,
    pub seed: u64,
    pub n_test: usize,
    pub n_operating: usize,
    #[serde(flatten)]
    pub truth: TruthBundle,
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::BadArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(CliError::MissingArtifact(path.into())),
        Err(e) => return Err(CliError::io(path, e)),
    };
    serde_json::from_str(&text).map_err(|e| CliError::BadArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// `dir/name`, failing with the artifact's path when it does not exist.
pub fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact(path))
    }
}
