//! Run configuration: one JSON file, validated up front.

use std::fs;
use std::path::{Path, PathBuf};

use abuse_core::corpus::{LanguageRegistry, SynthConfig};
use abuse_core::features::MetadataTransform;
use abuse_core::pipeline::PipelineConfig;
use abuse_core::Execution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("config is not valid JSON: {0}")]
    Parse(#[source] serde_json::Error),
    #[error("config does not match the schema: {0}")]
    Schema(#[source] serde_json::Error),
    #[error("invalid config: {0}")]
    Constraint(String),
}

/// Which stages run. Disabling a stage never reorders the others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub clean: bool,
    pub transliterate: bool,
    /// Train on the original and the cleaned text side by side.
    pub oversample: bool,
    pub tfidf: bool,
    /// Reduce embeddings with PCA; needs embedding files.
    pub pca: bool,
    pub metadata: bool,
    pub language_wise: bool,
    pub pseudo: bool,
    pub ensemble: bool,
    pub thresholds: bool,
    /// Run the label-noise probe after training.
    pub diagnose: bool,
    /// Export a 2-D scatter of the train embeddings.
    pub scatter: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            clean: true,
            transliterate: true,
            oversample: false,
            tfidf: true,
            pca: false,
            metadata: true,
            language_wise: true,
            pseudo: true,
            ensemble: true,
            thresholds: true,
            diagnose: false,
            scatter: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    /// Code points kept from the composed model text.
    pub max_len: usize,
    /// Known language codes; anything else maps to `other`. Empty means the
    /// built-in registry.
    pub languages: Vec<String>,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig {
            max_len: 150,
            languages: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfidfConfig {
    pub max_features: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig { max_features: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub components: usize,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig { components: 200 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetadataConfig {
    pub transform: MetadataTransform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub grid_step: f64,
    /// Languages with fewer OOF rows keep the global threshold.
    pub min_count: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            grid_step: 0.01,
            min_count: 30,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    /// File with one known-flipped record id per line (synthetic corpora).
    pub flip_set_path: Option<PathBuf>,
}

/// Generator settings for the `synth` subcommand. The run seed drives the
/// generator; `corpus.seed` is ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub corpus: SynthConfig,
    /// Unlabeled test records written next to the train file; 0 skips it.
    pub test_n: usize,
    /// Width of synthetic embeddings; 0 skips them.
    pub embedding_dim: usize,
    pub embedding_separation: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            corpus: SynthConfig::default(),
            test_n: 0,
            embedding_dim: 0,
            embedding_separation: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub train_path: Option<PathBuf>,
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    /// EMB1 files aligned with the train and test corpora.
    #[serde(default)]
    pub train_embeddings: Option<PathBuf>,
    #[serde(default)]
    pub test_embeddings: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Drives folds, booster sampling and the generator.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub stages: StageToggles,
    #[serde(default)]
    pub text: TextConfig,
    #[serde(default)]
    pub tfidf: TfidfConfig,
    #[serde(default)]
    pub pca: PcaConfig,
    #[serde(default)]
    pub metadata: MetadataConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub diagnose: DiagnoseConfig,
    #[serde(default)]
    pub synth: SynthSection,
}

impl RunConfig {
    /// Minimal config with every default filled in.
    pub fn new(train_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            train_path: Some(train_path.into()),
            test_path: None,
            train_embeddings: None,
            test_embeddings: None,
            output_dir: output_dir.into(),
            seed: 0,
            execution: Execution::default(),
            stages: StageToggles::default(),
            text: TextConfig::default(),
            tfidf: TfidfConfig::default(),
            pca: PcaConfig::default(),
            metadata: MetadataConfig::default(),
            pipeline: PipelineConfig::default(),
            thresholds: ThresholdConfig::default(),
            diagnose: DiagnoseConfig::default(),
            synth: SynthSection::default(),
        }
    }

    pub fn registry(&self) -> Result<LanguageRegistry, ConfigError> {
        if self.text.languages.is_empty() {
            return Ok(LanguageRegistry::default());
        }
        LanguageRegistry::from_codes(&self.text.languages)
            .map_err(|e| ConfigError::Constraint(e.to_string()))
    }

    /// Structural checks that need no file system access.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Constraint(m.to_owned()));
        let s = &self.stages;
        if s.pca && self.train_embeddings.is_none() {
            return bad("pca needs train_embeddings");
        }
        if s.scatter && self.train_embeddings.is_none() {
            return bad("scatter needs train_embeddings");
        }
        if self.test_path.is_some()
            && self.train_embeddings.is_some() != self.test_embeddings.is_some()
        {
            return bad("train_embeddings and test_embeddings must be given together when a test corpus is used");
        }
        if self.test_path.is_none() && self.test_embeddings.is_some() {
            return bad("test_embeddings given without test_path");
        }
        if !s.tfidf && !s.metadata && self.train_embeddings.is_none() {
            return bad("no feature block enabled");
        }
        if s.oversample && !s.clean {
            return bad("oversample pairs original and cleaned text, so it needs clean");
        }
        if !self.pipeline.nested && (s.pseudo || s.ensemble) {
            return bad("pseudo and ensemble stages need pipeline.nested");
        }
        if self.text.max_len == 0 {
            return bad("text.max_len must be positive");
        }
        if self.tfidf.max_features == 0 {
            return bad("tfidf.max_features must be positive");
        }
        if s.pca && self.pca.components == 0 {
            return bad("pca.components must be positive");
        }
        if !(self.thresholds.grid_step > 0.0 && self.thresholds.grid_step <= 1.0) {
            return bad("thresholds.grid_step must lie in (0, 1]");
        }
        self.pipeline
            .validate()
            .map_err(|e| ConfigError::Constraint(e.to_string()))?;
        self.registry()?;
        Ok(())
    }
}

/// Parses and validates a config document.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ConfigError::Schema(e),
        _ => ConfigError::Parse(e),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text =
        fs::read_to_string(path).map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
    parse_config_str(&text)
}
