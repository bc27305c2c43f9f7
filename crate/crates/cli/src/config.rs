//! The JSON run configuration shared by every subcommand.
//!
//! Unknown keys are rejected at every level. Relative paths are resolved
//! against the directory holding the config file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use storyteller_core::data::{Split, SynthSpec};
use storyteller_core::model::{DecodeConfig, ModelConfig};
use storyteller_core::text::SkipGramConfig;
use storyteller_core::training::TrainConfig;
use storyteller_rating::ServiceConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seeds model initialization, shuffling, pretraining and synthetic data.
    /// `train.seed` and `pretrain.seed` are replaced by it.
    pub seed: u64,
    /// Where outputs go unless `--out` says otherwise.
    pub out_dir: PathBuf,
    pub paths: Paths,
    pub data: DataOptions,
    pub model: ModelOptions,
    /// Skip-gram pretraining of the word embeddings; off when absent.
    pub pretrain: Option<SkipGramConfig>,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub synth: SynthOptions,
    pub ratings: RatingOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            paths: Paths::default(),
            data: DataOptions::default(),
            model: ModelOptions::default(),
            pretrain: None,
            train: TrainConfig::default(),
            decode: DecodeConfig::default(),
            synth: SynthOptions::default(),
            ratings: RatingOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub stories: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Read by generate; defaults to `<out>/checkpoint.vstm`.
    pub checkpoint: Option<PathBuf>,
    /// Read by evaluate and serve-ratings; defaults to `<out>/candidates.jsonl`.
    pub candidates: Option<PathBuf>,
    /// Defaults to `<out>/ratings.jsonl`.
    pub ratings_log: Option<PathBuf>,
    /// Rating UI bundle served at `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataOptions {
    pub train_split: Split,
    /// Split used by generate, evaluate and serve-ratings.
    pub eval_split: Split,
    pub min_count: u64,
    /// Keep only the first N stories of each split.
    pub limit: Option<usize>,
}

impl Default for DataOptions {
    fn default() -> Self {
        Self {
            train_split: Split::Train,
            eval_split: Split::Test,
            min_count: 1,
            limit: None,
        }
    }
}

/// Model shape. Image width and vocabulary size come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelOptions {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub share_embeddings: bool,
    pub copy_cell_state: bool,
    pub freeze_embeddings: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        let d = ModelConfig::default();
        Self {
            embed_dim: d.embed_dim,
            hidden_dim: d.hidden_dim,
            num_layers: d.num_layers,
            share_embeddings: d.share_embeddings,
            copy_cell_state: d.copy_cell_state,
            freeze_embeddings: d.freeze_embeddings,
        }
    }
}

impl ModelOptions {
    pub fn model_config(&self, image_dim: usize, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            image_dim,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            num_layers: self.num_layers,
            vocab_size,
            share_embeddings: self.share_embeddings,
            copy_cell_state: self.copy_cell_state,
            freeze_embeddings: self.freeze_embeddings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthOptions {
    pub stories: usize,
    pub spec: SynthSpec,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            stories: 100,
            spec: SynthSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatingOptions {
    pub addr: SocketAddr,
    /// Cap on stories taken from each source; all when absent.
    pub stories_per_source: Option<usize>,
    pub service: ServiceConfig,
}

impl Default for RatingOptions {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            stories_per_source: None,
            service: ServiceConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses and resolves relative paths against `path`'s directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        let p = &mut self.paths;
        for opt in [
            &mut p.stories,
            &mut p.embeddings,
            &mut p.checkpoint,
            &mut p.candidates,
            &mut p.ratings_log,
            &mut p.static_dir,
        ] {
            if let Some(x) = opt.as_mut() {
                fix(x);
            }
        }
    }

    /// Applies `--seed` and `--out`, then pushes the seed into sub-configs.
    pub fn apply_overrides(&mut self, seed: Option<u64>, out: Option<PathBuf>) {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out_dir = o;
        }
        self.train.seed = self.seed;
        if let Some(p) = self.pretrain.as_mut() {
            p.seed = self.seed;
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.paths.checkpoint.clone().unwrap_or_else(|| self.out_dir.join("checkpoint.vstm"))
    }

    pub fn candidates_path(&self) -> PathBuf {
        self.paths.candidates.clone().unwrap_or_else(|| self.out_dir.join("candidates.jsonl"))
    }

    pub fn ratings_log_path(&self) -> PathBuf {
        self.paths.ratings_log.clone().unwrap_or_else(|| self.out_dir.join("ratings.jsonl"))
    }

    /// Semantic checks that serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.synth.spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(p) = &self.pretrain {
            if p.embed_dim != self.model.embed_dim {
                return Err(CliError::Config(format!(
                    "pretrain.embed_dim {} differs from model.embed_dim {}",
                    p.embed_dim, self.model.embed_dim
                )));
            }
        }
        if self.decode.beam_width == 0 {
            return Err(CliError::Config("decode.beam_width must be at least 1".into()));
        }
        Ok(())
    }
}

/// The configured input file, which must exist.
pub fn require_file(name: &str, path: Option<&Path>) -> Result<PathBuf, CliError> {
    let path = path.ok_or_else(|| CliError::Config(format!("{name} is not set in the config")))?;
    if !path.is_file() {
        return Err(CliError::Config(format!("{name}: {} does not exist or is not a file", path.display())));
    }
    Ok(path.to_path_buf())
}
