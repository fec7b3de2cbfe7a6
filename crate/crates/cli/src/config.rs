//! Experiment configuration: one TOML file drives a whole run.
//!
//! ```toml
//! schema_version = 1
//! protocol = "combined"
//! variants = ["bert_cs", "multitask_u", "dep_m_6e"]
//! seeds = [42, 0, 1, 2, 3]
//! output_dir = "results"
//! workers = 1
//!
//! [corpus]
//! conan = "data/conan.jsonl"
//! twitter = "data/twitter.jsonl"
//!
//! [encoder]
//! feature_dim = 4096
//!
//! [train]
//! learning_rate = 1e-3
//!
//! [model]
//! hidden_dim = 64
//!
//! [presets.dep_m_12e]
//! variant = "dependency_matrix"
//! epochs = 12
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use csdim::encoder::{EncoderConfig, InputMode};
use csdim::eval::Protocol;
use csdim::model::{FocalAlpha, MixBackInit, ModelConfig, Variant};
use csdim::trainer::{Optimizer, TrainConfig};
use csdim::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEEDS: [u64; 5] = [42, 0, 1, 2, 3];

/// A named model configuration (a row of the results table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub variant: Variant,
    pub epochs: usize,
    #[serde(default = "cs_only")]
    pub input_mode: InputMode,
}

fn cs_only() -> InputMode {
    InputMode::CsOnly
}

/// The six configurations compared in the results tables.
pub fn builtin_preset(id: &str) -> Option<Preset> {
    let p = |variant, epochs, input_mode| Preset {
        variant,
        epochs,
        input_mode,
    };
    Some(match id {
        "bert_cs" => p(Variant::Independent, 3, InputMode::CsOnly),
        "bert_cs_hs" => p(Variant::Independent, 3, InputMode::CsPlusHs),
        "multitask_d" => p(Variant::MultitaskDivided, 3, InputMode::CsOnly),
        "multitask_u" => p(Variant::MultitaskUnited, 3, InputMode::CsOnly),
        "dep_m_3e" => p(Variant::DependencyMatrix, 3, InputMode::CsOnly),
        "dep_m_6e" => p(Variant::DependencyMatrix, 6, InputMode::CsOnly),
        _ => return None,
    })
}

pub const BUILTIN_PRESETS: [&str; 6] = ["bert_cs", "bert_cs_hs", "multitask_d", "multitask_u", "dep_m_3e", "dep_m_6e"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusPaths {
    pub conan: Option<PathBuf>,
    pub twitter: Option<PathBuf>,
    pub combined: Option<PathBuf>,
}

/// Training options shared by every variant; epochs come from the preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            optimizer: d.optimizer,
        }
    }
}

/// Model options shared by every variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_dim: usize,
    pub task_embed_dim: usize,
    pub focal_gamma: f64,
    pub focal_alpha: FocalAlpha,
    pub zero_diagonal: bool,
    pub mix_back_init: MixBackInit,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ModelConfig::default();
        ModelSection {
            hidden_dim: d.hidden_dim,
            task_embed_dim: d.task_embed_dim,
            focal_gamma: d.focal_gamma,
            focal_alpha: d.focal_alpha,
            zero_diagonal: d.zero_diagonal,
            mix_back_init: d.mix_back_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub protocol: String,
    pub variants: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub corpus: CorpusPaths,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub presets: BTreeMap<String, Preset>,
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn one() -> usize {
    1
}

/// Fully resolved settings for one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantPlan {
    pub id: String,
    pub model: ModelConfig,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn new(protocol: Protocol, variants: &[&str], output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            protocol: protocol.name().to_string(),
            variants: variants.iter().map(|v| v.to_string()).collect(),
            seeds: default_seeds(),
            output_dir: output_dir.into(),
            workers: 1,
            corpus: CorpusPaths::default(),
            encoder: EncoderConfig::default(),
            train: TrainSection::default(),
            model: ModelSection::default(),
            presets: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid("config", e.message().to_string()))
    }

    /// Reads, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [&mut self.corpus.conan, &mut self.corpus.twitter, &mut self.corpus.combined]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn protocol(&self) -> Result<Protocol> {
        self.protocol.parse()
    }

    pub fn preset(&self, id: &str) -> Result<Preset> {
        self.presets
            .get(id)
            .cloned()
            .or_else(|| builtin_preset(id))
            .ok_or_else(|| {
                Error::invalid(
                    "variants",
                    format!("unknown variant {id:?}; built-ins are {}", BUILTIN_PRESETS.join(", ")),
                )
            })
    }

    pub fn plan(&self, id: &str) -> Result<VariantPlan> {
        let preset = self.preset(id)?;
        let m = &self.model;
        let model = ModelConfig {
            variant: preset.variant,
            hidden_dim: m.hidden_dim,
            task_embed_dim: m.task_embed_dim,
            focal_gamma: m.focal_gamma,
            focal_alpha: m.focal_alpha,
            epochs: preset.epochs,
            input_mode: preset.input_mode,
            zero_diagonal: m.zero_diagonal,
            mix_back_init: m.mix_back_init,
        };
        let encoder = EncoderConfig {
            input_mode: preset.input_mode,
            ..self.encoder.clone()
        };
        let train = TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            epochs: preset.epochs,
            seed: self.seeds.first().copied().unwrap_or(0),
            optimizer: self.train.optimizer,
        };
        model.validate().map_err(|e| prefix(id, e))?;
        encoder.validate()?;
        train.validate().map_err(|e| prefix(id, e))?;
        Ok(VariantPlan {
            id: id.to_string(),
            model,
            encoder,
            train,
        })
    }

    /// Every check that can run before any data is read or trained on.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("{} is not supported (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let protocol = self.protocol()?;
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "must not be empty"));
        }
        let mut seen = HashSet::new();
        for s in &self.seeds {
            if !seen.insert(s) {
                return Err(Error::invalid("seeds", format!("duplicate seed {s}")));
            }
        }
        if self.variants.is_empty() {
            return Err(Error::invalid("variants", "must not be empty"));
        }
        let mut seen = HashSet::new();
        for v in &self.variants {
            if !seen.insert(v) {
                return Err(Error::invalid("variants", format!("duplicate variant {v:?}")));
            }
            if v.is_empty() || !v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::invalid("variants", format!("{v:?} must be non-empty [A-Za-z0-9_-]")));
            }
            self.plan(v)?;
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        self.check_corpora(protocol)
    }

    fn check_corpora(&self, protocol: Protocol) -> Result<()> {
        let c = &self.corpus;
        let need: Vec<(&str, &Option<PathBuf>)> = match protocol {
            Protocol::Combined if c.combined.is_some() => vec![("corpus.combined", &c.combined)],
            Protocol::Combined | Protocol::ConanToTwitter | Protocol::TwitterToConan => {
                vec![("corpus.conan", &c.conan), ("corpus.twitter", &c.twitter)]
            }
            Protocol::InConan => vec![("corpus.conan", &c.conan)],
            Protocol::InTwitter => vec![("corpus.twitter", &c.twitter)],
        };
        for (field, path) in need {
            match path {
                None => return Err(Error::invalid(field, format!("required by protocol {protocol}"))),
                Some(p) if !p.is_file() => {
                    return Err(Error::invalid(field, format!("{} does not exist", p.display())))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

fn prefix(id: &str, e: Error) -> Error {
    match e {
        Error::Invalid { field, message } => Error::Invalid {
            field: format!("{id}: {field}"),
            message,
        },
        other => other,
    }
}
