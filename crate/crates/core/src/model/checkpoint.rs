//! JSON parameter checkpoints.
//!
//! ```text
//! { "format": "csdim-checkpoint", "version": 1,
//!   "model_config": {...}, "encoder_config": {...},
//!   "schema": ["emotional_appeal", ...],
//!   "losses": [...],
//!   "tensors": [{"name": "encoder.0.weight", "shape": [64, 4096], "data": [...]}, ...] }
//! ```
//!
//! Tensors appear in [`ModelParameters::layout`] order, row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelParameters, TaskLoss};
use crate::corpus::Dimension;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "csdim-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model_config: ModelConfig,
    pub encoder_config: EncoderConfig,
    pub schema: Vec<String>,
    pub losses: Vec<TaskLoss>,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, encoder: &EncoderConfig) -> Self {
        let tensors = model
            .params
            .layout()
            .into_iter()
            .zip(model.params.slices())
            .map(|((name, shape, _), data)| Tensor {
                name,
                shape,
                data: data.to_vec(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model_config: model.config.clone(),
            encoder_config: encoder.clone(),
            schema: Dimension::ALL.iter().map(|d| d.name().to_string()).collect(),
            losses: model.losses.to_vec(),
            tensors,
        }
    }

    pub fn into_model(self) -> Result<(Model, EncoderConfig)> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::invalid("checkpoint.format", format!("unexpected `{}`", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(
                "checkpoint.version",
                format!("{} not supported (expected {CHECKPOINT_VERSION})", self.version),
            ));
        }
        let schema: Vec<&str> = Dimension::ALL.iter().map(|d| d.name()).collect();
        if self.schema != schema {
            return Err(Error::invalid("checkpoint.schema", "dimension order differs"));
        }
        self.encoder_config.validate()?;
        let cfg = &self.model_config;
        let mut params = ModelParameters::zeros(
            cfg.variant.num_encoders(),
            self.encoder_config.feature_dim,
            cfg.hidden_dim,
            cfg.task_embed_dim,
        );
        let layout = params.layout();
        if layout.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "checkpoint has {} tensors, expected {}",
                self.tensors.len(),
                layout.len()
            )));
        }
        for (((name, shape, _), slot), t) in layout.iter().zip(params.slices_mut()).zip(&self.tensors) {
            if &t.name != name || &t.shape != shape || t.data.len() != slot.len() {
                return Err(Error::Shape(format!("tensor `{}` does not match `{name}` {shape:?}", t.name)));
            }
            slot.copy_from_slice(&t.data);
        }
        if !params.is_finite() {
            return Err(Error::invalid("checkpoint.tensors", "non-finite value"));
        }
        let mut model = Model::from_parts(self.model_config, params)?;
        let losses: [TaskLoss; 6] = self
            .losses
            .try_into()
            .map_err(|_| Error::Shape("checkpoint must list six losses".into()))?;
        model.losses = losses;
        Ok((model, self.encoder_config))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
