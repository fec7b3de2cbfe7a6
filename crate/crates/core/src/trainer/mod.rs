//! Mini-batch training with per-variant loss schedules.

mod backward;
mod gradcheck;
mod optim;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dimension, LabelVector, NUM_DIMENSIONS};
use crate::encoder::{encode, EncoderConfig, FeatureVector};
use crate::error::{Error, Result};
use crate::eval::evaluate_encoded;
use crate::model::{Model, ModelConfig};

pub use backward::{backward, scope_loss, Example};
pub use gradcheck::{gradient_check, gradient_check_with, relative_error, GradCheckOptions, GradCheckReport};
pub use optim::{adam_step, sgd_step, AdamState, Optimizer, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};

/// Learning rate used by the original fine-tuning setup; kept for reference.
pub const REFERENCE_LEARNING_RATE: f64 = 2e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 6,
            seed: 42,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("train.learning_rate", format!("{} not in (0, 1]", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("train.batch_size", "must be >= 1"));
        }
        if !(1..=100).contains(&self.epochs) {
            return Err(Error::invalid("train.epochs", format!("{} not in 1..=100", self.epochs)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training loss per task over the epoch's batches, schema order.
    pub task_loss: [f64; NUM_DIMENSIONS],
    pub total_loss: f64,
    /// Mean of the six weighted F1 scores on the validation split.
    pub val_macro: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn total_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.total_loss).collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("epoch");
        for d in Dimension::ALL {
            out.push('\t');
            out.push_str(d.name());
        }
        out.push_str("\ttotal\tval_macro\n");
        for e in &self.epochs {
            out.push_str(&e.epoch.to_string());
            for l in e.task_loss {
                out.push_str(&format!("\t{l:.6}"));
            }
            out.push_str(&format!("\t{:.6}", e.total_loss));
            match e.val_macro {
                Some(v) => out.push_str(&format!("\t{v:.4}\n")),
                None => out.push_str("\t-\n"),
            }
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("history serializes") + "\n")
            .collect()
    }
}

/// Owns a model and one optimizer state per schedule step.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Model,
    pub config: TrainConfig,
    states: Vec<OptimizerState>,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let states = model
            .variant()
            .schedule()
            .iter()
            .map(|_| OptimizerState::new(config.optimizer, &model.params))
            .collect();
        Ok(Trainer { model, config, states })
    }

    /// Runs the variant's schedule on one batch. Returns the per-task
    /// losses measured before the first update.
    pub fn step(&mut self, batch: &[Example<'_>]) -> Result<[f64; NUM_DIMENSIONS]> {
        let mut first = None;
        for (k, &scope) in self.model.variant().schedule().iter().enumerate() {
            let (grads, losses) = backward(&self.model, batch, scope)?;
            first.get_or_insert(losses);
            self.states[k].step(&mut self.model.params, &grads, self.config.learning_rate);
        }
        Ok(first.expect("schedule is never empty"))
    }

    pub fn into_model(self) -> Model {
        self.model
    }
}

fn encode_labeled(corpus: &Corpus, enc: &EncoderConfig) -> Result<(Vec<FeatureVector>, Vec<LabelVector>)> {
    let mut xs = Vec::with_capacity(corpus.len());
    let mut ys = Vec::with_capacity(corpus.len());
    for pair in corpus.pairs() {
        ys.push(pair.gold()?);
        xs.push(encode(pair, enc));
    }
    Ok((xs, ys))
}

/// Epoch-`epoch` visiting order; independent of the total epoch count.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Trains a fresh model. Initialization uses `train_config.seed`; the
/// validation split is only monitored.
pub fn train(
    model_config: &ModelConfig,
    encoder_config: &EncoderConfig,
    train_set: &Corpus,
    val_set: &Corpus,
    train_config: &TrainConfig,
) -> Result<(Model, TrainHistory)> {
    model_config.validate()?;
    encoder_config.validate()?;
    let (xs, ys) = encode_labeled(train_set, encoder_config)?;
    let (vxs, vys) = encode_labeled(val_set, encoder_config)?;
    let model = Model::new(model_config.clone(), encoder_config.feature_dim, train_config.seed)?;
    train_encoded(model, &xs, &ys, &vxs, &vys, train_config)
}

/// Training loop over pre-encoded examples, starting from `model`.
pub fn train_encoded(
    mut model: Model,
    xs: &[FeatureVector],
    ys: &[LabelVector],
    val_xs: &[FeatureVector],
    val_ys: &[LabelVector],
    train_config: &TrainConfig,
) -> Result<(Model, TrainHistory)> {
    train_config.validate()?;
    if xs.is_empty() || xs.len() != ys.len() || val_xs.len() != val_ys.len() {
        return Err(Error::invalid("training data", "need equally many features and labels, at least one"));
    }
    model.fit_focal_alpha(ys.iter());
    let mut trainer = Trainer::new(model, train_config.clone())?;
    let mut history = TrainHistory::default();

    for epoch in 0..train_config.epochs {
        let order = epoch_order(xs.len(), train_config.seed, epoch);
        let mut sums = [0.0; NUM_DIMENSIONS];
        for (b, chunk) in order.chunks(train_config.batch_size).enumerate() {
            let batch: Vec<Example<'_>> = chunk.iter().map(|&i| (&xs[i], ys[i])).collect();
            let losses = trainer.step(&batch)?;
            if let Some(t) = losses.iter().position(|l| !l.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: b + 1,
                    detail: format!("{} loss is {}", Dimension::ALL[t].name(), losses[t]),
                });
            }
            if !trainer.model.params.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: b + 1,
                    detail: "parameters became non-finite after the update".into(),
                });
            }
            for (s, l) in sums.iter_mut().zip(losses) {
                *s += l * chunk.len() as f64;
            }
        }
        let task_loss = sums.map(|s| s / xs.len() as f64);
        let val_macro = if val_xs.is_empty() {
            None
        } else {
            Some(evaluate_encoded(&trainer.model, val_xs, val_ys)?.weighted.macro_avg())
        };
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            task_loss,
            total_loss: task_loss.iter().sum(),
            val_macro,
        });
    }
    Ok((trainer.into_model(), history))
}
