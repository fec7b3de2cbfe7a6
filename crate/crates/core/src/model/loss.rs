use serde::{Deserialize, Serialize};

use crate::corpus::{Dimension, DimensionKind, NUM_DIMENSIONS};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + eᶻ) without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// +1 for the positive class, −1 for the negative one.
fn sign(gold: usize) -> f64 {
    if gold == 1 {
        1.0
    } else {
        -1.0
    }
}

/// −[g ln σ(z) + (1−g) ln(1−σ(z))], evaluated as softplus(∓z).
pub fn loss_bce(logit: f64, gold: usize) -> f64 {
    softplus(-sign(gold) * logit)
}

pub fn bce_grad(logit: f64, gold: usize) -> f64 {
    sigmoid(logit) - gold as f64
}

/// −ln softmax(logits)[class]; `class` is zero-based.
pub fn loss_ce(logits: &[f64], class: usize) -> f64 {
    log_sum_exp(logits) - logits[class]
}

pub fn ce_grad(logits: &[f64], class: usize) -> Vec<f64> {
    let mut g = softmax(logits);
    g[class] -= 1.0;
    g
}

/// Logit input of a focal loss: a single sigmoid logit or a softmax vector.
#[derive(Debug, Clone, Copy)]
pub enum FocalTarget<'a> {
    Binary(f64),
    Multiclass(&'a [f64]),
}

/// −α·(1−p)^γ·ln p, with p the model probability of the gold class.
pub fn loss_focal(target: FocalTarget<'_>, gold: usize, gamma: f64, alpha: f64) -> f64 {
    let (log_p, one_minus_p) = match target {
        FocalTarget::Binary(z) => {
            let s = sign(gold);
            (-softplus(-s * z), sigmoid(-s * z))
        }
        FocalTarget::Multiclass(logits) => {
            let log_p = logits[gold] - log_sum_exp(logits);
            let sm = softmax(logits);
            let rest: f64 = sm.iter().enumerate().filter(|(k, _)| *k != gold).map(|(_, p)| p).sum();
            (log_p, rest)
        }
    };
    -alpha * one_minus_p.powf(gamma) * log_p
}

pub fn focal_binary_grad(logit: f64, gold: usize, gamma: f64, alpha: f64) -> f64 {
    let s = sign(gold);
    let p = sigmoid(s * logit);
    let q = sigmoid(-s * logit);
    let log_p = -softplus(-s * logit);
    -alpha * s * (q.powf(gamma + 1.0) - gamma * p * q.powf(gamma) * log_p)
}

pub fn focal_multiclass_grad(logits: &[f64], class: usize, gamma: f64, alpha: f64) -> Vec<f64> {
    let sm = softmax(logits);
    let p = sm[class];
    let q: f64 = sm.iter().enumerate().filter(|(k, _)| *k != class).map(|(_, v)| v).sum();
    let log_p = logits[class] - log_sum_exp(logits);
    // dL/dp · p, finite as q → 0 for every γ ≥ 0
    let coef = if q == 0.0 {
        0.0
    } else if gamma == 0.0 {
        1.0
    } else {
        q.powf(gamma) - gamma * q.powf(gamma - 1.0) * p * log_p
    };
    sm.iter()
        .enumerate()
        .map(|(k, &s)| {
            let ind = if k == class { 1.0 } else { 0.0 };
            -alpha * coef * (ind - s)
        })
        .collect()
}

/// Loss attached to one task head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskLoss {
    Bce,
    Ce,
    /// `alpha[c]` weights gold class `c`.
    Focal { gamma: f64, alpha: Vec<f64> },
}

impl TaskLoss {
    pub fn name(&self) -> &'static str {
        match self {
            TaskLoss::Bce => "bce",
            TaskLoss::Ce => "ce",
            TaskLoss::Focal { .. } => "focal",
        }
    }

    /// `logits` has width 1 (binary) or 3; `class` is zero-based.
    pub fn value(&self, logits: &[f64], class: usize) -> f64 {
        match self {
            TaskLoss::Bce => loss_bce(logits[0], class),
            TaskLoss::Ce => loss_ce(logits, class),
            TaskLoss::Focal { gamma, alpha } => {
                let target = if logits.len() == 1 {
                    FocalTarget::Binary(logits[0])
                } else {
                    FocalTarget::Multiclass(logits)
                };
                loss_focal(target, class, *gamma, alpha[class])
            }
        }
    }

    pub fn grad(&self, logits: &[f64], class: usize) -> Vec<f64> {
        match self {
            TaskLoss::Bce => vec![bce_grad(logits[0], class)],
            TaskLoss::Ce => ce_grad(logits, class),
            TaskLoss::Focal { gamma, alpha } => {
                if logits.len() == 1 {
                    vec![focal_binary_grad(logits[0], class, *gamma, alpha[class])]
                } else {
                    focal_multiclass_grad(logits, class, *gamma, alpha[class])
                }
            }
        }
    }
}

/// Which task losses a training step sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossScope {
    All,
    /// emotional_appeal + audience_adaptation
    BinaryGroup,
    /// clarity + evidence + rebuttal + fairness
    CategoricalGroup,
    Task(Dimension),
}

impl LossScope {
    pub fn includes(self, dim: Dimension) -> bool {
        match self {
            LossScope::All => true,
            LossScope::BinaryGroup => dim.kind() == DimensionKind::Binary,
            LossScope::CategoricalGroup => dim.kind() == DimensionKind::Ordinal3,
            LossScope::Task(d) => d == dim,
        }
    }
}

pub fn total_loss(scope: LossScope, losses: &[f64; NUM_DIMENSIONS]) -> f64 {
    Dimension::ALL
        .iter()
        .zip(losses)
        .filter(|(d, _)| scope.includes(**d))
        .map(|(_, l)| l)
        .sum()
}
