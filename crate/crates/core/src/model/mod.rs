//! Shared projection, six task heads, the dependency-matrix mixing layer,
//! losses and prediction.
//!
//! Forward pass for one feature vector `x`:
//!
//! ```text
//! h    = relu(W_enc x + b_enc)                      (one W_enc per task for Independent)
//! z_t  = W_t h + b_t                                (1 logit for binary, 3 for ordinal)
//! e_j  = U_j z_j                                    (task embedding)
//! z'_t = z_t + V_t Σ_j σ(D[t, j]) e_j               (DependencyMatrix only)
//! ```

mod checkpoint;
mod loss;
mod params;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dimension, DimensionKind, LabelVector, NUM_DIMENSIONS};
use crate::encoder::{FeatureVector, InputMode};
use crate::error::{Error, Result};

pub use checkpoint::{Checkpoint, Tensor, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use loss::{
    bce_grad, ce_grad, focal_binary_grad, focal_multiclass_grad, loss_bce, loss_ce, loss_focal,
    sigmoid, softmax, softplus, total_loss, FocalTarget, LossScope, TaskLoss,
};
pub use params::{Matrix, ModelParameters, ParamKind, Projection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One separate encoder and head per dimension; BCE/CE losses.
    Independent,
    /// Shared encoder; binary-group and categorical-group losses stepped separately.
    MultitaskDivided,
    /// Shared encoder; one step on the sum of all six losses.
    MultitaskUnited,
    /// United plus gated mixing of task embeddings through a learnable 6×6 matrix.
    DependencyMatrix,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Independent,
        Variant::MultitaskDivided,
        Variant::MultitaskUnited,
        Variant::DependencyMatrix,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            Variant::Independent => "independent",
            Variant::MultitaskDivided => "multitask_divided",
            Variant::MultitaskUnited => "multitask_united",
            Variant::DependencyMatrix => "dependency_matrix",
        }
    }

    pub fn num_encoders(self) -> usize {
        match self {
            Variant::Independent => NUM_DIMENSIONS,
            _ => 1,
        }
    }

    /// Encoder feeding dimension `t`.
    pub fn encoder_for(self, t: usize) -> usize {
        match self {
            Variant::Independent => t,
            _ => 0,
        }
    }

    /// Loss scopes stepped, in order, for every mini-batch.
    ///
    /// Independent models have disjoint parameters per dimension, so one
    /// step on the summed loss is exactly one step of each separate model.
    pub fn schedule(self) -> &'static [LossScope] {
        match self {
            Variant::MultitaskDivided => &[LossScope::BinaryGroup, LossScope::CategoricalGroup],
            _ => &[LossScope::All],
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocalAlpha {
    /// Class weights ∝ 1 / training frequency, normalized to mean 1.
    InverseFrequency,
    /// The same weight for every class.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub hidden_dim: usize,
    pub task_embed_dim: usize,
    pub focal_gamma: f64,
    pub focal_alpha: FocalAlpha,
    pub epochs: usize,
    pub input_mode: InputMode,
    /// Drop self-influence terms σ(D[t, t]) from the mixing sum.
    pub zero_diagonal: bool,
    pub mix_back_init: MixBackInit,
}

/// Initialization of the back-projections V_t.
///
/// `Zero` starts the dependency variant exactly at the united model, so
/// D_raw receives no gradient until some V_t has learned a useful
/// direction. `Uniform` draws V_t like every other weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixBackInit {
    #[default]
    Zero,
    Uniform,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::DependencyMatrix,
            hidden_dim: 64,
            task_embed_dim: 8,
            focal_gamma: 2.0,
            focal_alpha: FocalAlpha::InverseFrequency,
            epochs: 6,
            input_mode: InputMode::CsOnly,
            zero_diagonal: false,
            mix_back_init: MixBackInit::Zero,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::invalid("model.hidden_dim", "must be positive"));
        }
        if self.task_embed_dim == 0 {
            return Err(Error::invalid("model.task_embed_dim", "must be positive"));
        }
        if !self.focal_gamma.is_finite() || self.focal_gamma < 0.0 {
            return Err(Error::invalid("model.focal_gamma", "must be finite and >= 0"));
        }
        if let FocalAlpha::Fixed(a) = self.focal_alpha {
            if !a.is_finite() || a <= 0.0 {
                return Err(Error::invalid("model.focal_alpha", "fixed weight must be > 0"));
            }
        }
        if !(1..=100).contains(&self.epochs) {
            return Err(Error::invalid("model.epochs", format!("{} not in 1..=100", self.epochs)));
        }
        Ok(())
    }

    /// Loss used for dimension `dim` under this configuration. Focal weights
    /// start uniform; the trainer replaces them from training frequencies.
    pub fn task_loss(&self, dim: Dimension) -> TaskLoss {
        let focal = || TaskLoss::Focal {
            gamma: self.focal_gamma,
            alpha: match self.focal_alpha {
                FocalAlpha::Fixed(a) => vec![a; dim.kind().num_classes()],
                FocalAlpha::InverseFrequency => vec![1.0; dim.kind().num_classes()],
            },
        };
        match (self.variant, dim.kind(), dim) {
            (Variant::Independent, DimensionKind::Binary, _) => TaskLoss::Bce,
            (_, DimensionKind::Binary, Dimension::AudienceAdaptation) => focal(),
            (_, DimensionKind::Binary, _) => TaskLoss::Bce,
            (_, DimensionKind::Ordinal3, _) => TaskLoss::Ce,
        }
    }
}

/// Per-task output logits in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskLogits(pub [Vec<f64>; NUM_DIMENSIONS]);

impl TaskLogits {
    pub fn zeros() -> Self {
        TaskLogits(std::array::from_fn(|t| {
            vec![0.0; Dimension::ALL[t].kind().num_logits()]
        }))
    }

    pub fn task(&self, dim: Dimension) -> &[f64] {
        &self.0[dim.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().copied()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

/// σ(D) with row = influenced task, column = influencing task.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyMatrixView(pub [[f64; NUM_DIMENSIONS]; NUM_DIMENSIONS]);

impl DependencyMatrixView {
    pub fn get(&self, influenced: Dimension, influencing: Dimension) -> f64 {
        self.0[influenced.index()][influencing.index()]
    }

    /// Plain-text table: tab-separated, header row and column of dimension
    /// names, four decimals.
    pub fn to_table(&self) -> String {
        let mut out = String::from("influenced\\influencing");
        for d in Dimension::ALL {
            out.push('\t');
            out.push_str(d.name());
        }
        out.push('\n');
        for (t, row) in self.0.iter().enumerate() {
            out.push_str(Dimension::ALL[t].name());
            for v in row {
                out.push_str(&format!("\t{v:.4}"));
            }
            out.push('\n');
        }
        out
    }

    /// Median of off-diagonal entries, optionally excluding one cell.
    pub fn off_diagonal_median(&self, exclude: Option<(Dimension, Dimension)>) -> f64 {
        let mut vals: Vec<f64> = Vec::new();
        for t in 0..NUM_DIMENSIONS {
            for j in 0..NUM_DIMENSIONS {
                if t == j || exclude == Some((Dimension::ALL[t], Dimension::ALL[j])) {
                    continue;
                }
                vals.push(self.0[t][j]);
            }
        }
        vals.sort_by(f64::total_cmp);
        let n = vals.len();
        if n % 2 == 1 {
            vals[n / 2]
        } else {
            0.5 * (vals[n / 2 - 1] + vals[n / 2])
        }
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Pre-activation per encoder.
    pub pre: Vec<Vec<f64>>,
    /// relu(pre) per encoder.
    pub hidden: Vec<Vec<f64>>,
    pub base: TaskLogits,
    /// e_j = U_j z_j; empty unless mixing ran.
    pub embeds: Vec<Vec<f64>>,
    /// Σ_j σ(D[t, j]) e_j per task; empty unless mixing ran.
    pub context: Vec<Vec<f64>>,
    pub out: TaskLogits,
}

fn check_input(x: &FeatureVector, params: &ModelParameters) -> Result<()> {
    if x.dim() != params.feature_dim() {
        return Err(Error::Shape(format!(
            "feature vector has {} entries, model expects {}",
            x.dim(),
            params.feature_dim()
        )));
    }
    Ok(())
}

fn encode_hidden(x: &FeatureVector, proj: &Projection) -> (Vec<f64>, Vec<f64>) {
    let w = &proj.weight;
    let mut pre = proj.bias.clone();
    for (r, p) in pre.iter_mut().enumerate() {
        let row = w.row(r);
        *p += x.iter().map(|(i, v)| row[i] * v).sum::<f64>();
    }
    let hidden = pre.iter().map(|&a| a.max(0.0)).collect();
    (pre, hidden)
}

fn heads(hidden: &[Vec<f64>], params: &ModelParameters) -> TaskLogits {
    TaskLogits(std::array::from_fn(|t| {
        let h = &hidden[params.encoder_index(t)];
        let head = &params.heads[t];
        let mut z = head.bias.clone();
        for (c, zc) in z.iter_mut().enumerate() {
            *zc += dot(head.weight.row(c), h);
        }
        z
    }))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shared projection and task heads, without dependency mixing.
pub fn forward_base(x: &FeatureVector, params: &ModelParameters) -> Result<TaskLogits> {
    check_input(x, params)?;
    let hidden: Vec<Vec<f64>> = params
        .encoders
        .iter()
        .map(|p| encode_hidden(x, p).1)
        .collect();
    Ok(heads(&hidden, params))
}

fn mixing_parts(
    z: &TaskLogits,
    params: &ModelParameters,
    include_diagonal: bool,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, TaskLogits) {
    let embeds: Vec<Vec<f64>> = (0..NUM_DIMENSIONS)
        .map(|j| params.task_embed[j].matvec(&z.0[j]))
        .collect();
    let dim_e = params.task_embed_dim();
    let context: Vec<Vec<f64>> = (0..NUM_DIMENSIONS)
        .map(|t| {
            let mut m = vec![0.0; dim_e];
            for (j, e) in embeds.iter().enumerate() {
                if t == j && !include_diagonal {
                    continue;
                }
                let g = sigmoid(params.dependency.get(t, j));
                for (mk, ek) in m.iter_mut().zip(e) {
                    *mk += g * ek;
                }
            }
            m
        })
        .collect();
    let out = TaskLogits(std::array::from_fn(|t| {
        let delta = params.mix_back[t].matvec(&context[t]);
        z.0[t].iter().zip(&delta).map(|(a, b)| a + b).collect()
    }));
    (embeds, context, out)
}

/// `z'_t = z_t + V_t Σ_j σ(D[t, j]) U_j z_j`.
pub fn apply_dependency_mixing(
    z: &TaskLogits,
    params: &ModelParameters,
    include_diagonal: bool,
) -> TaskLogits {
    mixing_parts(z, params, include_diagonal).2
}

/// Binary: 1 iff σ(z) ≥ 0.5. Ordinal: argmax + 1, ties to the lowest class.
pub fn predict(z: &TaskLogits) -> LabelVector {
    let classes = std::array::from_fn(|t| match Dimension::ALL[t].kind() {
        DimensionKind::Binary => usize::from(sigmoid(z.0[t][0]) >= 0.5),
        DimensionKind::Ordinal3 => {
            let mut best = 0;
            for (c, &v) in z.0[t].iter().enumerate() {
                if v > z.0[t][best] {
                    best = c;
                }
            }
            best
        }
    });
    LabelVector::from_class_indices(classes)
}

/// Element-wise σ(D_raw); only defined for the dependency variant.
pub fn dependency_view(params: &ModelParameters, variant: Variant) -> Result<DependencyMatrixView> {
    if variant != Variant::DependencyMatrix {
        return Err(Error::invalid(
            "variant",
            format!("{variant} has no dependency matrix"),
        ));
    }
    Ok(DependencyMatrixView(std::array::from_fn(|t| {
        std::array::from_fn(|j| sigmoid(params.dependency.get(t, j)))
    })))
}

/// Parameters together with the configuration and loss settings that
/// interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParameters,
    pub losses: [TaskLoss; NUM_DIMENSIONS],
}

impl Model {
    /// Randomly initialized model: weights ~ U(−1/√fan_in, 1/√fan_in),
    /// biases 0, raw dependency entries ~ U(−1, 1).
    pub fn new(config: ModelConfig, feature_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ModelParameters::init(&config, feature_dim, seed);
        let losses = std::array::from_fn(|t| config.task_loss(Dimension::ALL[t]));
        Ok(Model {
            config,
            params,
            losses,
        })
    }

    pub fn from_parts(config: ModelConfig, params: ModelParameters) -> Result<Self> {
        config.validate()?;
        if params.encoders.len() != config.variant.num_encoders() {
            return Err(Error::Shape(format!(
                "{} expects {} encoders, parameters have {}",
                config.variant,
                config.variant.num_encoders(),
                params.encoders.len()
            )));
        }
        let losses = std::array::from_fn(|t| config.task_loss(Dimension::ALL[t]));
        Ok(Model {
            config,
            params,
            losses,
        })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    fn mixes(&self) -> bool {
        self.config.variant == Variant::DependencyMatrix
    }

    /// Sets focal class weights to inverse training frequencies,
    /// normalized so the weights of each focal task average to 1.
    pub fn fit_focal_alpha<'a>(&mut self, gold: impl Iterator<Item = &'a LabelVector> + Clone) {
        if self.config.focal_alpha != FocalAlpha::InverseFrequency {
            return;
        }
        for (t, loss) in self.losses.iter_mut().enumerate() {
            if let TaskLoss::Focal { alpha, .. } = loss {
                let dim = Dimension::ALL[t];
                let mut counts = vec![0usize; dim.kind().num_classes()];
                for g in gold.clone() {
                    counts[g.class_index(dim)] += 1;
                }
                let inv: Vec<f64> = counts.iter().map(|&c| 1.0 / c.max(1) as f64).collect();
                let mean = inv.iter().sum::<f64>() / inv.len() as f64;
                *alpha = inv.iter().map(|w| w / mean).collect();
            }
        }
    }

    pub fn forward_cached(&self, x: &FeatureVector) -> Result<ForwardCache> {
        check_input(x, &self.params)?;
        let (pre, hidden): (Vec<_>, Vec<_>) = self
            .params
            .encoders
            .iter()
            .map(|p| encode_hidden(x, p))
            .unzip();
        let base = heads(&hidden, &self.params);
        let (embeds, context, out) = if self.mixes() {
            mixing_parts(&base, &self.params, !self.config.zero_diagonal)
        } else {
            (Vec::new(), Vec::new(), base.clone())
        };
        Ok(ForwardCache {
            pre,
            hidden,
            base,
            embeds,
            context,
            out,
        })
    }

    /// Final logits (mixed for the dependency variant).
    pub fn forward(&self, x: &FeatureVector) -> Result<TaskLogits> {
        Ok(self.forward_cached(x)?.out)
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<LabelVector> {
        Ok(predict(&self.forward(x)?))
    }

    /// Per-task losses of one example.
    pub fn task_losses(&self, logits: &TaskLogits, gold: &LabelVector) -> [f64; NUM_DIMENSIONS] {
        std::array::from_fn(|t| {
            let dim = Dimension::ALL[t];
            self.losses[t].value(&logits.0[t], gold.class_index(dim))
        })
    }

    /// Mean over `batch` of the scope's summed task loss.
    pub fn batch_loss(&self, batch: &[(&FeatureVector, LabelVector)], scope: LossScope) -> Result<f64> {
        let mut total = 0.0;
        for (x, gold) in batch {
            let z = self.forward(x)?;
            total += total_loss(scope, &self.task_losses(&z, gold));
        }
        Ok(total / batch.len() as f64)
    }

    pub fn dependency_view(&self) -> Result<DependencyMatrixView> {
        dependency_view(&self.params, self.config.variant)
    }
}
