use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MixBackInit, ModelConfig};
use crate::corpus::{Dimension, NUM_DIMENSIONS};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        Matrix {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|r| super::dot(self.row(r), v)).collect()
    }

    /// `selfᵀ v`
    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += vr * w;
            }
        }
        out
    }

    /// `self += a ⊗ b`
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!((a.len(), b.len()), (self.rows, self.cols));
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            for (w, bc) in self.row_mut(r).iter_mut().zip(b) {
                *w += ar * bc;
            }
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }
}

/// Affine layer `weight · x + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Projection {
    fn zeros(out: usize, inp: usize) -> Self {
        Projection {
            weight: Matrix::zeros(out, inp),
            bias: vec![0.0; out],
        }
    }

    fn init(out: usize, inp: usize, rng: &mut ChaCha8Rng) -> Self {
        Projection {
            weight: Matrix::uniform(out, inp, 1.0 / (inp as f64).sqrt(), rng),
            bias: vec![0.0; out],
        }
    }
}

/// Which family a parameter tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Encoder,
    Head,
    /// U_t
    TaskEmbed,
    /// V_t
    MixBack,
    /// D_raw
    Dependency,
}

impl ParamKind {
    /// Parameters that only matter through dependency mixing.
    pub fn is_mixing(self) -> bool {
        matches!(self, ParamKind::TaskEmbed | ParamKind::MixBack | ParamKind::Dependency)
    }
}

/// All trainable tensors. The same shape doubles as a gradient container
/// and as optimizer moment storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    /// One shared projection, or one per task for the independent variant.
    pub encoders: Vec<Projection>,
    /// `c_t × hidden` head per task.
    pub heads: Vec<Projection>,
    /// U_t: `task_embed × c_t`.
    pub task_embed: Vec<Matrix>,
    /// V_t: `c_t × task_embed`.
    pub mix_back: Vec<Matrix>,
    /// Unconstrained 6×6 D_raw; row = influenced, column = influencing.
    pub dependency: Matrix,
}

impl ModelParameters {
    pub fn zeros(num_encoders: usize, feature_dim: usize, hidden_dim: usize, task_embed_dim: usize) -> Self {
        let widths = Dimension::ALL.map(|d| d.kind().num_logits());
        ModelParameters {
            encoders: (0..num_encoders)
                .map(|_| Projection::zeros(hidden_dim, feature_dim))
                .collect(),
            heads: widths.iter().map(|&c| Projection::zeros(c, hidden_dim)).collect(),
            task_embed: widths.iter().map(|&c| Matrix::zeros(task_embed_dim, c)).collect(),
            mix_back: widths.iter().map(|&c| Matrix::zeros(c, task_embed_dim)).collect(),
            dependency: Matrix::zeros(NUM_DIMENSIONS, NUM_DIMENSIONS),
        }
    }

    pub fn init(config: &ModelConfig, feature_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = Dimension::ALL.map(|d| d.kind().num_logits());
        let (hidden, embed) = (config.hidden_dim, config.task_embed_dim);
        let encoders = (0..config.variant.num_encoders())
            .map(|_| Projection::init(hidden, feature_dim, &mut rng))
            .collect();
        let heads = widths.iter().map(|&c| Projection::init(c, hidden, &mut rng)).collect();
        let task_embed = widths
            .iter()
            .map(|&c| Matrix::uniform(embed, c, 1.0 / (c as f64).sqrt(), &mut rng))
            .collect();
        let mut mix_back: Vec<Matrix> = widths
            .iter()
            .map(|&c| Matrix::uniform(c, embed, 1.0 / (embed as f64).sqrt(), &mut rng))
            .collect();
        // drawn either way so D_raw does not depend on the choice
        if config.mix_back_init == MixBackInit::Zero {
            for v in &mut mix_back {
                v.fill(0.0);
            }
        }
        let dependency = Matrix::uniform(NUM_DIMENSIONS, NUM_DIMENSIONS, 1.0, &mut rng);
        ModelParameters {
            encoders,
            heads,
            task_embed,
            mix_back,
            dependency,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, v: f64) {
        for s in self.slices_mut() {
            s.fill(v);
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.encoders[0].weight.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoders[0].weight.rows
    }

    pub fn task_embed_dim(&self) -> usize {
        self.task_embed[0].rows
    }

    pub fn encoder_index(&self, task: usize) -> usize {
        if self.encoders.len() == NUM_DIMENSIONS {
            task
        } else {
            0
        }
    }

    /// Tensor names, shapes and kinds in the canonical order shared by
    /// [`slices`](Self::slices) and [`slices_mut`](Self::slices_mut).
    pub fn layout(&self) -> Vec<(String, Vec<usize>, ParamKind)> {
        let mut out = Vec::new();
        for (k, e) in self.encoders.iter().enumerate() {
            out.push((format!("encoder.{k}.weight"), vec![e.weight.rows, e.weight.cols], ParamKind::Encoder));
            out.push((format!("encoder.{k}.bias"), vec![e.bias.len()], ParamKind::Encoder));
        }
        for (t, h) in self.heads.iter().enumerate() {
            let name = Dimension::ALL[t].name();
            out.push((format!("head.{name}.weight"), vec![h.weight.rows, h.weight.cols], ParamKind::Head));
            out.push((format!("head.{name}.bias"), vec![h.bias.len()], ParamKind::Head));
        }
        for (t, u) in self.task_embed.iter().enumerate() {
            out.push((format!("task_embed.{}", Dimension::ALL[t].name()), vec![u.rows, u.cols], ParamKind::TaskEmbed));
        }
        for (t, v) in self.mix_back.iter().enumerate() {
            out.push((format!("mix_back.{}", Dimension::ALL[t].name()), vec![v.rows, v.cols], ParamKind::MixBack));
        }
        out.push(("dependency".into(), vec![NUM_DIMENSIONS, NUM_DIMENSIONS], ParamKind::Dependency));
        out
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for e in &self.encoders {
            out.push(&e.weight.data);
            out.push(&e.bias);
        }
        for h in &self.heads {
            out.push(&h.weight.data);
            out.push(&h.bias);
        }
        out.extend(self.task_embed.iter().map(|m| m.data.as_slice()));
        out.extend(self.mix_back.iter().map(|m| m.data.as_slice()));
        out.push(&self.dependency.data);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for e in &mut self.encoders {
            out.push(&mut e.weight.data);
            out.push(&mut e.bias);
        }
        for h in &mut self.heads {
            out.push(&mut h.weight.data);
            out.push(&mut h.bias);
        }
        out.extend(self.task_embed.iter_mut().map(|m| m.data.as_mut_slice()));
        out.extend(self.mix_back.iter_mut().map(|m| m.data.as_mut_slice()));
        out.push(&mut self.dependency.data);
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Largest absolute element-wise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &ModelParameters) -> f64 {
        self.slices()
            .iter()
            .zip(other.slices())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}
