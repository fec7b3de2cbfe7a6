//! Scoring, seed aggregation and the experimental protocols.

mod metrics;
mod protocol;
mod report;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dimension, LabelVector};
use crate::encoder::{encode, EncoderConfig, FeatureVector};
use crate::error::Result;
use crate::model::Model;

pub use metrics::{f1_dimension, score_labels, Averaging, ConfusionMatrix, DimensionScores};
pub use protocol::{prepare_splits, run_protocol, Corpora, ProtocolOutput, SeedOutcome};
pub use report::{aggregate_runs, format_mean_std, render_table, MeanStd, Protocol, RunReport, SeedRun, SummaryRow};

/// All three averaging modes for one test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub weighted: DimensionScores,
    #[serde(rename = "macro")]
    pub macro_f1: DimensionScores,
    /// Positive-class F1 of emotional_appeal and audience_adaptation.
    pub positive_class: [f64; 2],
}

pub fn evaluate_encoded(model: &Model, xs: &[FeatureVector], gold: &[LabelVector]) -> Result<Evaluation> {
    let preds = xs.iter().map(|x| model.predict(x)).collect::<Result<Vec<_>>>()?;
    evaluate_labels(&preds, gold)
}

pub fn evaluate_labels(preds: &[LabelVector], gold: &[LabelVector]) -> Result<Evaluation> {
    let mut positive_class = [0.0; 2];
    for (slot, d) in positive_class.iter_mut().zip([Dimension::EmotionalAppeal, Dimension::AudienceAdaptation]) {
        let p: Vec<u8> = preds.iter().map(|l| l.get(d)).collect();
        let g: Vec<u8> = gold.iter().map(|l| l.get(d)).collect();
        *slot = f1_dimension(&p, &g, d.kind(), Averaging::PositiveClass)?;
    }
    Ok(Evaluation {
        weighted: score_labels(preds, gold, Averaging::Weighted)?,
        macro_f1: score_labels(preds, gold, Averaging::Macro)?,
        positive_class,
    })
}

/// Encodes a labeled corpus and scores the model on it.
pub fn evaluate(model: &Model, encoder: &EncoderConfig, corpus: &Corpus) -> Result<Evaluation> {
    let mut xs = Vec::with_capacity(corpus.len());
    let mut gold = Vec::with_capacity(corpus.len());
    for pair in corpus.pairs() {
        gold.push(pair.gold()?);
        xs.push(encode(pair, encoder));
    }
    evaluate_encoded(model, &xs, &gold)
}
