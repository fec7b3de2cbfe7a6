use serde::{Deserialize, Serialize};

use crate::corpus::{Dimension, DimensionKind, LabelVector, NUM_DIMENSIONS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Support-weighted mean of per-class F1.
    Weighted,
    /// Unweighted mean over classes seen in gold or predictions.
    Macro,
    /// F1 of class 1; binary dimensions only.
    PositiveClass,
}

/// `counts[g][p]`: gold class index `g` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub kind: DimensionKind,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(preds: &[u8], gold: &[u8], kind: DimensionKind) -> Result<Self> {
        if preds.len() != gold.len() {
            return Err(Error::invalid(
                "preds",
                format!("length {} differs from gold length {}", preds.len(), gold.len()),
            ));
        }
        if gold.is_empty() {
            return Err(Error::invalid("gold", "must not be empty"));
        }
        let k = kind.num_classes();
        let mut counts = vec![vec![0usize; k]; k];
        for (&p, &g) in preds.iter().zip(gold) {
            for v in [p, g] {
                if !kind.contains(v as i64) {
                    return Err(Error::ValueRange {
                        dimension: match kind {
                            DimensionKind::Binary => "binary",
                            DimensionKind::Ordinal3 => "ordinal3",
                        },
                        value: v as i64,
                        range: kind.range_str(),
                    });
                }
            }
            let base = kind.min_value();
            counts[(g - base) as usize][(p - base) as usize] += 1;
        }
        Ok(ConfusionMatrix { kind, counts })
    }

    pub fn support(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> usize {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// 2·tp / (2·tp + fp + fn); `None` when the class never occurs.
    pub fn f1(&self, class: usize) -> Option<f64> {
        let tp = self.counts[class][class];
        let denom = self.support(class) + self.predicted(class);
        if denom == 0 {
            None
        } else {
            Some(2.0 * tp as f64 / denom as f64)
        }
    }

    pub fn precision(&self, class: usize) -> f64 {
        let p = self.predicted(class);
        if p == 0 {
            0.0
        } else {
            self.counts[class][class] as f64 / p as f64
        }
    }

    pub fn recall(&self, class: usize) -> f64 {
        let s = self.support(class);
        if s == 0 {
            0.0
        } else {
            self.counts[class][class] as f64 / s as f64
        }
    }
}

/// F1 of one dimension. Values are raw label values (0/1 or 1..3).
pub fn f1_dimension(preds: &[u8], gold: &[u8], kind: DimensionKind, averaging: Averaging) -> Result<f64> {
    let cm = ConfusionMatrix::new(preds, gold, kind)?;
    let k = kind.num_classes();
    match averaging {
        Averaging::Weighted => {
            let total = gold.len() as f64;
            Ok((0..k)
                .map(|c| cm.support(c) as f64 * cm.f1(c).unwrap_or(0.0))
                .sum::<f64>()
                / total)
        }
        Averaging::Macro => {
            let seen: Vec<f64> = (0..k).filter_map(|c| cm.f1(c)).collect();
            Ok(seen.iter().sum::<f64>() / seen.len() as f64)
        }
        Averaging::PositiveClass => {
            if kind != DimensionKind::Binary {
                return Err(Error::invalid("averaging", "positive_class applies to binary dimensions only"));
            }
            // no positives anywhere: predictions agree with gold
            Ok(cm.f1(1).unwrap_or(1.0))
        }
    }
}

/// F1 per dimension in schema order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionScores(pub [f64; NUM_DIMENSIONS]);

impl DimensionScores {
    pub fn get(&self, dim: Dimension) -> f64 {
        self.0[dim.index()]
    }

    /// Arithmetic mean of the six scores.
    pub fn macro_avg(&self) -> f64 {
        self.0.iter().sum::<f64>() / NUM_DIMENSIONS as f64
    }
}

/// Scores every dimension under one averaging mode. `PositiveClass`
/// is not accepted here since ordinal dimensions have no positive class.
pub fn score_labels(preds: &[LabelVector], gold: &[LabelVector], averaging: Averaging) -> Result<DimensionScores> {
    if averaging == Averaging::PositiveClass {
        return Err(Error::invalid("averaging", "positive_class applies to binary dimensions only"));
    }
    let mut out = [0.0; NUM_DIMENSIONS];
    for dim in Dimension::ALL {
        let p: Vec<u8> = preds.iter().map(|l| l.get(dim)).collect();
        let g: Vec<u8> = gold.iter().map(|l| l.get(dim)).collect();
        out[dim.index()] = f1_dimension(&p, &g, dim.kind(), averaging)?;
    }
    Ok(DimensionScores(out))
}
