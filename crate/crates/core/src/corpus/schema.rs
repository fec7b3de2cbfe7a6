//! The six effectiveness dimensions and their label ranges.
//!
//! Order is fixed: every array indexed by dimension in this crate uses
//! [`Dimension::ALL`] order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_DIMENSIONS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    EmotionalAppeal,
    AudienceAdaptation,
    Clarity,
    Evidence,
    Rebuttal,
    Fairness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionKind {
    /// Presence (1) or absence (0).
    Binary,
    /// Three-level Likert scale, 1..=3.
    Ordinal3,
}

impl DimensionKind {
    pub const fn min_value(self) -> u8 {
        match self {
            DimensionKind::Binary => 0,
            DimensionKind::Ordinal3 => 1,
        }
    }

    pub const fn max_value(self) -> u8 {
        match self {
            DimensionKind::Binary => 1,
            DimensionKind::Ordinal3 => 3,
        }
    }

    pub const fn num_classes(self) -> usize {
        match self {
            DimensionKind::Binary => 2,
            DimensionKind::Ordinal3 => 3,
        }
    }

    /// Width of the model output for this kind: a single logit for binary
    /// heads, one logit per class otherwise.
    pub const fn num_logits(self) -> usize {
        match self {
            DimensionKind::Binary => 1,
            DimensionKind::Ordinal3 => 3,
        }
    }

    pub const fn range_str(self) -> &'static str {
        match self {
            DimensionKind::Binary => "{0,1}",
            DimensionKind::Ordinal3 => "{1,2,3}",
        }
    }

    pub fn contains(self, value: i64) -> bool {
        value >= self.min_value() as i64 && value <= self.max_value() as i64
    }

    /// Class values in ascending order.
    pub fn values(self) -> std::ops::RangeInclusive<u8> {
        self.min_value()..=self.max_value()
    }
}

impl Dimension {
    pub const ALL: [Dimension; NUM_DIMENSIONS] = [
        Dimension::EmotionalAppeal,
        Dimension::AudienceAdaptation,
        Dimension::Clarity,
        Dimension::Evidence,
        Dimension::Rebuttal,
        Dimension::Fairness,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Dimension> {
        Self::ALL.get(index).copied()
    }

    pub const fn kind(self) -> DimensionKind {
        match self {
            Dimension::EmotionalAppeal | Dimension::AudienceAdaptation => DimensionKind::Binary,
            _ => DimensionKind::Ordinal3,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Dimension::EmotionalAppeal => "emotional_appeal",
            Dimension::AudienceAdaptation => "audience_adaptation",
            Dimension::Clarity => "clarity",
            Dimension::Evidence => "evidence",
            Dimension::Rebuttal => "rebuttal",
            Dimension::Fairness => "fairness",
        }
    }

    /// Column header used in report grids.
    pub const fn short_name(self) -> &'static str {
        match self {
            Dimension::EmotionalAppeal => "Emo.",
            Dimension::AudienceAdaptation => "Aud.",
            Dimension::Clarity => "Clarity",
            Dimension::Evidence => "Evid.",
            Dimension::Rebuttal => "Rebut.",
            Dimension::Fairness => "Fair.",
        }
    }

    pub fn check(self, value: i64) -> Result<u8> {
        if self.kind().contains(value) {
            Ok(value as u8)
        } else {
            Err(Error::ValueRange {
                dimension: self.name(),
                value,
                range: self.kind().range_str(),
            })
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::UnknownDimension(s.to_string()))
    }
}

/// Gold or predicted scores for all six dimensions, in schema order.
///
/// Construction always validates ranges, so a `LabelVector` in hand is
/// guaranteed to satisfy the annotation scale of every dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelVector([u8; NUM_DIMENSIONS]);

impl LabelVector {
    pub fn new(values: [u8; NUM_DIMENSIONS]) -> Result<Self> {
        for (dim, &v) in Dimension::ALL.iter().zip(values.iter()) {
            dim.check(v as i64)?;
        }
        Ok(LabelVector(values))
    }

    pub fn get(&self, dim: Dimension) -> u8 {
        self.0[dim.index()]
    }

    pub fn values(&self) -> [u8; NUM_DIMENSIONS] {
        self.0
    }

    /// Zero-based class index of `dim`'s value.
    pub fn class_index(&self, dim: Dimension) -> usize {
        (self.get(dim) - dim.kind().min_value()) as usize
    }

    pub(crate) fn from_class_indices(classes: [usize; NUM_DIMENSIONS]) -> Self {
        let mut values = [0u8; NUM_DIMENSIONS];
        for (i, dim) in Dimension::ALL.iter().enumerate() {
            debug_assert!(classes[i] < dim.kind().num_classes());
            values[i] = dim.kind().min_value() + classes[i] as u8;
        }
        LabelVector(values)
    }
}

/// Keyed form used by the corpus interchange format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct LabelRecord {
    pub emotional_appeal: i64,
    pub audience_adaptation: i64,
    pub clarity: i64,
    pub evidence: i64,
    pub rebuttal: i64,
    pub fairness: i64,
}

impl LabelRecord {
    pub fn as_array(&self) -> [i64; NUM_DIMENSIONS] {
        [
            self.emotional_appeal,
            self.audience_adaptation,
            self.clarity,
            self.evidence,
            self.rebuttal,
            self.fairness,
        ]
    }
}

impl From<LabelVector> for LabelRecord {
    fn from(v: LabelVector) -> Self {
        let a = v.0.map(i64::from);
        LabelRecord {
            emotional_appeal: a[0],
            audience_adaptation: a[1],
            clarity: a[2],
            evidence: a[3],
            rebuttal: a[4],
            fairness: a[5],
        }
    }
}
