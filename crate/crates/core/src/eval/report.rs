use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Averaging, DimensionScores, Evaluation};
use crate::corpus::{Dimension, NUM_DIMENSIONS};
use crate::error::{Error, Result};
use crate::model::Variant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Combined,
    ConanToTwitter,
    TwitterToConan,
    InTwitter,
    InConan,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Combined,
        Protocol::ConanToTwitter,
        Protocol::TwitterToConan,
        Protocol::InTwitter,
        Protocol::InConan,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            Protocol::Combined => "combined",
            Protocol::ConanToTwitter => "conan_to_twitter",
            Protocol::TwitterToConan => "twitter_to_conan",
            Protocol::InTwitter => "in_twitter",
            Protocol::InConan => "in_conan",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid("protocol", format!("unknown protocol `{s}`")))
    }
}

/// Mean and sample standard deviation of per-seed values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// Only one value: `std` is reported as 0.
    pub single_seed: bool,
}

pub fn aggregate_runs(values: &[f64]) -> Result<MeanStd> {
    let n = values.len();
    if n == 0 {
        return Err(Error::invalid("scores", "need at least one seed"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(MeanStd {
        mean,
        std,
        n,
        single_seed: n < 2,
    })
}

/// `0.96 ± 0.01`
pub fn format_mean_std(m: &MeanStd) -> String {
    format!("{:.2} ± {:.2}", m.mean, m.std)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub evaluation: Evaluation,
}

/// One results-table row: a model variant under one protocol, every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Configured name, e.g. `dep_m_6e`.
    pub variant_id: String,
    pub variant: Variant,
    pub protocol: Protocol,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
}

/// Six dimension cells plus the AVG cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub cells: [MeanStd; NUM_DIMENSIONS + 1],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Scores {
    emotional_appeal: f64,
    audience_adaptation: f64,
    clarity: f64,
    evidence: f64,
    rebuttal: f64,
    fairness: f64,
    macro_avg: f64,
}

impl Scores {
    fn from_array(v: [f64; NUM_DIMENSIONS], avg: f64) -> Self {
        Scores {
            emotional_appeal: v[0],
            audience_adaptation: v[1],
            clarity: v[2],
            evidence: v[3],
            rebuttal: v[4],
            fairness: v[5],
            macro_avg: avg,
        }
    }

    fn dims(&self) -> DimensionScores {
        DimensionScores([
            self.emotional_appeal,
            self.audience_adaptation,
            self.clarity,
            self.evidence,
            self.rebuttal,
            self.fairness,
        ])
    }
}

impl From<DimensionScores> for Scores {
    fn from(d: DimensionScores) -> Self {
        Scores::from_array(d.0, d.macro_avg())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Positive {
    emotional_appeal: f64,
    audience_adaptation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Seed {
        variant_id: String,
        variant: Variant,
        protocol: Protocol,
        seed: u64,
        n_train: usize,
        n_val: usize,
        n_test: usize,
        weighted: Scores,
        #[serde(rename = "macro")]
        macro_f1: Scores,
        positive_class: Positive,
    },
    Aggregate {
        variant_id: String,
        variant: Variant,
        protocol: Protocol,
        seeds: Vec<u64>,
        averaging: Averaging,
        single_seed: bool,
        mean: Scores,
        std: Scores,
    },
}

impl RunReport {
    fn scores(&self, averaging: Averaging) -> Vec<DimensionScores> {
        self.runs
            .iter()
            .map(|r| match averaging {
                Averaging::Macro => r.evaluation.macro_f1,
                _ => r.evaluation.weighted,
            })
            .collect()
    }

    /// Per-seed AVG column (mean of the six dimension scores).
    pub fn macro_avgs(&self, averaging: Averaging) -> Vec<f64> {
        self.scores(averaging).iter().map(|s| s.macro_avg()).collect()
    }

    /// Mean ± std per dimension and for AVG. `PositiveClass` is treated
    /// as `Weighted` since it has no ordinal counterpart.
    pub fn summary(&self, averaging: Averaging) -> Result<SummaryRow> {
        let scores = self.scores(averaging);
        let mut cells = Vec::with_capacity(NUM_DIMENSIONS + 1);
        for t in 0..NUM_DIMENSIONS {
            let v: Vec<f64> = scores.iter().map(|s| s.0[t]).collect();
            cells.push(aggregate_runs(&v)?);
        }
        cells.push(aggregate_runs(&self.macro_avgs(averaging))?);
        Ok(SummaryRow {
            label: self.variant_id.clone(),
            cells: cells.try_into().expect("seven cells"),
        })
    }

    /// Machine-readable records: one per seed, then one aggregate per
    /// averaging mode.
    pub fn to_records(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.runs {
            let rec = Record::Seed {
                variant_id: self.variant_id.clone(),
                variant: self.variant,
                protocol: self.protocol,
                seed: r.seed,
                n_train: r.n_train,
                n_val: r.n_val,
                n_test: r.n_test,
                weighted: r.evaluation.weighted.into(),
                macro_f1: r.evaluation.macro_f1.into(),
                positive_class: Positive {
                    emotional_appeal: r.evaluation.positive_class[0],
                    audience_adaptation: r.evaluation.positive_class[1],
                },
            };
            out.push_str(&serde_json::to_string(&rec)?);
            out.push('\n');
        }
        for averaging in [Averaging::Weighted, Averaging::Macro] {
            let row = self.summary(averaging)?;
            let means: Vec<f64> = row.cells.iter().map(|c| c.mean).collect();
            let stds: Vec<f64> = row.cells.iter().map(|c| c.std).collect();
            let pick = |v: &[f64]| Scores::from_array(v[..NUM_DIMENSIONS].try_into().expect("six"), v[NUM_DIMENSIONS]);
            let rec = Record::Aggregate {
                variant_id: self.variant_id.clone(),
                variant: self.variant,
                protocol: self.protocol,
                seeds: self.seeds.clone(),
                averaging,
                single_seed: row.cells[0].single_seed,
                mean: pick(&means),
                std: pick(&stds),
            };
            out.push_str(&serde_json::to_string(&rec)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Rebuilds reports from seed records, grouped by (variant_id,
    /// protocol) in order of first appearance. Aggregate lines are skipped.
    pub fn from_records(text: &str) -> Result<Vec<RunReport>> {
        let mut reports: Vec<RunReport> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: "<records>".into(),
                line: i + 1,
                message: e.to_string(),
            })?;
            let Record::Seed {
                variant_id,
                variant,
                protocol,
                seed,
                n_train,
                n_val,
                n_test,
                weighted,
                macro_f1,
                positive_class,
            } = rec
            else {
                continue;
            };
            let run = SeedRun {
                seed,
                n_train,
                n_val,
                n_test,
                evaluation: Evaluation {
                    weighted: weighted.dims(),
                    macro_f1: macro_f1.dims(),
                    positive_class: [positive_class.emotional_appeal, positive_class.audience_adaptation],
                },
            };
            match reports
                .iter_mut()
                .find(|r| r.variant_id == variant_id && r.protocol == protocol)
            {
                Some(r) => {
                    if r.variant != variant {
                        return Err(Error::invalid(
                            "records",
                            format!("line {}: `{variant_id}` recorded with two model variants", i + 1),
                        ));
                    }
                    if r.seeds.contains(&seed) {
                        return Err(Error::invalid(
                            "records",
                            format!("line {}: seed {seed} repeated for `{variant_id}`", i + 1),
                        ));
                    }
                    r.seeds.push(seed);
                    r.runs.push(run);
                }
                None => reports.push(RunReport {
                    variant_id,
                    variant,
                    protocol,
                    seeds: vec![seed],
                    runs: vec![run],
                }),
            }
        }
        Ok(reports)
    }
}

/// Results grid: one row per report, mean ± std cells.
pub fn render_table(reports: &[RunReport], averaging: Averaging) -> Result<String> {
    let width = reports
        .iter()
        .map(|r| r.variant_id.chars().count())
        .chain(std::iter::once(5))
        .max()
        .unwrap_or(5);
    let mut out = format!("{:<width$}", "Model");
    for d in Dimension::ALL {
        out.push_str(&format!("  {:<11}", d.short_name()));
    }
    out.push_str("  AVG\n");
    for r in reports {
        let row = r.summary(averaging)?;
        out.push_str(&format!("{:<width$}", row.label));
        for (k, c) in row.cells.iter().enumerate() {
            if k == NUM_DIMENSIONS {
                out.push_str(&format!("  {}", format_mean_std(c)));
            } else {
                out.push_str(&format!("  {:<11}", format_mean_std(c)));
            }
        }
        out.push('\n');
    }
    Ok(out)
}
