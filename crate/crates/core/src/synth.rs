//! Synthetic labeled corpora with a known dependency between two dimensions.
//!
//! Generator, per item and in this order of random draws (ChaCha8 seeded
//! with `seed`):
//!
//! 1. For each dimension in schema order, `cue_tokens` cue draws. A cue draw
//!    picks a class uniformly, then one of that class's `cues_per_class` cue
//!    words uniformly. Cue words look like `reb2c7` (dimension prefix, class
//!    value, index).
//! 2. `filler_tokens` filler words `w0..w{vocab_size-1}`, uniform.
//! 3. The CS token list is shuffled; the HS text is three filler words.
//! 4. Labels. `Planted`: each dimension's class is drawn from
//!    softmax(β · per-class cue counts). Then, with probability ρ, the
//!    influenced label is overwritten by g(influencer label), where g maps
//!    class index c to c mod (number of influenced classes). Then every
//!    label is independently replaced by a uniform draw with probability
//!    `noise`. `Separable`: every cue draw of a dimension uses one class,
//!    chosen uniformly, and the label is that class.

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dimension, HsCsPair, LabelVector, Source, NUM_DIMENSIONS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    #[default]
    Planted,
    Separable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n_items: usize,
    /// Filler vocabulary size.
    pub vocab_size: usize,
    pub cues_per_class: usize,
    /// Cue draws per dimension per item.
    pub cue_tokens: usize,
    pub filler_tokens: usize,
    /// Inverse temperature on cue counts.
    pub beta: f64,
    pub influencer: Dimension,
    pub influenced: Dimension,
    pub rho: f64,
    pub noise: f64,
    pub seed: u64,
    pub source: Source,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            kind: SyntheticKind::Planted,
            n_items: 10_000,
            vocab_size: 2_000,
            cues_per_class: 20,
            cue_tokens: 6,
            filler_tokens: 8,
            beta: 3.0,
            influencer: Dimension::Rebuttal,
            influenced: Dimension::EmotionalAppeal,
            rho: 0.9,
            noise: 0.05,
            seed: 42,
            source: Source::Conan,
        }
    }
}

impl SyntheticSpec {
    /// The bundled smoke-test corpus: 200 linearly separable items.
    pub fn separable(n_items: usize, seed: u64) -> Self {
        SyntheticSpec {
            kind: SyntheticKind::Separable,
            n_items,
            cue_tokens: 3,
            filler_tokens: 6,
            vocab_size: 500,
            cues_per_class: 4,
            rho: 0.0,
            noise: 0.0,
            seed,
            ..SyntheticSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return Err(Error::invalid("synth.n_items", "must be positive"));
        }
        if self.vocab_size == 0 {
            return Err(Error::invalid("synth.vocab_size", "must be positive"));
        }
        if self.cues_per_class == 0 {
            return Err(Error::invalid("synth.cues_per_class", "must be positive"));
        }
        if self.cue_tokens == 0 {
            return Err(Error::invalid("synth.cue_tokens", "must be positive"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid("synth.beta", format!("{} must be finite and >= 0", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid("synth.rho", format!("{} not in [0, 1]", self.rho)));
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return Err(Error::invalid("synth.noise", format!("{} not in [0, 0.5]", self.noise)));
        }
        if self.influencer == self.influenced {
            return Err(Error::invalid("synth.influenced", "must differ from synth.influencer"));
        }
        Ok(())
    }

    /// g: influencer label value to influenced label value.
    pub fn copy_function(&self, influencer_value: u8) -> u8 {
        let from = self.influencer.kind();
        let to = self.influenced.kind();
        let c = (influencer_value - from.min_value()) as usize;
        (c % to.num_classes()) as u8 + to.min_value()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Per item: the influenced label was set by copying (before noise).
    pub copied: Vec<bool>,
}

fn cue_word(dim: Dimension, value: u8, j: usize) -> String {
    format!("{}{}c{}", &dim.name()[..3], value, j)
}

fn softmax_draw(rng: &mut ChaCha8Rng, logits: &[f64]) -> usize {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            return i;
        }
        u -= wi;
    }
    w.len() - 1
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pairs = Vec::with_capacity(spec.n_items);
    let mut copied = Vec::with_capacity(spec.n_items);
    let width = spec.n_items.to_string().len().max(5);

    for i in 0..spec.n_items {
        let mut tokens = Vec::with_capacity(NUM_DIMENSIONS * spec.cue_tokens + spec.filler_tokens);
        let mut counts: Vec<Vec<f64>> = Vec::with_capacity(NUM_DIMENSIONS);
        let mut fixed = [0u8; NUM_DIMENSIONS];
        for dim in Dimension::ALL {
            let kind = dim.kind();
            let k = kind.num_classes();
            let mut c = vec![0.0; k];
            let chosen = rng.random_range(0..k);
            fixed[dim.index()] = chosen as u8 + kind.min_value();
            for _ in 0..spec.cue_tokens {
                let class = match spec.kind {
                    SyntheticKind::Planted => rng.random_range(0..k),
                    SyntheticKind::Separable => chosen,
                };
                let j = rng.random_range(0..spec.cues_per_class);
                c[class] += 1.0;
                tokens.push(cue_word(dim, class as u8 + kind.min_value(), j));
            }
            counts.push(c);
        }
        for _ in 0..spec.filler_tokens {
            tokens.push(format!("w{}", rng.random_range(0..spec.vocab_size)));
        }
        tokens.shuffle(&mut rng);
        let hs: Vec<String> = (0..3).map(|_| format!("w{}", rng.random_range(0..spec.vocab_size))).collect();

        let mut was_copied = false;
        let labels = match spec.kind {
            SyntheticKind::Separable => fixed,
            SyntheticKind::Planted => {
                let mut v = [0u8; NUM_DIMENSIONS];
                for dim in Dimension::ALL {
                    let logits: Vec<f64> = counts[dim.index()].iter().map(|n| spec.beta * n).collect();
                    v[dim.index()] = softmax_draw(&mut rng, &logits) as u8 + dim.kind().min_value();
                }
                if rng.random::<f64>() < spec.rho {
                    v[spec.influenced.index()] = spec.copy_function(v[spec.influencer.index()]);
                    was_copied = true;
                }
                for dim in Dimension::ALL {
                    if rng.random::<f64>() < spec.noise {
                        let kind = dim.kind();
                        v[dim.index()] = rng.random_range(kind.min_value()..=kind.max_value());
                    }
                }
                v
            }
        };
        pairs.push(HsCsPair {
            id: format!("syn-{i:0width$}"),
            source: spec.source,
            hs_text: hs.join(" "),
            cs_text: tokens.join(" "),
            labels: Some(LabelVector::new(labels)?),
        });
        copied.push(was_copied);
    }
    Ok(SyntheticCorpus {
        corpus: Corpus::from_pairs(pairs, format!("synthetic:{:?}:seed{}", spec.kind, spec.seed))?,
        copied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus_str;
    use std::path::Path;

    fn spec(rho: f64, noise: f64, n: usize) -> SyntheticSpec {
        SyntheticSpec {
            n_items: n,
            rho,
            noise,
            ..SyntheticSpec::default()
        }
    }

    fn labels(c: &SyntheticCorpus) -> Vec<LabelVector> {
        c.corpus.pairs().map(|p| p.labels.unwrap()).collect()
    }

    #[test]
    fn independence_without_copying() {
        let s = spec(0.0, 0.05, 10_000);
        let out = generate(&s).unwrap();
        // influenced given influencer: 3 x 2 contingency table
        let mut table = [[0.0f64; 2]; 3];
        for l in labels(&out) {
            table[(l.get(Dimension::Rebuttal) - 1) as usize][l.get(Dimension::EmotionalAppeal) as usize] += 1.0;
        }
        let n: f64 = table.iter().flatten().sum();
        let mut chi2 = 0.0;
        for r in 0..3 {
            for c in 0..2 {
                let row: f64 = table[r].iter().sum();
                let col: f64 = table.iter().map(|t| t[c]).sum();
                let e = row * col / n;
                chi2 += (table[r][c] - e).powi(2) / e;
            }
            // conditional distribution is near uniform over {0, 1}
            let row: f64 = table[r].iter().sum();
            assert!((table[r][1] / row - 0.5).abs() < 0.03, "{table:?}");
        }
        // df 2, 0.999 quantile 13.82
        assert!(chi2 < 13.82, "chi2 = {chi2}");
        assert!(out.copied.iter().all(|c| !c));
    }

    #[test]
    fn full_copy_is_deterministic() {
        let s = spec(1.0, 0.0, 2_000);
        let out = generate(&s).unwrap();
        for l in labels(&out) {
            let expected = s.copy_function(l.get(Dimension::Rebuttal));
            assert_eq!(l.get(Dimension::EmotionalAppeal), expected);
        }
        assert_eq!(s.copy_function(1), 0);
        assert_eq!(s.copy_function(2), 1);
        assert_eq!(s.copy_function(3), 0);
    }

    #[test]
    fn copy_rate_matches_rho() {
        let s = spec(0.8, 0.0, 10_000);
        let out = generate(&s).unwrap();
        let rate = out.copied.iter().filter(|&&c| c).count() as f64 / 10_000.0;
        assert!((rate - 0.8).abs() < 0.02, "{rate}");
        // direct count: copies always match, independent draws match half the time
        let matches = labels(&out)
            .iter()
            .filter(|l| l.get(Dimension::EmotionalAppeal) == s.copy_function(l.get(Dimension::Rebuttal)))
            .count() as f64
            / 10_000.0;
        assert!((matches - (0.8 + 0.2 * 0.5)).abs() < 0.02, "{matches}");
    }

    #[test]
    fn separable_labels_follow_cues() {
        let out = generate(&SyntheticSpec::separable(200, 7)).unwrap();
        for p in out.corpus.pairs() {
            let l = p.labels.unwrap();
            for dim in Dimension::ALL {
                let prefix = format!("{}{}c", &dim.name()[..3], l.get(dim));
                assert!(p.cs_text.split(' ').any(|t| t.starts_with(&prefix)), "{}", p.cs_text);
            }
        }
    }

    #[test]
    fn output_round_trips_through_the_parser() {
        let out = generate(&spec(0.9, 0.05, 300)).unwrap();
        let text = out.corpus.to_jsonl();
        let back = parse_corpus_str(&text, Path::new("synthetic.jsonl")).unwrap();
        assert_eq!(back.len(), 300);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&spec(0.5, 0.1, 100)).unwrap().corpus.to_jsonl();
        let b = generate(&spec(0.5, 0.1, 100)).unwrap().corpus.to_jsonl();
        assert_eq!(a, b);
        let c = generate(&SyntheticSpec { seed: 1, ..spec(0.5, 0.1, 100) }).unwrap().corpus.to_jsonl();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_specs() {
        for s in [
            spec(1.5, 0.0, 10),
            spec(0.5, 0.6, 10),
            spec(0.5, 0.0, 0),
            SyntheticSpec {
                influenced: Dimension::Rebuttal,
                ..SyntheticSpec::default()
            },
        ] {
            assert!(generate(&s).is_err());
        }
    }
}
