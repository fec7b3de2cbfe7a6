//! Text to fixed-width features: tokenization plus signed feature hashing of
//! n-grams.
//!
//! The encoder is a desk-scale stand-in for a pretrained contextual
//! encoder. Every n-gram is hashed twice with xxHash64: once for its bucket,
//! once for its sign. Counts are accumulated per bucket and the result is
//! L2-normalized.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::corpus::HsCsPair;
use crate::error::{Error, Result};

const INDEX_SEED: u64 = 0x6373_6469_6d5f_6978;
const SIGN_SEED: u64 = 0x6373_6469_6d5f_7367;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    CsOnly,
    CsPlusHs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub max_tokens: usize,
    pub feature_dim: usize,
    pub ngram_orders: Vec<usize>,
    pub input_mode: InputMode,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            max_tokens: 128,
            feature_dim: 4096,
            ngram_orders: vec![1, 2],
            input_mode: InputMode::CsOnly,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_tokens < 1 {
            return Err(Error::invalid("encoder.max_tokens", "must be >= 1"));
        }
        if self.feature_dim < 2 || self.feature_dim > u32::MAX as usize {
            return Err(Error::invalid("encoder.feature_dim", "must be >= 2"));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.iter().any(|n| !(1..=3).contains(n)) {
            return Err(Error::invalid(
                "encoder.ngram_orders",
                "must be a non-empty subset of {1,2,3}",
            ));
        }
        Ok(())
    }
}

/// Sparse storage of a `dim`-wide feature vector; indices strictly
/// increasing, no explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        FeatureVector {
            dim: dense.len(),
            indices,
            values,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        FeatureVector {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        FeatureVector {
            dim: self.dim,
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Lowercases and splits on every character that is not alphanumeric
/// (whitespace and punctuation both delimit), keeping at most `max_tokens`.
pub fn tokenize(text: &str, max_tokens: usize) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .take(max_tokens)
        .map(str::to_lowercase)
        .collect()
}

/// Bucket and sign for one n-gram.
pub fn hash_ngram(ngram: &[&str], feature_dim: usize) -> (usize, f64) {
    let key = ngram.join(" ");
    let index = (XxHash64::oneshot(INDEX_SEED, key.as_bytes()) % feature_dim as u64) as usize;
    let sign = if XxHash64::oneshot(SIGN_SEED, key.as_bytes()) & 1 == 0 {
        1.0
    } else {
        -1.0
    };
    (index, sign)
}

/// Token stream fed to the hasher; `None` is the HS/CS separator, which
/// occupies a slot of the input window but produces no feature and breaks
/// n-gram windows.
fn token_stream(pair: &HsCsPair, config: &EncoderConfig) -> Vec<Option<String>> {
    let cs = tokenize(&pair.cs_text, config.max_tokens);
    let mut stream: Vec<Option<String>> = match config.input_mode {
        InputMode::CsOnly => cs.into_iter().map(Some).collect(),
        InputMode::CsPlusHs => {
            let hs = tokenize(&pair.hs_text, config.max_tokens);
            let mut s: Vec<Option<String>> = hs.into_iter().map(Some).collect();
            if !s.is_empty() && !cs.is_empty() {
                s.push(None);
            }
            s.extend(cs.into_iter().map(Some));
            s
        }
    };
    stream.truncate(config.max_tokens);
    stream
}

pub fn encode(pair: &HsCsPair, config: &EncoderConfig) -> FeatureVector {
    let stream = token_stream(pair, config);
    let mut buckets: BTreeMap<usize, f64> = BTreeMap::new();
    for segment in stream.split(|t| t.is_none()) {
        let words: Vec<&str> = segment.iter().flatten().map(String::as_str).collect();
        for &n in &config.ngram_orders {
            for gram in words.windows(n) {
                let (index, sign) = hash_ngram(gram, config.feature_dim);
                *buckets.entry(index).or_insert(0.0) += sign;
            }
        }
    }
    buckets.retain(|_, v| *v != 0.0);
    let norm = buckets.values().map(|v| v * v).sum::<f64>().sqrt();
    let (indices, values) = buckets
        .into_iter()
        .map(|(i, v)| (i as u32, v / norm))
        .unzip();
    FeatureVector {
        dim: config.feature_dim,
        indices,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(hs: &str, cs: &str) -> HsCsPair {
        HsCsPair {
            id: "x".into(),
            source: Source::Conan,
            hs_text: hs.into(),
            cs_text: cs.into(),
            labels: None,
        }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Islam literally means peace.", 128),
            ["islam", "literally", "means", "peace"]
        );
        assert!(tokenize("", 128).is_empty());
        let long: String = (0..200).map(|i| format!("w{i} ")).collect();
        let toks = tokenize(&long, 128);
        assert_eq!(toks.len(), 128);
        assert_eq!(toks[0], "w0");
        assert_eq!(toks[127], "w127");
    }

    #[test]
    fn tokenize_unicode_whitespace_and_punctuation() {
        assert_eq!(tokenize("Ça\u{00a0}va?Très–bien", 10), ["ça", "va", "très", "bien"]);
    }

    #[test]
    fn unit_norm_and_case_insensitive() {
        let cfg = EncoderConfig::default();
        let a = encode(&pair("h", "Stop blaming billions for what a handful do."), &cfg);
        let b = encode(&pair("h", "STOP blaming BILLIONS for what a Handful DO."), &cfg);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert_eq!(a, b);
        assert_eq!(a.dim(), 4096);
    }

    #[test]
    fn separator_contributes_nothing() {
        let cs_only = EncoderConfig::default();
        let both = EncoderConfig {
            input_mode: InputMode::CsPlusHs,
            ..EncoderConfig::default()
        };
        let p = pair("", "Research shows most people live peaceful lives.");
        assert_eq!(encode(&p, &cs_only), encode(&p, &both));
        let with_hs = pair("They don't belong here", "Research shows most people live peaceful lives.");
        assert_ne!(encode(&with_hs, &cs_only), encode(&with_hs, &both));
    }

    #[test]
    fn truncation_applies_to_combined_stream() {
        let cfg = EncoderConfig {
            max_tokens: 3,
            input_mode: InputMode::CsPlusHs,
            ngram_orders: vec![1],
            ..EncoderConfig::default()
        };
        // hs(2) + sep + cs(1 of 2): "b" never enters the window
        let full = encode(&pair("x y", "a b"), &cfg);
        let cut = encode(&pair("x y", "a"), &cfg);
        assert_eq!(full, cut);
    }

    #[test]
    fn order_sensitivity_depends_on_ngram_orders() {
        let uni = EncoderConfig {
            ngram_orders: vec![1],
            ..EncoderConfig::default()
        };
        let bi = EncoderConfig::default();
        let a = pair("h", "evidence beats prejudice every time");
        let b = pair("h", "prejudice every time beats evidence");
        assert_eq!(encode(&a, &uni), encode(&b, &uni));
        assert_ne!(encode(&a, &bi), encode(&b, &bi));
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let v = encode(&pair("h", "?!"), &EncoderConfig::default());
        assert_eq!(v.nnz(), 0);
        assert!(v.to_dense().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn hash_buckets_are_spread() {
        let dim = 4096;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = vec![0usize; dim];
        for _ in 0..10_000 {
            let tok: String = (0..8).map(|_| rng.random_range(b'a'..=b'z') as char).collect();
            counts[hash_ngram(&[&tok], dim).0] += 1;
        }
        let mean = 10_000.0 / dim as f64;
        let max = *counts.iter().max().unwrap() as f64;
        assert!(max <= 5.0 * mean, "max bucket {max} vs mean {mean}");
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::default().validate().is_ok());
        let bad = EncoderConfig {
            ngram_orders: vec![1, 4],
            ..EncoderConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EncoderConfig {
            feature_dim: 1,
            ..EncoderConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
