use rayon::prelude::*;

use super::report::{Protocol, RunReport, SeedRun};
use super::evaluate;
use crate::corpus::{split_corpus, Corpus, Source, SplitSpec};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::trainer::{train, TrainConfig, TrainHistory};

/// Corpora available to a protocol. `combined` overrides conan + twitter
/// for the combined protocol.
#[derive(Debug, Clone, Default)]
pub struct Corpora {
    pub conan: Option<Corpus>,
    pub twitter: Option<Corpus>,
    pub combined: Option<Corpus>,
}

impl Corpora {
    fn single(&self, source: Source) -> Result<&Corpus> {
        let c = match source {
            Source::Conan => self.conan.as_ref(),
            Source::Twitter => self.twitter.as_ref(),
        }
        .ok_or_else(|| Error::invalid("corpora", format!("missing {source} corpus")))?;
        let other = match source {
            Source::Conan => Source::Twitter,
            Source::Twitter => Source::Conan,
        };
        let stray = c.count_by_source(other);
        if stray > 0 {
            return Err(Error::invalid(
                "corpora",
                format!("{source} corpus contains {stray} pairs tagged {other}"),
            ));
        }
        Ok(c)
    }

    fn combined(&self) -> Result<Corpus> {
        match &self.combined {
            Some(c) => Ok(c.clone()),
            None => Corpus::concat(&[self.single(Source::Conan)?, self.single(Source::Twitter)?]),
        }
    }
}

/// `(train, val, test)` for one seed.
///
/// Combined and in-domain protocols split 70/10/20. Cross-domain protocols
/// split the source corpus 87.5/12.5 into train/val (the 70:10 ratio) and
/// test on the whole target corpus.
pub fn prepare_splits(protocol: Protocol, corpora: &Corpora, seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    let cross = |from: Source, to: Source| -> Result<(Corpus, Corpus, Corpus)> {
        let source = corpora.single(from)?;
        let target = corpora.single(to)?;
        if target.is_empty() {
            return Err(Error::invalid("corpora", format!("{to} corpus is empty")));
        }
        let (tr, _, va) = split_corpus(source, &SplitSpec::new(0.875, 0.0, 0.125, seed))?;
        Ok((tr, va, target.clone()))
    };
    let splits = match protocol {
        Protocol::Combined => split_corpus(&corpora.combined()?, &SplitSpec::standard(seed))?,
        Protocol::InConan => split_corpus(corpora.single(Source::Conan)?, &SplitSpec::standard(seed))?,
        Protocol::InTwitter => split_corpus(corpora.single(Source::Twitter)?, &SplitSpec::standard(seed))?,
        Protocol::ConanToTwitter => cross(Source::Conan, Source::Twitter)?,
        Protocol::TwitterToConan => cross(Source::Twitter, Source::Conan)?,
    };
    for part in [&splits.0, &splits.1, &splits.2] {
        part.require_labels()?;
    }
    Ok(splits)
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub model: Model,
    pub history: TrainHistory,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutput {
    pub report: RunReport,
    /// Seed order matches `report.seeds`.
    pub outcomes: Vec<SeedOutcome>,
}

/// Trains and tests one model configuration for every seed. Seeds run on
/// up to `workers` threads; results keep seed order.
#[allow(clippy::too_many_arguments)]
pub fn run_protocol(
    protocol: Protocol,
    variant_id: &str,
    model_config: &ModelConfig,
    encoder_config: &EncoderConfig,
    train_config: &TrainConfig,
    corpora: &Corpora,
    seeds: &[u64],
    workers: usize,
) -> Result<ProtocolOutput> {
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "must not be empty"));
    }
    let one = |seed: u64| -> Result<(SeedRun, SeedOutcome)> {
        let (tr, va, te) = prepare_splits(protocol, corpora, seed)?;
        let tc = TrainConfig {
            seed,
            ..train_config.clone()
        };
        let (model, history) = train(model_config, encoder_config, &tr, &va, &tc)?;
        let evaluation = evaluate(&model, encoder_config, &te)?;
        Ok((
            SeedRun {
                seed,
                n_train: tr.len(),
                n_val: va.len(),
                n_test: te.len(),
                evaluation,
            },
            SeedOutcome { seed, model, history },
        ))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let results: Vec<Result<(SeedRun, SeedOutcome)>> = pool.install(|| seeds.par_iter().map(|&s| one(s)).collect());

    let mut runs = Vec::with_capacity(seeds.len());
    let mut outcomes = Vec::with_capacity(seeds.len());
    for r in results {
        let (run, outcome) = r?;
        runs.push(run);
        outcomes.push(outcome);
    }
    Ok(ProtocolOutput {
        report: RunReport {
            variant_id: variant_id.to_string(),
            variant: model_config.variant,
            protocol,
            seeds: seeds.to_vec(),
            runs,
        },
        outcomes,
    })
}
