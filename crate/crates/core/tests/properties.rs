//! Cross-module properties exercised through the public API.

use std::collections::HashSet;

use csdim::corpus::{parse_corpus, parse_corpus_str, split_corpus, Corpus, SplitSpec};
use csdim::encoder::{encode, EncoderConfig};
use csdim::eval::{evaluate, prepare_splits, Corpora, Protocol};
use csdim::model::{Checkpoint, ModelConfig, Variant};
use csdim::synth::{generate, SyntheticKind, SyntheticSpec};
use csdim::trainer::{train, TrainConfig};
use proptest::prelude::*;

fn ids(c: &Corpus) -> HashSet<String> {
    c.ids().map(str::to_string).collect()
}

fn small_spec(kind: SyntheticKind, n: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        kind,
        n_items: n,
        vocab_size: 50,
        seed,
        ..SyntheticSpec::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn synthetic_corpora_reparse_exactly(n in 1usize..60, seed in any::<u64>(), separable in any::<bool>()) {
        let kind = if separable { SyntheticKind::Separable } else { SyntheticKind::Planted };
        let c = generate(&small_spec(kind, n, seed)).unwrap().corpus;
        let text = c.to_jsonl();
        let back = parse_corpus_str(&text, std::path::Path::new("<mem>")).unwrap();
        prop_assert_eq!(back.pairs().collect::<Vec<_>>(), c.pairs().collect::<Vec<_>>());
        prop_assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn split_is_a_partition(n in 1usize..120, seed in any::<u64>()) {
        let c = generate(&small_spec(SyntheticKind::Planted, n, 1)).unwrap().corpus;
        let (tr, va, te) = split_corpus(&c, &SplitSpec::standard(seed)).unwrap();
        let (a, b, d) = (ids(&tr), ids(&va), ids(&te));
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&d) && b.is_disjoint(&d));
        let all: HashSet<_> = a.union(&b).chain(d.iter()).cloned().collect();
        prop_assert_eq!(all, ids(&c));
        prop_assert_eq!((tr.len(), va.len(), te.len()), SplitSpec::standard(seed).sizes(n));
    }

    #[test]
    fn protocols_keep_test_items_out_of_training(seed in any::<u64>()) {
        let conan = generate(&SyntheticSpec { n_items: 40, ..small_spec(SyntheticKind::Planted, 40, 3) }).unwrap().corpus;
        let corpora = Corpora { conan: Some(conan), ..Corpora::default() };
        let (tr, va, te) = prepare_splits(Protocol::InConan, &corpora, seed).unwrap();
        let test = ids(&te);
        prop_assert!(test.is_disjoint(&ids(&tr)) && test.is_disjoint(&ids(&va)));
    }

    #[test]
    fn encoding_is_pure(seed in any::<u64>()) {
        let c = generate(&small_spec(SyntheticKind::Planted, 5, seed)).unwrap().corpus;
        let cfg = EncoderConfig::default();
        for p in c.pairs() {
            prop_assert_eq!(encode(p, &cfg), encode(&p.clone(), &cfg.clone()));
        }
    }
}

#[test]
fn seeds_change_train_membership() {
    let c = generate(&small_spec(SyntheticKind::Planted, 20, 0)).unwrap().corpus;
    let memberships: HashSet<Vec<String>> = [42, 0, 1, 2, 3]
        .into_iter()
        .map(|s| {
            let mut v: Vec<String> = ids(&split_corpus(&c, &SplitSpec::standard(s)).unwrap().0).into_iter().collect();
            v.sort();
            v
        })
        .collect();
    assert!(memberships.len() >= 2);
}

#[test]
fn trained_checkpoint_round_trips_through_disk() {
    let c = generate(&SyntheticSpec::separable(120, 4)).unwrap().corpus;
    let (tr, va, te) = split_corpus(&c, &SplitSpec::standard(4)).unwrap();
    let enc = EncoderConfig {
        feature_dim: 256,
        ..EncoderConfig::default()
    };
    let cfg = ModelConfig {
        variant: Variant::DependencyMatrix,
        hidden_dim: 16,
        ..ModelConfig::default()
    };
    let (model, history) = train(&cfg, &enc, &tr, &va, &TrainConfig { epochs: 2, ..TrainConfig::default() }).unwrap();
    assert_eq!(history.epochs.len(), 2);
    assert!(model.params.is_finite());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    Checkpoint::from_model(&model, &enc).save(&path).unwrap();
    let (back, enc_back) = Checkpoint::load(&path).unwrap().into_model().unwrap();
    assert_eq!(enc_back, enc);
    assert_eq!(back.params, model.params);
    assert_eq!(evaluate(&back, &enc, &te).unwrap(), evaluate(&model, &enc, &te).unwrap());

    c.write_jsonl(&dir.path().join("c.jsonl")).unwrap();
    let reread = parse_corpus(&dir.path().join("c.jsonl")).unwrap();
    assert_eq!(reread.pairs().collect::<Vec<_>>(), c.pairs().collect::<Vec<_>>());
}
