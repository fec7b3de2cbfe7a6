use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Dimension};
use crate::error::{Error, Result};

/// Train/validation/test proportions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    /// Shuffle and slice each class of this dimension separately. Off by
    /// default.
    #[serde(default)]
    pub stratify_by: Option<Dimension>,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            seed,
            stratify_by: None,
        }
    }

    /// 70/10/20.
    pub fn standard(seed: u64) -> Self {
        Self::new(0.7, 0.1, 0.2, seed)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train_fraction", self.train_fraction),
            ("val_fraction", self.val_fraction),
            ("test_fraction", self.test_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid(name, format!("{f} is outside [0, 1]")));
            }
        }
        let sum = self.train_fraction + self.val_fraction + self.test_fraction;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split fractions", format!("sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` items: floor for train and val,
    /// remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // Products within 1e-9 of an integer are taken as that integer.
        let floor = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let train = floor(self.train_fraction).min(n);
        let val = floor(self.val_fraction).min(n - train);
        (train, val, n - train - val)
    }
}

/// Seeded Fisher–Yates shuffle of the corpus (in file order), then
/// consecutive slices of the sizes given by [`SplitSpec::sizes`].
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus, Corpus)> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid("corpus", "cannot split an empty corpus"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared = corpus.shared();

    let (train_idx, val_idx, test_idx) = match spec.stratify_by {
        None => {
            let mut order: Vec<usize> = (0..shared.len()).collect();
            order.shuffle(&mut rng);
            let (a, b, _) = spec.sizes(order.len());
            let test = order.split_off(a + b);
            let val = order.split_off(a);
            (order, val, test)
        }
        Some(dim) => {
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); dim.kind().num_classes()];
            for (i, p) in shared.iter().enumerate() {
                groups[p.gold()?.class_index(dim)].push(i);
            }
            let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
            for mut g in groups {
                g.shuffle(&mut rng);
                let (a, b, _) = spec.sizes(g.len());
                test.extend_from_slice(&g[a + b..]);
                val.extend_from_slice(&g[a..a + b]);
                train.extend_from_slice(&g[..a]);
            }
            (train, val, test)
        }
    };

    let take = |idx: Vec<usize>, part: &str| {
        corpus.subset(
            idx.into_iter().map(|i| shared[i].clone()).collect(),
            format!("{}[{part}, seed={}]", corpus.provenance(), spec.seed),
        )
    };
    Ok((take(train_idx, "train"), take(val_idx, "val"), take(test_idx, "test")))
}
