//! HS/CS pair corpora: the line-oriented interchange format, source
//! filtering and deterministic splitting.

mod annotation;
mod schema;
mod split;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annotation::{parse_annotation_str, parse_annotations, AnnotationRecord, AnnotationTable};
pub use schema::{Dimension, DimensionKind, LabelVector, NUM_DIMENSIONS};
pub use split::{split_corpus, SplitSpec};

pub(crate) use schema::LabelRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Conan,
    Twitter,
}

impl Source {
    pub const fn name(self) -> &'static str {
        match self {
            Source::Conan => "conan",
            Source::Twitter => "twitter",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conan" => Ok(Source::Conan),
            "twitter" => Ok(Source::Twitter),
            other => Err(Error::invalid("source", format!("unknown source tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HsCsPair {
    pub id: String,
    pub source: Source,
    pub hs_text: String,
    pub cs_text: String,
    pub labels: Option<LabelVector>,
}

impl HsCsPair {
    pub fn gold(&self) -> Result<LabelVector> {
        self.labels.ok_or_else(|| Error::Unlabeled(self.id.clone()))
    }
}

/// An ordered, immutable collection of pairs with unique ids.
///
/// Pairs are reference counted so that filtering and splitting never copy
/// text.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pairs: Vec<Arc<HsCsPair>>,
    provenance: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    id: String,
    source: String,
    hs_text: String,
    cs_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<LabelRecord>,
}

impl Corpus {
    pub fn from_pairs(pairs: Vec<HsCsPair>, provenance: impl Into<String>) -> Result<Self> {
        Self::from_shared(pairs.into_iter().map(Arc::new).collect(), provenance.into())
    }

    fn from_shared(pairs: Vec<Arc<HsCsPair>>, provenance: String) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for (i, p) in pairs.iter().enumerate() {
            if p.hs_text.is_empty() || p.cs_text.is_empty() {
                return Err(Error::invalid(
                    format!("pair `{}`", p.id),
                    "hs_text and cs_text must be non-empty",
                ));
            }
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: p.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Corpus { pairs, provenance })
    }

    /// Subset sharing pairs with `self`; ids are already unique.
    pub(crate) fn subset(&self, pairs: Vec<Arc<HsCsPair>>, provenance: String) -> Corpus {
        Corpus { pairs, provenance }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl ExactSizeIterator<Item = &HsCsPair> + '_ {
        self.pairs.iter().map(|p| p.as_ref())
    }

    pub fn get(&self, index: usize) -> Option<&HsCsPair> {
        self.pairs.get(index).map(|p| p.as_ref())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.pairs.iter().map(|p| p.id.as_str())
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub(crate) fn shared(&self) -> &[Arc<HsCsPair>] {
        &self.pairs
    }

    /// Concatenates corpora in argument order; ids must stay unique.
    pub fn concat(parts: &[&Corpus]) -> Result<Corpus> {
        let pairs = parts.iter().flat_map(|c| c.pairs.iter().cloned()).collect();
        let provenance = parts
            .iter()
            .map(|c| c.provenance.as_str())
            .collect::<Vec<_>>()
            .join(" + ");
        Self::from_shared(pairs, provenance)
    }

    /// Fails on the first pair without gold labels.
    pub fn require_labels(&self) -> Result<()> {
        for p in self.pairs() {
            p.gold()?;
        }
        Ok(())
    }

    pub fn count_by_source(&self, source: Source) -> usize {
        self.pairs.iter().filter(|p| p.source == source).count()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in self.pairs() {
            let rec = PairRecord {
                id: p.id.clone(),
                source: p.source.name().to_string(),
                hs_text: p.hs_text.clone(),
                cs_text: p.cs_text.clone(),
                labels: p.labels.map(LabelRecord::from),
            };
            out.push_str(&serde_json::to_string(&rec).expect("pair record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// Reads a corpus file in the line-oriented interchange format.
pub fn parse_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_corpus_str(&text, path)
}

/// Parses interchange-format text; `origin` is used in error messages and
/// as the corpus provenance.
pub fn parse_corpus_str(text: &str, origin: &Path) -> Result<Corpus> {
    let mut pairs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let rec: PairRecord = serde_json::from_str(raw).map_err(|e| parse_err(e.to_string()))?;
        let source: Source = rec.source.parse().map_err(|_| {
            parse_err(format!("unknown source tag `{}`", rec.source))
        })?;
        if rec.hs_text.is_empty() || rec.cs_text.is_empty() {
            return Err(parse_err("hs_text and cs_text must be non-empty".into()));
        }
        let labels = match rec.labels {
            None => None,
            Some(l) => {
                let raw_values = l.as_array();
                let mut values = [0u8; NUM_DIMENSIONS];
                for (k, dim) in Dimension::ALL.iter().enumerate() {
                    values[k] = dim.check(raw_values[k]).map_err(|_| Error::LabelRange {
                        path: origin.to_path_buf(),
                        line,
                        dimension: dim.name(),
                        value: raw_values[k],
                        range: dim.kind().range_str(),
                    })?;
                }
                Some(LabelVector::new(values)?)
            }
        };
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId { id: rec.id, line });
        }
        pairs.push(Arc::new(HsCsPair {
            id: rec.id,
            source,
            hs_text: rec.hs_text,
            cs_text: rec.cs_text,
            labels,
        }));
    }
    Ok(Corpus {
        pairs,
        provenance: origin.display().to_string(),
    })
}

/// Pairs whose source matches, in corpus order.
pub fn filter_by_source(corpus: &Corpus, source: Source) -> Corpus {
    let pairs = corpus
        .shared()
        .iter()
        .filter(|p| p.source == source)
        .cloned()
        .collect();
    corpus.subset(pairs, format!("{}[source={source}]", corpus.provenance))
}
