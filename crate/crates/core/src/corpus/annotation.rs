use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dimension;
use crate::error::{Error, Result};

/// One line of an annotation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub annotator_id: String,
    pub dimension: String,
    pub value: i64,
}

/// Items × annotators grid of one dimension's values. `None` marks a
/// missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTable {
    items: Vec<String>,
    annotators: Vec<String>,
    dimension: Dimension,
    values: Vec<Vec<Option<u8>>>,
}

impl AnnotationTable {
    /// `values[i][a]` is annotator `a`'s value for item `i`.
    pub fn new(
        items: Vec<String>,
        annotators: Vec<String>,
        dimension: Dimension,
        values: Vec<Vec<Option<u8>>>,
    ) -> Result<Self> {
        if annotators.len() < 2 {
            return Err(Error::invalid(
                "annotation table",
                format!("needs at least 2 annotators, found {}", annotators.len()),
            ));
        }
        if items.is_empty() {
            return Err(Error::invalid("annotation table", "needs at least 1 item"));
        }
        if values.len() != items.len() || values.iter().any(|row| row.len() != annotators.len()) {
            return Err(Error::Shape(format!(
                "grid must be {} x {}",
                items.len(),
                annotators.len()
            )));
        }
        for v in values.iter().flatten().flatten() {
            dimension.check(*v as i64)?;
        }
        Ok(AnnotationTable {
            items,
            annotators,
            dimension,
            values,
        })
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn rows(&self) -> &[Vec<Option<u8>>] {
        &self.values
    }

    pub fn cell(&self, item: usize, annotator: usize) -> Option<u8> {
        self.values[item][annotator]
    }

    pub fn n_cells(&self) -> usize {
        self.items.len() * self.annotators.len()
    }

    pub fn n_missing_cells(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_none()).count()
    }

    /// Two-annotator (or wider) view keeping only the given columns.
    pub fn select_annotators(&self, columns: &[usize]) -> Result<AnnotationTable> {
        let annotators = columns.iter().map(|&c| self.annotators[c].clone()).collect();
        let values = self
            .values
            .iter()
            .map(|row| columns.iter().map(|&c| row[c]).collect())
            .collect();
        AnnotationTable::new(self.items.clone(), annotators, self.dimension, values)
    }
}

/// Parses every record of an annotation file (all dimensions are validated)
/// and assembles the table for `dimension`.
pub fn parse_annotations(path: &Path, dimension: Dimension) -> Result<AnnotationTable> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_annotation_str(&text, path, dimension)
}

pub fn parse_annotation_str(text: &str, origin: &Path, dimension: Dimension) -> Result<AnnotationTable> {
    let mut cells: BTreeMap<(String, String), u8> = BTreeMap::new();
    let mut items = BTreeSet::new();
    let mut annotators = BTreeSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord = serde_json::from_str(raw).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        let dim: Dimension = rec.dimension.parse().map_err(|_| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: format!("unknown dimension `{}`", rec.dimension),
        })?;
        let value = dim.check(rec.value).map_err(|_| Error::LabelRange {
            path: origin.to_path_buf(),
            line,
            dimension: dim.name(),
            value: rec.value,
            range: dim.kind().range_str(),
        })?;
        if dim != dimension {
            continue;
        }
        items.insert(rec.item_id.clone());
        annotators.insert(rec.annotator_id.clone());
        let key = (rec.item_id, rec.annotator_id);
        if cells.contains_key(&key) {
            return Err(Error::DuplicateCell {
                item: key.0,
                annotator: key.1,
                line,
            });
        }
        cells.insert(key, value);
    }

    let items: Vec<String> = items.into_iter().collect();
    let annotators: Vec<String> = annotators.into_iter().collect();
    let values = items
        .iter()
        .map(|it| {
            annotators
                .iter()
                .map(|an| cells.get(&(it.clone(), an.clone())).copied())
                .collect()
        })
        .collect();
    AnnotationTable::new(items, annotators, dimension, values)
}
