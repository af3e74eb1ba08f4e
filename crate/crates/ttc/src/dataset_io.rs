//! JSONL datasets, one instance per line:
//! `{"feature": [0.1, -2.0], "labels": ["Food", "Fruit", "Apple"]}`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use ttc_core::data::DataError;
use ttc_core::{Dataset, Instance, Taxonomy};

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: expected {expected} labels, found {found}")]
    LabelCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown label {name:?} at level {level} on line {line}")]
    UnknownLabel {
        line: usize,
        level: usize,
        name: String,
    },
    #[error("inconsistent label path at line {line}")]
    InconsistentPath { line: usize },
    #[error("feature dimension mismatch at line {line}: expected {expected}, found {found}")]
    FeatureDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: feature dimension must be at least 1")]
    EmptyFeature { line: usize },
    #[error("empty dataset")]
    Empty,
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    feature: Vec<f64>,
    labels: Vec<String>,
}

/// Parses JSONL from `reader`. Blank lines are skipped; line numbers in
/// errors count from 1 and include blank lines.
pub fn read_jsonl<R: BufRead>(reader: R, taxonomy: &Taxonomy) -> Result<Dataset, DatasetIoError> {
    let levels = taxonomy.num_levels();
    let mut instances = Vec::new();
    let mut dim = None;
    for (i, text) in reader.lines().enumerate() {
        let line = i + 1;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let parsed: Line =
            serde_json::from_str(&text).map_err(|source| DatasetIoError::Json { line, source })?;
        if parsed.labels.len() != levels {
            return Err(DatasetIoError::LabelCount {
                line,
                expected: levels,
                found: parsed.labels.len(),
            });
        }
        let labels = parsed
            .labels
            .iter()
            .enumerate()
            .map(|(l, name)| {
                taxonomy
                    .class_id(l + 1, name)
                    .map(|c| c.index)
                    .ok_or_else(|| DatasetIoError::UnknownLabel {
                        line,
                        level: l + 1,
                        name: name.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if taxonomy.is_consistent_indices(&labels) != Ok(true) {
            return Err(DatasetIoError::InconsistentPath { line });
        }
        let expected = *dim.get_or_insert(parsed.feature.len());
        if expected == 0 {
            return Err(DatasetIoError::EmptyFeature { line });
        }
        if parsed.feature.len() != expected {
            return Err(DatasetIoError::FeatureDimension {
                line,
                expected,
                found: parsed.feature.len(),
            });
        }
        instances.push(Instance {
            feature: parsed.feature,
            labels,
        });
    }
    let dim = dim.ok_or(DatasetIoError::Empty)?;
    Ok(Dataset::new(dim, instances, taxonomy)?)
}

pub fn load_jsonl(path: &Path, taxonomy: &Taxonomy) -> Result<Dataset, DatasetIoError> {
    let file = std::fs::File::open(path)?;
    read_jsonl(BufReader::new(file), taxonomy)
}

/// Writes `ds` with labels as class names.
pub fn write_jsonl<W: Write>(
    mut out: W,
    ds: &Dataset,
    taxonomy: &Taxonomy,
) -> Result<(), DatasetIoError> {
    for inst in ds.instances() {
        let labels = inst
            .labels
            .iter()
            .enumerate()
            .map(|(l, &idx)| {
                taxonomy
                    .level_names(l + 1)
                    .ok()
                    .and_then(|names| names.get(idx))
                    .cloned()
                    .ok_or(DatasetIoError::Data(DataError::TaxonomyMismatch))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let line = Line {
            feature: inst.feature.clone(),
            labels,
        };
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_jsonl(path: &Path, ds: &Dataset, taxonomy: &Taxonomy) -> Result<(), DatasetIoError> {
    let file = std::fs::File::create(path)?;
    write_jsonl(std::io::BufWriter::new(file), ds, taxonomy)
}
