//! Taxonomy JSON documents.
//!
//! ```json
//! {"levels": [["Food", "Jewelry"], ["Fruit", "Jewel"]],
//!  "parents": {"2/Fruit": "Food", "2/Jewel": "Jewelry"}}
//! ```
//!
//! Keys of `parents` are `<level>/<child name>` with levels counted from 1.
//! Parent names are looked up one level above the child; a name found only
//! at some other level is kept as an edge to that level so that validation
//! can report it. Repeated keys are kept too (a class with two parents).

use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer};
use thiserror::Error;
use ttc_core::taxonomy::{validate, ClassId, ParentEdge, Violation};
use ttc_core::{Taxonomy, TaxonomyDraft};

#[derive(Debug, Error)]
pub enum TaxonomyParseError {
    #[error("cannot read taxonomy: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed taxonomy JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad parents key {0:?}: expected \"<level>/<name>\"")]
    BadKey(String),
    #[error("unknown class {name:?} at level {level}")]
    UnknownChild { level: usize, name: String },
    #[error("parent {parent:?} of {level}/{child} is not a known class")]
    UnknownParent {
        level: usize,
        child: String,
        parent: String,
    },
    #[error("{}", list_violations(.0))]
    Invalid(Vec<Violation>),
}

impl TaxonomyParseError {
    /// Violations carried by an [`TaxonomyParseError::Invalid`] error.
    pub fn violations(&self) -> &[Violation] {
        match self {
            TaxonomyParseError::Invalid(v) => v,
            _ => &[],
        }
    }
}

fn list_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// `parents` map kept as an ordered list so repeated keys survive.
#[derive(Debug, Default)]
struct EdgeList(Vec<(String, String)>);

impl<'de> Deserialize<'de> for EdgeList {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EdgeVisitor;

        impl<'de> Visitor<'de> for EdgeVisitor {
            type Value = EdgeList;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping \"<level>/<child>\" to a parent name")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<EdgeList, A::Error> {
                let mut edges = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, String>()? {
                    edges.push((k, v));
                }
                Ok(EdgeList(edges))
            }
        }

        deserializer.deserialize_map(EdgeVisitor)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    levels: Vec<Vec<String>>,
    #[serde(default)]
    parents: EdgeList,
}

/// Parses the document into an unchecked draft. Only syntax and name
/// resolution fail here; structural problems are left to [`validate`].
pub fn parse_draft(text: &str) -> Result<TaxonomyDraft, TaxonomyParseError> {
    let doc: Document = serde_json::from_str(text)?;
    let levels: Vec<Vec<String>> = doc
        .levels
        .into_iter()
        .map(|l| l.into_iter().map(|n| n.trim().to_string()).collect())
        .collect();
    let find = |level: usize, name: &str| {
        levels
            .get(level.checked_sub(1)?)?
            .iter()
            .position(|n| n == name)
            .map(|index| ClassId::new(level, index))
    };

    let mut edges = Vec::with_capacity(doc.parents.0.len());
    for (key, parent) in &doc.parents.0 {
        let (level, child) = key
            .split_once('/')
            .and_then(|(l, c)| Some((l.trim().parse::<usize>().ok()?, c.trim())))
            .ok_or_else(|| TaxonomyParseError::BadKey(key.clone()))?;
        let child_id = find(level, child).ok_or_else(|| TaxonomyParseError::UnknownChild {
            level,
            name: child.to_string(),
        })?;
        let parent = parent.trim();
        let parent_id = level
            .checked_sub(1)
            .and_then(|l| find(l, parent))
            .or_else(|| (1..=levels.len()).find_map(|l| find(l, parent)))
            .ok_or_else(|| TaxonomyParseError::UnknownParent {
                level,
                child: child.to_string(),
                parent: parent.to_string(),
            })?;
        edges.push(ParentEdge {
            child: child_id,
            parent: parent_id,
        });
    }
    Ok(TaxonomyDraft { levels, edges })
}

/// Parses and validates a taxonomy document.
pub fn parse_taxonomy(text: &str) -> Result<Taxonomy, TaxonomyParseError> {
    let draft = parse_draft(text)?;
    validate(&draft).map_err(TaxonomyParseError::Invalid)?;
    Taxonomy::from_draft(&draft).map_err(TaxonomyParseError::Invalid)
}

pub fn load_taxonomy(path: &Path) -> Result<Taxonomy, TaxonomyParseError> {
    parse_taxonomy(&std::fs::read_to_string(path)?)
}

/// Canonical document; hashing it gives [`Taxonomy::fingerprint`].
pub fn serialize(t: &Taxonomy) -> String {
    t.canonical_json()
}
