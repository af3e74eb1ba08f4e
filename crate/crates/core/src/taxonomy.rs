//! n-level tree taxonomies and the transition matrices between adjacent levels.
//!
//! Levels are numbered from 1 (most general) to n (most specific). A class is
//! addressed by its level and its position inside that level; names are only
//! used for I/O.
//!
//! Unvalidated input is carried by [`TaxonomyDraft`], which can express every
//! kind of malformed hierarchy (self-parents, cycles, two parents, level
//! skips). [`validate`] reports what is wrong with a draft and
//! [`Taxonomy::from_draft`] turns a clean draft into an immutable [`Taxonomy`].

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numeric::Matrix;

/// Position of a class in the taxonomy. `level` is 1-based, `index` 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId {
    pub level: usize,
    pub index: usize,
}

impl ClassId {
    pub const fn new(level: usize, index: usize) -> Self {
        Self { level, index }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.level, self.index)
    }
}

/// `child ≺ parent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParentEdge {
    pub child: ClassId,
    pub parent: ClassId,
}

/// A structurally parsed but unchecked taxonomy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaxonomyDraft {
    pub levels: Vec<Vec<String>>,
    pub edges: Vec<ParentEdge>,
}

impl TaxonomyDraft {
    fn name(&self, c: ClassId) -> Option<&str> {
        self.levels
            .get(c.level.checked_sub(1)?)?
            .get(c.index)
            .map(String::as_str)
    }

    fn label(&self, c: ClassId) -> String {
        match self.name(c) {
            Some(name) => format!("{}/{}", c.level, name),
            None => format!("{c}"),
        }
    }

    fn contains(&self, c: ClassId) -> bool {
        self.name(c).is_some()
    }
}

/// The taxonomy rule a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Axiom {
    MinimumLevels,
    EmptyLevel,
    EmptyName,
    DuplicateName,
    UnknownClass,
    SingleParent,
    RootHasParent,
    LevelAdjacency,
    AntiReflexivity,
    Asymmetry,
}

impl Axiom {
    pub fn as_str(self) -> &'static str {
        match self {
            Axiom::MinimumLevels => "minimum levels",
            Axiom::EmptyLevel => "empty level",
            Axiom::EmptyName => "empty name",
            Axiom::DuplicateName => "duplicate name",
            Axiom::UnknownClass => "unknown class",
            Axiom::SingleParent => "single parent",
            Axiom::RootHasParent => "root has parent",
            Axiom::LevelAdjacency => "level adjacency",
            Axiom::AntiReflexivity => "anti-reflexivity",
            Axiom::Asymmetry => "asymmetry",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub axiom: Axiom,
    pub classes: Vec<ClassId>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.axiom, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("level {level} out of range (taxonomy has {levels} levels)")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("unknown class {0}")]
    UnknownClass(ClassId),
    #[error("path has {found} entries, expected {expected}")]
    PathLength { expected: usize, found: usize },
    #[error("path entry {position} is at level {level}")]
    WrongLevel { position: usize, level: usize },
}

/// Checks every taxonomy rule and lists all violations found.
pub fn validate(draft: &TaxonomyDraft) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let n = draft.levels.len();
    if n < 2 {
        out.push(Violation {
            axiom: Axiom::MinimumLevels,
            classes: Vec::new(),
            message: format!("taxonomy needs at least 2 levels, found {n}"),
        });
    }

    for (l, names) in draft.levels.iter().enumerate() {
        let level = l + 1;
        if names.is_empty() {
            out.push(Violation {
                axiom: Axiom::EmptyLevel,
                classes: Vec::new(),
                message: format!("level {level} has no classes"),
            });
        }
        let mut seen: Vec<(&str, usize)> = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let id = ClassId::new(level, i);
            if name.trim().is_empty() {
                out.push(Violation {
                    axiom: Axiom::EmptyName,
                    classes: vec![id],
                    message: format!("class {id} has an empty name"),
                });
                continue;
            }
            if let Some(&(_, first)) = seen.iter().find(|(s, _)| *s == name.as_str()) {
                out.push(Violation {
                    axiom: Axiom::DuplicateName,
                    classes: vec![ClassId::new(level, first), id],
                    message: format!("name {name:?} appears more than once in level {level}"),
                });
            } else {
                seen.push((name.as_str(), i));
            }
        }
    }

    let mut known = Vec::with_capacity(draft.edges.len());
    for edge in &draft.edges {
        let mut ok = true;
        for c in [edge.child, edge.parent] {
            if !draft.contains(c) {
                ok = false;
                out.push(Violation {
                    axiom: Axiom::UnknownClass,
                    classes: vec![c],
                    message: format!("edge references unknown class {c}"),
                });
            }
        }
        if ok {
            known.push(*edge);
        }
    }

    for (l, names) in draft.levels.iter().enumerate() {
        let level = l + 1;
        for i in 0..names.len() {
            let id = ClassId::new(level, i);
            let parents: Vec<ClassId> = known
                .iter()
                .filter(|e| e.child == id)
                .map(|e| e.parent)
                .collect();
            if level == 1 {
                if !parents.is_empty() {
                    out.push(Violation {
                        axiom: Axiom::RootHasParent,
                        classes: vec![id],
                        message: format!(
                            "level-1 class {} must not have a parent",
                            draft.label(id)
                        ),
                    });
                }
            } else if parents.len() != 1 {
                let listed: Vec<String> = parents.iter().map(|&p| draft.label(p)).collect();
                let mut classes = vec![id];
                classes.extend(&parents);
                out.push(Violation {
                    axiom: Axiom::SingleParent,
                    classes,
                    message: if parents.is_empty() {
                        format!("class {} has no parent", draft.label(id))
                    } else {
                        format!(
                            "class {} has {} parents ({})",
                            draft.label(id),
                            parents.len(),
                            listed.join(", ")
                        )
                    },
                });
            }
        }
    }

    for edge in &known {
        if edge.child != edge.parent && edge.parent.level + 1 != edge.child.level {
            out.push(Violation {
                axiom: Axiom::LevelAdjacency,
                classes: vec![edge.child, edge.parent],
                message: format!(
                    "parent must be one level above: {} -> {}",
                    draft.label(edge.child),
                    draft.label(edge.parent)
                ),
            });
        }
    }

    for cycle in find_cycles(&known) {
        let names: Vec<String> = cycle.iter().map(|&c| draft.label(c)).collect();
        let (axiom, message) = match cycle.len() {
            1 => (
                Axiom::AntiReflexivity,
                format!("class {} is its own parent", names[0]),
            ),
            2 => (
                Axiom::Asymmetry,
                format!(
                    "classes {} and {} are subclasses of each other",
                    names[0], names[1]
                ),
            ),
            _ => (
                Axiom::AntiReflexivity,
                format!(
                    "class {} is its own ancestor via {}",
                    names[0],
                    names.join(" -> ")
                ),
            ),
        };
        out.push(Violation {
            axiom,
            classes: cycle,
            message,
        });
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Every elementary cycle reachable along child -> parent edges, reported once.
fn find_cycles(edges: &[ParentEdge]) -> Vec<Vec<ClassId>> {
    let nodes: BTreeSet<ClassId> = edges.iter().flat_map(|e| [e.child, e.parent]).collect();
    let nodes: Vec<ClassId> = nodes.into_iter().collect();
    let pos = |c: ClassId| nodes.binary_search(&c).unwrap();
    let mut adj = vec![Vec::new(); nodes.len()];
    for e in edges {
        adj[pos(e.child)].push(pos(e.parent));
    }

    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; nodes.len()];
    let mut seen: BTreeSet<Vec<ClassId>> = BTreeSet::new();
    let mut cycles = Vec::new();
    for start in 0..nodes.len() {
        if state[start] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        state[start] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&succ) = adj[node].get(*next) {
                *next += 1;
                match state[succ] {
                    0 => {
                        state[succ] = 1;
                        stack.push((succ, 0));
                    }
                    1 => {
                        let from = stack.iter().position(|&(n, _)| n == succ).unwrap();
                        let cycle: Vec<ClassId> =
                            stack[from..].iter().map(|&(n, _)| nodes[n]).collect();
                        let mut key = cycle.clone();
                        key.sort();
                        if seen.insert(key) {
                            cycles.push(cycle);
                        }
                    }
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
            }
        }
    }
    cycles
}

/// Binary `|ℓ_i| × |ℓ_{i+1}|` matrix with a 1 wherever the column class is a
/// child of the row class.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    parents: Vec<usize>,
    dense: Matrix,
}

impl TransitionMatrix {
    /// Builds the matrix from the parent row of every column.
    pub fn from_parents(rows: usize, parents: Vec<usize>) -> Self {
        let mut dense = Matrix::zeros(rows, parents.len());
        for (j, &k) in parents.iter().enumerate() {
            dense.set(k, j, 1.0);
        }
        Self { parents, dense }
    }

    pub fn rows(&self) -> usize {
        self.dense.rows()
    }

    pub fn cols(&self) -> usize {
        self.dense.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        u8::from(self.parents[col] == row)
    }

    /// Row holding the single 1 of column `col`.
    #[inline]
    pub fn parent_of(&self, col: usize) -> usize {
        self.parents[col]
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.dense
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.cols())
            .map(|j| (0..self.rows()).map(|k| usize::from(self.get(k, j))).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.rows()];
        for &k in &self.parents {
            sums[k] += 1;
        }
        sums
    }
}

/// A validated tree taxonomy. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    names: Vec<Vec<String>>,
    // parents[l][j]: parent index (in level l) of class j in level l + 1, 0-based levels
    parents: Vec<Vec<usize>>,
}

impl Taxonomy {
    pub fn from_draft(draft: &TaxonomyDraft) -> Result<Self, Vec<Violation>> {
        validate(draft)?;
        let n = draft.levels.len();
        let mut parents: Vec<Vec<usize>> = (0..n)
            .map(|l| vec![usize::MAX; draft.levels[l].len()])
            .collect();
        for e in &draft.edges {
            parents[e.child.level - 1][e.child.index] = e.parent.index;
        }
        parents.remove(0);
        Ok(Self {
            names: draft.levels.clone(),
            parents,
        })
    }

    /// `parents[i]` lists, for every class of level `i + 2`, the index of its parent in level `i + 1`.
    pub fn from_levels(
        names: Vec<Vec<String>>,
        parents: Vec<Vec<usize>>,
    ) -> Result<Self, Vec<Violation>> {
        let mut edges = Vec::new();
        for (l, row) in parents.iter().enumerate() {
            for (j, &k) in row.iter().enumerate() {
                edges.push(ParentEdge {
                    child: ClassId::new(l + 2, j),
                    parent: ClassId::new(l + 1, k),
                });
            }
        }
        Self::from_draft(&TaxonomyDraft {
            levels: names,
            edges,
        })
    }

    /// Complete tree where every class of level `i` has `branching[i]` children
    /// (`branching[0]` is the number of roots). Classes are named `L<level>-<index>`.
    pub fn balanced(branching: &[usize]) -> Result<Self, Vec<Violation>> {
        let mut names = Vec::new();
        let mut parents = Vec::new();
        let mut width = 1;
        for (l, &b) in branching.iter().enumerate() {
            let next = width * b;
            names.push((0..next).map(|i| format!("L{}-{}", l + 1, i)).collect());
            if l > 0 {
                parents.push((0..next).map(|j| j / b).collect());
            }
            width = next;
        }
        Self::from_levels(names, parents)
    }

    pub fn to_draft(&self) -> TaxonomyDraft {
        let mut edges = Vec::new();
        for (l, row) in self.parents.iter().enumerate() {
            for (j, &k) in row.iter().enumerate() {
                edges.push(ParentEdge {
                    child: ClassId::new(l + 2, j),
                    parent: ClassId::new(l + 1, k),
                });
            }
        }
        TaxonomyDraft {
            levels: self.names.clone(),
            edges,
        }
    }

    #[inline]
    pub fn num_levels(&self) -> usize {
        self.names.len()
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.names.iter().map(Vec::len).collect()
    }

    pub fn level_size(&self, level: usize) -> Result<usize, TaxonomyError> {
        self.check_level(level)?;
        Ok(self.names[level - 1].len())
    }

    pub fn level_names(&self, level: usize) -> Result<&[String], TaxonomyError> {
        self.check_level(level)?;
        Ok(&self.names[level - 1])
    }

    fn check_level(&self, level: usize) -> Result<(), TaxonomyError> {
        if level == 0 || level > self.num_levels() {
            Err(TaxonomyError::LevelOutOfRange {
                level,
                levels: self.num_levels(),
            })
        } else {
            Ok(())
        }
    }

    fn check_class(&self, c: ClassId) -> Result<(), TaxonomyError> {
        self.check_level(c.level)
            .map_err(|_| TaxonomyError::UnknownClass(c))?;
        if c.index < self.names[c.level - 1].len() {
            Ok(())
        } else {
            Err(TaxonomyError::UnknownClass(c))
        }
    }

    pub fn name(&self, c: ClassId) -> Result<&str, TaxonomyError> {
        self.check_class(c)?;
        Ok(&self.names[c.level - 1][c.index])
    }

    pub fn class_id(&self, level: usize, name: &str) -> Option<ClassId> {
        let names = self.names.get(level.checked_sub(1)?)?;
        names
            .iter()
            .position(|n| n == name)
            .map(|index| ClassId::new(level, index))
    }

    pub fn parent(&self, c: ClassId) -> Result<Option<ClassId>, TaxonomyError> {
        self.check_class(c)?;
        Ok(match c.level {
            1 => None,
            l => Some(ClassId::new(l - 1, self.parents[l - 2][c.index])),
        })
    }

    pub fn children(&self, c: ClassId) -> Result<Vec<ClassId>, TaxonomyError> {
        self.check_class(c)?;
        if c.level == self.num_levels() {
            return Ok(Vec::new());
        }
        Ok(self.parents[c.level - 1]
            .iter()
            .enumerate()
            .filter(|(_, &k)| k == c.index)
            .map(|(j, _)| ClassId::new(c.level + 1, j))
            .collect())
    }

    /// `M^{[ℓ_i, ℓ_{i+1}]}` for `1 <= level <= n - 1`.
    pub fn transition_matrix(&self, level: usize) -> Result<TransitionMatrix, TaxonomyError> {
        if level == 0 || level >= self.num_levels() {
            return Err(TaxonomyError::LevelOutOfRange {
                level,
                levels: self.num_levels(),
            });
        }
        Ok(TransitionMatrix::from_parents(
            self.names[level - 1].len(),
            self.parents[level - 1].clone(),
        ))
    }

    /// All `n - 1` transition matrices, top to bottom.
    pub fn transition_matrices(&self) -> Vec<TransitionMatrix> {
        (1..self.num_levels())
            .map(|l| self.transition_matrix(l).expect("level in range"))
            .collect()
    }

    /// Ancestors of `c` ordered from level 1 down to its parent.
    pub fn ancestors(&self, c: ClassId) -> Result<Vec<ClassId>, TaxonomyError> {
        self.check_class(c)?;
        let mut chain = Vec::with_capacity(c.level - 1);
        let mut cur = c;
        while let Some(p) = self.parent(cur)? {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        Ok(chain)
    }

    /// Per-level indices of the root-to-`c` path, `c` included.
    pub fn path_to(&self, c: ClassId) -> Result<Vec<usize>, TaxonomyError> {
        let mut path: Vec<usize> = self.ancestors(c)?.into_iter().map(|a| a.index).collect();
        path.push(c.index);
        Ok(path)
    }

    /// Paths of every class at the deepest level, in declaration order.
    pub fn leaf_paths(&self) -> Vec<Vec<usize>> {
        let n = self.num_levels();
        (0..self.names[n - 1].len())
            .map(|j| self.path_to(ClassId::new(n, j)).expect("leaf exists"))
            .collect()
    }

    /// True iff each entry is a direct child of the one before it.
    pub fn is_consistent_path(&self, path: &[ClassId]) -> Result<bool, TaxonomyError> {
        if path.len() != self.num_levels() {
            return Err(TaxonomyError::PathLength {
                expected: self.num_levels(),
                found: path.len(),
            });
        }
        for (i, c) in path.iter().enumerate() {
            if c.level != i + 1 {
                return Err(TaxonomyError::WrongLevel {
                    position: i,
                    level: c.level,
                });
            }
            self.check_class(*c)?;
        }
        Ok(path
            .windows(2)
            .all(|w| self.parents[w[0].level - 1][w[1].index] == w[0].index))
    }

    /// Index form of [`Taxonomy::is_consistent_path`]: `path[i]` is the class index at level `i + 1`.
    pub fn is_consistent_indices(&self, path: &[usize]) -> Result<bool, TaxonomyError> {
        let ids: Vec<ClassId> = path
            .iter()
            .enumerate()
            .map(|(i, &index)| ClassId::new(i + 1, index))
            .collect();
        self.is_consistent_path(&ids)
    }

    /// Compact JSON document in the taxonomy file schema, parents listed level by level
    /// in declaration order.
    pub fn canonical_json(&self) -> String {
        let mut s = String::from("{\"levels\":[");
        for (l, names) in self.names.iter().enumerate() {
            if l > 0 {
                s.push(',');
            }
            s.push('[');
            for (i, name) in names.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                push_json_string(&mut s, name);
            }
            s.push(']');
        }
        s.push_str("],\"parents\":{");
        let mut first = true;
        for (l, row) in self.parents.iter().enumerate() {
            for (j, &k) in row.iter().enumerate() {
                if !first {
                    s.push(',');
                }
                first = false;
                let key = format!("{}/{}", l + 2, self.names[l + 1][j]);
                push_json_string(&mut s, &key);
                s.push(':');
                push_json_string(&mut s, &self.names[l][k]);
            }
        }
        s.push_str("}}");
        s
    }

    /// Hex SHA-256 of [`Taxonomy::canonical_json`].
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

fn push_json_string(out: &mut String, s: &str) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{08}' => out.push_str("\\b"),
            '\u{0c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.names.iter().map(|l| l.len().to_string()).collect();
        write!(f, "taxonomy with levels {}", sizes.join("/"))
    }
}
