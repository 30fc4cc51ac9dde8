//! Dependency structure matrix over code modules.
//!
//! A [`Dsm`] is the binary `n x n` matrix `SM` where `SM(i, j) = 1` iff module
//! `i` depends on module `j`. The diagonal is always zero. Storage is sparse
//! (sorted adjacency lists in both directions) so large projects stay cheap.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Path-like identifier of a code module, e.g. `com.foo.Bar`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModuleId(String);

impl ModuleId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::EmptyModuleId);
        }
        Ok(ModuleId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for ModuleId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Directed module dependency graph; an edge `(a, b)` means `a` depends on `b`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencyGraph {
    pub modules: Vec<ModuleId>,
    pub edges: Vec<(ModuleId, ModuleId)>,
}

impl DependencyGraph {
    /// Builds a graph, dropping self-edges and collapsing duplicate edges.
    /// Edge order is canonicalized (sorted).
    pub fn new(modules: Vec<ModuleId>, edges: impl IntoIterator<Item = (ModuleId, ModuleId)>) -> Self {
        let edges: BTreeSet<(ModuleId, ModuleId)> =
            edges.into_iter().filter(|(a, b)| a != b).collect();
        DependencyGraph {
            modules,
            edges: edges.into_iter().collect(),
        }
    }

    /// Convenience constructor from string slices. Panics on empty ids.
    pub fn from_strs(modules: &[&str], edges: &[(&str, &str)]) -> Self {
        let id = |s: &str| ModuleId::new(s).expect("non-empty module id");
        DependencyGraph::new(
            modules.iter().map(|m| id(m)).collect(),
            edges.iter().map(|(a, b)| (id(a), id(b))),
        )
    }
}

/// Binary dependency structure matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dsm {
    ids: Vec<ModuleId>,
    index_of: HashMap<String, usize>,
    /// `out[i]`: sorted `j` with `SM(i, j) = 1`.
    out: Vec<Vec<usize>>,
    /// `inn[j]`: sorted `i` with `SM(i, j) = 1`.
    inn: Vec<Vec<usize>>,
    ones: usize,
}

/// Encodes `graph` as a DSM whose rows follow `graph.modules` order.
///
/// Duplicate edges collapse to a single 1-cell, self-edges are dropped.
pub fn build_dsm(graph: &DependencyGraph) -> Result<Dsm> {
    let mut index_of = HashMap::with_capacity(graph.modules.len());
    for (i, id) in graph.modules.iter().enumerate() {
        if index_of.insert(id.0.clone(), i).is_some() {
            return Err(Error::DuplicateModule(id.to_string()));
        }
    }
    let n = graph.modules.len();
    let mut out: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (src, dst) in &graph.edges {
        let i = *index_of
            .get(src.as_str())
            .ok_or_else(|| Error::UnknownModule(src.to_string()))?;
        let j = *index_of
            .get(dst.as_str())
            .ok_or_else(|| Error::UnknownModule(dst.to_string()))?;
        if i != j {
            out[i].insert(j);
        }
    }
    Ok(Dsm::from_parts(graph.modules.clone(), index_of, out))
}

impl Dsm {
    fn from_parts(
        ids: Vec<ModuleId>,
        index_of: HashMap<String, usize>,
        out: Vec<BTreeSet<usize>>,
    ) -> Self {
        let n = ids.len();
        let mut inn = vec![Vec::new(); n];
        let mut ones = 0;
        for (i, row) in out.iter().enumerate() {
            for &j in row {
                inn[j].push(i);
                ones += 1;
            }
        }
        Dsm {
            ids,
            index_of,
            out: out.into_iter().map(|r| r.into_iter().collect()).collect(),
            inn,
            ones,
        }
    }

    /// Builds a DSM from a dense 0/1 matrix with generated ids `m0, m1, ...`.
    /// Diagonal entries are ignored.
    pub fn from_dense(rows: &[Vec<bool>]) -> Self {
        let n = rows.len();
        let ids: Vec<ModuleId> = (0..n).map(|i| ModuleId(format!("m{i}"))).collect();
        let index_of = ids.iter().enumerate().map(|(i, id)| (id.0.clone(), i)).collect();
        let out = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                assert_eq!(row.len(), n, "dense matrix must be square");
                row.iter()
                    .enumerate()
                    .filter(|&(j, &v)| v && j != i)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        Dsm::from_parts(ids, index_of, out)
    }

    /// Number of modules.
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[ModuleId] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &ModuleId {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index_of.get(id).copied()
    }

    /// `SM(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.out[i].binary_search(&j).is_ok()
    }

    /// Modules `i` depends on.
    pub fn dependencies(&self, i: usize) -> &[usize] {
        &self.out[i]
    }

    /// Modules depending on `j`.
    pub fn dependents(&self, j: usize) -> &[usize] {
        &self.inn[j]
    }

    /// Column fan-in of `j`: the number of `i != j` with `SM(i, j) = 1`.
    pub fn fan_in(&self, j: usize) -> usize {
        self.inn[j].len()
    }

    /// Number of 1-cells.
    pub fn ones(&self) -> usize {
        self.ones
    }

    /// Iterates all 1-cells `(i, j)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j)))
    }

    /// Symmetric neighbourhood of `i` with the pair dependency `SM(i,j) + SM(j,i)`.
    pub fn pair_neighbors(&self, i: usize) -> Vec<(usize, u8)> {
        let (a, b) = (&self.out[i], &self.inn[i]);
        let mut merged = Vec::with_capacity(a.len() + b.len());
        let (mut x, mut y) = (0, 0);
        while x < a.len() || y < b.len() {
            match (a.get(x), b.get(y)) {
                (Some(&p), Some(&q)) if p == q => {
                    merged.push((p, 2));
                    x += 1;
                    y += 1;
                }
                (Some(&p), Some(&q)) if p < q => {
                    merged.push((p, 1));
                    x += 1;
                }
                (Some(_), Some(&q)) => {
                    merged.push((q, 1));
                    y += 1;
                }
                (Some(&p), None) => {
                    merged.push((p, 1));
                    x += 1;
                }
                (None, Some(&q)) => {
                    merged.push((q, 1));
                    y += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        merged
    }

    /// Recovers the dependency graph this DSM encodes.
    pub fn to_graph(&self) -> DependencyGraph {
        DependencyGraph::new(
            self.ids.clone(),
            self.cells()
                .map(|(i, j)| (self.ids[i].clone(), self.ids[j].clone())),
        )
    }
}

/// Indices `j` whose column fan-in is strictly greater than `bus_threshold * n`.
pub fn identify_vertical_buses(dsm: &Dsm, bus_threshold: f64) -> BTreeSet<usize> {
    let limit = bus_threshold * dsm.n() as f64;
    (0..dsm.n())
        .filter(|&j| dsm.fan_in(j) as f64 > limit)
        .collect()
}
