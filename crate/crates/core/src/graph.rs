//! Sparse undirected graphs, label vectors and edge edits.
//!
//! Graphs are stored in CSR form with sorted neighbor lists. Every undirected
//! edge is stored in both rows, but counted and enumerated once in canonical
//! `(min, max)` order. Self-loops are never stored; the spectral filter adds
//! them implicitly.

use crate::error::{Error, Result};

/// An unordered node pair in canonical `(min, max)` order.
pub type Edge = (usize, usize);

/// Returns the canonical `(min, max)` form of a node pair.
#[inline]
pub fn canonical(u: usize, v: usize) -> Edge {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Counts of input lines dropped while building a graph from a raw edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub duplicates: usize,
    pub self_loops: usize,
}

/// Immutable sparse undirected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    num_nodes: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl UndirectedGraph {
    /// Graph with `num_nodes` nodes and no edges.
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            offsets: vec![0; num_nodes + 1],
            neighbors: Vec::new(),
        }
    }

    /// Builds a graph from a raw edge list, tolerating duplicates, reversed
    /// duplicates and self-loops (all dropped and counted).
    pub fn from_edges_lossy<I>(num_nodes: usize, edges: I) -> Result<(Self, BuildStats)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut stats = BuildStats::default();
        let mut pairs = Vec::new();
        for (u, v) in edges {
            check_node(u, num_nodes)?;
            check_node(v, num_nodes)?;
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            pairs.push(canonical(u, v));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        stats.duplicates = before - pairs.len();
        Ok((Self::from_sorted_unique(num_nodes, &pairs), stats))
    }

    /// Builds a graph from an edge list that must already be clean: no
    /// self-loops and no duplicates in either orientation.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let (graph, stats) = Self::from_edges_lossy(num_nodes, edges)?;
        if stats.self_loops > 0 {
            return Err(Error::InvalidGraph(format!(
                "{} self-loop(s) in edge list",
                stats.self_loops
            )));
        }
        if stats.duplicates > 0 {
            return Err(Error::InvalidGraph(format!(
                "{} duplicate edge(s) in edge list",
                stats.duplicates
            )));
        }
        Ok(graph)
    }

    // `pairs` must be canonical, sorted and free of duplicates.
    fn from_sorted_unique(num_nodes: usize, pairs: &[Edge]) -> Self {
        let mut offsets = vec![0usize; num_nodes + 1];
        for &(u, v) in pairs {
            offsets[u + 1] += 1;
            offsets[v + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0usize; 2 * pairs.len()];
        // Smaller neighbors first, then larger ones; both runs arrive sorted.
        let mut lower: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in pairs {
            lower[v].push(u);
        }
        for (r, smaller) in lower.iter().enumerate() {
            for &x in smaller {
                neighbors[cursor[r]] = x;
                cursor[r] += 1;
            }
        }
        for &(u, v) in pairs {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
        }
        Self {
            num_nodes,
            offsets,
            neighbors,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges, each unordered pair counted once.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Sorted neighbor list of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    /// Per-node degree vector (self-loops excluded).
    pub fn degrees(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && v < self.num_nodes && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Canonical edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            let row = self.neighbors(u);
            let start = row.partition_point(|&v| v <= u);
            row[start..].iter().map(move |&v| (u, v))
        })
    }

    /// Returns a new graph with `delta` applied.
    pub fn apply(&self, delta: &EdgeDelta) -> Result<Self> {
        delta.validate_against(self)?;
        let mut removed = delta.removed.clone();
        removed.sort_unstable();
        let mut recovered = delta.recovered.clone();
        recovered.sort_unstable();
        let kept = self.edges().filter(|e| removed.binary_search(e).is_err());
        let mut pairs: Vec<Edge> = kept.chain(recovered.iter().copied()).collect();
        pairs.sort_unstable();
        Ok(Self::from_sorted_unique(self.num_nodes, &pairs))
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::DimensionMismatch {
                what: "permutation length",
                expected: self.num_nodes,
                got: perm.len(),
            });
        }
        Self::from_edges(self.num_nodes, self.edges().map(|(u, v)| (perm[u], perm[v])))
    }
}

fn check_node(node: usize, num_nodes: usize) -> Result<()> {
    if node >= num_nodes {
        Err(Error::NodeOutOfRange { node, num_nodes })
    } else {
        Ok(())
    }
}

/// Applies `delta` to `graph`; the free-function form of [`UndirectedGraph::apply`].
pub fn apply_edge_delta(graph: &UndirectedGraph, delta: &EdgeDelta) -> Result<UndirectedGraph> {
    graph.apply(delta)
}

/// Cluster or class ids in `[0, k)`, one per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    k: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::InvalidLabels(format!(
                "label {l} at index {i} is not below k = {k}"
            )));
        }
        Ok(Self { labels, k })
    }

    /// Builds a label vector with `k` inferred as `max + 1`.
    pub fn from_ids(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        Self { labels, k }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Number of nodes carrying each label.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Fraction of edges whose endpoints share a label, each edge counted once.
pub fn edge_homophily(graph: &UndirectedGraph, labels: &LabelVector) -> Result<f64> {
    if labels.len() != graph.num_nodes() {
        return Err(Error::DimensionMismatch {
            what: "label vector length",
            expected: graph.num_nodes(),
            got: labels.len(),
        });
    }
    let total = graph.edge_count();
    if total == 0 {
        return Err(Error::NoEdges);
    }
    let same = graph
        .edges()
        .filter(|&(u, v)| labels.get(u) == labels.get(v))
        .count();
    Ok(same as f64 / total as f64)
}

/// Edges to add (`recovered`) and delete (`removed`) in one structure update.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeDelta {
    pub recovered: Vec<Edge>,
    pub removed: Vec<Edge>,
}

impl EdgeDelta {
    pub fn new(recovered: Vec<Edge>, removed: Vec<Edge>) -> Self {
        Self { recovered, removed }
    }

    pub fn is_empty(&self) -> bool {
        self.recovered.is_empty() && self.removed.is_empty()
    }

    /// The delta that undoes this one.
    pub fn inverse(&self) -> Self {
        Self {
            recovered: self.removed.clone(),
            removed: self.recovered.clone(),
        }
    }

    /// Checks the delta invariants against `graph`: ids in range, no
    /// self-pairs, recovered pairs absent, removed pairs present, and the two
    /// sets disjoint and free of duplicates.
    pub fn validate_against(&self, graph: &UndirectedGraph) -> Result<()> {
        let n = graph.num_nodes();
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in self.recovered.iter().chain(&self.removed) {
            check_node(u, n)?;
            check_node(v, n)?;
            if u == v {
                return Err(Error::InvalidDelta(format!("self-pair ({u}, {v})")));
            }
            if !seen.insert(canonical(u, v)) {
                return Err(Error::InvalidDelta(format!(
                    "pair ({u}, {v}) listed more than once"
                )));
            }
        }
        if let Some(&(u, v)) = self.recovered.iter().find(|&&(u, v)| graph.has_edge(u, v)) {
            return Err(Error::InvalidDelta(format!(
                "recovered pair ({u}, {v}) is already an edge"
            )));
        }
        if let Some(&(u, v)) = self.removed.iter().find(|&&(u, v)| !graph.has_edge(u, v)) {
            return Err(Error::InvalidDelta(format!(
                "removed pair ({u}, {v}) is not an edge"
            )));
        }
        Ok(())
    }
}
