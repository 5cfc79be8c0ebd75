//! Homophily-enhanced structure learning.
//!
//! Each round picks the most confident members of every cluster, links the
//! most similar non-adjacent pairs among them (intra-cluster recovery) and
//! cuts the least similar existing edges whose endpoints fall in different
//! clusters (inter-cluster removal). Similarity is the embedding dot product.
//! Only per-cluster blocks and existing edges are ever scored.

use std::cmp::Ordering;

use ndarray::ArrayView2;

use crate::clusterer::{hard_labels, SoftAssignment};
use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, EdgeDelta, LabelVector, UndirectedGraph};

/// Per-cluster confident node lists, each sorted by descending confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidentSubsets {
    pub gamma: f64,
    pub members: Vec<Vec<(usize, f64)>>,
}

impl ConfidentSubsets {
    pub fn nodes(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.members[cluster].iter().map(|&(i, _)| i)
    }

    pub fn len(&self, cluster: usize) -> usize {
        self.members[cluster].len()
    }
}

/// Edit ratios: `xi` scales intra-cluster recovery, `eta` inter-cluster removal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsifyParams {
    pub xi: f64,
    pub eta: f64,
    /// Edge count the recovery budget scales with; `None` uses the current graph.
    pub budget_edges: Option<usize>,
}

impl SparsifyParams {
    pub fn new(xi: f64, eta: f64) -> Result<Self> {
        for (name, v) in [("xi", xi), ("eta", eta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self { xi, eta, budget_edges: None })
    }

    pub fn with_budget_edges(mut self, m: usize) -> Self {
        self.budget_edges = Some(m);
        self
    }
}

/// Which edges the removal budget `floor(η·|E|)` is spent on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalMode {
    /// Bottom-η window over all edges, then keep the inter-cluster ones.
    #[default]
    GlobalWindow,
    /// Bottom-η window taken among inter-cluster edges only.
    InterClusterOnly,
}

fn dot(z: ArrayView2<'_, f64>, i: usize, j: usize) -> f64 {
    z.row(i).dot(&z.row(j))
}

/// Top `max(1, floor(γ·|cluster|))` members of each nonempty cluster by
/// `q_ik`, ties to the lower node id.
pub fn top_confident(q: &SoftAssignment, gamma: f64) -> Result<ConfidentSubsets> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let labels = hard_labels(q);
    let mut members: Vec<Vec<(usize, f64)>> = vec![Vec::new(); q.k()];
    for (i, &c) in labels.as_slice().iter().enumerate() {
        members[c].push((i, q.0[[i, c]]));
    }
    for list in &mut members {
        if list.is_empty() {
            continue;
        }
        list.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let keep = ((gamma * list.len() as f64).floor() as usize).max(1);
        list.truncate(keep);
    }
    Ok(ConfidentSubsets { gamma, members })
}

/// Recovery budget for one cluster: `floor(ξ·|E|·N_k/N)`.
pub fn recovery_budget(xi: f64, num_edges: usize, subset_len: usize, num_nodes: usize) -> usize {
    if num_nodes == 0 {
        return 0;
    }
    (xi * num_edges as f64 * subset_len as f64 / num_nodes as f64).floor() as usize
}

// Descending similarity, then lexicographic pair order.
fn by_similarity_desc(a: &(f64, Edge), b: &(f64, Edge)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

// Ascending similarity, then lexicographic pair order.
fn by_similarity_asc(a: &(f64, Edge), b: &(f64, Edge)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Intra-cluster recovery: in each cluster, the most similar non-adjacent
/// pairs of confident nodes, up to that cluster's budget. Pairs are returned
/// in cluster order, each cluster's block in selection order.
pub fn recover_intra_edges(
    z: ArrayView2<'_, f64>,
    subsets: &ConfidentSubsets,
    graph: &UndirectedGraph,
    xi: f64,
) -> Result<Vec<Edge>> {
    recover_with_budget_base(z, subsets, graph, xi, graph.edge_count())
}

fn recover_with_budget_base(
    z: ArrayView2<'_, f64>,
    subsets: &ConfidentSubsets,
    graph: &UndirectedGraph,
    xi: f64,
    m: usize,
) -> Result<Vec<Edge>> {
    let n = graph.num_nodes();
    if z.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "embedding rows vs. graph nodes",
            expected: n,
            got: z.nrows(),
        });
    }
    let mut out = Vec::new();
    for cluster in 0..subsets.members.len() {
        let budget = recovery_budget(xi, m, subsets.len(cluster), n);
        if budget == 0 {
            continue;
        }
        let mut nodes: Vec<usize> = subsets.nodes(cluster).collect();
        nodes.sort_unstable();
        let mut cands = Vec::new();
        for (a, &i) in nodes.iter().enumerate() {
            for &j in &nodes[a + 1..] {
                if !graph.has_edge(i, j) {
                    cands.push((dot(z, i, j), (i, j)));
                }
            }
        }
        if cands.len() > budget {
            cands.select_nth_unstable_by(budget - 1, by_similarity_desc);
            cands.truncate(budget);
        }
        cands.sort_by(by_similarity_desc);
        out.extend(cands.into_iter().map(|(_, e)| e));
    }
    Ok(out)
}

/// Inter-cluster removal over existing edges, with budget `floor(η·|E|)`.
pub fn remove_inter_edges(
    z: ArrayView2<'_, f64>,
    labels: &LabelVector,
    graph: &UndirectedGraph,
    eta: f64,
    mode: RemovalMode,
) -> Result<Vec<Edge>> {
    let n = graph.num_nodes();
    if z.nrows() != n || labels.len() != n {
        return Err(Error::DimensionMismatch {
            what: "embedding/label rows vs. graph nodes",
            expected: n,
            got: if z.nrows() != n { z.nrows() } else { labels.len() },
        });
    }
    let budget = (eta * graph.edge_count() as f64).floor() as usize;
    if budget == 0 {
        return Ok(Vec::new());
    }
    let crosses = |&(u, v): &Edge| labels.get(u) != labels.get(v);
    let mut scored: Vec<(f64, Edge)> = graph
        .edges()
        .filter(|e| mode == RemovalMode::GlobalWindow || crosses(e))
        .map(|(u, v)| (dot(z, u, v), (u, v)))
        .collect();
    if scored.len() > budget {
        scored.select_nth_unstable_by(budget - 1, by_similarity_asc);
        scored.truncate(budget);
    }
    scored.sort_by(by_similarity_asc);
    Ok(scored.into_iter().map(|(_, e)| e).filter(|e| crosses(e)).collect())
}

/// Assembles the round's delta, dropping any pair present in both sets.
pub fn plan_delta(recovered: &[Edge], removed: &[Edge]) -> EdgeDelta {
    let canon = |es: &[Edge]| -> Vec<Edge> {
        let mut v: Vec<Edge> = es.iter().map(|&(u, v)| canonical(u, v)).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let rc = canon(recovered);
    let rm = canon(removed);
    EdgeDelta {
        recovered: rc.iter().copied().filter(|e| rm.binary_search(e).is_err()).collect(),
        removed: rm.iter().copied().filter(|e| rc.binary_search(e).is_err()).collect(),
    }
}

/// Everything one structure-learning round decided.
#[derive(Debug, Clone)]
pub struct RoundEdits {
    pub delta: EdgeDelta,
    pub labels: LabelVector,
}

/// One full round of edge selection for the given assignments and embedding.
pub fn plan_round(
    z: ArrayView2<'_, f64>,
    q: &SoftAssignment,
    graph: &UndirectedGraph,
    gamma: f64,
    params: SparsifyParams,
    mode: RemovalMode,
) -> Result<RoundEdits> {
    let subsets = top_confident(q, gamma)?;
    let labels = hard_labels(q);
    let m = params.budget_edges.unwrap_or(graph.edge_count());
    let recovered = recover_with_budget_base(z, &subsets, graph, params.xi, m)?;
    let removed = remove_inter_edges(z, &labels, graph, params.eta, mode)?;
    Ok(RoundEdits {
        delta: plan_delta(&recovered, &removed),
        labels,
    })
}
