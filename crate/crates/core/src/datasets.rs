//! Dataset directories, synthetic SBM graphs and the label-guided homophily
//! oracle.
//!
//! A dataset directory holds:
//!
//! - `meta.json`: `{"n": N, "f": F, "k": K, "name": str, "features": "dense"|"sparse"}`
//! - `edges.tsv`: one undirected edge per line, `u<TAB>v`, 0-based
//! - `features.tsv`: `N` rows, either `F` reals or `idx:val` tokens
//! - `labels.tsv`: optional, one class id per line

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{edge_homophily, BuildStats, Edge, LabelVector, UndirectedGraph};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub n: usize,
    pub f: usize,
    pub k: usize,
    pub name: String,
    pub features: FeatureFormat,
}

/// Node features, kept in the storage format they were loaded in.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Dense(Array2<f64>),
    Sparse(CsrMatrix),
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.nrows(),
            FeatureMatrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.ncols(),
            FeatureMatrix::Sparse(m) => m.ncols(),
        }
    }

    /// Stored entries: all of them for dense, non-zeros for sparse.
    pub fn nnz(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.len(),
            FeatureMatrix::Sparse(m) => m.nnz(),
        }
    }

    pub fn format(&self) -> FeatureFormat {
        match self {
            FeatureMatrix::Dense(_) => FeatureFormat::Dense,
            FeatureMatrix::Sparse(_) => FeatureFormat::Sparse,
        }
    }

    /// `X·rhs`.
    pub fn dot(&self, rhs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            FeatureMatrix::Dense(m) => {
                if m.ncols() != rhs.nrows() {
                    return Err(Error::DimensionMismatch {
                        what: "feature product inner dimension",
                        expected: m.ncols(),
                        got: rhs.nrows(),
                    });
                }
                Ok(m.dot(&rhs))
            }
            FeatureMatrix::Sparse(m) => m.dot_dense(rhs),
        }
    }

    /// `Xᵀ·rhs`.
    pub fn t_dot(&self, rhs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            FeatureMatrix::Dense(m) => {
                if m.nrows() != rhs.nrows() {
                    return Err(Error::DimensionMismatch {
                        what: "transposed feature product inner dimension",
                        expected: m.nrows(),
                        got: rhs.nrows(),
                    });
                }
                Ok(m.t().dot(&rhs))
            }
            FeatureMatrix::Sparse(m) => m.t_dot_dense(rhs),
        }
    }

    /// Inner product of rows `i` and `j`.
    pub fn row_dot(&self, i: usize, j: usize) -> f64 {
        match self {
            FeatureMatrix::Dense(m) => m.row(i).dot(&m.row(j)),
            FeatureMatrix::Sparse(m) => {
                let (mut a, mut b) = (m.row(i).peekable(), m.row(j).peekable());
                let mut acc = 0.0;
                while let (Some(&(ca, va)), Some(&(cb, vb))) = (a.peek(), b.peek()) {
                    match ca.cmp(&cb) {
                        std::cmp::Ordering::Less => {
                            a.next();
                        }
                        std::cmp::Ordering::Greater => {
                            b.next();
                        }
                        std::cmp::Ordering::Equal => {
                            acc += va * vb;
                            a.next();
                            b.next();
                        }
                    }
                }
                acc
            }
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            FeatureMatrix::Dense(m) => m.clone(),
            FeatureMatrix::Sparse(m) => m.to_dense(),
        }
    }
}

/// A loaded graph with features and optional ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: UndirectedGraph,
    pub features: FeatureMatrix,
    pub labels: Option<LabelVector>,
    pub k: usize,
    /// Non-blank lines in `edges.tsv` before deduplication.
    pub raw_edge_lines: usize,
    pub build: BuildStats,
}

/// Headline numbers printed after loading.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub nodes: usize,
    pub edges: usize,
    pub raw_edge_lines: usize,
    pub features: usize,
    pub classes: usize,
    pub homophily: Option<f64>,
}

impl Dataset {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            nodes: self.num_nodes(),
            edges: self.graph.edge_count(),
            raw_edge_lines: self.raw_edge_lines,
            features: self.features.ncols(),
            classes: self.k,
            homophily: self
                .labels
                .as_ref()
                .and_then(|l| edge_homophily(&self.graph, l).ok()),
        }
    }

    /// Same nodes, features and labels on a different edge set.
    pub fn with_graph(&self, graph: UndirectedGraph) -> Result<Self> {
        if graph.num_nodes() != self.num_nodes() {
            return Err(Error::DimensionMismatch {
                what: "replacement graph nodes",
                expected: self.num_nodes(),
                got: graph.num_nodes(),
            });
        }
        Ok(Self {
            raw_edge_lines: graph.edge_count(),
            build: BuildStats::default(),
            graph,
            ..self.clone()
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_id(tok: &str, path: &Path, line: usize, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(path, line, format!("{what} `{tok}` is not a non-negative integer")))
}

fn parse_real(tok: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(path, line, format!("feature value `{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("feature value `{tok}` is not finite")));
    }
    Ok(v)
}

/// Reads and validates a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_str(&read(&meta_path)?)
        .map_err(|e| Error::parse(&meta_path, e.line(), e.to_string()))?;
    if meta.k == 0 {
        return Err(Error::parse(&meta_path, 1, "k must be at least 1"));
    }

    let (graph, build, raw_edge_lines) = load_edges(&dir.join("edges.tsv"), meta.n)?;
    if build.duplicates > 0 {
        log::warn!("{}: {} duplicate edges merged", dir.display(), build.duplicates);
    }
    if build.self_loops > 0 {
        log::warn!("{}: {} self-loops dropped", dir.display(), build.self_loops);
    }
    let features = load_features(&dir.join("features.tsv"), &meta)?;
    let labels_path = dir.join("labels.tsv");
    let labels = if labels_path.exists() {
        Some(load_labels(&labels_path, meta.n, meta.k)?)
    } else {
        None
    };
    Ok(Dataset {
        name: meta.name,
        graph,
        features,
        labels,
        k: meta.k,
        raw_edge_lines,
        build,
    })
}

fn load_edges(path: &Path, n: usize) -> Result<(UndirectedGraph, BuildStats, usize)> {
    let text = read(path)?;
    let mut edges: Vec<Edge> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let mut toks = line.split_whitespace();
        let Some(a) = toks.next() else { continue };
        let b = toks
            .next()
            .ok_or_else(|| Error::parse(path, lineno, "expected two node ids"))?;
        if toks.next().is_some() {
            return Err(Error::parse(path, lineno, "expected exactly two node ids"));
        }
        let u = parse_id(a, path, lineno, "node id")?;
        let v = parse_id(b, path, lineno, "node id")?;
        for node in [u, v] {
            if node >= n {
                return Err(Error::parse(path, lineno, format!("node id {node} out of range (n = {n})")));
            }
        }
        edges.push((u, v));
    }
    let raw = edges.len();
    let (graph, stats) = UndirectedGraph::from_edges_lossy(n, edges)?;
    Ok((graph, stats, raw))
}

/// Reads an edge list file for a graph with `n` nodes.
pub fn load_edge_list(path: impl AsRef<Path>, n: usize) -> Result<UndirectedGraph> {
    Ok(load_edges(path.as_ref(), n)?.0)
}

/// Reads a file with one non-negative integer per line (blank lines skipped).
pub fn read_id_column(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut ids = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tok = line.trim();
        if !tok.is_empty() {
            ids.push(parse_id(tok, path, i + 1, "id")?);
        }
    }
    Ok(ids)
}

fn load_features(path: &Path, meta: &Meta) -> Result<FeatureMatrix> {
    let text = read(path)?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != meta.n {
        return Err(Error::parse(
            path,
            lines.len().min(meta.n) + 1,
            format!("expected {} feature rows, found {}", meta.n, lines.len()),
        ));
    }
    match meta.features {
        FeatureFormat::Dense => {
            let mut m = Array2::zeros((meta.n, meta.f));
            for (i, line) in lines.iter().enumerate() {
                let vals = line
                    .split_whitespace()
                    .map(|t| parse_real(t, path, i + 1))
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != meta.f {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        format!("ragged row: expected {} values, found {}", meta.f, vals.len()),
                    ));
                }
                m.row_mut(i).assign(&ndarray::ArrayView1::from(&vals));
            }
            Ok(FeatureMatrix::Dense(m))
        }
        FeatureFormat::Sparse => {
            let mut rows = Vec::with_capacity(meta.n);
            for (i, line) in lines.iter().enumerate() {
                let mut row = Vec::new();
                for tok in line.split_whitespace() {
                    let (c, v) = tok
                        .split_once(':')
                        .ok_or_else(|| Error::parse(path, i + 1, format!("token `{tok}` is not idx:val")))?;
                    let c = parse_id(c, path, i + 1, "feature index")?;
                    if c >= meta.f {
                        return Err(Error::parse(path, i + 1, format!("feature index {c} out of range (f = {})", meta.f)));
                    }
                    row.push((c, parse_real(v, path, i + 1)?));
                }
                rows.push(row);
            }
            Ok(FeatureMatrix::Sparse(CsrMatrix::from_rows(meta.f, rows)?))
        }
    }
}

fn load_labels(path: &Path, n: usize, k: usize) -> Result<LabelVector> {
    let text = read(path)?;
    let mut labels = Vec::with_capacity(n);
    for (i, line) in text.lines().enumerate() {
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        let c = parse_id(tok, path, i + 1, "label")?;
        if c >= k {
            return Err(Error::parse(path, i + 1, format!("label {c} out of range (k = {k})")));
        }
        labels.push(c);
    }
    if labels.len() != n {
        return Err(Error::parse(path, labels.len() + 1, format!("expected {n} labels, found {}", labels.len())));
    }
    LabelVector::new(labels, k)
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn create(path: PathBuf) -> Result<BufWriter<fs::File>> {
    fs::File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `ds` in the directory layout read by [`load_dataset`]. Reals are
/// printed in shortest round-trip form.
pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = Meta {
        n: ds.num_nodes(),
        f: ds.features.ncols(),
        k: ds.k,
        name: ds.name.clone(),
        features: ds.features.format(),
    };
    let meta_path = dir.join("meta.json");
    let json = serde_json::to_string(&meta).expect("meta serializes");
    fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))?;

    let edges_path = dir.join("edges.tsv");
    let mut w = create(edges_path.clone())?;
    for (u, v) in ds.graph.edges() {
        writeln!(w, "{u}\t{v}").map_err(io(&edges_path))?;
    }
    w.flush().map_err(io(&edges_path))?;

    let feat_path = dir.join("features.tsv");
    let mut w = create(feat_path.clone())?;
    match &ds.features {
        FeatureMatrix::Dense(m) => {
            for row in m.outer_iter() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", line.join(" ")).map_err(io(&feat_path))?;
            }
        }
        FeatureMatrix::Sparse(m) => {
            for r in 0..m.nrows() {
                let line: Vec<String> = m.row(r).map(|(c, v)| format!("{c}:{v}")).collect();
                writeln!(w, "{}", line.join(" ")).map_err(io(&feat_path))?;
            }
        }
    }
    w.flush().map_err(io(&feat_path))?;

    if let Some(labels) = &ds.labels {
        let lab_path = dir.join("labels.tsv");
        let mut w = create(lab_path.clone())?;
        for &c in labels.as_slice() {
            writeln!(w, "{c}").map_err(io(&lab_path))?;
        }
        w.flush().map_err(io(&lab_path))?;
    }
    Ok(())
}

/// Planted-partition generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Mean shift of a node's own block coordinate.
    pub signal: f64,
    pub seed: u64,
}

impl SbmParams {
    /// `blocks` equal blocks of `size` nodes with one feature per block.
    pub fn balanced(blocks: usize, size: usize, p_in: f64, p_out: f64, signal: f64, seed: u64) -> Self {
        Self {
            block_sizes: vec![size; blocks],
            p_in,
            p_out,
            feature_dim: blocks,
            signal,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(Error::InvalidConfig("SBM blocks must be nonempty".into()));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.feature_dim < self.block_sizes.len() {
            return Err(Error::InvalidConfig(format!(
                "feature_dim {} is smaller than the number of blocks {}",
                self.feature_dim,
                self.block_sizes.len()
            )));
        }
        Ok(())
    }
}

/// Samples an SBM graph. Features are `signal·e_block + N(0, I)`.
pub fn generate_sbm(params: &SbmParams) -> Result<Dataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let labels: Vec<usize> = params
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = labels.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { params.p_in } else { params.p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let mut x = Array2::zeros((n, params.feature_dim));
    for (i, mut row) in x.outer_iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        row[labels[i]] += params.signal;
    }
    let k = params.block_sizes.len();
    Ok(Dataset {
        name: "sbm".into(),
        graph: UndirectedGraph::from_edges(n, edges)?,
        features: FeatureMatrix::Dense(x),
        labels: Some(LabelVector::new(labels, k)?),
        k,
        raw_edge_lines: 0,
        build: BuildStats::default(),
    }
    .with_raw_count())
}

impl Dataset {
    fn with_raw_count(mut self) -> Self {
        self.raw_edge_lines = self.graph.edge_count();
        self
    }
}

/// Knobs of the label-guided homophily oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Fraction of each class sampled as endpoints for added edges.
    pub gamma: f64,
    /// Share of the homophily gap closed by removals; the rest by additions.
    pub removal_share: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            removal_share: 0.5,
        }
    }
}

/// Raises edge homophily to `target` using ground-truth labels.
pub fn oracle_perturb(ds: &Dataset, target: f64, seed: u64) -> Result<Dataset> {
    oracle_perturb_with(ds, target, seed, OracleOptions::default())
}

pub fn oracle_perturb_with(ds: &Dataset, target: f64, seed: u64, opts: OracleOptions) -> Result<Dataset> {
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidLabels("oracle perturbation needs ground-truth labels".into()))?;
    if !(opts.gamma > 0.0 && opts.gamma <= 1.0) || !(0.0..=1.0).contains(&opts.removal_share) {
        return Err(Error::InvalidConfig("oracle gamma must lie in (0, 1] and removal share in [0, 1]".into()));
    }
    let current = edge_homophily(&ds.graph, labels)?;
    if target > 1.0 || !target.is_finite() {
        return Err(Error::UnreachableHomophily { target, max: 1.0 });
    }
    if target <= current + 1e-12 {
        if target < current - 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "target homophily {target:.4} is below the current {current:.4}"
            )));
        }
        return Ok(ds.clone());
    }
    let m = ds.graph.edge_count() as f64;
    let inter: Vec<Edge> = ds
        .graph
        .edges()
        .filter(|&(u, v)| labels.get(u) != labels.get(v))
        .collect();
    let m_same = m - inter.len() as f64;
    if m_same == 0.0 {
        return Err(Error::UnreachableHomophily { target, max: current });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = intra_candidates(ds, labels, opts.gamma, &mut rng);
    let cand_total: usize = candidates.iter().map(Vec::len).sum();

    // Removals alone reach the target at r0 = m - m_same / target.
    let r_only = (m - m_same / target - 1e-9).ceil().min(inter.len() as f64);
    let mut removals = (opts.removal_share * r_only).floor();
    let mut additions = additions_for(target, m, m_same, removals);
    if additions > cand_total as f64 {
        removals = r_only;
        additions = 0.0;
    }
    let removals = removals as usize;
    let additions = additions as usize;

    let mut removed = inter;
    removed.shuffle(&mut rng);
    removed.truncate(removals);
    let added = take_per_class(candidates, additions, labels);

    let delta = crate::graph::EdgeDelta::new(added, removed);
    let graph = ds.graph.apply(&delta)?;
    ds.with_graph(graph)
}

// Smallest a with (m_same + a) / (m - r + a) >= target.
fn additions_for(target: f64, m: f64, m_same: f64, r: f64) -> f64 {
    if target >= 1.0 {
        return if r >= m - m_same { 0.0 } else { f64::INFINITY };
    }
    ((target * (m - r) - m_same) / (1.0 - target) - 1e-9).ceil().max(0.0)
}

// Per class: non-adjacent pairs among a random γ-sample, most similar first.
fn intra_candidates<R: Rng + ?Sized>(
    ds: &Dataset,
    labels: &LabelVector,
    gamma: f64,
    rng: &mut R,
) -> Vec<Vec<Edge>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.num_classes()];
    for (i, &c) in labels.as_slice().iter().enumerate() {
        by_class[c].push(i);
    }
    by_class
        .into_iter()
        .map(|mut members| {
            let take = ((gamma * members.len() as f64).ceil() as usize).min(members.len());
            members.shuffle(rng);
            members.truncate(take);
            members.sort_unstable();
            let mut pairs: Vec<(f64, Edge)> = Vec::new();
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    if !ds.graph.has_edge(i, j) {
                        pairs.push((ds.features.row_dot(i, j), (i, j)));
                    }
                }
            }
            pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
            pairs.into_iter().map(|(_, e)| e).collect()
        })
        .collect()
}

// Splits `total` across classes in proportion to class size (largest
// remainders first), moving any shortfall to classes with spare candidates.
fn take_per_class(candidates: Vec<Vec<Edge>>, total: usize, labels: &LabelVector) -> Vec<Edge> {
    let counts = labels.counts();
    let n = labels.len() as f64;
    let mut quota: Vec<usize> = counts.iter().map(|&c| (total as f64 * c as f64 / n).floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = total as f64 * counts[a] as f64 / n;
        let fb = total as f64 * counts[b] as f64 / n;
        (fb - fb.floor()).total_cmp(&(fa - fa.floor())).then(a.cmp(&b))
    });
    let mut left = total - quota.iter().sum::<usize>();
    for &c in order.iter().cycle().take(order.len() * 2) {
        if left == 0 {
            break;
        }
        quota[c] += 1;
        left -= 1;
    }
    let mut spill = 0;
    for (q, cands) in quota.iter_mut().zip(&candidates) {
        if *q > cands.len() {
            spill += *q - cands.len();
            *q = cands.len();
        }
    }
    for (q, cands) in quota.iter_mut().zip(&candidates) {
        let extra = (cands.len() - *q).min(spill);
        *q += extra;
        spill -= extra;
    }
    candidates
        .into_iter()
        .zip(quota)
        .flat_map(|(c, q)| c.into_iter().take(q))
        .collect()
}
