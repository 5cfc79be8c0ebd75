//! Independent-oracle checks for the scoring and edge-selection kernels.

use hole_core::clusterer::SoftAssignment;
use hole_core::graph::{Edge, LabelVector, UndirectedGraph};
use hole_core::metrics::{accuracy, ari, nmi, purity};
use hole_core::struct_learn::{recover_intra_edges, remove_inter_edges, top_confident, RemovalMode};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn acc_by_enumeration(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    permutations(k)
        .iter()
        .map(|perm| pred.iter().zip(truth).filter(|&(&p, &t)| perm[p] == t).count())
        .max()
        .unwrap() as f64
        / pred.len() as f64
}

fn ari_by_pairs(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len();
    let (mut both, mut same_p, mut same_t, mut total) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let p = pred[i] == pred[j];
            let t = truth[i] == truth[j];
            both += (p && t) as u8 as f64;
            same_p += p as u8 as f64;
            same_t += t as u8 as f64;
            total += 1.0;
        }
    }
    let expected = same_p * same_t / total;
    let max = 0.5 * (same_p + same_t);
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

fn entropy(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut counts = std::collections::HashMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0.0) += 1.0;
    }
    counts.values().map(|&c: &f64| -(c / n) * (c / n).ln()).sum()
}

fn nmi_direct(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let mut joint = std::collections::HashMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *joint.entry((p, t)).or_insert(0.0) += 1.0;
    }
    let count = |xs: &[usize], v: usize| xs.iter().filter(|&&x| x == v).count() as f64;
    let mi: f64 = joint
        .iter()
        .map(|(&(p, t), &c): (&(usize, usize), &f64)| {
            (c / n) * ((c / n) / ((count(pred, p) / n) * (count(truth, t) / n))).ln()
        })
        .sum();
    let (hp, ht) = (entropy(pred), entropy(truth));
    if hp == 0.0 || ht == 0.0 {
        return if hp == ht { 1.0 } else { 0.0 };
    }
    mi / (0.5 * (hp + ht))
}

fn purity_direct(pred: &[usize], truth: &[usize]) -> f64 {
    let clusters: std::collections::BTreeSet<usize> = pred.iter().copied().collect();
    let hits: usize = clusters
        .iter()
        .map(|&c| {
            let members: Vec<usize> = pred.iter().zip(truth).filter(|(&p, _)| p == c).map(|(_, &t)| t).collect();
            (0..=*truth.iter().max().unwrap())
                .map(|t| members.iter().filter(|&&m| m == t).count())
                .max()
                .unwrap()
        })
        .sum();
    hits as f64 / pred.len() as f64
}

pub fn check_accuracy_matches_factorial_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..200 {
        let k = rng.random_range(1..=5);
        let n = rng.random_range(1..=30);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let got = accuracy(&pred, &truth).unwrap();
        assert!((got - acc_by_enumeration(&pred, &truth, k)).abs() < 1e-12);
    }
}

pub fn check_ari_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..200 {
        let n = rng.random_range(2..=15);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let got = ari(&pred, &truth).unwrap();
        assert!((got - ari_by_pairs(&pred, &truth)).abs() < 1e-10, "{pred:?} {truth:?}");
    }
}

pub fn check_nmi_and_purity_match_direct_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..200 {
        let n = rng.random_range(2..=40);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        assert!((nmi(&pred, &truth).unwrap() - nmi_direct(&pred, &truth)).abs() < 1e-10);
        assert!((purity(&pred, &truth).unwrap() - purity_direct(&pred, &truth)).abs() < 1e-10);
    }
}

struct Instance {
    graph: UndirectedGraph,
    z: Array2<f64>,
    q: SoftAssignment,
}

// Small integer embeddings make similarity ties common.
fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(2..=40);
    let k = rng.random_range(1..=4);
    let d = rng.random_range(1..=3);
    let p = rng.random_range(0.05..0.5);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let z = Array2::from_shape_fn((n, d), |_| rng.random_range(-2..=2) as f64);
    let mut q = Array2::from_shape_fn((n, k), |_| rng.random_range(1..=4) as f64);
    for mut row in q.outer_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    Instance {
        graph: UndirectedGraph::from_edges(n, edges).unwrap(),
        z,
        q: SoftAssignment(q),
    }
}

fn full_similarity(z: &Array2<f64>) -> Array2<f64> {
    z.dot(&z.t())
}

fn argmax_labels(q: &SoftAssignment) -> Vec<usize> {
    q.0.outer_iter()
        .map(|r| {
            let mut best = 0;
            for k in 1..r.len() {
                if r[k] > r[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn recover_oracle(inst: &Instance, gamma: f64, xi: f64) -> Vec<Edge> {
    let s = full_similarity(&inst.z);
    let labels = argmax_labels(&inst.q);
    let n = inst.graph.num_nodes();
    let m = inst.graph.edge_count();
    let mut out = Vec::new();
    for k in 0..inst.q.k() {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == k).collect();
        if members.is_empty() {
            continue;
        }
        members.sort_by(|&a, &b| inst.q.0[[b, k]].partial_cmp(&inst.q.0[[a, k]]).unwrap().then(a.cmp(&b)));
        let keep = ((gamma * members.len() as f64).floor() as usize).max(1);
        members.truncate(keep);
        let budget = (xi * m as f64 * keep as f64 / n as f64).floor() as usize;
        let mut pairs: Vec<(f64, Edge)> = Vec::new();
        for &i in &members {
            for &j in &members {
                if i < j && !inst.graph.has_edge(i, j) {
                    pairs.push((s[[i, j]], (i, j)));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        out.extend(pairs.into_iter().take(budget).map(|(_, e)| e));
    }
    out
}

fn remove_oracle(inst: &Instance, eta: f64) -> Vec<Edge> {
    let s = full_similarity(&inst.z);
    let labels = argmax_labels(&inst.q);
    let mut edges: Vec<(f64, Edge)> = Vec::new();
    for u in 0..inst.graph.num_nodes() {
        for v in u + 1..inst.graph.num_nodes() {
            if inst.graph.has_edge(u, v) {
                edges.push((s[[u, v]], (u, v)));
            }
        }
    }
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let window = (eta * edges.len() as f64).floor() as usize;
    edges
        .into_iter()
        .take(window)
        .map(|(_, e)| e)
        .filter(|&(u, v)| labels[u] != labels[v])
        .collect()
}

pub fn check_edge_selection_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for trial in 0..100 {
        let inst = instance(&mut rng);
        let gamma = [0.3, 0.5, 1.0][trial % 3];
        let xi = rng.random_range(0.0..1.0);
        let eta = rng.random_range(0.0..0.6);
        let subsets = top_confident(&inst.q, gamma).unwrap();
        let got = recover_intra_edges(inst.z.view(), &subsets, &inst.graph, xi).unwrap();
        assert_eq!(got, recover_oracle(&inst, gamma, xi), "recovery, trial {trial}");
        let labels = LabelVector::from_ids(argmax_labels(&inst.q));
        let got = remove_inter_edges(inst.z.view(), &labels, &inst.graph, eta, RemovalMode::GlobalWindow).unwrap();
        assert_eq!(got, remove_oracle(&inst, eta), "removal, trial {trial}");
    }
}

#[test]
fn accuracy_matches_factorial_enumeration() {
    check_accuracy_matches_factorial_enumeration();
}

#[test]
fn ari_matches_pair_counting() {
    check_ari_matches_pair_counting();
}

#[test]
fn nmi_and_purity_match_direct_formulas() {
    check_nmi_and_purity_match_direct_formulas();
}

#[test]
fn edge_selection_matches_brute_force() {
    check_edge_selection_matches_brute_force();
}
