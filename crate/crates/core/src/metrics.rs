//! External clustering quality: accuracy under the best one-to-one label
//! matching, normalized mutual information, adjusted Rand index and purity.
//!
//! All four are computed from a shared contingency table, so they are
//! invariant under relabeling of either partition.

use crate::error::{Error, Result};

/// Counts `n[p][t]` of points with predicted cluster `p` and true class `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<usize>>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    total: usize,
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                what: "prediction vs. ground-truth length",
                expected: truth.len(),
                got: pred.len(),
            });
        }
        let rows = pred.iter().max().map_or(0, |&m| m + 1);
        let cols = truth.iter().max().map_or(0, |&m| m + 1);
        let mut counts = vec![vec![0usize; cols]; rows];
        for (&p, &t) in pred.iter().zip(truth) {
            counts[p][t] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..cols).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            total: pred.len(),
        })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[usize] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[usize] {
        &self.col_sums
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// Which mean of the two entropies normalizes mutual information.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NmiNormalization {
    #[default]
    Arithmetic,
    Geometric,
}

/// Best matched fraction over injective cluster-to-class maps.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.total == 0 {
        return Ok(0.0);
    }
    let size = table.counts.len().max(table.col_sums.len());
    let mut cost = vec![vec![0i64; size]; size];
    for (p, row) in table.counts.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            cost[p][t] = -(c as i64);
        }
    }
    let assignment = hungarian(&cost);
    let matched: i64 = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| -cost[r][c])
        .sum();
    Ok(matched as f64 / table.total as f64)
}

/// NMI with arithmetic-mean normalization.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    nmi_with(pred, truth, NmiNormalization::Arithmetic)
}

pub fn nmi_with(pred: &[usize], truth: &[usize], norm: NmiNormalization) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let n = table.total as f64;
    if table.total == 0 {
        return Ok(1.0);
    }
    let entropy = |sums: &[usize]| -> f64 {
        sums.iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_pred = entropy(&table.row_sums);
    let h_true = entropy(&table.col_sums);
    if h_pred == 0.0 || h_true == 0.0 {
        // Both trivial: identical single-cluster partitions.
        return Ok(if h_pred == 0.0 && h_true == 0.0 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (p, row) in table.counts.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            let a = table.row_sums[p] as f64;
            let b = table.col_sums[t] as f64;
            mi += c / n * (c * n / (a * b)).ln();
        }
    }
    let denom = match norm {
        NmiNormalization::Arithmetic => 0.5 * (h_pred + h_true),
        NmiNormalization::Geometric => (h_pred * h_true).sqrt(),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index from pair counts.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let index: f64 = table.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = table.row_sums.iter().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = table.col_sums.iter().map(|&c| choose2(c)).sum();
    let pairs = choose2(table.total);
    if pairs == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / pairs;
    let max = 0.5 * (sum_rows + sum_cols);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if same_partition(pred, truth) { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// Fraction of points belonging to the majority class of their cluster.
pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.total == 0 {
        return Ok(0.0);
    }
    let hit: usize = table
        .counts
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(hit as f64 / table.total as f64)
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut fwd = std::collections::HashMap::new();
    let mut bwd = std::collections::HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        *fwd.entry(x).or_insert(y) == y && *bwd.entry(y).or_insert(x) == x
    })
}

/// All four scores for one prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterScores {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub purity: f64,
}

pub fn score_all(pred: &[usize], truth: &[usize]) -> Result<ClusterScores> {
    Ok(ClusterScores {
        acc: accuracy(pred, truth)?,
        nmi: nmi(pred, truth)?,
        ari: ari(pred, truth)?,
        purity: purity(pred, truth)?,
    })
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns `assignment[row] = col`.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; column 0 is a virtual sentinel.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = inf;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let cur = cost[r - 1][col - 1] - u[r] - v[col];
                if cur < minv[col] {
                    minv[col] = cur;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        if owner[col] > 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relabeled_prediction_is_perfect() {
        let truth = [0, 0, 1, 1, 2, 2, 2];
        let pred = [2, 2, 0, 0, 1, 1, 1];
        assert_eq!(accuracy(&pred, &truth).unwrap(), 1.0);
        assert!((nmi(&pred, &truth).unwrap() - 1.0).abs() < 1e-12);
        assert!((ari(&pred, &truth).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(purity(&pred, &truth).unwrap(), 1.0);
    }

    #[test]
    fn single_cluster_against_balanced_truth() {
        let truth = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let pred = [0; 10];
        assert_eq!(accuracy(&pred, &truth).unwrap(), 0.5);
        assert_eq!(ari(&pred, &truth).unwrap(), 0.0);
        assert_eq!(purity(&pred, &truth).unwrap(), 0.5);
        assert_eq!(nmi(&pred, &truth).unwrap(), 0.0);
    }

    #[test]
    fn trivial_partitions() {
        assert_eq!(nmi(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 1, 2], &[2, 0, 1]).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(accuracy(&[0, 1], &[0]).is_err());
        assert!(nmi(&[0, 1], &[0]).is_err());
        assert!(ari(&[0], &[0, 1]).is_err());
        assert!(purity(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn independent_partitions_have_small_nmi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<usize> = (0..20000).map(|_| rng.random_range(0..4)).collect();
        let b: Vec<usize> = (0..20000).map(|_| rng.random_range(0..4)).collect();
        assert!(nmi(&a, &b).unwrap() < 1e-3);
        assert!(ari(&a, &b).unwrap().abs() < 1e-2);
    }

    #[test]
    fn geometric_nmi_matches_formula() {
        let pred = [0, 0, 1, 1, 1, 2];
        let truth = [0, 0, 0, 1, 1, 1];
        let arith = nmi_with(&pred, &truth, NmiNormalization::Arithmetic).unwrap();
        let geo = nmi_with(&pred, &truth, NmiNormalization::Geometric).unwrap();
        // AM >= GM of the entropies, so the geometric variant is never smaller.
        assert!(geo >= arith);
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let a = hungarian(&cost);
        let total: i64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn accuracy_never_exceeds_purity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(1..60);
            let kp = rng.random_range(1..6);
            let kt = rng.random_range(1..6);
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..kp)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..kt)).collect();
            let s = score_all(&pred, &truth).unwrap();
            assert!(s.acc <= s.purity + 1e-12);
            assert!((0.0..=1.0).contains(&s.acc));
            assert!((0.0..=1.0).contains(&s.nmi));
            assert!((-1.0..=1.0).contains(&s.ari));
            assert!((0.0..=1.0).contains(&s.purity));
        }
    }
}
