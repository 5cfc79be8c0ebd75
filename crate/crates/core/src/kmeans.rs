//! k-means++ seeding with Lloyd refinement and seeded restarts.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once no center moves farther than this (Euclidean).
    pub tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centers: Array2<f64>,
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best-of-`restarts` k-means. Restart `r` draws from its own ChaCha stream
/// derived from `seed`, so results are reproducible bit for bit.
pub fn kmeans(points: ArrayView2<'_, f64>, k: usize, seed: u64, opts: KMeansOptions) -> Result<KMeansFit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::TooFewPoints { k, n });
    }
    let mut best: Option<KMeansFit> = None;
    for restart in 0..opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let fit = lloyd(points, plus_plus(points, k, &mut rng), opts);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
pub fn plus_plus<R: Rng + ?Sized>(points: ArrayView2<'_, f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = points.nrows();
    let mut centers = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut nearest: Vec<f64> = points
        .outer_iter()
        .map(|p| sq_dist(p, centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for (i, p) in points.outer_iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, centers.row(c)));
        }
    }
    centers
}

fn assign(points: ArrayView2<'_, f64>, centers: &Array2<f64>, labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, p) in points.outer_iter().enumerate() {
        let mut best = (f64::INFINITY, 0);
        for (c, center) in centers.outer_iter().enumerate() {
            let d = sq_dist(p, center);
            if d < best.0 {
                best = (d, c);
            }
        }
        labels[i] = best.1;
        inertia += best.0;
    }
    inertia
}

/// Lloyd iterations from the given centers. An emptied cluster is re-seeded
/// at the point farthest from its current center.
pub fn lloyd(points: ArrayView2<'_, f64>, mut centers: Array2<f64>, opts: KMeansOptions) -> KMeansFit {
    let n = points.nrows();
    let k = centers.nrows();
    let mut labels = vec![0usize; n];
    let mut inertia = assign(points, &centers, &mut labels);
    for _ in 0..opts.max_iter {
        let mut sums = Array2::<f64>::zeros(centers.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, p) in points.outer_iter().enumerate() {
            sums.row_mut(labels[i]).scaled_add(1.0, &p);
            counts[labels[i]] += 1;
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                sums.row_mut(c).mapv_inplace(|v| v / counts[c] as f64);
                continue;
            }
            let far = (0..n)
                .filter(|&i| !taken[i])
                .map(|i| (sq_dist(points.row(i), centers.row(labels[i])), i))
                .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
                .1;
            taken[far] = true;
            sums.row_mut(c).assign(&points.row(far));
        }
        let shift = centers
            .outer_iter()
            .zip(sums.outer_iter())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = sums;
        inertia = assign(points, &centers, &mut labels);
        if shift < opts.tol {
            break;
        }
    }
    KMeansFit {
        centers,
        labels,
        inertia,
    }
}
