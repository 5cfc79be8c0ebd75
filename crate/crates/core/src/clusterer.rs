//! Self-training clustering head.
//!
//! Soft assignments use a Student's t kernel with one degree of freedom,
//! `q_ik ∝ (1 + ‖z_i - μ_k‖²)^{-1}`. The target `p_ik ∝ q_ik² / f_k` (with
//! `f_k = Σ_j q_jk`) sharpens `Q`; training minimizes `KL(P‖Q)` with `P`
//! held fixed.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::LabelVector;
use crate::kmeans::{kmeans, KMeansOptions};

/// `K×d` cluster centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Centers(pub Array2<f64>);

impl Centers {
    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }
}

/// Row-stochastic `N×K` assignment matrix with strictly positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment(pub Array2<f64>);

impl SoftAssignment {
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn num_nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    /// Column sums `f_k`.
    pub fn cluster_mass(&self) -> Vec<f64> {
        self.0.columns().into_iter().map(|c| c.sum()).collect()
    }
}

/// Centers from k-means on the embedding (best of the configured restarts).
pub fn kmeans_init(z: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<Centers> {
    kmeans_init_with(z, k, seed, KMeansOptions::default())
}

pub fn kmeans_init_with(z: ArrayView2<'_, f64>, k: usize, seed: u64, opts: KMeansOptions) -> Result<Centers> {
    Ok(Centers(kmeans(z, k, seed, opts)?.centers))
}

fn check_dims(z: ArrayView2<'_, f64>, centers: &Centers) -> Result<()> {
    if z.ncols() != centers.0.ncols() {
        return Err(Error::DimensionMismatch {
            what: "embedding width vs. center width",
            expected: centers.0.ncols(),
            got: z.ncols(),
        });
    }
    Ok(())
}

/// Kernel values `(1 + ‖z_i - μ_k‖²)^{-1}`.
fn kernel(z: ArrayView2<'_, f64>, centers: &Centers) -> Array2<f64> {
    let (n, k) = (z.nrows(), centers.k());
    let mut out = Array2::zeros((n, k));
    for (i, zi) in z.outer_iter().enumerate() {
        for (c, mu) in centers.0.outer_iter().enumerate() {
            let d2: f64 = zi.iter().zip(mu.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            out[[i, c]] = 1.0 / (1.0 + d2);
        }
    }
    out
}

fn normalize_rows_sum(mut m: Array2<f64>) -> Array2<f64> {
    for mut row in m.outer_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

pub fn soft_assign(z: ArrayView2<'_, f64>, centers: &Centers) -> Result<SoftAssignment> {
    check_dims(z, centers)?;
    Ok(SoftAssignment(normalize_rows_sum(kernel(z, centers))))
}

pub fn target_distribution(q: &SoftAssignment) -> SoftAssignment {
    let mass = q.cluster_mass();
    let mut p = q.0.mapv(|v| v * v);
    for mut row in p.outer_iter_mut() {
        for (v, f) in row.iter_mut().zip(&mass) {
            *v /= f;
        }
    }
    SoftAssignment(normalize_rows_sum(p))
}

/// `KL(P‖Q)` summed over nodes, with gradients in the embedding and centers.
#[derive(Debug, Clone)]
pub struct KlGrads {
    pub loss: f64,
    pub dz: Array2<f64>,
    pub dmu: Array2<f64>,
}

/// KL loss for the current `Z` and centers against a fixed target `P`.
/// `Q` is recomputed from `z` and `centers`.
pub fn kl_loss_and_grads(p: &SoftAssignment, z: ArrayView2<'_, f64>, centers: &Centers) -> Result<KlGrads> {
    check_dims(z, centers)?;
    if p.0.dim() != (z.nrows(), centers.k()) {
        return Err(Error::DimensionMismatch {
            what: "target distribution shape",
            expected: z.nrows() * centers.k(),
            got: p.0.len(),
        });
    }
    let w = kernel(z, centers);
    let q = normalize_rows_sum(w.clone());
    let mut loss = 0.0;
    for (&pv, &qv) in p.0.iter().zip(q.iter()) {
        if pv > 0.0 {
            loss += pv * (pv / qv).ln();
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("clustering KL loss".into()));
    }
    let mut dz = Array2::zeros(z.raw_dim());
    let mut dmu = Array2::zeros(centers.0.raw_dim());
    for (i, zi) in z.outer_iter().enumerate() {
        for (c, mu) in centers.0.outer_iter().enumerate() {
            let coef = 2.0 * w[[i, c]] * (p.0[[i, c]] - q[[i, c]]);
            let mut dz_row = dz.row_mut(i);
            let mut dmu_row = dmu.row_mut(c);
            for ((dzv, dmv), (&a, &b)) in dz_row.iter_mut().zip(dmu_row.iter_mut()).zip(zi.iter().zip(mu.iter())) {
                let g = coef * (a - b);
                *dzv += g;
                *dmv -= g;
            }
        }
    }
    Ok(KlGrads { loss, dz, dmu })
}

/// `argmax_k q_ik`, ties to the lowest index.
pub fn hard_labels(q: &SoftAssignment) -> LabelVector {
    let labels = q
        .0
        .outer_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    LabelVector::new(labels, q.k()).expect("argmax is below k")
}
