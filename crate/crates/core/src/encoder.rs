//! Linear encoder `Z = H·W`, the adjacency-reconstruction loss and their
//! analytic gradients.
//!
//! The reconstruction loss `‖Z Zᵀ - T‖²_F` is evaluated through the Gram
//! identity
//!
//! ```text
//! ‖Z Zᵀ - T‖² = ‖ZᵀZ‖² - 2·Σ_{(i,j)∈T} z_i·z_j + ‖T‖²
//! ∂/∂Z         = 4·(Z(ZᵀZ) - T·Z)
//! ```
//!
//! so the `N×N` similarity matrix is never formed; cost is `O(N·d² + |E|·d)`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::optim::Adam;

/// Trainable `F×d` weight matrix with its optimizer state.
#[derive(Debug, Clone)]
pub struct Encoder {
    weights: Array2<f64>,
    adam: Adam,
    learning_rate: f64,
}

impl Encoder {
    /// Uniform init in `±sqrt(6 / (F + d))`.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, learning_rate: f64, rng: &mut R) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((in_dim, out_dim), || rng.random_range(-bound..bound));
        Self::from_weights(weights, learning_rate)
    }

    pub fn from_weights(weights: Array2<f64>, learning_rate: f64) -> Self {
        let adam = Adam::new(weights.dim());
        Self {
            weights,
            adam,
            learning_rate,
        }
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn steps(&self) -> u64 {
        self.adam.steps()
    }

    /// One Adam update of the weights.
    pub fn adam_step(&mut self, grad: &Array2<f64>) -> Result<()> {
        self.adam.step(&mut self.weights, grad, self.learning_rate)
    }
}

/// `Z = H·W`.
pub fn encode(h: ArrayView2<'_, f64>, enc: &Encoder) -> Result<Array2<f64>> {
    if h.ncols() != enc.in_dim() {
        return Err(Error::DimensionMismatch {
            what: "encoder input width",
            expected: enc.in_dim(),
            got: h.ncols(),
        });
    }
    Ok(h.dot(&enc.weights))
}

/// `∂L/∂W = Hᵀ·∂L/∂Z`.
pub fn weight_gradient(h: ArrayView2<'_, f64>, dz: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if h.nrows() != dz.nrows() {
        return Err(Error::DimensionMismatch {
            what: "weight gradient rows",
            expected: h.nrows(),
            got: dz.nrows(),
        });
    }
    Ok(h.t().dot(&dz))
}

/// How the reconstruction target and loss are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconOptions {
    /// Put ones on the target diagonal.
    pub diag_one: bool,
    /// Divide the loss (and gradient) by `N²`.
    pub mean_scale: bool,
}

impl Default for ReconOptions {
    fn default() -> Self {
        Self {
            diag_one: true,
            mean_scale: true,
        }
    }
}

/// `‖Z Zᵀ - T‖²_F` (optionally over `N²`) and its gradient in `Z`, where `T`
/// is the 0/1 adjacency of `target` with the diagonal set per `opts`.
pub fn reconstruction_loss_and_grad(
    z: ArrayView2<'_, f64>,
    target: &UndirectedGraph,
    opts: ReconOptions,
) -> Result<(f64, Array2<f64>)> {
    let n = target.num_nodes();
    if z.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "embedding rows vs. target nodes",
            expected: n,
            got: z.nrows(),
        });
    }
    // ||ZᵀZ||_F = ||ZZᵀ||_F; form whichever Gram matrix is smaller.
    let gram = if n < z.ncols() { z.dot(&z.t()) } else { z.t().dot(&z) };
    let tz = target_times(target, z, opts.diag_one);

    let gram_sq: f64 = gram.iter().map(|v| v * v).sum();
    let cross: f64 = Zip::from(&z).and(&tz).fold(0.0, |acc, &a, &b| acc + a * b);
    let target_sq = (2 * target.edge_count() + if opts.diag_one { n } else { 0 }) as f64;
    // Clamp: cancellation can push an exact zero slightly negative.
    let mut loss = (gram_sq - 2.0 * cross + target_sq).max(0.0);

    let mut grad = if n < z.ncols() { gram.dot(&z) } else { z.dot(&gram) };
    grad -= &tz;
    let mut scale = 4.0;
    if opts.mean_scale && n > 0 {
        let nn = (n * n) as f64;
        loss /= nn;
        scale /= nn;
    }
    grad *= scale;
    if !loss.is_finite() {
        return Err(Error::NonFinite("reconstruction loss".into()));
    }
    Ok((loss, grad))
}

/// `T·Z` for the 0/1 adjacency `T` (plus identity when `diag_one`).
fn target_times(target: &UndirectedGraph, z: ArrayView2<'_, f64>, diag_one: bool) -> Array2<f64> {
    let mut out = if diag_one {
        z.to_owned()
    } else {
        Array2::zeros(z.raw_dim())
    };
    for (i, mut row) in out.outer_iter_mut().enumerate() {
        for &j in target.neighbors(i) {
            row += &z.row(j);
        }
    }
    out
}

/// Scales every row to unit L2 norm. Returns the normalized rows and the
/// original norms (zero rows stay zero).
pub fn normalize_rows(y: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>) {
    let norms = y.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    let mut z = y.to_owned();
    for (mut row, &nrm) in z.outer_iter_mut().zip(norms.iter()) {
        if nrm > 0.0 {
            row /= nrm;
        }
    }
    (z, norms)
}

/// Back-propagates `dz` through [`normalize_rows`]:
/// `dy_i = (dz_i - z_i (z_i·dz_i)) / ‖y_i‖`.
pub fn normalize_rows_backward(
    z: ArrayView2<'_, f64>,
    norms: &Array1<f64>,
    dz: ArrayView2<'_, f64>,
) -> Array2<f64> {
    let mut dy = dz.to_owned();
    for (i, mut row) in dy.outer_iter_mut().enumerate() {
        let nrm = norms[i];
        if nrm == 0.0 {
            row.fill(0.0);
            continue;
        }
        let zi = z.row(i);
        let proj = zi.dot(&row);
        row.scaled_add(-proj, &zi);
        row /= nrm;
    }
    dy
}
