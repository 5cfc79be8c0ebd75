//! Analytic gradients against central finite differences.

use hole_core::clusterer::{kl_loss_and_grads, soft_assign, target_distribution, Centers};
use hole_core::encoder::{reconstruction_loss_and_grad, weight_gradient, ReconOptions};
use hole_core::graph::UndirectedGraph;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;

fn rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = (a - b).mapv(|v| v * v).sum().sqrt();
    let scale = a.mapv(|v| v * v).sum().sqrt().max(b.mapv(|v| v * v).sum().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn numeric<F: Fn(&Array2<f64>) -> f64>(x: &Array2<f64>, f: F) -> Array2<f64> {
    let mut g = Array2::zeros(x.raw_dim());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let orig = probe.as_slice().unwrap()[idx];
        probe.as_slice_mut().unwrap()[idx] = orig + H;
        let up = f(&probe);
        probe.as_slice_mut().unwrap()[idx] = orig - H;
        let down = f(&probe);
        probe.as_slice_mut().unwrap()[idx] = orig;
        g.as_slice_mut().unwrap()[idx] = (up - down) / (2.0 * H);
    }
    g
}

fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> UndirectedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < 0.4 {
                edges.push((u, v));
            }
        }
    }
    UndirectedGraph::from_edges(n, edges).unwrap()
}

fn random(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

pub fn check_reconstruction_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..50 {
        let n = rng.random_range(2..=10);
        let d = rng.random_range(1..=4);
        let g = random_graph(n, &mut rng);
        let z = random(n, d, &mut rng);
        let opts = ReconOptions {
            diag_one: trial % 2 == 0,
            mean_scale: trial % 3 != 0,
        };
        let (_, grad) = reconstruction_loss_and_grad(z.view(), &g, opts).unwrap();
        let fd = numeric(&z, |zz| reconstruction_loss_and_grad(zz.view(), &g, opts).unwrap().0);
        assert!(rel_err(&grad, &fd) < 1e-4, "trial {trial}: {}", rel_err(&grad, &fd));
    }
}

pub fn check_weight_gradient_through_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..50 {
        let n = rng.random_range(2..=10);
        let f = rng.random_range(1..=5);
        let d = rng.random_range(1..=4);
        let g = random_graph(n, &mut rng);
        let h = random(n, f, &mut rng);
        let w = random(f, d, &mut rng);
        let loss = |ww: &Array2<f64>| reconstruction_loss_and_grad(h.dot(ww).view(), &g, ReconOptions::default()).unwrap();
        let (_, dz) = loss(&w);
        let dw = weight_gradient(h.view(), dz.view()).unwrap();
        let fd = numeric(&w, |ww| loss(ww).0);
        assert!(rel_err(&dw, &fd) < 1e-4, "trial {trial}");
    }
}

pub fn check_kl_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..50 {
        let n = rng.random_range(2..=10);
        let d = rng.random_range(1..=4);
        let k = rng.random_range(1..=4);
        let z = random(n, d, &mut rng);
        let mu = Centers(random(k, d, &mut rng));
        // Target from a different embedding so P != Q.
        let p = target_distribution(&soft_assign(random(n, d, &mut rng).view(), &mu).unwrap());
        let grads = kl_loss_and_grads(&p, z.view(), &mu).unwrap();
        let fd_z = numeric(&z, |zz| kl_loss_and_grads(&p, zz.view(), &mu).unwrap().loss);
        let fd_mu = numeric(&mu.0, |m| kl_loss_and_grads(&p, z.view(), &Centers(m.clone())).unwrap().loss);
        assert!(rel_err(&grads.dz, &fd_z) < 1e-4, "dz trial {trial}");
        assert!(rel_err(&grads.dmu, &fd_mu) < 1e-4, "dmu trial {trial}");
    }
}

#[test]
fn reconstruction_gradient() {
    check_reconstruction_gradient();
}

#[test]
fn weight_gradient_through_reconstruction() {
    check_weight_gradient_through_reconstruction();
}

#[test]
fn kl_gradients() {
    check_kl_gradients();
}
