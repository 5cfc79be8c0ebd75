//! Shared fixtures for the kernel benchmarks.

use hole_core::datasets::{generate_sbm, SbmParams};
use hole_core::Dataset;
use ndarray::Array2;

/// Planted-partition graph with `blocks` blocks of `size` nodes and a
/// deterministic pseudo-random `n × dim` embedding.
pub fn fixture(blocks: usize, size: usize, dim: usize) -> (Dataset, Array2<f64>) {
    let p_in = (8.0 / size as f64).min(1.0);
    let p_out = 0.5 / (blocks * size) as f64;
    let ds = generate_sbm(&SbmParams::balanced(blocks, size, p_in, p_out, 1.0, 7)).expect("valid params");
    let n = ds.num_nodes();
    let z = Array2::from_shape_fn((n, dim), |(i, j)| {
        let h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    (ds, z)
}
