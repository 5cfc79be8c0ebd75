//! Adam with bias correction.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment estimates for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    m: Array2<f64>,
    v: Array2<f64>,
    step: u64,
}

impl Adam {
    pub fn new(shape: (usize, usize)) -> Self {
        Self {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// In-place update of `param` with gradient `grad`.
    pub fn step(&mut self, param: &mut Array2<f64>, grad: &Array2<f64>, lr: f64) -> Result<()> {
        if param.dim() != grad.dim() || param.dim() != self.m.dim() {
            return Err(Error::DimensionMismatch {
                what: "Adam gradient shape",
                expected: self.m.len(),
                got: grad.len(),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        Zip::from(param)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            });
        Ok(())
    }
}
