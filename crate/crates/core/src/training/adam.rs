//! Adam with bias-corrected moment estimates.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.003,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment accumulators, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S: Scalar = f32> {
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
    t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<S>>) -> Self {
        let sizes: Vec<usize> = params.into_iter().map(Tensor::len).collect();
        AdamState {
            m: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, i: usize) -> &[S] {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &[S] {
        &self.v[i]
    }

    /// One update `θ ← θ - lr·m̂/(√v̂ + ε)` over all parameters.
    pub fn step(&mut self, params: &mut [&mut Tensor<S>], grads: &[Tensor<S>], cfg: &AdamConfig) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::InvalidArgument(format!(
                "adam state tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::shape(
                    "adam_step",
                    format!("tensor {i}: parameter {} gradient {}", p.shape(), g.shape()),
                ));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (S::lit(cfg.beta1), S::lit(cfg.beta2));
        let (one_b1, one_b2) = (S::one() - b1, S::one() - b2);
        let m_scale = S::lit(1.0 / (1.0 - cfg.beta1.powi(t)));
        let v_scale = S::lit(1.0 / (1.0 - cfg.beta2.powi(t)));
        let (lr, eps) = (S::lit(cfg.learning_rate), S::lit(cfg.epsilon));
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((theta, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                let m_hat = *m * m_scale;
                let v_hat = *v * v_scale;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
