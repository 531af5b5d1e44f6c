//! Adaptive moment-estimation optimizer over [`ParameterSet`] tensors.

use crate::error::{Error, Result};
use crate::model::ParameterSet;

/// Moment decay and stability constants. The defaults (0.9, 0.999, 1e-8)
/// are the cited reference values; only the learning rate is tuned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates shaped like the parameters, plus the
/// step counter used for bias correction.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    first_moment: ParameterSet,
    second_moment: ParameterSet,
    step_count: usize,
    hyper: AdamParams,
}

impl OptimizerState {
    pub fn new(like: &ParameterSet) -> Self {
        Self::with_hyper(like, AdamParams::default())
    }

    pub fn with_hyper(like: &ParameterSet, hyper: AdamParams) -> Self {
        OptimizerState {
            first_moment: like.zeros_like(),
            second_moment: like.zeros_like(),
            step_count: 0,
            hyper,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    /// One bias-corrected update:
    /// `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(
        &mut self,
        params: &mut ParameterSet,
        grads: &ParameterSet,
        learning_rate: f64,
    ) -> Result<()> {
        self.step_count += 1;
        let t = self.step_count as i32;
        let AdamParams {
            beta1,
            beta2,
            epsilon,
        } = self.hyper;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        let mut p_slices = params.tensor_slices_mut();
        let g_slices = grads.tensor_slices();
        let mut m_slices = self.first_moment.tensor_slices_mut();
        let mut v_slices = self.second_moment.tensor_slices_mut();
        if p_slices.len() != g_slices.len() {
            return Err(Error::shape(
                "gradient tensors do not match parameter tensors",
            ));
        }
        for (((p, g), m), v) in p_slices
            .iter_mut()
            .zip(&g_slices)
            .zip(m_slices.iter_mut())
            .zip(v_slices.iter_mut())
        {
            if p.len() != g.len() {
                return Err(Error::shape(
                    "gradient tensor length does not match parameter tensor",
                ));
            }
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
