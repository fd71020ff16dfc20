use std::collections::HashMap;

use autodiff::Tensor;

use crate::error::{Error, Result};
use crate::nn::ParamSet;

/// Bias-corrected Adam over a parameter registry. Moment buffers are keyed
/// by parameter name so optimizer state survives checkpointing.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    pub m: HashMap<String, Vec<f64>>,
    pub v: HashMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step_count: 0,
            m: HashMap::new(),
            v: HashMap::new(),
        }
    }

    /// Consume accumulated gradients (absent = zero) and update every
    /// learnable parameter. `clip` rescales by the global gradient norm.
    pub fn step(&mut self, params: &ParamSet, clip: Option<f64>) -> Result<()> {
        let mut grads: Vec<(String, Tensor, Vec<f64>)> = Vec::new();
        for p in params.learnable() {
            let value = p.value();
            let g = value
                .take_grad()
                .unwrap_or_else(|| vec![0.0; value.numel()]);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite gradient for parameter {}",
                    p.name()
                )));
            }
            grads.push((p.name().to_string(), value, g));
        }

        if let Some(max_norm) = clip {
            let total: f64 = grads
                .iter()
                .flat_map(|(_, _, g)| g.iter())
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if total > max_norm {
                let scale = max_norm / total;
                for (_, _, g) in grads.iter_mut() {
                    for v in g.iter_mut() {
                        *v *= scale;
                    }
                }
            }
        }

        self.step_count += 1;
        let t = self.step_count as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for (p, (name, value, g)) in params.learnable().zip(grads) {
            debug_assert_eq!(p.name(), name);
            let n = value.numel();
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.v.entry(name).or_insert_with(|| vec![0.0; n]);
            let mut new_data = value.data().to_vec();
            for i in 0..n {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                new_data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.set(Tensor::param(new_data, value.shape()).map_err(Error::Autodiff)?);
        }
        Ok(())
    }
}
