use super::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; non-positive disables clipping.
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
        }
    }
}

/// Adam with global-norm clipping. Moment buffers follow the parameter
/// block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: ModelParams,
    v: ModelParams,
    steps: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ModelParams) -> Self {
        Adam {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Clips `grads` in place to the configured global norm and returns the
    /// norm before clipping.
    pub fn clip(&self, grads: &mut ModelParams) -> Result<f64> {
        if let Some(b) = grads.blocks().iter().find(|b| b.data.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteGradient(b.name.clone()));
        }
        let norm = grads.squared_norm().sqrt();
        if self.config.clip_norm > 0.0 && norm > self.config.clip_norm {
            grads.scale(self.config.clip_norm / norm);
        }
        Ok(norm)
    }

    /// One update. Returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<f64> {
        if params.shape_table() != grads.shape_table() {
            return Err(Error::InvalidArgument("gradient shape differs from parameters".into()));
        }
        let mut g = grads.clone();
        let norm = self.clip(&mut g)?;
        self.steps += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            ..
        } = self.config;
        let bc1 = 1.0 - beta1.powf(self.steps as f64);
        let bc2 = 1.0 - beta2.powf(self.steps as f64);
        for (((p, g), m), v) in params
            .blocks_mut()
            .iter_mut()
            .zip(g.blocks())
            .zip(self.m.blocks_mut())
            .zip(self.v.blocks_mut())
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
                v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                p.data[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(norm)
    }
}
