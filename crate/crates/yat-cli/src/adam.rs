//! Adam over a flat parameter vector. Full-batch gradients are supplied by
//! the caller; this only tracks the moment estimates.

use serde::{Deserialize, Serialize};

/// Optimizer settings. Defaults follow the usual (0.9, 0.999, 1e-8).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_opt: f64,
    pub epochs: usize,
    pub batch: Option<usize>,
}

impl AdamConfig {
    pub fn new(lr: f64, epochs: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps_opt: 1e-8,
            epochs,
            batch: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n_params: usize) -> Self {
        assert!(cfg.lr > 0.0, "learning rate must be positive");
        assert!((0.0..1.0).contains(&cfg.beta1) && (0.0..1.0).contains(&cfg.beta2));
        Self {
            cfg,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// One update with bias-corrected moments.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grads[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.eps_opt);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        // f(p) = (p0 - 3)^2 + 10 (p1 + 1)^2
        let mut params = vec![0.0, 0.0];
        let mut opt = Adam::new(AdamConfig::new(0.05, 0), 2);
        for _ in 0..2000 {
            let grads = vec![2.0 * (params[0] - 3.0), 20.0 * (params[1] + 1.0)];
            opt.step(&mut params, &grads);
        }
        assert!((params[0] - 3.0).abs() < 1e-3, "p0 = {}", params[0]);
        assert!((params[1] + 1.0).abs() < 1e-3, "p1 = {}", params[1]);
    }

    #[test]
    fn first_step_size_is_learning_rate() {
        let mut params = vec![1.0];
        let mut opt = Adam::new(AdamConfig::new(0.01, 0), 1);
        opt.step(&mut params, &[123.4]);
        assert!((params[0] - (1.0 - 0.01)).abs() < 1e-9);
    }
}
