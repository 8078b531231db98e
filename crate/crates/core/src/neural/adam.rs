use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    /// Steps rejected because the gradient was not finite.
    pub skipped: u64,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            skipped: 0,
        }
    }

    /// Apply one bias-corrected update. A gradient with any non-finite entry
    /// leaves everything untouched and returns `false`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> bool {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        if !grads.iter().all(|g| g.is_finite()) {
            self.skipped += 1;
            log::warn!("skipping Adam step {}: non-finite gradient", self.step + 1);
            return false;
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::new(1, AdamConfig::default());
        let mut p = [1.0];
        s.step(&mut p, &[0.37]);
        assert!((1.0 - p[0] - 1e-3).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_keeps_params_and_counts_the_step() {
        let mut s = AdamState::new(2, AdamConfig::default());
        let mut p = [1.0, -2.0];
        assert!(s.step(&mut p, &[0.0, 0.0]));
        assert_eq!(p, [1.0, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut s = AdamState::new(1, AdamConfig::default());
        let mut p = [1.0];
        assert!(!s.step(&mut p, &[f64::NAN]));
        assert_eq!((p[0], s.step, s.skipped), (1.0, 0, 1));
    }

    #[test]
    fn minimizes_a_quadratic_bowl() {
        let centre = [3.0, -1.5, 0.25];
        let mut p = [0.0; 3];
        let mut s = AdamState::new(3, AdamConfig { lr: 0.05, ..AdamConfig::default() });
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().zip(&centre).map(|(x, c)| 2.0 * (x - c)).collect();
            s.step(&mut p, &g);
        }
        let loss: f64 = p.iter().zip(&centre).map(|(x, c)| (x - c) * (x - c)).sum();
        assert!(loss < 1e-6, "loss {loss}");
    }
}
