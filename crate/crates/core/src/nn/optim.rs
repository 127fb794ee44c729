use serde::{Deserialize, Serialize};

use super::graph::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Staircase exponential decay: `base * rate^floor(step / interval)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub decay_rate: f64,
    pub decay_interval: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            base: 0.0004,
            decay_rate: 0.96,
            decay_interval: 2500,
        }
    }
}

impl LrSchedule {
    pub fn at(&self, step: usize) -> f64 {
        self.base * self.decay_rate.powi((step / self.decay_interval.max(1)) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for every parameter of one store.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    schedule: LrSchedule,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: usize,
}

impl Adam {
    pub fn new(params: &ParamStore, config: AdamConfig, schedule: LrSchedule) -> Self {
        let zeros = || params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self {
            config,
            schedule,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    /// Number of updates applied so far.
    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.schedule.at(self.step)
    }

    /// Applies one bias-corrected update. Gradients are checked for finiteness
    /// before any parameter is touched.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::shape("adam", params.len(), grads.len()));
        }
        for (id, g) in params.ids().zip(grads) {
            if g.shape() != params.get(id).shape() {
                return Err(Error::shape(params.name(id), params.get(id).shape(), g.shape()));
            }
            if g.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(params.name(id).to_string()));
            }
        }
        let lr = self.schedule.at(self.step);
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((w, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store(values: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::new(vec![values.len()], values.to_vec()).unwrap());
        s
    }

    #[test]
    fn schedule_values() {
        let s = LrSchedule::default();
        assert_eq!(s.at(0), 0.0004);
        assert_eq!(s.at(2499), 0.0004);
        assert!((s.at(2500) - 0.000384).abs() < 1e-18);
        assert!((s.at(5000) - 0.00036864).abs() < 1e-18);
    }

    proptest! {
        #[test]
        fn schedule_is_staircase(step in 0usize..2_000_000) {
            let s = LrSchedule::default();
            prop_assert!(s.at(step + 1) <= s.at(step));
            let start = step / 2500 * 2500;
            prop_assert_eq!(s.at(step), s.at(start));
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = store(&[1.0]);
        let mut adam = Adam::new(&p, AdamConfig::default(), LrSchedule::default());
        adam.step(&mut p, &[Tensor::new(vec![1], vec![1.0]).unwrap()]).unwrap();
        let delta = p.get(p.find("w").unwrap()).data()[0] - 1.0;
        assert!((delta + 0.0004).abs() < 1e-9, "{delta}");
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = store(&[0.3, -2.0]);
        let before = p.clone();
        let mut adam = Adam::new(&p, AdamConfig::default(), LrSchedule::default());
        for _ in 0..3 {
            adam.step(&mut p, &[Tensor::zeros(&[2])]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn identical_parameters_stay_identical() {
        let mut p = store(&[0.5, 0.5]);
        let mut adam = Adam::new(&p, AdamConfig::default(), LrSchedule::default());
        for k in 0..10 {
            let g = 0.1 * k as f64 - 0.3;
            adam.step(&mut p, &[Tensor::new(vec![2], vec![g, g]).unwrap()]).unwrap();
        }
        let d = p.get(p.find("w").unwrap()).data();
        assert_eq!(d[0], d[1]);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = store(&[1.0]);
        let mut adam = Adam::new(&p, AdamConfig::default(), LrSchedule::default());
        let err = adam
            .step(&mut p, &[Tensor::new(vec![1], vec![f64::NAN]).unwrap()])
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "w"));
        assert_eq!(p.get(p.find("w").unwrap()).data(), &[1.0]);
    }
}
