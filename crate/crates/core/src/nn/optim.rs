use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};
use super::tensor::{Matrix, Real};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept in f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<T: Real>(store: &ParamStore<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = store.values().iter().map(|p| vec![0.0; p.len()]).collect();
        Adam {
            config,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one update and increments the store's step counter.
    /// Nothing is modified when a gradient is NaN or infinite.
    pub fn step<T: Real>(&mut self, store: &mut ParamStore<T>, grads: &Gradients<T>) -> Result<(), NnError> {
        if !grads.is_finite() {
            return Err(NnError::NonFiniteGradient);
        }
        assert_eq!(grads.slots.len(), self.m.len(), "gradient slots");
        store.steps += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = store.steps as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in store.values_mut().iter_mut().zip(&grads.slots).zip(&mut self.m).zip(&mut self.v) {
            for (((x, &gi), mi), vi) in p.data.iter_mut().zip(&g.data).zip(m.iter_mut()).zip(v.iter_mut()) {
                let gi = gi.as_f64();
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let update = lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                *x = T::from_f64(x.as_f64() - update);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` to norm `max_norm` when larger. Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut Gradients<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(T::from_f64(max_norm / norm));
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetUpdate {
    Hard { interval: u64 },
    Soft { tau: f64 },
}

impl TargetUpdate {
    /// Updates `target` after learner step `learner_step` (counted from 1).
    /// Returns whether the target changed.
    pub fn apply<T: Real>(&self, online: &ParamStore<T>, target: &mut ParamStore<T>, learner_step: u64) -> bool {
        assert!(online.same_layout(target), "parameter layouts differ");
        match *self {
            TargetUpdate::Hard { interval } => {
                if interval > 0 && learner_step.is_multiple_of(interval) {
                    target.copy_from(online);
                    return true;
                }
                false
            }
            TargetUpdate::Soft { tau } => {
                let (keep, take) = (T::from_f64(1.0 - tau), T::from_f64(tau));
                for (t, o) in target.values_mut().iter_mut().zip(online.values()) {
                    soft_blend(t, o, keep, take);
                }
                true
            }
        }
    }
}

fn soft_blend<T: Real>(target: &mut Matrix<T>, online: &Matrix<T>, keep: T, take: T) {
    for (t, &o) in target.data.iter_mut().zip(&online.data) {
        *t = keep * *t + take * o;
    }
}
