//! Value-based learners: independent Q-learning, VDN and QMIX.

pub mod learner;
pub mod mixer;
pub mod replay;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::argmax;
use crate::env::EnvError;
use crate::nn::{Body, NnError, TargetUpdate};

pub use learner::{QLearner, QTrainOutcome};
pub use mixer::{mix_vdn, QmixMixer};
pub use replay::{Episode, ReplayBuffer};

#[derive(Debug, Error)]
pub enum QError {
    #[error("replay buffer holds {have} episodes, batch needs {need}")]
    BufferUnderflow { have: usize, need: usize },
    #[error("invalid Q-learning config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QAlgorithm {
    Iql,
    Vdn,
    Qmix,
}

impl fmt::Display for QAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QAlgorithm::Iql => "iql",
            QAlgorithm::Vdn => "vdn",
            QAlgorithm::Qmix => "qmix",
        })
    }
}

impl FromStr for QAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "iql" => Ok(QAlgorithm::Iql),
            "vdn" => Ok(QAlgorithm::Vdn),
            "qmix" => Ok(QAlgorithm::Qmix),
            _ => Err(format!("unknown value-based algorithm {s:?}")),
        }
    }
}

/// Linear decay from `start` to `end` over `decay_steps` environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn new(end: f64, decay_steps: u64) -> Self {
        EpsilonSchedule {
            start: 1.0,
            end,
            decay_steps,
        }
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QLearnerConfig {
    pub algorithm: QAlgorithm,
    pub param_sharing: bool,
    pub body: Body,
    pub hidden_dim: usize,
    pub lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_size: usize,
    pub grad_norm_clip: f64,
    pub target_update: TargetUpdate,
    pub epsilon: EpsilonSchedule,
    pub eval_epsilon: f64,
    pub standardize_rewards: bool,
    pub mixing_embed_dim: usize,
    pub hypernet_dim: usize,
    pub hypernet_layers: usize,
}

impl QLearnerConfig {
    /// Shared Q-learning settings; per-algorithm values are filled in by the caller.
    pub fn new(algorithm: QAlgorithm, param_sharing: bool) -> Self {
        QLearnerConfig {
            algorithm,
            param_sharing,
            body: Body::Gru,
            hidden_dim: if param_sharing { 128 } else { 64 },
            lr: 3e-4,
            gamma: 0.99,
            batch_size: 32,
            buffer_size: 5000,
            grad_norm_clip: 10.0,
            target_update: TargetUpdate::Hard { interval: 200 },
            epsilon: EpsilonSchedule::new(0.05, if param_sharing { 2_000_000 } else { 50_000 }),
            eval_epsilon: 0.05,
            standardize_rewards: true,
            mixing_embed_dim: 32,
            hypernet_dim: 64,
            hypernet_layers: 2,
        }
    }

    pub fn validate(&self) -> Result<(), QError> {
        let bad = |m: &str| Err(QError::InvalidConfig(m.to_string()));
        if self.hidden_dim == 0 || self.batch_size == 0 || self.buffer_size == 0 {
            return bad("hidden_dim, batch_size and buffer_size must be positive");
        }
        if self.batch_size > self.buffer_size {
            return bad("batch_size exceeds buffer_size");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.eval_epsilon)
            || !(0.0..=1.0).contains(&self.epsilon.start)
            || !(0.0..=1.0).contains(&self.epsilon.end)
        {
            return bad("epsilon values must lie in [0, 1]");
        }
        if self.hypernet_layers != 2 {
            return bad("only two-layer hypernetworks are supported");
        }
        Ok(())
    }
}

/// ε-greedy choice per agent: uniform with probability ε, else argmax
/// (lowest index on ties).
pub fn select_actions<R: Rng + ?Sized>(q_values: &[Vec<f64>], epsilon: f64, rng: &mut R) -> Vec<usize> {
    q_values
        .iter()
        .map(|q| {
            if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
                rng.gen_range(0..q.len())
            } else {
                argmax(q)
            }
        })
        .collect()
}
