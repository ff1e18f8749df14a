//! On-policy actor-critic learners: IA2C, IPPO, MAA2C and MAPPO.

pub mod learner;
pub mod loss;
pub mod rollout;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;
use crate::nn::{Body, NnError, TargetUpdate};

pub use learner::{PgLearner, PgTrainOutcome};
pub use loss::{pg_losses, LossParts};
pub use rollout::{Rollout, RolloutWorkers};

#[derive(Debug, Error)]
pub enum PgError {
    #[error("rollout {0} was already used for an update")]
    StaleRollout(u64),
    #[error("rollout shape does not match the learner: {0}")]
    RolloutShape(String),
    #[error("invalid policy-gradient config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PgAlgorithm {
    Ia2c,
    Ippo,
    Maa2c,
    Mappo,
}

impl PgAlgorithm {
    pub fn centralized_critic(self) -> bool {
        matches!(self, PgAlgorithm::Maa2c | PgAlgorithm::Mappo)
    }

    pub fn is_ppo(self) -> bool {
        matches!(self, PgAlgorithm::Ippo | PgAlgorithm::Mappo)
    }
}

impl fmt::Display for PgAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PgAlgorithm::Ia2c => "ia2c",
            PgAlgorithm::Ippo => "ippo",
            PgAlgorithm::Maa2c => "maa2c",
            PgAlgorithm::Mappo => "mappo",
        })
    }
}

impl FromStr for PgAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ia2c" => Ok(PgAlgorithm::Ia2c),
            "ippo" => Ok(PgAlgorithm::Ippo),
            "maa2c" => Ok(PgAlgorithm::Maa2c),
            "mappo" => Ok(PgAlgorithm::Mappo),
            _ => Err(format!("unknown policy-gradient algorithm {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgConfig {
    pub algorithm: PgAlgorithm,
    pub param_sharing: bool,
    /// Actor body; the critic is always feed-forward.
    pub body: Body,
    pub hidden_dim: usize,
    pub lr: f64,
    pub gamma: f64,
    pub n_step: usize,
    pub n_workers: usize,
    pub entropy_coef: f64,
    pub grad_norm_clip: f64,
    pub ppo_clip: f64,
    pub ppo_epochs: usize,
    pub target_update: TargetUpdate,
    pub standardize_rewards: bool,
    /// Act greedily instead of sampling during evaluation.
    pub greedy_eval: bool,
}

impl PgConfig {
    pub fn new(algorithm: PgAlgorithm, param_sharing: bool) -> Self {
        PgConfig {
            algorithm,
            param_sharing,
            body: Body::Fc,
            hidden_dim: 128,
            lr: 5e-4,
            gamma: 0.99,
            n_step: 5,
            n_workers: 10,
            entropy_coef: 0.001,
            grad_norm_clip: 10.0,
            ppo_clip: 0.2,
            ppo_epochs: 4,
            target_update: TargetUpdate::Soft { tau: 0.01 },
            standardize_rewards: false,
            greedy_eval: false,
        }
    }

    pub fn epochs(&self) -> usize {
        if self.algorithm.is_ppo() {
            self.ppo_epochs
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<(), PgError> {
        let bad = |m: &str| Err(PgError::InvalidConfig(m.to_string()));
        if self.hidden_dim == 0 || self.n_step == 0 || self.n_workers == 0 {
            return bad("hidden_dim, n_step and n_workers must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.algorithm.is_ppo() && (self.ppo_epochs == 0 || self.ppo_clip <= 0.0) {
            return bad("PPO needs positive epochs and clip");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        Ok(())
    }
}

/// Bootstrapped returns for one reward stream.
///
/// `values` has one more entry than `rewards`. Each target sums up to `n`
/// discounted rewards, stops at the first `done`, and otherwise bootstraps
/// from the value where it stopped.
pub fn n_step_returns(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, n: usize) -> Vec<f64> {
    let len = rewards.len();
    assert_eq!(values.len(), len + 1, "values need a bootstrap entry");
    assert_eq!(dones.len(), len, "one done flag per reward");
    (0..len)
        .map(|t| {
            let mut g = 0.0;
            let mut disc = 1.0;
            let mut k = 0;
            while k < n && t + k < len {
                g += disc * rewards[t + k];
                disc *= gamma;
                if dones[t + k] {
                    return g;
                }
                k += 1;
            }
            g + disc * values[t + k]
        })
        .collect()
}

/// Critic input per agent: its own observation, or the joint observation
/// (canonical agent order) for a centralized critic.
pub fn critic_input(centralized: bool, obs: &[Vec<f32>]) -> Vec<Vec<f32>> {
    if centralized {
        let joint: Vec<f32> = obs.iter().flatten().copied().collect();
        vec![joint; obs.len()]
    } else {
        obs.to_vec()
    }
}
