use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::QError;

/// One complete episode. Observations are flattened joint observations,
/// `len + 1` of them so the final transition can bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub n_agents: usize,
    pub obs_dim: usize,
    obs: Vec<f32>,
    pub actions: Vec<Vec<usize>>,
    pub rewards: Vec<f32>,
    /// Ended in a true terminal state rather than at the time limit.
    pub terminated: bool,
}

impl Episode {
    pub fn new(n_agents: usize, obs_dim: usize, first_obs: &[Vec<f32>]) -> Self {
        let mut e = Episode {
            n_agents,
            obs_dim,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            terminated: false,
        };
        e.push_obs(first_obs);
        e
    }

    fn push_obs(&mut self, obs: &[Vec<f32>]) {
        assert_eq!(obs.len(), self.n_agents, "agent count");
        for o in obs {
            assert_eq!(o.len(), self.obs_dim, "observation width");
            self.obs.extend_from_slice(o);
        }
    }

    /// Appends a transition: joint action, team reward and the next observation.
    pub fn push(&mut self, actions: Vec<usize>, reward: f32, next_obs: &[Vec<f32>]) {
        assert_eq!(actions.len(), self.n_agents, "agent count");
        self.actions.push(actions);
        self.rewards.push(reward);
        self.push_obs(next_obs);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Observation of `agent` at time `t` (`0..=len`).
    pub fn obs(&self, t: usize, agent: usize) -> &[f32] {
        let start = (t * self.n_agents + agent) * self.obs_dim;
        &self.obs[start..start + self.obs_dim]
    }

    /// Joint observation at time `t`, agents concatenated.
    pub fn joint_obs(&self, t: usize) -> &[f32] {
        let w = self.n_agents * self.obs_dim;
        &self.obs[t * w..(t + 1) * w]
    }

    pub fn team_return(&self) -> f64 {
        self.rewards.iter().map(|&r| r as f64).sum()
    }
}

/// Ring buffer of whole episodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<Episode>,
    pub inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity");
        ReplayBuffer {
            capacity,
            episodes: VecDeque::with_capacity(capacity.min(1024)),
            inserted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Inserts an episode, evicting the oldest when full.
    pub fn push(&mut self, episode: Episode) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
        self.inserted += 1;
    }

    /// Episodes from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter()
    }

    pub fn can_sample(&self, batch: usize) -> bool {
        self.episodes.len() >= batch
    }

    /// `batch` distinct episodes chosen uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Episode>, QError> {
        if !self.can_sample(batch) {
            return Err(QError::BufferUnderflow {
                have: self.episodes.len(),
                need: batch,
            });
        }
        Ok(index::sample(rng, self.episodes.len(), batch)
            .into_iter()
            .map(|i| &self.episodes[i])
            .collect())
    }
}
