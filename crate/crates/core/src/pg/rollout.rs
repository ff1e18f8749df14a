use rayon::prelude::*;

use crate::env::{Env, EnvError, JointStep};
use crate::nn::Matrix;

/// `n_step` synchronous steps from every worker. Per-step entries are
/// ordered `(t, worker)` and per-agent entries `(t, worker, agent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub id: u64,
    pub n_step: usize,
    pub n_workers: usize,
    pub n_agents: usize,
    pub obs_dim: usize,
    pub n_actions: usize,
    /// `n_step + 1` joint observations per worker; the last one bootstraps.
    pub obs: Vec<f32>,
    pub actions: Vec<usize>,
    pub logits: Vec<f32>,
    pub rewards: Vec<f32>,
    pub dones: Vec<bool>,
    pub terminated: Vec<bool>,
    /// Step `t` of this worker begins a fresh episode (recurrent state is reset).
    pub starts: Vec<bool>,
    /// Actor hidden state entering step 0, `(worker, agent)` rows.
    pub h0: Option<Matrix<f32>>,
    /// Team returns of episodes that finished during this rollout.
    pub finished_returns: Vec<f64>,
}

impl Rollout {
    pub fn obs(&self, t: usize, worker: usize, agent: usize) -> &[f32] {
        let start = ((t * self.n_workers + worker) * self.n_agents + agent) * self.obs_dim;
        &self.obs[start..start + self.obs_dim]
    }

    /// Joint observations of all agents at `(t, worker)`.
    pub fn joint(&self, t: usize, worker: usize) -> Vec<Vec<f32>> {
        (0..self.n_agents).map(|i| self.obs(t, worker, i).to_vec()).collect()
    }

    pub fn env_steps(&self) -> u64 {
        (self.n_step * self.n_workers) as u64
    }
}

/// Parallel environments that persist across rollouts.
#[derive(Debug, Clone)]
pub struct RolloutWorkers {
    envs: Vec<Env>,
    pub(crate) obs: Vec<Vec<Vec<f32>>>,
    pub(crate) starts: Vec<bool>,
    pub(crate) hidden: Option<Matrix<f32>>,
    returns: Vec<f64>,
    seed: u64,
    episodes: u64,
}

impl RolloutWorkers {
    /// Resets every environment. Episode seeds are drawn from `seed` in
    /// a fixed worker order so results do not depend on thread count.
    pub fn new(envs: Vec<Env>, seed: u64) -> Result<Self, EnvError> {
        let mut w = RolloutWorkers {
            obs: Vec::with_capacity(envs.len()),
            starts: vec![true; envs.len()],
            hidden: None,
            returns: vec![0.0; envs.len()],
            envs,
            seed,
            episodes: 0,
        };
        for k in 0..w.envs.len() {
            let s = w.next_seed();
            let o = w.envs[k].reset(s)?;
            w.obs.push(o);
        }
        Ok(w)
    }

    fn next_seed(&mut self) -> u64 {
        let s = self.seed.wrapping_add(self.episodes.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        self.episodes += 1;
        s
    }

    pub fn n_workers(&self) -> usize {
        self.envs.len()
    }

    pub fn episodes_started(&self) -> u64 {
        self.episodes
    }

    /// Steps every environment with its joint action; finished episodes are
    /// reset. Returns the raw step results and the returns of finished episodes.
    pub(crate) fn step_all(&mut self, actions: &[Vec<usize>]) -> Result<(Vec<JointStep>, Vec<f64>), EnvError> {
        let steps: Vec<JointStep> = self
            .envs
            .par_iter_mut()
            .zip(actions.par_iter())
            .map(|(env, a)| env.step(a))
            .collect::<Result<_, _>>()?;
        let mut finished = Vec::new();
        for (k, s) in steps.iter().enumerate() {
            self.returns[k] += s.team_reward as f64;
            if s.done {
                finished.push(self.returns[k]);
                self.returns[k] = 0.0;
                let seed = self.next_seed();
                self.obs[k] = self.envs[k].reset(seed)?;
                self.starts[k] = true;
            } else {
                self.obs[k] = s.obs.clone();
                self.starts[k] = false;
            }
        }
        Ok((steps, finished))
    }
}
