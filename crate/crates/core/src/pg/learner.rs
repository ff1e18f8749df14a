use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::loss::pg_losses;
use super::rollout::{Rollout, RolloutWorkers};
use super::{critic_input, n_step_returns, PgConfig, PgError};
use crate::agents::AgentNets;
use crate::diagnostics::{argmax, softmax, DiagAccumulator, DiagnosticsRecord};
use crate::nn::{
    clip_global_norm, Adam, AdamConfig, Body, Checkpoint, Gradients, Graph, Matrix, NetSpec, ParamStore, POLICY_GAIN,
    VALUE_GAIN,
};
use crate::normalize::RunningMeanStd;

#[derive(Debug, Clone, PartialEq)]
pub struct PgTrainOutcome {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub epochs: usize,
    pub diagnostics: DiagnosticsRecord,
}

/// Rollout tensors shared by every epoch of one update.
struct Prepared {
    rows: usize,
    actor_x: Matrix<f32>,
    keep: Option<Vec<Matrix<f32>>>,
    h0: Option<Matrix<f32>>,
    critic_x: Matrix<f32>,
    returns: Vec<f64>,
}

struct EpochResult {
    grads: Gradients<f32>,
    logits: Matrix<f32>,
    loss: f64,
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
}

pub struct PgLearner {
    pub config: PgConfig,
    pub n_agents: usize,
    pub obs_dim: usize,
    pub n_actions: usize,
    actor: AgentNets,
    critic: AgentNets,
    params: ParamStore<f32>,
    target: ParamStore<f32>,
    adam: Adam,
    reward_stats: RunningMeanStd,
    issued: u64,
    last_trained: Option<u64>,
    pub updates: u64,
}

impl PgLearner {
    pub fn new<R: Rng + ?Sized>(
        config: PgConfig,
        n_agents: usize,
        obs_dim: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self, PgError> {
        config.validate()?;
        let mut params = ParamStore::new();
        let actor_spec = NetSpec::with_body(obs_dim, config.hidden_dim, n_actions, config.body);
        let actor = AgentNets::new(&mut params, "actor", n_agents, obs_dim, actor_spec, config.param_sharing, POLICY_GAIN, rng)?;
        let critic_obs = if config.algorithm.centralized_critic() { n_agents * obs_dim } else { obs_dim };
        let critic_spec = NetSpec::with_body(critic_obs, config.hidden_dim, 1, Body::Fc);
        let critic = AgentNets::new(&mut params, "critic", n_agents, critic_obs, critic_spec, config.param_sharing, VALUE_GAIN, rng)?;
        let target = params.clone();
        let adam = Adam::new(&params, AdamConfig::new(config.lr));
        Ok(PgLearner {
            config,
            n_agents,
            obs_dim,
            n_actions,
            actor,
            critic,
            params,
            target,
            adam,
            reward_stats: RunningMeanStd::new(),
            issued: 0,
            last_trained: None,
            updates: 0,
        })
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<f32> {
        &mut self.params
    }

    pub fn target(&self) -> &ParamStore<f32> {
        &self.target
    }

    pub fn actor(&self) -> &AgentNets {
        &self.actor
    }

    pub fn critic(&self) -> &AgentNets {
        &self.critic
    }

    pub fn initial_hidden(&self, batch: usize) -> Option<Matrix<f32>> {
        self.actor.initial_hidden(batch)
    }

    /// Actor logits for a batch of joint observations; advances `hidden`.
    pub fn logits(&self, joint: &[&[Vec<f32>]], hidden: &mut Option<Matrix<f32>>) -> Result<Matrix<f32>, PgError> {
        let input = self.actor.inputs(joint);
        let (y, h) = self.actor.step_values(&self.params, input, hidden.as_ref())?;
        *hidden = h;
        Ok(y)
    }

    /// Samples (or, with `greedy`, takes the argmax of) each agent's action.
    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &[Vec<f32>],
        hidden: &mut Option<Matrix<f32>>,
        greedy: bool,
        rng: &mut R,
    ) -> Result<Vec<usize>, PgError> {
        let y = self.logits(&[obs], hidden)?;
        Ok((0..y.rows).map(|r| choose(y.row(r), greedy, rng)).collect())
    }

    /// Runs every worker for `n_step` steps with the current policy.
    pub fn collect<R: Rng + ?Sized>(&mut self, workers: &mut RolloutWorkers, rng: &mut R) -> Result<Rollout, PgError> {
        let (w, n, a, d) = (workers.n_workers(), self.n_agents, self.n_actions, self.obs_dim);
        let steps = self.config.n_step;
        let fits = match (&workers.hidden, self.actor.is_recurrent()) {
            (Some(h), true) => h.rows == w * n && h.cols == self.actor.hidden_dim(),
            (None, recurrent) => !recurrent,
            (Some(_), false) => false,
        };
        if !fits {
            workers.hidden = self.actor.initial_hidden(w);
        }
        let mut r = Rollout {
            id: self.issued,
            n_step: steps,
            n_workers: w,
            n_agents: n,
            obs_dim: d,
            n_actions: a,
            obs: Vec::with_capacity((steps + 1) * w * n * d),
            actions: Vec::with_capacity(steps * w * n),
            logits: Vec::with_capacity(steps * w * n * a),
            rewards: Vec::with_capacity(steps * w),
            dones: Vec::with_capacity(steps * w),
            terminated: Vec::with_capacity(steps * w),
            starts: Vec::with_capacity(steps * w),
            h0: workers.hidden.clone(),
            finished_returns: Vec::new(),
        };
        self.issued += 1;
        for _ in 0..steps {
            for o in workers.obs.iter().flatten() {
                r.obs.extend_from_slice(o);
            }
            r.starts.extend_from_slice(&workers.starts);
            let mut hidden = workers.hidden.take();
            if let Some(h) = hidden.as_mut() {
                for (k, &s) in workers.starts.iter().enumerate() {
                    if s {
                        for i in 0..n {
                            h.row_mut(k * n + i).fill(0.0);
                        }
                    }
                }
            }
            let joint: Vec<&[Vec<f32>]> = workers.obs.iter().map(Vec::as_slice).collect();
            let logits = self.logits(&joint, &mut hidden)?;
            workers.hidden = hidden;
            let actions: Vec<Vec<usize>> = (0..w)
                .map(|k| (0..n).map(|i| choose(logits.row(k * n + i), false, rng)).collect())
                .collect();
            r.logits.extend_from_slice(&logits.data);
            r.actions.extend(actions.iter().flatten());
            let (results, finished) = workers.step_all(&actions)?;
            for s in &results {
                r.rewards.push(s.team_reward);
                r.dones.push(s.done);
                r.terminated.push(s.terminated);
            }
            r.finished_returns.extend(finished);
        }
        for o in workers.obs.iter().flatten() {
            r.obs.extend_from_slice(o);
        }
        Ok(r)
    }

    fn check_rollout(&self, r: &Rollout) -> Result<(), PgError> {
        if r.n_agents != self.n_agents || r.obs_dim != self.obs_dim || r.n_actions != self.n_actions {
            return Err(PgError::RolloutShape(format!(
                "{} agents, obs {}, actions {}",
                r.n_agents, r.obs_dim, r.n_actions
            )));
        }
        let per_step = r.n_step * r.n_workers;
        if r.rewards.len() != per_step
            || r.dones.len() != per_step
            || r.starts.len() != per_step
            || r.actions.len() != per_step * r.n_agents
            || r.obs.len() != (r.n_step + 1) * r.n_workers * r.n_agents * r.obs_dim
        {
            return Err(PgError::RolloutShape("inconsistent buffer lengths".into()));
        }
        Ok(())
    }

    fn prepare(&self, r: &Rollout, standardize: Option<&RunningMeanStd>) -> Result<Prepared, PgError> {
        let (w, n, steps) = (r.n_workers, self.n_agents, r.n_step);
        let rows = steps * w * n;
        let centralized = self.config.algorithm.centralized_critic();

        let mut actor_x = Matrix::zeros(rows, self.actor.input_dim());
        let mut critic_x = Matrix::zeros((steps + 1) * w * n, self.critic.input_dim());
        for t in 0..=steps {
            for k in 0..w {
                let joint = r.joint(t, k);
                let cin = critic_input(centralized, &joint);
                for i in 0..n {
                    let row = (t * w + k) * n + i;
                    if t < steps {
                        self.actor.write_input(i, &joint[i], actor_x.row_mut(row));
                    }
                    self.critic.write_input(i, &cin[i], critic_x.row_mut(row));
                }
            }
        }

        let (tv, _) = self.critic.step_values(&self.target, critic_x.clone(), None)?;
        let mut returns = vec![0.0; rows];
        let mut rew = vec![0.0; steps];
        let mut vals = vec![0.0; steps + 1];
        let mut dones = vec![false; steps];
        for k in 0..w {
            for t in 0..steps {
                let raw = r.rewards[t * w + k] as f64;
                rew[t] = standardize.map_or(raw, |s| s.standardize(raw));
                dones[t] = r.dones[t * w + k];
            }
            for i in 0..n {
                for (t, v) in vals.iter_mut().enumerate() {
                    *v = tv.data[(t * w + k) * n + i] as f64;
                }
                let g = n_step_returns(&rew, &vals, &dones, self.config.gamma, self.config.n_step);
                for t in 0..steps {
                    returns[(t * w + k) * n + i] = g[t];
                }
            }
        }
        critic_x.data.truncate(rows * critic_x.cols);
        critic_x.rows = rows;

        let keep = self.actor.is_recurrent().then(|| {
            (0..steps)
                .map(|t| {
                    let mut m = Matrix::filled(w * n, self.actor.hidden_dim(), 1.0);
                    for k in 0..w {
                        if r.starts[t * w + k] {
                            for i in 0..n {
                                m.row_mut(k * n + i).fill(0.0);
                            }
                        }
                    }
                    m
                })
                .collect()
        });
        let h0 = match (&r.h0, self.actor.is_recurrent()) {
            (Some(h), true) => Some(h.clone()),
            (None, true) => self.actor.initial_hidden(w),
            _ => None,
        };
        Ok(Prepared {
            rows,
            actor_x,
            keep,
            h0,
            critic_x,
            returns,
        })
    }

    fn epoch(&self, p: &Prepared, r: &Rollout, old_log_probs: Option<&[f64]>) -> Result<EpochResult, PgError> {
        let mut g = Graph::new(&self.params);
        let x = g.input(p.actor_x.clone());
        let h0 = p.h0.clone().map(|h| g.input(h));
        let (logits, _) = self.actor.unroll(&mut g, x, r.n_step, r.n_workers, h0, p.keep.as_deref())?;
        let cx = g.input(p.critic_x.clone());
        let (values, _) = self.critic.unroll(&mut g, cx, 1, p.rows / self.n_agents, None, None)?;
        let adv: Vec<f64> = p
            .returns
            .iter()
            .zip(&g.value(values).data)
            .map(|(&ret, &v)| ret - v as f64)
            .collect();
        let ppo = old_log_probs.map(|o| (o, self.config.ppo_clip));
        let parts = pg_losses(&mut g, logits, &r.actions, &adv, values, &p.returns, ppo, self.config.entropy_coef)?;
        Ok(EpochResult {
            grads: g.backward(parts.total),
            logits: g.value(logits).clone(),
            loss: g.scalar(parts.total) as f64,
            policy_loss: g.scalar(parts.policy) as f64,
            value_loss: g.scalar(parts.value) as f64,
            entropy: g.scalar(parts.entropy) as f64,
        })
    }

    fn log_probs(logits: &Matrix<f32>, actions: &[usize]) -> Vec<f64> {
        (0..logits.rows)
            .map(|r| {
                let row: Vec<f64> = logits.row(r).iter().map(|&v| v as f64).collect();
                softmax(&row)[actions[r]].ln()
            })
            .collect()
    }

    fn actor_logits(&self, p: &Prepared, r: &Rollout) -> Result<Matrix<f32>, PgError> {
        let mut g = Graph::new(&self.params);
        let x = g.input(p.actor_x.clone());
        let h0 = p.h0.clone().map(|h| g.input(h));
        let (logits, _) = self.actor.unroll(&mut g, x, r.n_step, r.n_workers, h0, p.keep.as_deref())?;
        Ok(g.value(logits).clone())
    }

    /// Gradient of the total loss for the first epoch on `rollout`, without updating.
    pub fn loss_gradients(&self, rollout: &Rollout) -> Result<Gradients<f32>, PgError> {
        self.check_rollout(rollout)?;
        let stats = self.config.standardize_rewards.then(|| {
            let mut s = self.reward_stats.clone();
            s.extend(rollout.rewards.iter().map(|&x| x as f64));
            s
        });
        let p = self.prepare(rollout, stats.as_ref())?;
        let old = if self.config.algorithm.is_ppo() {
            Some(Self::log_probs(&self.actor_logits(&p, rollout)?, &rollout.actions))
        } else {
            None
        };
        Ok(self.epoch(&p, rollout, old.as_deref())?.grads)
    }

    /// One update: a single step for A2C, `ppo_epochs` passes for PPO.
    pub fn train(&mut self, rollout: &Rollout, env_step: u64) -> Result<PgTrainOutcome, PgError> {
        self.check_rollout(rollout)?;
        if self.last_trained.is_some_and(|last| rollout.id <= last) {
            return Err(PgError::StaleRollout(rollout.id));
        }
        self.last_trained = Some(rollout.id);
        if self.config.standardize_rewards {
            self.reward_stats.extend(rollout.rewards.iter().map(|&x| x as f64));
        }
        let stats = self.config.standardize_rewards.then(|| self.reward_stats.clone());
        let p = self.prepare(rollout, stats.as_ref())?;

        let mut before: Option<Matrix<f32>> = None;
        let mut old: Option<Vec<f64>> = None;
        let mut last = None;
        let mut grad_norm = 0.0;
        for _ in 0..self.config.epochs() {
            if self.config.algorithm.is_ppo() && old.is_none() {
                let logits = self.actor_logits(&p, rollout)?;
                old = Some(Self::log_probs(&logits, &rollout.actions));
            }
            let mut res = self.epoch(&p, rollout, old.as_deref())?;
            if before.is_none() {
                before = Some(res.logits.clone());
            }
            grad_norm = clip_global_norm(&mut res.grads, self.config.grad_norm_clip);
            self.adam.step(&mut self.params, &res.grads)?;
            self.updates += 1;
            self.config.target_update.apply(&self.params, &mut self.target, self.updates);
            last = Some(res);
        }
        let last = last.expect("at least one epoch");
        let before = before.expect("at least one epoch");
        let after = self.actor_logits(&p, rollout)?;
        let mut acc = DiagAccumulator::new(self.n_agents);
        for row in 0..p.rows {
            let probs = |m: &Matrix<f32>| softmax(&m.row(row).iter().map(|&v| v as f64).collect::<Vec<_>>());
            acc.add(row % self.n_agents, &probs(&after), &probs(&before)).expect("equal action counts");
        }
        Ok(PgTrainOutcome {
            loss: last.loss,
            policy_loss: last.policy_loss,
            value_loss: last.value_loss,
            entropy: last.entropy,
            grad_norm,
            epochs: self.config.epochs(),
            diagnostics: acc.finish(env_step),
        })
    }

    pub fn save(&self, ck: &mut Checkpoint<f32>) {
        ck.push_store("params/", &self.params);
        ck.push_store("target/", &self.target);
    }

    pub fn restore(&mut self, ck: &Checkpoint<f32>) -> Result<(), PgError> {
        ck.restore_store("params/", &mut self.params)?;
        ck.restore_store("target/", &mut self.target)?;
        Ok(())
    }
}

fn choose<R: Rng + ?Sized>(logits: &[f32], greedy: bool, rng: &mut R) -> usize {
    if greedy {
        return argmax(logits);
    }
    let p = softmax(&logits.iter().map(|&v| v as f64).collect::<Vec<_>>());
    WeightedIndex::new(&p).map_or_else(|_| argmax(logits), |d| d.sample(rng))
}
