use rand::Rng;

use super::mixer::QmixMixer;
use super::replay::{Episode, ReplayBuffer};
use super::{select_actions, QAlgorithm, QError, QLearnerConfig};
use crate::agents::AgentNets;
use crate::diagnostics::{epsilon_greedy_probs, DiagAccumulator, DiagnosticsRecord};
use crate::env::Env;
use crate::nn::{clip_global_norm, Adam, AdamConfig, Checkpoint, Graph, Matrix, NetSpec, NodeId, ParamStore, VALUE_GAIN};
use crate::normalize::RunningMeanStd;

#[derive(Debug, Clone, PartialEq)]
pub struct QTrainOutcome {
    pub loss: f64,
    pub grad_norm: f64,
    pub diagnostics: DiagnosticsRecord,
}

/// Padded episode batch. Per-step rows are ordered `(t, b, agent)`.
struct Batch {
    steps: usize,
    batch: usize,
    /// `steps + 1` stacked network inputs.
    x: Matrix<f32>,
    actions: Vec<usize>,
    rewards: Vec<f32>,
    not_terminal: Vec<f32>,
    mask: Vec<f32>,
    /// `steps + 1` stacked joint observations, for the mixer.
    states: Option<Matrix<f32>>,
}

pub struct QLearner {
    pub config: QLearnerConfig,
    pub n_agents: usize,
    pub obs_dim: usize,
    pub n_actions: usize,
    nets: AgentNets,
    mixer: Option<QmixMixer>,
    online: ParamStore<f32>,
    target: ParamStore<f32>,
    adam: Adam,
    pub buffer: ReplayBuffer,
    reward_stats: RunningMeanStd,
    pub updates: u64,
}

impl QLearner {
    pub fn new<R: Rng + ?Sized>(
        config: QLearnerConfig,
        n_agents: usize,
        obs_dim: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self, QError> {
        config.validate()?;
        let mut online = ParamStore::new();
        let spec = NetSpec::with_body(obs_dim, config.hidden_dim, n_actions, config.body);
        let nets = AgentNets::new(&mut online, "agent", n_agents, obs_dim, spec, config.param_sharing, VALUE_GAIN, rng)?;
        let mixer = (config.algorithm == QAlgorithm::Qmix).then(|| {
            QmixMixer::new(
                &mut online,
                "mixer",
                n_agents,
                n_agents * obs_dim,
                config.mixing_embed_dim,
                config.hypernet_dim,
                rng,
            )
        });
        let target = online.clone();
        let adam = Adam::new(&online, AdamConfig::new(config.lr));
        Ok(QLearner {
            buffer: ReplayBuffer::new(config.buffer_size),
            config,
            n_agents,
            obs_dim,
            n_actions,
            nets,
            mixer,
            online,
            target,
            adam,
            reward_stats: RunningMeanStd::new(),
            updates: 0,
        })
    }

    pub fn online(&self) -> &ParamStore<f32> {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut ParamStore<f32> {
        &mut self.online
    }

    pub fn target(&self) -> &ParamStore<f32> {
        &self.target
    }

    pub fn nets(&self) -> &AgentNets {
        &self.nets
    }

    pub fn mixer(&self) -> Option<&QmixMixer> {
        self.mixer.as_ref()
    }

    pub fn reward_stats(&self) -> &RunningMeanStd {
        &self.reward_stats
    }

    pub fn epsilon_at(&self, env_step: u64) -> f64 {
        self.config.epsilon.epsilon_at(env_step)
    }

    pub fn initial_hidden(&self) -> Option<Matrix<f32>> {
        self.nets.initial_hidden(1)
    }

    /// Per-agent Q-values for one joint observation; advances `hidden`.
    pub fn q_values(&self, obs: &[Vec<f32>], hidden: &mut Option<Matrix<f32>>) -> Result<Vec<Vec<f64>>, QError> {
        let input = self.nets.inputs(&[obs]);
        let (y, h) = self.nets.step_values(&self.online, input, hidden.as_ref())?;
        *hidden = h;
        Ok((0..y.rows).map(|r| y.row(r).iter().map(|&v| v as f64).collect()).collect())
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &[Vec<f32>],
        hidden: &mut Option<Matrix<f32>>,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Vec<usize>, QError> {
        let q = self.q_values(obs, hidden)?;
        Ok(select_actions(&q, epsilon, rng))
    }

    /// Plays one episode with the training ε schedule, starting at `start_step`.
    pub fn collect_episode<R: Rng + ?Sized>(
        &self,
        env: &mut Env,
        env_seed: u64,
        start_step: u64,
        rng: &mut R,
    ) -> Result<Episode, QError> {
        let mut obs = env.reset(env_seed)?;
        let mut ep = Episode::new(self.n_agents, self.obs_dim, &obs);
        let mut hidden = self.initial_hidden();
        loop {
            let eps = self.epsilon_at(start_step + ep.len() as u64);
            let actions = self.act(&obs, &mut hidden, eps, rng)?;
            let step = env.step(&actions)?;
            ep.push(actions, step.team_reward, &step.obs);
            obs = step.obs;
            if step.done {
                ep.terminated = step.terminated;
                return Ok(ep);
            }
        }
    }

    /// Stores an episode and folds its rewards into the running statistics.
    pub fn insert(&mut self, episode: Episode) {
        self.reward_stats.extend(episode.rewards.iter().map(|&r| r as f64));
        self.buffer.push(episode);
    }

    pub fn can_train(&self) -> bool {
        self.buffer.can_sample(self.config.batch_size)
    }

    fn build_batch(&self, episodes: &[&Episode]) -> Batch {
        let n = self.n_agents;
        let bsz = episodes.len();
        let steps = episodes.iter().map(|e| e.len()).max().unwrap_or(0).max(1);
        let d = self.nets.input_dim();
        let mut x = Matrix::zeros((steps + 1) * bsz * n, d);
        let mut actions = vec![0; steps * bsz * n];
        let mut rewards = vec![0.0; steps * bsz];
        let mut not_terminal = vec![1.0; steps * bsz];
        let mut mask = vec![0.0; steps * bsz];
        let mut states = (self.config.algorithm == QAlgorithm::Qmix)
            .then(|| Matrix::zeros((steps + 1) * bsz, n * self.obs_dim));
        let zeros = vec![0.0f32; self.obs_dim];
        for (b, ep) in episodes.iter().enumerate() {
            for t in 0..=steps {
                for i in 0..n {
                    let o = if t <= ep.len() { ep.obs(t, i) } else { &zeros[..] };
                    self.nets.write_input(i, o, x.row_mut((t * bsz + b) * n + i));
                }
                if let Some(s) = states.as_mut() {
                    if t <= ep.len() {
                        s.row_mut(t * bsz + b).copy_from_slice(ep.joint_obs(t));
                    }
                }
            }
            for t in 0..ep.len() {
                let k = t * bsz + b;
                mask[k] = 1.0;
                let r = ep.rewards[t];
                rewards[k] = if self.config.standardize_rewards {
                    self.reward_stats.standardize(r as f64) as f32
                } else {
                    r
                };
                if ep.terminated && t + 1 == ep.len() {
                    not_terminal[k] = 0.0;
                }
                for i in 0..n {
                    actions[k * n + i] = ep.actions[t][i];
                }
            }
        }
        Batch {
            steps,
            batch: bsz,
            x,
            actions,
            rewards,
            not_terminal,
            mask,
            states,
        }
    }

    fn unroll_values(&self, store: &ParamStore<f32>, x: Matrix<f32>, steps: usize, batch: usize) -> Result<Matrix<f32>, QError> {
        let mut g = Graph::new(store);
        let xn = g.input(x);
        let h0 = self.nets.initial_hidden(batch).map(|h| g.input(h));
        let (q, _) = self.nets.unroll(&mut g, xn, steps, batch, h0, None)?;
        Ok(g.value(q).clone())
    }

    fn first_steps(b: &Batch, rows: usize) -> Matrix<f32> {
        Matrix::from_vec(rows, b.x.cols, b.x.data[..rows * b.x.cols].to_vec())
    }

    /// TD targets from the target network: one per `(t, b, agent)` for IQL,
    /// one per `(t, b)` otherwise.
    fn td_targets(&self, b: &Batch) -> Result<Vec<f32>, QError> {
        let n = self.n_agents;
        let bn = b.batch * n;
        let q = self.unroll_values(&self.target, b.x.clone(), b.steps + 1, b.batch)?;
        let maxes: Vec<f32> = (0..q.rows)
            .map(|r| q.row(r).iter().copied().fold(f32::NEG_INFINITY, f32::max))
            .collect();
        let gamma = self.config.gamma as f32;
        let next = |t: usize, bb: usize, i: usize| maxes[(t + 1) * bn + bb * n + i];
        let mut y = Vec::new();
        match self.config.algorithm {
            QAlgorithm::Iql => {
                for t in 0..b.steps {
                    for bb in 0..b.batch {
                        let k = t * b.batch + bb;
                        for i in 0..n {
                            y.push(b.rewards[k] + gamma * b.not_terminal[k] * next(t, bb, i));
                        }
                    }
                }
            }
            QAlgorithm::Vdn => {
                for t in 0..b.steps {
                    for bb in 0..b.batch {
                        let k = t * b.batch + bb;
                        let tot: f32 = (0..n).map(|i| next(t, bb, i)).sum();
                        y.push(b.rewards[k] + gamma * b.not_terminal[k] * tot);
                    }
                }
            }
            QAlgorithm::Qmix => {
                let mixer = self.mixer.as_ref().expect("qmix mixer");
                let states = b.states.as_ref().expect("qmix states");
                let rows = b.steps * b.batch;
                let qs = Matrix::from_vec(rows, n, maxes[bn..].to_vec());
                let s_next = Matrix::from_vec(rows, states.cols, states.data[b.batch * states.cols..].to_vec());
                let tot = mixer.mix_values(&self.target, &qs, &s_next)?;
                for k in 0..rows {
                    y.push(b.rewards[k] + gamma * b.not_terminal[k] * tot.data[k]);
                }
            }
        }
        Ok(y)
    }

    /// Masked mean squared TD error on the tape. Returns the loss node and
    /// the per-agent Q-value node.
    fn loss_graph(&self, g: &mut Graph<'_, f32>, b: &Batch, y: Vec<f32>) -> Result<(NodeId, NodeId), QError> {
        let n = self.n_agents;
        let rows = b.steps * b.batch;
        let x = g.input(Self::first_steps(b, rows * n));
        let h0 = self.nets.initial_hidden(b.batch).map(|h| g.input(h));
        let (q, _) = self.nets.unroll(g, x, b.steps, b.batch, h0, None)?;
        let chosen = g.gather(q, b.actions.clone())?;
        let valid: f32 = b.mask.iter().sum::<f32>().max(1.0);
        let (pred, weights) = match self.config.algorithm {
            QAlgorithm::Iql => {
                let w = b.mask.iter().flat_map(|&m| std::iter::repeat_n(m / (valid * n as f32), n)).collect();
                (chosen, Matrix::from_vec(rows * n, 1, w))
            }
            QAlgorithm::Vdn => {
                let per_row = g.reshape(chosen, rows, n)?;
                let w = b.mask.iter().map(|&m| m / valid).collect();
                (g.sum_cols(per_row), Matrix::from_vec(rows, 1, w))
            }
            QAlgorithm::Qmix => {
                let per_row = g.reshape(chosen, rows, n)?;
                let states = b.states.as_ref().expect("qmix states");
                let s = g.input(Matrix::from_vec(rows, states.cols, states.data[..rows * states.cols].to_vec()));
                let mixer = self.mixer.as_ref().expect("qmix mixer");
                let w = b.mask.iter().map(|&m| m / valid).collect();
                (mixer.forward(g, per_row, s)?, Matrix::from_vec(rows, 1, w))
            }
        };
        let target = g.input(Matrix::from_vec(y.len(), 1, y));
        let diff = g.sub(pred, target)?;
        let sq = g.square(diff);
        let weighted = g.mul_const(sq, weights)?;
        Ok((g.sum(weighted), q))
    }

    /// Loss on the given episodes without updating anything.
    pub fn batch_loss(&self, episodes: &[&Episode]) -> Result<f64, QError> {
        let b = self.build_batch(episodes);
        let y = self.td_targets(&b)?;
        let mut g = Graph::new(&self.online);
        let (loss, _) = self.loss_graph(&mut g, &b, y)?;
        Ok(g.scalar(loss) as f64)
    }

    /// One gradient update on a sampled batch. `epsilon` sets the ε-greedy
    /// policy used for the entropy and divergence diagnostics.
    pub fn train<R: Rng + ?Sized>(&mut self, epsilon: f64, env_step: u64, rng: &mut R) -> Result<QTrainOutcome, QError> {
        let batch = {
            let episodes = self.buffer.sample(self.config.batch_size, rng)?;
            self.build_batch(&episodes)
        };
        self.train_on(&batch, epsilon, env_step)
    }

    /// Same as [`Self::train`] on an explicit set of episodes.
    pub fn train_on_episodes(&mut self, episodes: &[Episode], epsilon: f64, env_step: u64) -> Result<QTrainOutcome, QError> {
        let refs: Vec<&Episode> = episodes.iter().collect();
        let batch = self.build_batch(&refs);
        self.train_on(&batch, epsilon, env_step)
    }

    fn train_on(&mut self, b: &Batch, epsilon: f64, env_step: u64) -> Result<QTrainOutcome, QError> {
        let y = self.td_targets(b)?;
        let (loss, mut grads, q_before) = {
            let mut g = Graph::new(&self.online);
            let (loss, q) = self.loss_graph(&mut g, b, y)?;
            (g.scalar(loss) as f64, g.backward(loss), g.value(q).clone())
        };
        let grad_norm = clip_global_norm(&mut grads, self.config.grad_norm_clip);
        self.adam.step(&mut self.online, &grads)?;
        self.updates += 1;
        self.config.target_update.apply(&self.online, &mut self.target, self.updates);

        let rows = b.steps * b.batch * self.n_agents;
        let q_after = self.unroll_values(&self.online, Self::first_steps(b, rows), b.steps, b.batch)?;
        let mut acc = DiagAccumulator::new(self.n_agents);
        let to64 = |r: &[f32]| r.iter().map(|&v| v as f64).collect::<Vec<_>>();
        for (k, &m) in b.mask.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for i in 0..self.n_agents {
                let r = k * self.n_agents + i;
                let new = epsilon_greedy_probs(&to64(q_after.row(r)), epsilon);
                let old = epsilon_greedy_probs(&to64(q_before.row(r)), epsilon);
                acc.add(i, &new, &old).expect("equal action counts");
            }
        }
        Ok(QTrainOutcome {
            loss,
            grad_norm,
            diagnostics: acc.finish(env_step),
        })
    }

    pub fn save(&self, ck: &mut Checkpoint<f32>) {
        ck.push_store("online/", &self.online);
        ck.push_store("target/", &self.target);
    }

    pub fn restore(&mut self, ck: &Checkpoint<f32>) -> Result<(), QError> {
        ck.restore_store("online/", &mut self.online)?;
        ck.restore_store("target/", &mut self.target)?;
        Ok(())
    }
}
