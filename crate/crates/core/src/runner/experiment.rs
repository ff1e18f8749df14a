use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, LearnerConfig};
use super::metrics::{MetricsEvent, MetricsHeader, MetricsWriter, RunInfo, METRICS_FILE};
use super::{thread_pool, RunnerError};
use crate::diagnostics::{profile_from_counts, DiagnosticsRecord};
use crate::env::Env;
use crate::nn::{Checkpoint, Matrix};
use crate::pg::{PgLearner, RolloutWorkers};
use crate::qlearn::QLearner;
use crate::scenario::{parse_scenario, Scenario};

pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

const EVAL_STREAM: u64 = 0x005E_ED0F_E7A1;
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Environment seed for training episode `k` of a run.
fn train_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(k.wrapping_mul(GOLDEN))
}

/// Environment seed for evaluation episode `e` at evaluation point `p`.
fn eval_seed(seed: u64, p: u64, e: u64) -> u64 {
    (seed ^ EVAL_STREAM).wrapping_mul(GOLDEN).wrapping_add(p.wrapping_mul(1_000_003)).wrapping_add(e)
}

/// Step of evaluation point `k` out of `n` spread over `total` steps.
pub fn eval_point_step(k: usize, n: usize, total: u64) -> u64 {
    (k as u128 * total as u128 / (n as u128 - 1)) as u64
}

/// Everything needed to rebuild a learner from a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub scenario: String,
    pub horizon: Option<u32>,
    pub learner: LearnerConfig,
    pub n_agents: usize,
    pub obs_dim: usize,
    pub n_actions: usize,
    pub seed: u64,
    pub env_steps: u64,
}

#[allow(clippy::large_enum_variant)]
pub enum Learner {
    Value(QLearner),
    Policy(PgLearner),
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(cfg: &LearnerConfig, env: &Env, rng: &mut R) -> Result<Self, RunnerError> {
        let (n, d, a) = (env.n_agents(), env.obs_dim(), env.n_actions());
        Ok(match cfg {
            LearnerConfig::Value(q) => Learner::Value(QLearner::new(q.clone(), n, d, a, rng)?),
            LearnerConfig::Policy(p) => Learner::Policy(PgLearner::new(p.clone(), n, d, a, rng)?),
        })
    }

    /// The policy used at evaluation time.
    pub fn eval_policy(&self) -> Policy<'_> {
        match self {
            Learner::Value(q) => Policy::EpsilonGreedy(q, q.config.eval_epsilon),
            Learner::Policy(p) => Policy::Stochastic(p, p.config.greedy_eval),
        }
    }

    pub fn checkpoint(&self, meta: &CheckpointMeta) -> Result<Checkpoint<f32>, RunnerError> {
        let text = serde_json::to_string(meta).map_err(|e| RunnerError::Encode(e.to_string()))?;
        let mut ck = Checkpoint::new(text);
        match self {
            Learner::Value(q) => q.save(&mut ck),
            Learner::Policy(p) => p.save(&mut ck),
        }
        Ok(ck)
    }

    /// Rebuilds the learner and environment stored in a checkpoint file.
    pub fn load(path: &Path) -> Result<(Self, Env, CheckpointMeta), RunnerError> {
        let ck = Checkpoint::<f32>::load(path)?;
        let meta: CheckpointMeta =
            serde_json::from_str(&ck.metadata).map_err(|e| RunnerError::ConfigInvalid(format!("checkpoint metadata: {e}")))?;
        let scenario = parse_scenario(&meta.scenario).map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
        let env = Env::new(&scenario, meta.horizon)?;
        if (env.n_agents(), env.obs_dim(), env.n_actions()) != (meta.n_agents, meta.obs_dim, meta.n_actions) {
            return Err(RunnerError::ConfigInvalid("checkpoint does not match its scenario".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(meta.seed);
        let mut learner = Learner::new(&meta.learner, &env, &mut rng)?;
        match &mut learner {
            Learner::Value(q) => q.restore(&ck)?,
            Learner::Policy(p) => p.restore(&ck)?,
        }
        Ok((learner, env, meta))
    }
}

/// Action selection used during evaluation.
#[derive(Clone, Copy)]
pub enum Policy<'a> {
    EpsilonGreedy(&'a QLearner, f64),
    /// Samples from the actor, or takes its argmax when the flag is set.
    Stochastic(&'a PgLearner, bool),
    Random,
}

impl Policy<'_> {
    fn initial_hidden(&self) -> Option<Matrix<f32>> {
        match self {
            Policy::EpsilonGreedy(q, _) => q.initial_hidden(),
            Policy::Stochastic(p, _) => p.initial_hidden(1),
            Policy::Random => None,
        }
    }

    fn act<R: Rng + ?Sized>(
        &self,
        obs: &[Vec<f32>],
        hidden: &mut Option<Matrix<f32>>,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, RunnerError> {
        Ok(match self {
            Policy::EpsilonGreedy(q, eps) => q.act(obs, hidden, *eps, rng)?,
            Policy::Stochastic(p, greedy) => p.act(obs, hidden, *greedy, rng)?,
            Policy::Random => (0..obs.len()).map(|_| rng.gen_range(0..n_actions)).collect(),
        })
    }
}

/// Returns and action counts from a batch of evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub agent_returns: Vec<f64>,
    pub episode_returns: Vec<f64>,
    pub action_counts: Vec<Vec<u64>>,
}

impl EvalOutcome {
    pub fn mean_return(&self) -> f64 {
        self.episode_returns.iter().sum::<f64>() / self.episode_returns.len().max(1) as f64
    }
}

/// Plays one episode per seed without touching any learner state.
pub fn evaluate<R: Rng + ?Sized>(
    policy: Policy<'_>,
    env: &mut Env,
    seeds: impl IntoIterator<Item = u64>,
    rng: &mut R,
) -> Result<EvalOutcome, RunnerError> {
    let (n, a) = (env.n_agents(), env.n_actions());
    let mut out = EvalOutcome {
        agent_returns: vec![0.0; n],
        episode_returns: Vec::new(),
        action_counts: vec![vec![0; a]; n],
    };
    for seed in seeds {
        let mut obs = env.reset(seed)?;
        let mut hidden = policy.initial_hidden();
        let mut team = 0.0;
        loop {
            let actions = policy.act(&obs, &mut hidden, a, rng)?;
            for (i, &act) in actions.iter().enumerate() {
                out.action_counts[i][act] += 1;
            }
            let step = env.step(&actions)?;
            for (acc, r) in out.agent_returns.iter_mut().zip(&step.rewards) {
                *acc += *r as f64;
            }
            team += step.team_reward as f64;
            obs = step.obs;
            if step.done {
                break;
            }
        }
        out.episode_returns.push(team);
    }
    let episodes = out.episode_returns.len().max(1) as f64;
    for r in &mut out.agent_returns {
        *r /= episodes;
    }
    Ok(out)
}

/// Mean team return of the uniform random policy over `episodes` episodes.
pub fn random_baseline(scenario: &Scenario, horizon: Option<u32>, episodes: u64, seed: u64) -> Result<f64, RunnerError> {
    let mut env = Env::new(scenario, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ EVAL_STREAM);
    let out = evaluate(Policy::Random, &mut env, (0..episodes).map(|e| eval_seed(seed, u64::MAX, e)), &mut rng)?;
    Ok(out.mean_return())
}

/// Running means of diagnostics and losses between evaluation points.
struct Accumulator {
    entropy: Vec<f64>,
    kl: Vec<f64>,
    loss: f64,
    updates: usize,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Accumulator {
            entropy: vec![0.0; n],
            kl: vec![0.0; n],
            loss: 0.0,
            updates: 0,
        }
    }

    fn add(&mut self, d: &DiagnosticsRecord, loss: f64) {
        for (a, v) in self.entropy.iter_mut().zip(&d.entropy) {
            *a += v;
        }
        for (a, v) in self.kl.iter_mut().zip(&d.kl) {
            *a += v;
        }
        self.loss += loss;
        self.updates += 1;
    }

    fn drain(&mut self, step: u64, epsilon: f64) -> Option<[MetricsEvent; 2]> {
        if self.updates == 0 {
            return None;
        }
        let k = self.updates as f64;
        let record = DiagnosticsRecord::new(
            step,
            self.entropy.iter().map(|v| v / k).collect(),
            self.kl.iter().map(|v| v / k).collect(),
        );
        let loss = self.loss / k;
        *self = Accumulator::new(self.entropy.len());
        Some([MetricsEvent::Diagnostics(record), MetricsEvent::TrainLoss { step, loss, epsilon }])
    }
}

/// Trains, evaluates and records one run; returns its directory.
///
/// The directory holds the resolved config, the metrics stream and the
/// final checkpoint. A run is a pure function of its config and seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<PathBuf, RunnerError> {
    cfg.validate()?;
    let pool = thread_pool()?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<PathBuf, RunnerError> {
    let e = &cfg.experiment;
    let scenario = cfg.scenario()?;
    let learner_cfg = cfg.learner_config()?;
    let dir = cfg.run_dir();
    std::fs::create_dir_all(&dir).map_err(|err| RunnerError::io(&dir, err))?;
    let cfg_path = dir.join(CONFIG_FILE);
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|err| RunnerError::io(&cfg_path, err))?;

    let mut env = Env::new(&scenario, e.horizon)?;
    let mut eval_env = env.clone();
    let (n, a) = (env.n_agents(), env.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(e.seed);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(e.seed ^ EVAL_STREAM);
    let mut learner = Learner::new(&learner_cfg, &env, &mut rng)?;

    let header = MetricsHeader::new(RunInfo {
        scenario: scenario.name(),
        algorithm: e.algorithm.to_ascii_lowercase(),
        param_sharing: e.param_sharing,
        seed: e.seed,
        n_agents: n,
        n_actions: a,
        total_steps: e.total_steps,
        n_eval_points: e.n_eval_points,
    });
    let mut writer = MetricsWriter::create(&dir.join(METRICS_FILE), &header)?;

    let mut workers = match &learner {
        Learner::Policy(p) => {
            let envs = (0..p.config.n_workers).map(|_| env.clone()).collect();
            Some(RolloutWorkers::new(envs, train_seed(e.seed, u64::MAX))?)
        }
        Learner::Value(_) => None,
    };

    let mut acc = Accumulator::new(n);
    let mut steps = 0u64;
    let mut episodes = 0u64;
    let mut point = 0usize;
    let mut epsilon = 0.0;
    loop {
        while point < e.n_eval_points && steps >= eval_point_step(point, e.n_eval_points, e.total_steps) {
            let at = eval_point_step(point, e.n_eval_points, e.total_steps);
            for ev in acc.drain(at, epsilon).into_iter().flatten() {
                writer.write(&ev)?;
            }
            let seeds = (0..e.eval_episodes as u64).map(|k| eval_seed(e.seed, point as u64, k));
            let out = evaluate(learner.eval_policy(), &mut eval_env, seeds, &mut eval_rng)?;
            writer.write(&MetricsEvent::EvalPoint {
                step: at,
                team_return: out.mean_return(),
                agent_returns: out.agent_returns,
                episode_returns: out.episode_returns,
            })?;
            writer.write(&MetricsEvent::TaskSwitch {
                step: at,
                profile: profile_from_counts(out.action_counts, e.task_switch_mode),
            })?;
            point += 1;
        }
        if point == e.n_eval_points {
            break;
        }
        match &mut learner {
            Learner::Value(q) => {
                let ep = q.collect_episode(&mut env, train_seed(e.seed, episodes), steps, &mut rng)?;
                episodes += 1;
                steps += ep.len() as u64;
                q.insert(ep);
                if q.can_train() {
                    epsilon = q.epsilon_at(steps);
                    let out = q.train(epsilon, steps, &mut rng)?;
                    acc.add(&out.diagnostics, out.loss);
                }
            }
            Learner::Policy(p) => {
                let w = workers.as_mut().expect("policy learners own rollout workers");
                let rollout = p.collect(w, &mut rng)?;
                steps += rollout.env_steps();
                let out = p.train(&rollout, steps)?;
                acc.add(&out.diagnostics, out.loss);
            }
        }
    }
    writer.finish()?;

    let meta = CheckpointMeta {
        scenario: scenario.name(),
        horizon: e.horizon,
        learner: learner_cfg,
        n_agents: n,
        obs_dim: env.obs_dim(),
        n_actions: a,
        seed: e.seed,
        env_steps: steps,
    };
    let ck_path = dir.join(CHECKPOINT_FILE);
    learner.checkpoint(&meta)?.save(&ck_path)?;
    Ok(dir)
}

/// Summary of evaluating a saved learner.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEval {
    pub meta: CheckpointMeta,
    pub outcome: EvalOutcome,
}

/// Plays `episodes` evaluation episodes with a checkpointed learner.
pub fn evaluate_checkpoint(path: &Path, episodes: usize, seed: u64) -> Result<CheckpointEval, RunnerError> {
    let (learner, mut env, meta) = Learner::load(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ EVAL_STREAM);
    let seeds = (0..episodes as u64).map(|k| eval_seed(seed, u64::MAX - 1, k));
    let outcome = evaluate(learner.eval_policy(), &mut env, seeds, &mut rng)?;
    Ok(CheckpointEval { meta, outcome })
}
