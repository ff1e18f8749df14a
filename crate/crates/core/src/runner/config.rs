use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::diagnostics::TaskSwitchMode;
use crate::nn::{Body, TargetUpdate};
use crate::pg::{PgAlgorithm, PgConfig};
use crate::qlearn::{EpsilonSchedule, QAlgorithm, QLearnerConfig};
use crate::scenario::{parse_scenario, EnvKind, Scenario};

pub const DEFAULT_EVAL_POINTS: usize = 201;
pub const DEFAULT_EVAL_EPISODES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Value(QAlgorithm),
    Policy(PgAlgorithm),
}

impl FromStr for Algorithm {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(q) = s.parse::<QAlgorithm>() {
            return Ok(Algorithm::Value(q));
        }
        s.parse::<PgAlgorithm>()
            .map(Algorithm::Policy)
            .map_err(|_| RunnerError::ConfigInvalid(format!("unknown algorithm {s:?}")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Value(a) => a.fmt(f),
            Algorithm::Policy(a) => a.fmt(f),
        }
    }
}

/// Fully resolved learner settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerConfig {
    Value(QLearnerConfig),
    Policy(PgConfig),
}

/// Explicit overrides; anything left out comes from the default tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub hidden_dim: Option<usize>,
    pub network: Option<Body>,
    pub lr: Option<f64>,
    pub gamma: Option<f64>,
    pub grad_norm_clip: Option<f64>,
    pub standardize_rewards: Option<bool>,
    pub target_update_interval: Option<u64>,
    pub target_update_tau: Option<f64>,
    pub batch_size: Option<usize>,
    pub buffer_size: Option<usize>,
    pub epsilon_start: Option<f64>,
    pub epsilon_end: Option<f64>,
    pub epsilon_decay_steps: Option<u64>,
    pub eval_epsilon: Option<f64>,
    pub mixing_embed_dim: Option<usize>,
    pub hypernet_dim: Option<usize>,
    pub n_step: Option<usize>,
    pub n_workers: Option<usize>,
    pub entropy_coef: Option<f64>,
    pub ppo_clip: Option<f64>,
    pub ppo_epochs: Option<usize>,
    pub greedy_eval: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub scenario: String,
    pub algorithm: String,
    #[serde(default = "yes")]
    pub param_sharing: bool,
    pub total_steps: u64,
    #[serde(default = "default_eval_points")]
    pub n_eval_points: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub seed: u64,
    /// Parent directory for run directories.
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub task_switch_mode: TaskSwitchMode,
    /// Episode length override; the environment default otherwise.
    #[serde(default)]
    pub horizon: Option<u32>,
}

fn yes() -> bool {
    true
}

fn default_eval_points() -> usize {
    DEFAULT_EVAL_POINTS
}

fn default_eval_episodes() -> usize {
    DEFAULT_EVAL_EPISODES
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

/// Contents of an experiment config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub hyperparams: HyperParams,
}

impl ExperimentConfig {
    pub fn new(scenario: &str, algorithm: &str, param_sharing: bool, total_steps: u64) -> Self {
        ExperimentConfig {
            experiment: ExperimentSection {
                scenario: scenario.to_string(),
                algorithm: algorithm.to_string(),
                param_sharing,
                total_steps,
                n_eval_points: DEFAULT_EVAL_POINTS,
                eval_episodes: DEFAULT_EVAL_EPISODES,
                seed: 0,
                out_dir: default_out(),
                task_switch_mode: TaskSwitchMode::default(),
                horizon: None,
            },
            hyperparams: HyperParams::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, RunnerError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn scenario(&self) -> Result<Scenario, RunnerError> {
        parse_scenario(&self.experiment.scenario).map_err(|e| RunnerError::ConfigInvalid(e.to_string()))
    }

    pub fn algorithm(&self) -> Result<Algorithm, RunnerError> {
        self.experiment.algorithm.parse()
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let e = &self.experiment;
        if e.n_eval_points < 2 {
            return Err(RunnerError::ConfigInvalid("n_eval_points must be at least 2".into()));
        }
        if e.eval_episodes == 0 {
            return Err(RunnerError::ConfigInvalid("eval_episodes must be positive".into()));
        }
        if e.total_steps == 0 {
            return Err(RunnerError::ConfigInvalid("total_steps must be positive".into()));
        }
        if self.hyperparams.target_update_interval.is_some() && self.hyperparams.target_update_tau.is_some() {
            return Err(RunnerError::ConfigInvalid("set either target_update_interval or target_update_tau".into()));
        }
        self.scenario()?;
        self.learner_config()?;
        Ok(())
    }

    /// Table defaults for this algorithm, sharing mode and environment, with overrides applied.
    pub fn learner_config(&self) -> Result<LearnerConfig, RunnerError> {
        let scenario = self.scenario()?;
        let mut cfg = defaults(self.algorithm()?, self.experiment.param_sharing, scenario.env_kind);
        let h = &self.hyperparams;
        match &mut cfg {
            LearnerConfig::Value(q) => {
                set(&mut q.hidden_dim, h.hidden_dim);
                set(&mut q.body, h.network);
                set(&mut q.lr, h.lr);
                set(&mut q.gamma, h.gamma);
                set(&mut q.grad_norm_clip, h.grad_norm_clip);
                set(&mut q.standardize_rewards, h.standardize_rewards);
                set(&mut q.batch_size, h.batch_size);
                set(&mut q.buffer_size, h.buffer_size);
                set(&mut q.epsilon.start, h.epsilon_start);
                set(&mut q.epsilon.end, h.epsilon_end);
                set(&mut q.epsilon.decay_steps, h.epsilon_decay_steps);
                set(&mut q.eval_epsilon, h.eval_epsilon);
                set(&mut q.mixing_embed_dim, h.mixing_embed_dim);
                set(&mut q.hypernet_dim, h.hypernet_dim);
                override_target(&mut q.target_update, h);
                q.validate().map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
            }
            LearnerConfig::Policy(p) => {
                set(&mut p.hidden_dim, h.hidden_dim);
                set(&mut p.body, h.network);
                set(&mut p.lr, h.lr);
                set(&mut p.gamma, h.gamma);
                set(&mut p.grad_norm_clip, h.grad_norm_clip);
                set(&mut p.standardize_rewards, h.standardize_rewards);
                set(&mut p.n_step, h.n_step);
                set(&mut p.n_workers, h.n_workers);
                set(&mut p.entropy_coef, h.entropy_coef);
                set(&mut p.ppo_clip, h.ppo_clip);
                set(&mut p.ppo_epochs, h.ppo_epochs);
                set(&mut p.greedy_eval, h.greedy_eval);
                override_target(&mut p.target_update, h);
                p.validate().map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
            }
        }
        Ok(cfg)
    }

    /// `<scenario>_<algorithm>_<ps|nps>_seed<n>` under the output directory.
    pub fn run_dir(&self) -> PathBuf {
        let e = &self.experiment;
        let sharing = if e.param_sharing { "ps" } else { "nps" };
        e.out_dir
            .join(format!("{}_{}_{}_seed{}", e.scenario, e.algorithm.to_ascii_lowercase(), sharing, e.seed))
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn override_target(slot: &mut TargetUpdate, h: &HyperParams) {
    if let Some(interval) = h.target_update_interval {
        *slot = TargetUpdate::Hard { interval };
    }
    if let Some(tau) = h.target_update_tau {
        *slot = TargetUpdate::Soft { tau };
    }
}

const SOFT: TargetUpdate = TargetUpdate::Soft { tau: 0.01 };
const HARD: TargetUpdate = TargetUpdate::Hard { interval: 200 };

/// Tuned defaults keyed by algorithm, sharing mode and environment family.
/// Independent actor-critic variants reuse the rows of their centralised
/// counterparts.
pub fn defaults(algorithm: Algorithm, sharing: bool, env: EnvKind) -> LearnerConfig {
    let lbf = env == EnvKind::Lbf;
    match algorithm {
        Algorithm::Value(alg) => {
            let mut q = QLearnerConfig::new(alg, sharing);
            q.epsilon = EpsilonSchedule::new(0.05, if sharing { 2_000_000 } else { 50_000 });
            match alg {
                QAlgorithm::Iql => {
                    q.hidden_dim = if sharing { 128 } else { 64 };
                    q.lr = 3e-4;
                    q.eval_epsilon = 0.05;
                    q.target_update = HARD;
                }
                QAlgorithm::Vdn => {
                    q.hidden_dim = if sharing { 128 } else { 64 };
                    q.lr = if sharing { 3e-4 } else { 1e-4 };
                    q.eval_epsilon = if sharing { 0.0 } else { 0.05 };
                    q.target_update = if sharing { SOFT } else { HARD };
                }
                QAlgorithm::Qmix => {
                    q.hidden_dim = 64;
                    q.body = if lbf { Body::Gru } else { Body::Fc };
                    q.lr = match (sharing, lbf) {
                        (true, true) => 3e-4,
                        (true, false) => 5e-4,
                        (false, true) => 1e-4,
                        (false, false) => 3e-4,
                    };
                    q.eval_epsilon = 0.05;
                    q.target_update = SOFT;
                }
            }
            LearnerConfig::Value(q)
        }
        Algorithm::Policy(alg) => {
            let mut p = PgConfig::new(alg, sharing);
            if alg.is_ppo() {
                p.hidden_dim = 128;
                p.body = Body::Fc;
                p.lr = match (sharing, lbf) {
                    (true, true) => 3e-4,
                    (false, true) => 1e-4,
                    _ => 5e-4,
                };
                p.standardize_rewards = false;
                p.target_update = if !sharing && lbf { HARD } else { SOFT };
                p.n_step = if sharing && lbf { 5 } else { 10 };
            } else {
                p.hidden_dim = if lbf { 128 } else { 64 };
                p.body = if lbf { Body::Gru } else { Body::Fc };
                p.lr = 5e-4;
                p.standardize_rewards = true;
                p.target_update = SOFT;
                p.n_step = if sharing && lbf { 10 } else { 5 };
            }
            LearnerConfig::Policy(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[experiment]
scenario = "Foraging-8x8-2p-2f-coop-v2"
algorithm = "IQL"
total_steps = 200000

[hyperparams]
epsilon_decay_steps = 50000
"#;

    #[test]
    fn parses_and_resolves_overrides() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.experiment.n_eval_points, 201);
        assert!(cfg.experiment.param_sharing);
        let LearnerConfig::Value(q) = cfg.learner_config().unwrap() else { panic!() };
        assert_eq!(q.hidden_dim, 128);
        assert_eq!(q.epsilon.decay_steps, 50_000);
        assert_eq!(q.target_update, HARD);
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_algorithm_is_rejected() {
        let text = SAMPLE.replace("IQL", "DQN++");
        assert!(matches!(ExperimentConfig::parse(&text), Err(RunnerError::ConfigInvalid(_))));
    }

    #[test]
    fn table_rows() {
        let LearnerConfig::Policy(p) = defaults(Algorithm::Policy(PgAlgorithm::Mappo), false, EnvKind::Lbf) else { panic!() };
        assert_eq!((p.lr, p.n_step, p.target_update), (1e-4, 10, HARD));
        let LearnerConfig::Policy(p) = defaults(Algorithm::Policy(PgAlgorithm::Maa2c), true, EnvKind::Rware) else { panic!() };
        assert_eq!((p.hidden_dim, p.body, p.n_step), (64, Body::Fc, 5));
        let LearnerConfig::Value(q) = defaults(Algorithm::Value(QAlgorithm::Qmix), true, EnvKind::Rware) else { panic!() };
        assert_eq!((q.hidden_dim, q.body, q.lr), (64, Body::Fc, 5e-4));
        let LearnerConfig::Value(q) = defaults(Algorithm::Value(QAlgorithm::Vdn), true, EnvKind::Lbf) else { panic!() };
        assert_eq!((q.eval_epsilon, q.target_update), (0.0, SOFT));
    }
}
