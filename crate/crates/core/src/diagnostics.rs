//! Policy entropy, agent update divergence and task switching.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floor applied to probabilities before taking logs in the divergence.
pub const PROB_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum DiagError {
    #[error("distribution sizes differ: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("action log is empty")]
    EmptyLog,
    #[error("action {action} out of range for {n_actions} actions")]
    ActionOutOfRange { action: usize, n_actions: usize },
}

/// Per-agent action distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution {
    pub probs: Vec<Vec<f64>>,
}

impl PolicyDistribution {
    pub fn is_valid(&self) -> bool {
        self.probs.iter().all(|p| {
            p.iter().all(|&x| x >= 0.0 && x.is_finite()) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-6
        })
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.probs.iter().map(|p| policy_entropy(p)).collect()
    }
}

/// How a learner's network outputs map to action probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LearnerKind {
    /// Outputs are actor logits.
    PolicyGradient,
    /// Outputs are Q-values acted on ε-greedily.
    ValueBased { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub entropy: Vec<f64>,
    pub kl: Vec<f64>,
    pub mean_entropy: f64,
    pub mean_kl: f64,
}

impl DiagnosticsRecord {
    pub fn new(step: u64, entropy: Vec<f64>, kl: Vec<f64>) -> Self {
        DiagnosticsRecord {
            step,
            mean_entropy: mean_over_agents(&entropy),
            mean_kl: mean_over_agents(&kl),
            entropy,
            kl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSwitchMode {
    #[default]
    PaperExact,
    FrequencyNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSwitchProfile {
    pub mode: TaskSwitchMode,
    pub counts: Vec<Vec<u64>>,
    pub likelihood: Vec<Vec<f64>>,
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn policy_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// `H(p, q) - H(p)` with both distributions floored at [`PROB_FLOOR`].
pub fn update_divergence(current: &[f64], old: &[f64]) -> Result<f64, DiagError> {
    if current.len() != old.len() {
        return Err(DiagError::ShapeMismatch(current.len(), old.len()));
    }
    let cross: f64 = -current
        .iter()
        .zip(old)
        .map(|(&p, &q)| p * q.max(PROB_FLOOR).ln())
        .sum::<f64>();
    let own: f64 = -current.iter().map(|&p| p * p.max(PROB_FLOOR).ln()).sum::<f64>();
    Ok(cross - own)
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax<T: PartialOrd + Copy>(x: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate().skip(1) {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// Distribution of an ε-greedy policy over `q`.
pub fn epsilon_greedy_probs(q: &[f64], epsilon: f64) -> Vec<f64> {
    let n = q.len() as f64;
    let mut p = vec![epsilon / n; q.len()];
    p[argmax(q)] += 1.0 - epsilon;
    p
}

/// Action distribution for one row of network outputs.
pub fn output_probs(kind: LearnerKind, outputs: &[f64]) -> Vec<f64> {
    match kind {
        LearnerKind::PolicyGradient => softmax(outputs),
        LearnerKind::ValueBased { epsilon } => epsilon_greedy_probs(outputs, epsilon),
    }
}

/// Per-agent distributions from per-agent network outputs.
pub fn extract_policy(kind: LearnerKind, outputs: &[Vec<f64>]) -> PolicyDistribution {
    PolicyDistribution {
        probs: outputs.iter().map(|o| output_probs(kind, o)).collect(),
    }
}

/// Softmax over per-agent action counts from `action_log[agent][t]`.
pub fn task_switch_profile(
    action_log: &[Vec<usize>],
    n_actions: usize,
    mode: TaskSwitchMode,
) -> Result<TaskSwitchProfile, DiagError> {
    if action_log.is_empty() || action_log.iter().all(Vec::is_empty) {
        return Err(DiagError::EmptyLog);
    }
    let mut counts = vec![vec![0u64; n_actions]; action_log.len()];
    for (c, log) in counts.iter_mut().zip(action_log) {
        for &a in log {
            if a >= n_actions {
                return Err(DiagError::ActionOutOfRange { action: a, n_actions });
            }
            c[a] += 1;
        }
    }
    Ok(profile_from_counts(counts, mode))
}

pub fn profile_from_counts(counts: Vec<Vec<u64>>, mode: TaskSwitchMode) -> TaskSwitchProfile {
    let likelihood = counts
        .iter()
        .map(|c| {
            let total = c.iter().sum::<u64>().max(1) as f64;
            let x: Vec<f64> = match mode {
                TaskSwitchMode::PaperExact => c.iter().map(|&v| v as f64).collect(),
                TaskSwitchMode::FrequencyNormalized => c.iter().map(|&v| v as f64 / total).collect(),
            };
            softmax(&x)
        })
        .collect();
    TaskSwitchProfile {
        mode,
        counts,
        likelihood,
    }
}

pub fn mean_over_agents(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Running per-agent sums of entropy and divergence over many rows.
#[derive(Debug, Clone, Default)]
pub struct DiagAccumulator {
    entropy: Vec<f64>,
    kl: Vec<f64>,
    count: Vec<f64>,
}

impl DiagAccumulator {
    pub fn new(n_agents: usize) -> Self {
        DiagAccumulator {
            entropy: vec![0.0; n_agents],
            kl: vec![0.0; n_agents],
            count: vec![0.0; n_agents],
        }
    }

    pub fn add(&mut self, agent: usize, current: &[f64], old: &[f64]) -> Result<(), DiagError> {
        self.kl[agent] += update_divergence(current, old)?;
        self.entropy[agent] += policy_entropy(current);
        self.count[agent] += 1.0;
        Ok(())
    }

    pub fn finish(&self, step: u64) -> DiagnosticsRecord {
        let avg = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(&self.count).map(|(s, &c)| if c > 0.0 { s / c } else { 0.0 }).collect()
        };
        DiagnosticsRecord::new(step, avg(&self.entropy), avg(&self.kl))
    }
}
