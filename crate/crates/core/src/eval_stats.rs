//! Aggregation of evaluation returns across seeds, tasks and algorithms.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::Statistics;
use thiserror::Error;

/// Number of trailing evaluation points averaged into a run's final score.
pub const FINAL_WINDOW: usize = 10;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no samples")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("confidence {0} must lie strictly between 0 and 1")]
    InvalidConfidence(f64),
    #[error("unknown {kind} {name:?}")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A mean with its confidence bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Student-t interval `mean ± t·s/√n` with the sample standard deviation `s`.
/// A single sample collapses to a zero-width interval.
pub fn mean_and_ci(samples: &[f64], confidence: f64) -> Result<Interval, StatsError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::InvalidConfidence(confidence));
    }
    let n = samples.len();
    if n == 0 {
        return Err(StatsError::Empty);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(Interval { mean, lo: mean, hi: mean });
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + confidence / 2.0);
    let half = t * var.sqrt() / (n as f64).sqrt();
    Ok(Interval {
        mean,
        lo: mean - half,
        hi: mean + half,
    })
}

/// Maps one task's scores onto `[0, 1]`; a constant task maps to zeros.
pub fn minmax_normalize(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().map(|&x| normalize_with(x, lo, hi)).collect()
}

pub fn normalize_with(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// `(wins - losses) / (2|x||y|)`: how far the pairwise improvement sits from one half.
fn margin(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut net = 0i64;
    for a in x {
        for b in y {
            net += if a > b {
                1
            } else if a < b {
                -1
            } else {
                0
            };
        }
    }
    Ok(net as f64 / (2 * x.len() * y.len()) as f64)
}

/// Maps a margin in `[-1/2, 1/2]` to a probability. Swapping the arguments
/// negates the margin, and the two results then sum to exactly one.
fn from_margin(m: f64) -> f64 {
    if m >= 0.0 {
        0.5 + m
    } else {
        1.0 - (0.5 - m)
    }
}

/// Fraction of pairs `(x, y)` with `x > y`, ties counting one half.
pub fn pairwise_improvement(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    margin(x, y).map(from_margin)
}

/// Probability that algorithm X improves on Y, averaged over tasks.
/// `x[k]` and `y[k]` are the per-seed scores on task `k`.
pub fn probability_of_improvement(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut total = 0.0;
    for (a, b) in x.iter().zip(y) {
        total += margin(a, b)?;
    }
    Ok(from_margin(total / x.len() as f64))
}

/// Mean of the last [`FINAL_WINDOW`] points of a curve.
pub fn final_score(curve: &[f64]) -> Result<f64, StatsError> {
    if curve.is_empty() {
        return Err(StatsError::Empty);
    }
    let tail = &curve[curve.len().saturating_sub(FINAL_WINDOW)..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Mean and interval over seeds at each evaluation point. `runs[s][p]` is
/// seed `s` at point `p`.
pub fn curve_with_ci(steps: &[u64], runs: &[Vec<f64>], confidence: f64) -> Result<Vec<CurvePoint>, StatsError> {
    if runs.is_empty() {
        return Err(StatsError::Empty);
    }
    for r in runs {
        if r.len() != steps.len() {
            return Err(StatsError::LengthMismatch(r.len(), steps.len()));
        }
    }
    let mut column = vec![0.0; runs.len()];
    steps
        .iter()
        .enumerate()
        .map(|(p, &step)| {
            for (c, r) in column.iter_mut().zip(runs) {
                *c = r[p];
            }
            let ci = mean_and_ci(&column, confidence)?;
            Ok(CurvePoint {
                step,
                mean: ci.mean,
                ci_lo: ci.lo,
                ci_hi: ci.hi,
            })
        })
        .collect()
}

/// Aggregated sample-efficiency curve. `tasks[k][s][p]` is the return of
/// seed `s` on task `k` at point `p`. Each task is min-max normalised with
/// `bounds[k]` when given, otherwise with its own extremes; tasks are then
/// averaged per seed and intervals taken over seeds.
pub fn sample_efficiency_curve(
    steps: &[u64],
    tasks: &[Vec<Vec<f64>>],
    bounds: Option<&[(f64, f64)]>,
    confidence: f64,
) -> Result<Vec<CurvePoint>, StatsError> {
    let first = tasks.first().ok_or(StatsError::Empty)?;
    let seeds = first.len();
    if let Some(b) = bounds {
        if b.len() != tasks.len() {
            return Err(StatsError::LengthMismatch(b.len(), tasks.len()));
        }
    }
    let mut per_seed = vec![vec![0.0; steps.len()]; seeds];
    for (k, task) in tasks.iter().enumerate() {
        if task.len() != seeds {
            return Err(StatsError::LengthMismatch(task.len(), seeds));
        }
        let (lo, hi) = match bounds {
            Some(b) => b[k],
            None => task_bounds(task),
        };
        for (acc, run) in per_seed.iter_mut().zip(task) {
            if run.len() != steps.len() {
                return Err(StatsError::LengthMismatch(run.len(), steps.len()));
            }
            for (a, &v) in acc.iter_mut().zip(run) {
                *a += normalize_with(v, lo, hi) / tasks.len() as f64;
            }
        }
    }
    curve_with_ci(steps, &per_seed, confidence)
}

/// Smallest and largest value across all runs of a task.
pub fn task_bounds(runs: &[Vec<f64>]) -> (f64, f64) {
    runs.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Sample correlation coefficient; `None` when either series is constant or too short.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (sx, sy) = (x.iter().std_dev(), y.iter().std_dev());
    if !(sx > 0.0 && sy > 0.0) {
        return None;
    }
    Some(x.iter().covariance(y.iter()) / (sx * sy))
}

/// Final scores indexed `[algorithm][task][seed]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub algorithms: Vec<String>,
    pub tasks: Vec<String>,
    pub scores: Vec<Vec<Vec<f64>>>,
}

impl ScoreMatrix {
    /// Min-max normalises every task across all algorithms and seeds.
    pub fn normalized(&self) -> ScoreMatrix {
        let mut out = self.clone();
        for k in 0..self.tasks.len() {
            let all: Vec<f64> = self.scores.iter().flat_map(|a| a[k].iter().copied()).collect();
            let (lo, hi) = task_bounds(&[all]);
            for alg in &mut out.scores {
                for v in &mut alg[k] {
                    *v = normalize_with(*v, lo, hi);
                }
            }
        }
        out
    }

    fn index(&self, name: &str) -> Result<usize, StatsError> {
        self.algorithms.iter().position(|a| a == name).ok_or_else(|| StatsError::Unknown {
            kind: "algorithm",
            name: name.to_string(),
        })
    }

    pub fn probability_of_improvement(&self, x: &str, y: &str) -> Result<f64, StatsError> {
        probability_of_improvement(&self.scores[self.index(x)?], &self.scores[self.index(y)?])
    }
}

pub fn write_curve_csv<W: Write>(out: W, curve: &[CurvePoint]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    for p in curve {
        w.serialize(p)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
