use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::metrics::{read_metrics, MetricsEvent, MetricsHeader};
use super::RunnerError;
use crate::diagnostics::{DiagnosticsRecord, TaskSwitchProfile};
use crate::eval_stats::{curve_with_ci, final_score, pearson, write_curve_csv, CurvePoint, ScoreMatrix};

pub const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportMetric {
    Returns,
    Entropy,
    Kl,
    TaskSwitch,
    Poi,
}

impl FromStr for ExportMetric {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "returns" => Ok(ExportMetric::Returns),
            "entropy" => Ok(ExportMetric::Entropy),
            "kl" => Ok(ExportMetric::Kl),
            "taskswitch" => Ok(ExportMetric::TaskSwitch),
            "poi" => Ok(ExportMetric::Poi),
            _ => Err(RunnerError::ConfigInvalid(format!(
                "unknown metric {s:?} (expected returns, entropy, kl, taskswitch or poi)"
            ))),
        }
    }
}

/// A parsed metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunData {
    pub dir: PathBuf,
    pub header: MetricsHeader,
    pub events: Vec<MetricsEvent>,
}

impl RunData {
    pub fn load(dir: &Path) -> Result<Self, RunnerError> {
        let (header, events) = read_metrics(dir)?;
        Ok(RunData {
            dir: dir.to_path_buf(),
            header,
            events,
        })
    }

    /// `(step, team return)` at each evaluation point.
    pub fn returns(&self) -> Vec<(u64, f64)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                MetricsEvent::EvalPoint { step, team_return, .. } => Some((*step, *team_return)),
                _ => None,
            })
            .collect()
    }

    pub fn diagnostics(&self) -> Vec<&DiagnosticsRecord> {
        self.events
            .iter()
            .filter_map(|e| match e {
                MetricsEvent::Diagnostics(d) => Some(d),
                _ => None,
            })
            .collect()
    }

    pub fn task_switch(&self) -> Vec<(u64, &TaskSwitchProfile)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                MetricsEvent::TaskSwitch { step, profile } => Some((*step, profile)),
                _ => None,
            })
            .collect()
    }

    pub fn final_score(&self) -> Result<f64, RunnerError> {
        let r: Vec<f64> = self.returns().into_iter().map(|(_, v)| v).collect();
        Ok(final_score(&r)?)
    }
}

/// Aligns `(step, value)` series from several runs into one curve with intervals.
pub fn aggregate(series: &[Vec<(u64, f64)>]) -> Result<Vec<CurvePoint>, RunnerError> {
    let first = series.first().ok_or_else(|| RunnerError::ConfigInvalid("no runs given".into()))?;
    let steps: Vec<u64> = first.iter().map(|&(s, _)| s).collect();
    let mut runs = Vec::with_capacity(series.len());
    for s in series {
        if s.len() != steps.len() || s.iter().zip(&steps).any(|(&(a, _), &b)| a != b) {
            return Err(RunnerError::ConfigInvalid("runs were evaluated at different steps".into()));
        }
        runs.push(s.iter().map(|&(_, v)| v).collect());
    }
    Ok(curve_with_ci(&steps, &runs, CONFIDENCE)?)
}

/// Writes plot data for `metric` as CSV.
pub fn export<W: Write>(runs: &[PathBuf], metric: ExportMetric, out: W) -> Result<(), RunnerError> {
    let data: Vec<RunData> = runs.iter().map(|d| RunData::load(d)).collect::<Result<_, _>>()?;
    match metric {
        ExportMetric::Returns => {
            let series: Vec<_> = data.iter().map(RunData::returns).collect();
            write_curve_csv(out, &aggregate(&series)?)?;
        }
        ExportMetric::Entropy | ExportMetric::Kl => {
            let series: Vec<Vec<(u64, f64)>> = data
                .iter()
                .map(|r| {
                    r.diagnostics()
                        .iter()
                        .map(|d| (d.step, if metric == ExportMetric::Entropy { d.mean_entropy } else { d.mean_kl }))
                        .collect()
                })
                .collect();
            write_curve_csv(out, &aggregate(&series)?)?;
        }
        ExportMetric::TaskSwitch => write_task_switch(&data, out)?,
        ExportMetric::Poi => write_poi(&data, out)?,
    }
    Ok(())
}

/// One row per evaluation step and agent: the run-averaged likelihood of each action.
fn write_task_switch<W: Write>(data: &[RunData], out: W) -> Result<(), RunnerError> {
    let mut table: BTreeMap<(u64, usize), (Vec<f64>, usize)> = BTreeMap::new();
    let mut n_actions = 0;
    for run in data {
        for (step, p) in run.task_switch() {
            for (i, probs) in p.likelihood.iter().enumerate() {
                n_actions = n_actions.max(probs.len());
                let entry = table.entry((step, i)).or_insert_with(|| (vec![0.0; probs.len()], 0));
                if entry.0.len() != probs.len() {
                    return Err(RunnerError::ConfigInvalid("runs have different action sets".into()));
                }
                for (a, p) in entry.0.iter_mut().zip(probs) {
                    *a += p;
                }
                entry.1 += 1;
            }
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["step".to_string(), "agent".to_string()];
    head.extend((0..n_actions).map(|a| format!("action_{a}")));
    w.write_record(&head)?;
    for ((step, agent), (sum, k)) in table {
        let mut row = vec![step.to_string(), agent.to_string()];
        row.extend(sum.iter().map(|v| (v / k as f64).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| RunnerError::Encode(e.to_string()))?;
    Ok(())
}

/// Final scores grouped by algorithm and scenario; only scenarios every algorithm ran are kept.
pub fn score_matrix(data: &[RunData]) -> Result<ScoreMatrix, RunnerError> {
    let mut grouped: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for run in data {
        let h = &run.header.run;
        let label = format!("{}_{}", h.algorithm, if h.param_sharing { "ps" } else { "nps" });
        grouped
            .entry(label)
            .or_default()
            .entry(h.scenario.clone())
            .or_default()
            .push(run.final_score()?);
    }
    let algorithms: Vec<String> = grouped.keys().cloned().collect();
    let tasks: Vec<String> = grouped
        .values()
        .next()
        .map(|t| t.keys().filter(|k| grouped.values().all(|g| g.contains_key(*k))).cloned().collect())
        .unwrap_or_default();
    let scores = algorithms
        .iter()
        .map(|a| tasks.iter().map(|t| grouped[a][t].clone()).collect())
        .collect();
    Ok(ScoreMatrix {
        algorithms,
        tasks,
        scores,
    })
}

fn write_poi<W: Write>(data: &[RunData], out: W) -> Result<(), RunnerError> {
    let m = score_matrix(data)?.normalized();
    if m.tasks.is_empty() {
        return Err(RunnerError::ConfigInvalid("no scenario was run by every algorithm".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm_x", "algorithm_y", "probability_of_improvement"])?;
    for x in &m.algorithms {
        for y in &m.algorithms {
            if x != y {
                let p = m.probability_of_improvement(x, y)?;
                w.write_record([x.as_str(), y.as_str(), &p.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| RunnerError::Encode(e.to_string()))?;
    Ok(())
}

/// Summary of one run's diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseReport {
    pub run: MetricsHeader,
    pub eval_points: usize,
    pub final_score: f64,
    pub best_return: f64,
    /// Per-agent mean entropy over the first and last tenth of the diagnostics records.
    pub entropy_early: Vec<f64>,
    pub entropy_late: Vec<f64>,
    pub mean_kl: f64,
    /// Smallest pairwise correlation between agents' entropy curves.
    pub entropy_correlation: Option<f64>,
    pub final_task_switch: Option<TaskSwitchProfile>,
}

/// Per-agent entropy series, one vector per agent.
pub fn entropy_curves(records: &[&DiagnosticsRecord]) -> Vec<Vec<f64>> {
    let n = records.first().map_or(0, |r| r.entropy.len());
    (0..n).map(|i| records.iter().map(|r| r.entropy[i]).collect()).collect()
}

/// Mean of the first and last `ceil(len / 10)` entries.
pub fn early_late(series: &[f64]) -> (f64, f64) {
    if series.is_empty() {
        return (0.0, 0.0);
    }
    let k = series.len().div_ceil(10);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&series[..k]), mean(&series[series.len() - k..]))
}

pub fn diagnose(dir: &Path) -> Result<DiagnoseReport, RunnerError> {
    let data = RunData::load(dir)?;
    let returns = data.returns();
    let records = data.diagnostics();
    let curves = entropy_curves(&records);
    let (entropy_early, entropy_late) = curves.iter().map(|c| early_late(c)).unzip();
    let mut corr: Option<f64> = None;
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            if let Some(r) = pearson(&curves[i], &curves[j]) {
                corr = Some(corr.map_or(r, |c| c.min(r)));
            }
        }
    }
    let mean_kl = records.iter().map(|r| r.mean_kl).sum::<f64>() / records.len().max(1) as f64;
    Ok(DiagnoseReport {
        eval_points: returns.len(),
        final_score: if returns.is_empty() { 0.0 } else { data.final_score()? },
        best_return: returns.iter().map(|&(_, r)| r).fold(f64::NEG_INFINITY, f64::max),
        entropy_early,
        entropy_late,
        mean_kl,
        entropy_correlation: corr,
        final_task_switch: data.task_switch().last().map(|(_, p)| (*p).clone()),
        run: data.header,
    })
}

impl fmt::Display for DiagnoseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.run.run;
        writeln!(f, "run: {} {} sharing={} seed={}", r.scenario, r.algorithm, r.param_sharing, r.seed)?;
        writeln!(f, "evaluation points: {}", self.eval_points)?;
        writeln!(f, "final score: {:.4} (best {:.4})", self.final_score, self.best_return)?;
        for (i, (a, b)) in self.entropy_early.iter().zip(&self.entropy_late).enumerate() {
            writeln!(f, "agent {i} entropy: early {a:.4} late {b:.4}")?;
        }
        writeln!(f, "mean update divergence: {:.6}", self.mean_kl)?;
        match self.entropy_correlation {
            Some(c) => writeln!(f, "entropy correlation across agents: {c:.4}")?,
            None => writeln!(f, "entropy correlation across agents: n/a")?,
        }
        if let Some(p) = &self.final_task_switch {
            for (i, l) in p.likelihood.iter().enumerate() {
                let cells: Vec<String> = l.iter().map(|v| format!("{v:.3}")).collect();
                writeln!(f, "agent {i} task switching: [{}]", cells.join(", "))?;
            }
        }
        Ok(())
    }
}
