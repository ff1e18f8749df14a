use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::diagnostics::{DiagnosticsRecord, TaskSwitchProfile};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SCHEMA: &str = "marl-lens-metrics";
pub const SCHEMA_VERSION: u32 = 1;
const QUEUE_DEPTH: usize = 256;

/// What produced a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub scenario: String,
    pub algorithm: String,
    pub param_sharing: bool,
    pub seed: u64,
    pub n_agents: usize,
    pub n_actions: usize,
    pub total_steps: u64,
    pub n_eval_points: usize,
}

/// First line of every metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsHeader {
    pub schema: String,
    pub version: u32,
    pub run: RunInfo,
}

impl MetricsHeader {
    pub fn new(run: RunInfo) -> Self {
        MetricsHeader {
            schema: SCHEMA.to_string(),
            version: SCHEMA_VERSION,
            run,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MetricsEvent {
    EvalPoint {
        step: u64,
        /// Mean undiscounted return of each agent over the evaluation episodes.
        agent_returns: Vec<f64>,
        /// Mean team return over the evaluation episodes.
        team_return: f64,
        episode_returns: Vec<f64>,
    },
    Diagnostics(DiagnosticsRecord),
    TaskSwitch {
        step: u64,
        profile: TaskSwitchProfile,
    },
    TrainLoss {
        step: u64,
        loss: f64,
        epsilon: f64,
    },
}

impl MetricsEvent {
    pub fn step(&self) -> u64 {
        match self {
            MetricsEvent::EvalPoint { step, .. }
            | MetricsEvent::TaskSwitch { step, .. }
            | MetricsEvent::TrainLoss { step, .. } => *step,
            MetricsEvent::Diagnostics(d) => d.step,
        }
    }
}

fn encode<T: Serialize>(value: &T) -> Result<String, RunnerError> {
    serde_json::to_string(value).map_err(|e| RunnerError::Encode(e.to_string()))
}

/// Streams events to a file from a dedicated thread. Steps must never decrease.
pub struct MetricsWriter {
    path: PathBuf,
    tx: Option<SyncSender<String>>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
    last_step: u64,
}

impl MetricsWriter {
    pub fn create(path: &Path, header: &MetricsHeader) -> Result<Self, RunnerError> {
        let file = File::create(path).map_err(|e| RunnerError::io(path, e))?;
        let first = encode(header)?;
        let (tx, rx) = sync_channel::<String>(QUEUE_DEPTH);
        let handle = std::thread::spawn(move || {
            let mut out = BufWriter::new(file);
            writeln!(out, "{first}")?;
            for line in rx {
                writeln!(out, "{line}")?;
            }
            out.flush()
        });
        Ok(MetricsWriter {
            path: path.to_path_buf(),
            tx: Some(tx),
            handle: Some(handle),
            last_step: 0,
        })
    }

    pub fn write(&mut self, event: &MetricsEvent) -> Result<(), RunnerError> {
        let step = event.step();
        if step < self.last_step {
            return Err(RunnerError::OutOfOrder {
                step,
                previous: self.last_step,
            });
        }
        self.last_step = step;
        let line = encode(event)?;
        let tx = self.tx.as_ref().expect("writer is open until finish");
        if tx.send(line).is_err() {
            return self.join();
        }
        Ok(())
    }

    fn join(&mut self) -> Result<(), RunnerError> {
        self.tx.take();
        match self.handle.take() {
            Some(h) => match h.join() {
                Ok(r) => r.map_err(|e| RunnerError::io(&self.path, e)),
                Err(_) => Err(RunnerError::Encode("metrics writer thread panicked".into())),
            },
            None => Ok(()),
        }
    }

    /// Flushes and closes the file.
    pub fn finish(mut self) -> Result<(), RunnerError> {
        self.join()
    }
}

impl Drop for MetricsWriter {
    fn drop(&mut self) {
        let _ = self.join();
    }
}

/// Writes a complete metrics file in one call.
pub fn write_metrics(path: &Path, header: &MetricsHeader, events: &[MetricsEvent]) -> Result<(), RunnerError> {
    let mut w = MetricsWriter::create(path, header)?;
    for e in events {
        w.write(e)?;
    }
    w.finish()
}

/// Reads a metrics file; `path` may also be a run directory.
pub fn read_metrics(path: &Path) -> Result<(MetricsHeader, Vec<MetricsEvent>), RunnerError> {
    let path = if path.is_dir() { path.join(METRICS_FILE) } else { path.to_path_buf() };
    let file = File::open(&path).map_err(|e| RunnerError::io(&path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, message: String| RunnerError::Parse {
        path: path.clone(),
        line,
        message,
    };
    let first = match lines.next() {
        Some(l) => l.map_err(|e| RunnerError::io(&path, e))?,
        None => return Err(parse_err(1, "missing header".into())),
    };
    let header: MetricsHeader = serde_json::from_str(&first).map_err(|e| parse_err(1, e.to_string()))?;
    if header.schema != SCHEMA {
        return Err(parse_err(1, format!("unexpected schema {:?}", header.schema)));
    }
    if header.version != SCHEMA_VERSION {
        return Err(parse_err(1, format!("unsupported schema version {}", header.version)));
    }
    let mut events = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| RunnerError::io(&path, e))?;
        let event = serde_json::from_str(&line).map_err(|e| parse_err(k + 2, e.to_string()))?;
        events.push(event);
    }
    Ok((header, events))
}
