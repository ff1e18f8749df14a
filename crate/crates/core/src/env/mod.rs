//! Grid-world environments: level-based foraging and the robot warehouse.

pub mod lbf;
pub mod rware;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{EnvKind, Scenario, ScenarioError};

pub use lbf::{LbfAction, LbfEnv, LbfState};
pub use rware::{RwareAction, RwareEnv, RwareState};

pub const LBF_HORIZON: u32 = 50;
pub const RWARE_HORIZON: u32 = 500;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("{needed} entities do not fit on a {w}x{h} grid")]
    GridTooSmall { needed: usize, w: u32, h: u32 },

    #[error("invalid action {action} for agent {agent}")]
    InvalidAction { agent: usize, action: usize },

    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },

    #[error("step called on a finished episode")]
    SteppedAfterDone,

    #[error("scenario {0} is not a {1:?} task")]
    WrongKind(String, EnvKind),

    #[error("difficulty `{0}` is not supported")]
    UnsupportedDifficulty(String),

    #[error("warehouse needs more than {0} shelves to keep every agent supplied with a request")]
    TooFewShelves(usize),

    #[error(transparent)]
    Scenario(#[from] ScenarioError),

    #[error("bad snapshot: {0}")]
    Snapshot(#[from] serde_json::Error),
}

/// Grid coordinate; `y` grows downwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub x: u32,
    pub y: u32,
}

impl Pos {
    pub const fn new(x: u32, y: u32) -> Self {
        Pos { x, y }
    }

    /// Neighbour one cell away, or `None` when it would leave a `w`x`h` grid.
    pub fn offset(self, dx: i32, dy: i32, w: u32, h: u32) -> Option<Pos> {
        let x = self.x as i64 + dx as i64;
        let y = self.y as i64 + dy as i64;
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            None
        } else {
            Some(Pos::new(x as u32, y as u32))
        }
    }

    pub fn chebyshev(self, other: Pos) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }

    pub fn manhattan(self, other: Pos) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

/// One joint transition.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStep {
    pub obs: Vec<Vec<f32>>,
    pub rewards: Vec<f32>,
    /// Scalar team reward: the sum of agent rewards in foraging, the shared
    /// delivery reward in the warehouse.
    pub team_reward: f32,
    pub done: bool,
    /// True only when the episode ended for a reason other than the horizon.
    pub terminated: bool,
}

/// Simultaneous-move resolution shared by both grid worlds.
///
/// `targets[i]` is where agent `i` wants to go (`None` for staying or moving off
/// the grid). A move fails when the target is blocked for that agent, when two
/// or more agents contend for one cell, when the cell holds an agent that stays
/// put, or when the movers form a cycle (swaps included). Failures cascade
/// until a fixed point is reached; the outcome does not depend on agent order.
pub fn resolve_moves(
    positions: &[Pos],
    targets: &[Option<Pos>],
    blocked: impl Fn(usize, Pos) -> bool,
) -> Vec<Pos> {
    let n = positions.len();
    let mut moving: Vec<bool> = (0..n)
        .map(|i| match targets[i] {
            Some(t) => t != positions[i] && !blocked(i, t),
            None => false,
        })
        .collect();

    for i in 0..n {
        if !moving[i] {
            continue;
        }
        let t = targets[i];
        let contested = (0..n).any(|j| j != i && targets[j] == t && target_is_live(&moving, targets, j));
        if contested {
            for j in 0..n {
                if targets[j] == t {
                    moving[j] = false;
                }
            }
        }
    }

    loop {
        let mut changed = false;
        for i in 0..n {
            if !moving[i] {
                continue;
            }
            let t = targets[i].expect("moving agents have targets");
            if let Some(j) = positions.iter().position(|&p| p == t) {
                if !moving[j] || in_cycle(i, positions, targets, &moving) {
                    moving[i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    (0..n)
        .map(|i| if moving[i] { targets[i].unwrap() } else { positions[i] })
        .collect()
}

// A contender counts even if it was blocked by terrain, as long as it had a
// real target: everyone aiming at the same cell stays.
fn target_is_live(_moving: &[bool], targets: &[Option<Pos>], j: usize) -> bool {
    targets[j].is_some()
}

fn in_cycle(start: usize, positions: &[Pos], targets: &[Option<Pos>], moving: &[bool]) -> bool {
    let mut cur = start;
    for _ in 0..positions.len() {
        let Some(t) = targets[cur] else { return false };
        match positions.iter().position(|&p| p == t) {
            Some(j) if moving[j] => {
                if j == start {
                    return true;
                }
                cur = j;
            }
            _ => return false,
        }
    }
    false
}

/// Either environment behind one interface, built from a [`Scenario`].
#[derive(Debug, Clone)]
pub enum Env {
    Lbf(LbfEnv),
    Rware(RwareEnv),
}

impl Env {
    /// Builds the environment; `horizon` overrides the default episode length.
    pub fn new(scenario: &Scenario, horizon: Option<u32>) -> Result<Self, EnvError> {
        Ok(match scenario.env_kind {
            EnvKind::Lbf => Env::Lbf(LbfEnv::new(scenario, horizon.unwrap_or(LBF_HORIZON))?),
            EnvKind::Rware => {
                Env::Rware(RwareEnv::new(scenario, horizon.unwrap_or(RWARE_HORIZON))?)
            }
        })
    }

    pub fn n_agents(&self) -> usize {
        match self {
            Env::Lbf(e) => e.n_agents(),
            Env::Rware(e) => e.n_agents(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Env::Lbf(_) => LbfAction::COUNT,
            Env::Rware(_) => RwareAction::COUNT,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Env::Lbf(e) => e.obs_dim(),
            Env::Rware(e) => e.obs_dim(),
        }
    }

    pub fn horizon(&self) -> u32 {
        match self {
            Env::Lbf(e) => e.horizon(),
            Env::Rware(e) => e.horizon(),
        }
    }

    /// Starts a new episode and returns every agent's observation.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<Vec<f32>>, EnvError> {
        match self {
            Env::Lbf(e) => e.reset(seed),
            Env::Rware(e) => e.reset(seed),
        }
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<JointStep, EnvError> {
        match self {
            Env::Lbf(e) => e.step(actions),
            Env::Rware(e) => e.step(actions),
        }
    }

    pub fn observe_all(&self) -> Vec<Vec<f32>> {
        match self {
            Env::Lbf(e) => e.observe_all(),
            Env::Rware(e) => e.observe_all(),
        }
    }

    /// Single-line JSON record of the full state, RNG included.
    pub fn snapshot(&self) -> String {
        match self {
            Env::Lbf(e) => e.snapshot(),
            Env::Rware(e) => e.snapshot(),
        }
    }
}
