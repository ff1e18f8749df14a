//! Level-based foraging.
//!
//! Agents and food carry levels. A food item is collected when the agents that
//! choose `Load` while standing next to it (4-neighbourhood) have a combined
//! level at least as high as the food's. Each loader is paid in proportion to
//! its own level, and rewards are normalised so that a perfect episode returns
//! a team total of exactly one.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{resolve_moves, EnvError, JointStep, Pos};
use crate::scenario::{EnvKind, Scenario};

pub const MAX_AGENT_LEVEL: u32 = 3;

/// Value written into the observation slots of hidden or collected entities.
pub const SENTINEL: [f32; 3] = [-1.0, -1.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LbfAction {
    Noop = 0,
    Up = 1,
    Down = 2,
    Left = 3,
    Right = 4,
    Load = 5,
}

impl LbfAction {
    pub const COUNT: usize = 6;
    pub const ALL: [LbfAction; 6] = [
        LbfAction::Noop,
        LbfAction::Up,
        LbfAction::Down,
        LbfAction::Left,
        LbfAction::Right,
        LbfAction::Load,
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> Option<(i32, i32)> {
        match self {
            LbfAction::Up => Some((0, -1)),
            LbfAction::Down => Some((0, 1)),
            LbfAction::Left => Some((-1, 0)),
            LbfAction::Right => Some((1, 0)),
            LbfAction::Noop | LbfAction::Load => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub pos: Pos,
    pub level: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Food {
    pub pos: Pos,
    pub level: u32,
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfState {
    pub grid_w: u32,
    pub grid_h: u32,
    pub agents: Vec<Agent>,
    pub foods: Vec<Food>,
    pub step_count: u32,
    pub done: bool,
    pub rng: ChaCha8Rng,
}

impl LbfState {
    pub fn total_food_level(&self) -> u32 {
        self.foods.iter().map(|f| f.level).sum()
    }

    fn food_at(&self, p: Pos) -> Option<usize> {
        self.foods.iter().position(|f| f.present && f.pos == p)
    }
}

#[derive(Debug, Clone)]
pub struct LbfEnv {
    n_agents: usize,
    n_food: usize,
    grid_w: u32,
    grid_h: u32,
    sight: Option<u32>,
    coop: bool,
    horizon: u32,
    state: LbfState,
}

impl LbfEnv {
    /// Builds the environment with an empty episode; call [`LbfEnv::reset`] to play.
    pub fn new(scenario: &Scenario, horizon: u32) -> Result<Self, EnvError> {
        if scenario.env_kind != EnvKind::Lbf {
            return Err(EnvError::WrongKind(scenario.name(), EnvKind::Lbf));
        }
        let needed = (scenario.n_agents + scenario.n_food) as usize;
        if needed > (scenario.grid_w * scenario.grid_h) as usize {
            return Err(EnvError::GridTooSmall {
                needed,
                w: scenario.grid_w,
                h: scenario.grid_h,
            });
        }
        Ok(LbfEnv {
            n_agents: scenario.n_agents as usize,
            n_food: scenario.n_food as usize,
            grid_w: scenario.grid_w,
            grid_h: scenario.grid_h,
            sight: scenario.sight,
            coop: scenario.coop,
            horizon,
            state: LbfState {
                grid_w: scenario.grid_w,
                grid_h: scenario.grid_h,
                agents: Vec::new(),
                foods: Vec::new(),
                step_count: 0,
                done: true,
                rng: ChaCha8Rng::seed_from_u64(0),
            },
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn obs_dim(&self) -> usize {
        3 * (self.n_agents + self.n_food)
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn state(&self) -> &LbfState {
        &self.state
    }

    /// Replaces the state wholesale, e.g. with a hand-built layout in tests.
    pub fn set_state(&mut self, state: LbfState) {
        self.state = state;
    }

    pub fn reset(&mut self, seed: u64) -> Result<Vec<Vec<f32>>, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = (self.grid_w * self.grid_h) as usize;
        let picks = sample(&mut rng, cells, self.n_agents + self.n_food);
        let to_pos = |i: usize| Pos::new(i as u32 % self.grid_w, i as u32 / self.grid_w);

        let agents: Vec<Agent> = picks
            .iter()
            .take(self.n_agents)
            .map(|i| Agent {
                pos: to_pos(i),
                level: rng.gen_range(1..=MAX_AGENT_LEVEL),
            })
            .collect();
        let level_sum: u32 = agents.iter().map(|a| a.level).sum();
        let foods = picks
            .iter()
            .skip(self.n_agents)
            .map(|i| Food {
                pos: to_pos(i),
                level: if self.coop {
                    level_sum
                } else {
                    rng.gen_range(1..=level_sum)
                },
                present: true,
            })
            .collect();

        self.state = LbfState {
            grid_w: self.grid_w,
            grid_h: self.grid_h,
            agents,
            foods,
            step_count: 0,
            done: false,
            rng,
        };
        Ok(self.observe_all())
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<JointStep, EnvError> {
        if self.state.done {
            return Err(EnvError::SteppedAfterDone);
        }
        if actions.len() != self.n_agents {
            return Err(EnvError::WrongActionCount {
                expected: self.n_agents,
                got: actions.len(),
            });
        }
        let actions: Vec<LbfAction> = actions
            .iter()
            .enumerate()
            .map(|(agent, &a)| {
                LbfAction::from_index(a).ok_or(EnvError::InvalidAction { agent, action: a })
            })
            .collect::<Result<_, _>>()?;

        let (w, h) = (self.grid_w, self.grid_h);
        let positions: Vec<Pos> = self.state.agents.iter().map(|a| a.pos).collect();
        let targets: Vec<Option<Pos>> = positions
            .iter()
            .zip(&actions)
            .map(|(p, a)| a.delta().and_then(|(dx, dy)| p.offset(dx, dy, w, h)))
            .collect();
        let state = &self.state;
        let moved = resolve_moves(&positions, &targets, |_, t| state.food_at(t).is_some());
        for (agent, pos) in self.state.agents.iter_mut().zip(moved) {
            agent.pos = pos;
        }

        let mut rewards = vec![0.0f32; self.n_agents];
        let total_food = self.state.total_food_level() as f32;
        for f in 0..self.state.foods.len() {
            let food = self.state.foods[f];
            if !food.present {
                continue;
            }
            let loaders: Vec<usize> = (0..self.n_agents)
                .filter(|&i| {
                    actions[i] == LbfAction::Load && self.state.agents[i].pos.manhattan(food.pos) == 1
                })
                .collect();
            let loader_level: u32 = loaders.iter().map(|&i| self.state.agents[i].level).sum();
            if loaders.is_empty() || loader_level < food.level {
                continue;
            }
            self.state.foods[f].present = false;
            for &i in &loaders {
                let level = self.state.agents[i].level as f32;
                rewards[i] += food.level as f32 * level / (loader_level as f32 * total_food);
            }
        }

        self.state.step_count += 1;
        let terminated = self.state.foods.iter().all(|f| !f.present);
        let done = terminated || self.state.step_count >= self.horizon;
        self.state.done = done;

        Ok(JointStep {
            obs: self.observe_all(),
            team_reward: rewards.iter().sum(),
            rewards,
            done,
            terminated,
        })
    }

    /// Observation of one agent: `(x, y, level)` for itself in absolute grid
    /// coordinates, then `(dx, dy, level)` relative to it for every other agent
    /// and every food item, in index order. Entities outside the sight radius
    /// and collected food are written as [`SENTINEL`].
    pub fn observe(&self, agent: usize) -> Vec<f32> {
        let s = &self.state;
        let me = s.agents[agent];
        let visible = |p: Pos| self.sight.is_none_or(|r| me.pos.chebyshev(p) <= r);
        let rel = |p: Pos, level: u32| {
            [
                p.x as f32 - me.pos.x as f32,
                p.y as f32 - me.pos.y as f32,
                level as f32,
            ]
        };

        let mut obs = Vec::with_capacity(self.obs_dim());
        obs.extend([me.pos.x as f32, me.pos.y as f32, me.level as f32]);
        for (j, other) in s.agents.iter().enumerate() {
            if j == agent {
                continue;
            }
            if visible(other.pos) {
                obs.extend(rel(other.pos, other.level));
            } else {
                obs.extend(SENTINEL);
            }
        }
        for food in &s.foods {
            if food.present && visible(food.pos) {
                obs.extend(rel(food.pos, food.level));
            } else {
                obs.extend(SENTINEL);
            }
        }
        obs
    }

    pub fn observe_all(&self) -> Vec<Vec<f32>> {
        (0..self.n_agents).map(|i| self.observe(i)).collect()
    }

    pub fn snapshot(&self) -> String {
        serde_json::to_string(&self.state).expect("state serialises")
    }

    pub fn restore(&mut self, snapshot: &str) -> Result<(), EnvError> {
        self.state = serde_json::from_str(snapshot)?;
        Ok(())
    }

    /// True when the layout invariants hold: no shared cells, coop levels.
    pub fn check_invariants(&self) -> bool {
        let s = &self.state;
        let mut cells: Vec<Pos> = s.agents.iter().map(|a| a.pos).collect();
        cells.extend(s.foods.iter().filter(|f| f.present).map(|f| f.pos));
        let n = cells.len();
        cells.sort_by_key(|p| (p.y, p.x));
        cells.dedup();
        let level_sum: u32 = s.agents.iter().map(|a| a.level).sum();
        cells.len() == n
            && s.step_count <= self.horizon
            && (!self.coop || s.foods.iter().all(|f| f.level == level_sum))
    }
}
