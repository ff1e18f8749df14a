//! Multi-robot warehouse.
//!
//! Robots drive around a rack layout, lift shelves, carry the requested ones to
//! a goal cell and put them back on an empty rack slot. Only deliveries pay:
//! every agent receives the same +1 when any requested shelf reaches a goal.
//!
//! The layout is generated from the grid size. Rack columns come in pairs
//! separated by one-cell aisles, rack blocks are at most eight rows tall with a
//! cross aisle between blocks, and two goal cells sit at the middle of the
//! bottom edge:
//!
//! ```text
//! .RR.RR.RR..
//! .RR.RR.RR..     R  rack slot (holds a shelf at reset)
//! ...            .  floor
//! ...........     G  goal
//! ....GG.....
//! ```

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{resolve_moves, EnvError, JointStep, Pos};
use crate::scenario::{EnvKind, Scenario};

/// Features per cell of the 3x3 window: wall, goal, agent, agent heading
/// (4 one-hot), shelf, requested shelf.
pub const CELL_FEATURES: usize = 9;
/// Features describing the observing agent: carrying, heading (4 one-hot).
pub const SELF_FEATURES: usize = 5;
pub const OBS_DIM: usize = 9 * CELL_FEATURES + SELF_FEATURES;

const RACK_BLOCK_ROWS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RwareAction {
    Noop = 0,
    Forward = 1,
    TurnLeft = 2,
    TurnRight = 3,
    ToggleLoad = 4,
}

impl RwareAction {
    pub const COUNT: usize = 5;
    pub const ALL: [RwareAction; 5] = [
        RwareAction::Noop,
        RwareAction::Forward,
        RwareAction::TurnLeft,
        RwareAction::TurnRight,
        RwareAction::ToggleLoad,
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

    pub fn index(self) -> usize {
        self as usize
    }

    fn left(self) -> Self {
        Self::ALL[(self.index() + 3) % 4]
    }

    fn right(self) -> Self {
        Self::ALL[(self.index() + 1) % 4]
    }

    fn delta(self) -> (i32, i32) {
        match self {
            Heading::N => (0, -1),
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    Empty,
    ShelfRack,
    Goal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Robot {
    pub pos: Pos,
    pub heading: Heading,
    pub carrying: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shelf {
    pub home_pos: Pos,
    pub current_pos: Pos,
    pub requested: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwareState {
    pub grid_w: u32,
    pub grid_h: u32,
    pub layout: Vec<CellKind>,
    pub agents: Vec<Robot>,
    pub shelves: Vec<Shelf>,
    pub request_queue: Vec<usize>,
    pub step_count: u32,
    pub done: bool,
    pub rng: ChaCha8Rng,
}

impl RwareState {
    pub fn cell(&self, p: Pos) -> CellKind {
        self.layout[(p.y * self.grid_w + p.x) as usize]
    }

    /// Shelf resting at `p`, carried shelves excluded.
    pub fn resting_shelf_at(&self, p: Pos) -> Option<usize> {
        let carried: Vec<usize> = self.agents.iter().filter_map(|a| a.carrying).collect();
        self.shelves
            .iter()
            .enumerate()
            .position(|(i, s)| s.current_pos == p && !carried.contains(&i))
    }

    /// Any shelf at `p`, resting or carried.
    pub fn shelf_at(&self, p: Pos) -> Option<usize> {
        self.shelves.iter().position(|s| s.current_pos == p)
    }

    pub fn agent_at(&self, p: Pos) -> Option<usize> {
        self.agents.iter().position(|a| a.pos == p)
    }
}

/// Rack layout for a `w`x`h` grid, row-major.
pub fn generate_layout(w: u32, h: u32) -> Vec<CellKind> {
    let pairs = w.saturating_sub(1) / 3;
    let rack_limit = 1 + 3 * pairs;
    let mut layout = vec![CellKind::Empty; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let rack_col = x < rack_limit && x % 3 != 0;
            let rack_row = y >= 1 && y + 3 <= h && (y - 1) % (RACK_BLOCK_ROWS + 1) != RACK_BLOCK_ROWS;
            if rack_col && rack_row {
                layout[(y * w + x) as usize] = CellKind::ShelfRack;
            }
        }
    }
    if h > 0 && w >= 2 {
        for x in [w / 2 - 1, w / 2] {
            layout[((h - 1) * w + x) as usize] = CellKind::Goal;
        }
    }
    layout
}

#[derive(Debug, Clone)]
pub struct RwareEnv {
    n_agents: usize,
    horizon: u32,
    state: RwareState,
}

impl RwareEnv {
    pub fn new(scenario: &Scenario, horizon: u32) -> Result<Self, EnvError> {
        if scenario.env_kind != EnvKind::Rware {
            return Err(EnvError::WrongKind(scenario.name(), EnvKind::Rware));
        }
        let size = scenario
            .size_class
            .ok_or_else(|| EnvError::WrongKind(scenario.name(), EnvKind::Rware))?;
        let (w, h) = size.grid()?;
        if let Some(d) = &scenario.difficulty {
            return Err(EnvError::UnsupportedDifficulty(d.clone()));
        }
        let layout = generate_layout(w, h);
        let racks = layout.iter().filter(|c| **c == CellKind::ShelfRack).count();
        let n_agents = scenario.n_agents as usize;
        // Refills pick among shelves that are neither requested nor carried.
        if racks <= 2 * n_agents {
            return Err(EnvError::TooFewShelves(racks));
        }
        let free = layout.iter().filter(|c| **c != CellKind::ShelfRack).count();
        if n_agents > free {
            return Err(EnvError::GridTooSmall { needed: n_agents, w, h });
        }
        Ok(RwareEnv {
            n_agents,
            horizon,
            state: RwareState {
                grid_w: w,
                grid_h: h,
                layout,
                agents: Vec::new(),
                shelves: Vec::new(),
                request_queue: Vec::new(),
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
        OBS_DIM
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn state(&self) -> &RwareState {
        &self.state
    }

    pub fn set_state(&mut self, state: RwareState) {
        self.state = state;
    }

    pub fn reset(&mut self, seed: u64) -> Result<Vec<Vec<f32>>, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (self.state.grid_w, self.state.grid_h);
        let layout = std::mem::take(&mut self.state.layout);
        let to_pos = |i: usize| Pos::new(i as u32 % w, i as u32 / w);

        let shelves: Vec<Shelf> = layout
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == CellKind::ShelfRack)
            .map(|(i, _)| Shelf {
                home_pos: to_pos(i),
                current_pos: to_pos(i),
                requested: false,
            })
            .collect();
        let floor: Vec<usize> = layout
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != CellKind::ShelfRack)
            .map(|(i, _)| i)
            .collect();
        let agents: Vec<Robot> = sample(&mut rng, floor.len(), self.n_agents)
            .iter()
            .map(|k| Robot {
                pos: to_pos(floor[k]),
                heading: Heading::ALL[rng.gen_range(0..4)],
                carrying: None,
            })
            .collect();

        let mut state = RwareState {
            grid_w: w,
            grid_h: h,
            layout,
            agents,
            shelves,
            request_queue: Vec::new(),
            step_count: 0,
            done: false,
            rng,
        };
        let requests = sample(&mut state.rng, state.shelves.len(), self.n_agents).into_vec();
        for &s in &requests {
            state.shelves[s].requested = true;
        }
        state.request_queue = requests;
        self.state = state;
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
        let actions: Vec<RwareAction> = actions
            .iter()
            .enumerate()
            .map(|(agent, &a)| {
                RwareAction::from_index(a).ok_or(EnvError::InvalidAction { agent, action: a })
            })
            .collect::<Result<_, _>>()?;

        let (w, h) = (self.state.grid_w, self.state.grid_h);
        for (robot, action) in self.state.agents.iter_mut().zip(&actions) {
            match action {
                RwareAction::TurnLeft => robot.heading = robot.heading.left(),
                RwareAction::TurnRight => robot.heading = robot.heading.right(),
                _ => {}
            }
        }

        let positions: Vec<Pos> = self.state.agents.iter().map(|a| a.pos).collect();
        let targets: Vec<Option<Pos>> = self
            .state
            .agents
            .iter()
            .zip(&actions)
            .map(|(r, a)| match a {
                RwareAction::Forward => {
                    let (dx, dy) = r.heading.delta();
                    r.pos.offset(dx, dy, w, h)
                }
                _ => None,
            })
            .collect();
        let state = &self.state;
        let moved = resolve_moves(&positions, &targets, |i, t| {
            state.agents[i].carrying.is_some() && state.resting_shelf_at(t).is_some()
        });
        for (robot, pos) in self.state.agents.iter_mut().zip(moved) {
            robot.pos = pos;
            if let Some(s) = robot.carrying {
                self.state.shelves[s].current_pos = pos;
            }
        }

        for (i, &action) in actions.iter().enumerate() {
            if action != RwareAction::ToggleLoad {
                continue;
            }
            let pos = self.state.agents[i].pos;
            match self.state.agents[i].carrying {
                None => {
                    if let Some(s) = self.state.resting_shelf_at(pos) {
                        self.state.agents[i].carrying = Some(s);
                    }
                }
                Some(s) => {
                    let legal = self.state.cell(pos) == CellKind::ShelfRack
                        && self
                            .state
                            .shelves
                            .iter()
                            .enumerate()
                            .all(|(k, other)| k == s || other.current_pos != pos);
                    if legal {
                        self.state.agents[i].carrying = None;
                    }
                }
            }
        }

        let mut deliveries = 0u32;
        for i in 0..self.n_agents {
            let robot = self.state.agents[i];
            let Some(s) = robot.carrying else { continue };
            if self.state.cell(robot.pos) != CellKind::Goal || !self.state.shelves[s].requested {
                continue;
            }
            deliveries += 1;
            self.state.shelves[s].requested = false;
            self.state.request_queue.retain(|&q| q != s);
            let carried: Vec<usize> = self.state.agents.iter().filter_map(|a| a.carrying).collect();
            let candidates: Vec<usize> = (0..self.state.shelves.len())
                .filter(|k| !self.state.shelves[*k].requested && !carried.contains(k))
                .collect();
            let pick = *candidates
                .choose(&mut self.state.rng)
                .expect("more shelves than twice the agents");
            self.state.shelves[pick].requested = true;
            self.state.request_queue.push(pick);
        }

        self.state.step_count += 1;
        let done = self.state.step_count >= self.horizon;
        self.state.done = done;
        let reward = deliveries as f32;
        Ok(JointStep {
            obs: self.observe_all(),
            rewards: vec![reward; self.n_agents],
            team_reward: reward,
            done,
            terminated: false,
        })
    }

    /// 3x3 window centred on the agent, scanned row by row from the top-left,
    /// followed by the agent's own carrying flag and heading.
    pub fn observe(&self, agent: usize) -> Vec<f32> {
        let s = &self.state;
        let me = s.agents[agent];
        let mut obs = Vec::with_capacity(OBS_DIM);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let mut cell = [0.0f32; CELL_FEATURES];
                match me.pos.offset(dx, dy, s.grid_w, s.grid_h) {
                    None => cell[0] = 1.0,
                    Some(p) => {
                        if s.cell(p) == CellKind::Goal {
                            cell[1] = 1.0;
                        }
                        if let Some(j) = s.agent_at(p) {
                            cell[2] = 1.0;
                            cell[3 + s.agents[j].heading.index()] = 1.0;
                        }
                        if let Some(k) = s.shelf_at(p) {
                            cell[7] = 1.0;
                            if s.shelves[k].requested {
                                cell[8] = 1.0;
                            }
                        }
                    }
                }
                obs.extend(cell);
            }
        }
        obs.push(if me.carrying.is_some() { 1.0 } else { 0.0 });
        let mut heading = [0.0f32; 4];
        heading[me.heading.index()] = 1.0;
        obs.extend(heading);
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

    /// Request, carrying and occupancy invariants.
    pub fn check_invariants(&self) -> bool {
        let s = &self.state;
        let requested = s.shelves.iter().filter(|x| x.requested).count();
        let mut queue = s.request_queue.clone();
        queue.sort_unstable();
        queue.dedup();
        let carried: Vec<usize> = s.agents.iter().filter_map(|a| a.carrying).collect();
        let mut unique_carried = carried.clone();
        unique_carried.sort_unstable();
        unique_carried.dedup();
        let mut cells: Vec<Pos> = s.agents.iter().map(|a| a.pos).collect();
        cells.sort_by_key(|p| (p.y, p.x));
        cells.dedup();
        // every shelf is carried or rests alone on a rack slot
        let placed = s.shelves.iter().enumerate().all(|(k, shelf)| {
            carried.contains(&k)
                || (s.cell(shelf.current_pos) == CellKind::ShelfRack
                    && s.shelves
                        .iter()
                        .enumerate()
                        .all(|(j, o)| j == k || o.current_pos != shelf.current_pos || carried.contains(&j)))
        });
        requested == self.n_agents
            && queue.len() == self.n_agents
            && queue.iter().all(|&q| s.shelves[q].requested)
            && unique_carried.len() == carried.len()
            && cells.len() == s.agents.len()
            && placed
            && s.agents
                .iter()
                .all(|a| a.carrying.is_none_or(|k| s.shelves[k].current_pos == a.pos))
    }
}
