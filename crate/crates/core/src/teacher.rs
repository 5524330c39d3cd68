//! Sequential level design MDP.
//!
//! A teacher builds a level one element per step by naming a cell index in
//! `[0, h·w)`. The first action only sets the wall budget
//! (`1 + action mod max_walls`). Then come `budget` walls, agent one, agent
//! two, and two placements each of goal, onion pile, pot and plate pile.
//!
//! Collision rules: an element placed on a cell holding the same element
//! type is dropped (border cells count as walls); placed on anything else it
//! is moved to a uniformly random free interior cell drawn from the episode
//! rng. The two agents count as different element types.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::STATION_ORDER;
use crate::level::{
    validate_with, AgentStart, Direction, Level, Pos, Tile, ValidationReport, DEFAULT_CANVAS_H,
    DEFAULT_CANVAS_W, DEFAULT_MAX_WALLS,
};
use crate::rng::{seeded, uniform_index, ChaCha8Rng};

pub const NOISE_DIM: usize = 50;
/// Mask planes in a [`TeacherObservation`].
pub const TEACHER_MASKS: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub height: usize,
    pub width: usize,
    pub max_walls: usize,
    pub noise_dim: usize,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            height: DEFAULT_CANVAS_H,
            width: DEFAULT_CANVAS_W,
            max_walls: DEFAULT_MAX_WALLS,
            noise_dim: NOISE_DIM,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    WallBudget,
    Walls { placed: usize },
    Agent1,
    Agent2,
    Goal(u8),
    Onion(u8),
    Pot(u8),
    Bowl(u8),
    Done,
}

impl Phase {
    /// Categorical index of the element placed next.
    pub fn element_index(self) -> usize {
        match self {
            Phase::WallBudget => 0,
            Phase::Walls { .. } => 1,
            Phase::Agent1 => 2,
            Phase::Agent2 => 3,
            Phase::Goal(_) => 4,
            Phase::Onion(_) => 5,
            Phase::Pot(_) => 6,
            Phase::Bowl(_) => 7,
            Phase::Done => 8,
        }
    }

    fn station(self) -> Option<(Tile, u8)> {
        match self {
            Phase::Goal(i) => Some((Tile::Goal, i)),
            Phase::Onion(i) => Some((Tile::OnionPile, i)),
            Phase::Pot(i) => Some((Tile::Pot, i)),
            Phase::Bowl(i) => Some((Tile::PlatePile, i)),
            _ => None,
        }
    }
}

fn station_phase(tile: Tile, i: u8) -> Phase {
    match tile {
        Tile::Goal => Phase::Goal(i),
        Tile::OnionPile => Phase::Onion(i),
        Tile::Pot => Phase::Pot(i),
        Tile::PlatePile => Phase::Bowl(i),
        Tile::Floor | Tile::Wall => unreachable!("not a station"),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TeacherError {
    #[error("invalid teacher config: {0}")]
    Config(String),
    #[error("action {action} outside [0, {cells})")]
    ActionOutOfRange { action: usize, cells: usize },
    #[error("design episode already finished")]
    Finished,
    #[error("design episode not finished (phase {0:?})")]
    NotFinished(Phase),
    #[error("finalized level is invalid: {0}")]
    Invalid(ValidationReport),
    #[error("level cannot be produced by the teacher: {0}")]
    Unreachable(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TeacherState {
    pub config: TeacherConfig,
    pub canvas: Level,
    pub agents: [Option<Pos>; 2],
    pub phase: Phase,
    pub budget: usize,
    pub noise: Vec<f64>,
    pub t: usize,
    rng: ChaCha8Rng,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeacherObservation {
    pub height: usize,
    pub width: usize,
    /// Planes: wall, onion pile, plate pile, pot, goal, agent one, agent two.
    pub masks: Vec<bool>,
    pub element: usize,
    pub remaining_budget: usize,
    pub time: usize,
    pub noise: Vec<f64>,
}

pub fn teacher_reset(seed: u64, config: &TeacherConfig) -> Result<TeacherState, TeacherError> {
    if config.height < 3 || config.width < 3 || config.max_walls == 0 {
        return Err(TeacherError::Config(
            "canvas needs an interior and a positive wall budget".into(),
        ));
    }
    let interior = (config.height - 2) * (config.width - 2);
    if interior < config.max_walls + 10 {
        return Err(TeacherError::Config(format!(
            "{interior} interior cells cannot hold {} walls plus agents and stations",
            config.max_walls
        )));
    }
    let mut rng = seeded(seed);
    let noise = (0..config.noise_dim).map(|_| rng.gen::<f64>()).collect();
    Ok(TeacherState {
        config: *config,
        canvas: Level::bordered(config.height, config.width),
        agents: [None, None],
        phase: Phase::WallBudget,
        budget: 0,
        noise,
        t: 0,
        rng,
    })
}

impl TeacherState {
    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    fn free_cells(&self) -> Vec<Pos> {
        self.canvas
            .cells()
            .filter(|&p| {
                !self.canvas.is_border(p)
                    && self.canvas.tile(p) == Tile::Floor
                    && !self.agents.contains(&Some(p))
            })
            .collect()
    }

    fn relocate(&mut self) -> Option<Pos> {
        let free = self.free_cells();
        if free.is_empty() {
            None
        } else {
            Some(free[uniform_index(&mut self.rng, free.len())])
        }
    }

    fn is_free(&self, p: Pos) -> bool {
        !self.canvas.is_border(p)
            && self.canvas.tile(p) == Tile::Floor
            && !self.agents.contains(&Some(p))
    }

    fn next_phase(&self) -> Phase {
        match self.phase {
            Phase::WallBudget => Phase::Walls { placed: 0 },
            Phase::Walls { placed } if placed + 1 < self.budget => {
                Phase::Walls { placed: placed + 1 }
            }
            Phase::Walls { .. } => Phase::Agent1,
            Phase::Agent1 => Phase::Agent2,
            Phase::Agent2 => station_phase(STATION_ORDER[0], 0),
            Phase::Done => Phase::Done,
            p => {
                let (tile, i) = p.station().expect("station phase");
                if i == 0 {
                    station_phase(tile, 1)
                } else {
                    let k = STATION_ORDER
                        .iter()
                        .position(|&t| t == tile)
                        .expect("ordered station");
                    STATION_ORDER
                        .get(k + 1)
                        .map_or(Phase::Done, |&t| station_phase(t, 0))
                }
            }
        }
    }

    fn apply(&mut self, action: usize) -> Result<(), TeacherError> {
        let cells = self.config.height * self.config.width;
        if self.phase == Phase::Done {
            return Err(TeacherError::Finished);
        }
        if action >= cells {
            return Err(TeacherError::ActionOutOfRange { action, cells });
        }
        let cell = self.canvas.pos_of(action);
        match self.phase {
            Phase::WallBudget => {
                self.budget = 1 + action % self.config.max_walls;
            }
            Phase::Walls { .. } => {
                // only walls exist so far; wall on wall (or border) is dropped
                if self.canvas.tile(cell) == Tile::Floor {
                    self.canvas.set_tile(cell, Tile::Wall);
                }
            }
            Phase::Agent1 | Phase::Agent2 => {
                let slot = usize::from(self.phase == Phase::Agent2);
                let target = if self.is_free(cell) {
                    Some(cell)
                } else {
                    self.relocate()
                };
                self.agents[slot] = target;
            }
            phase => {
                let (tile, _) = phase.station().expect("station phase");
                if self.canvas.tile(cell) != tile {
                    let target = if self.is_free(cell) {
                        Some(cell)
                    } else {
                        self.relocate()
                    };
                    if let Some(p) = target {
                        self.canvas.set_tile(p, tile);
                    }
                }
            }
        }
        self.phase = self.next_phase();
        self.t += 1;
        Ok(())
    }

    /// Pure transition: returns the successor state and whether the design
    /// episode is over.
    pub fn step(&self, action: usize) -> Result<(TeacherState, bool), TeacherError> {
        let mut next = self.clone();
        next.apply(action)?;
        let done = next.is_done();
        Ok((next, done))
    }

    pub fn step_in_place(&mut self, action: usize) -> Result<bool, TeacherError> {
        self.apply(action)?;
        Ok(self.is_done())
    }

    pub fn observe(&self) -> TeacherObservation {
        let (h, w) = self.canvas.dims();
        let plane = h * w;
        let mut masks = vec![false; TEACHER_MASKS * plane];
        for (i, &tile) in self.canvas.grid().iter().enumerate() {
            let c = match tile {
                Tile::Floor => continue,
                Tile::Wall => 0,
                Tile::OnionPile => 1,
                Tile::PlatePile => 2,
                Tile::Pot => 3,
                Tile::Goal => 4,
            };
            masks[c * plane + i] = true;
        }
        for (k, agent) in self.agents.iter().enumerate() {
            if let Some(p) = agent {
                masks[(5 + k) * plane + self.canvas.index(*p)] = true;
            }
        }
        let remaining_budget = match self.phase {
            Phase::WallBudget => self.config.max_walls,
            Phase::Walls { placed } => self.budget - placed,
            _ => 0,
        };
        TeacherObservation {
            height: h,
            width: w,
            masks,
            element: self.phase.element_index(),
            remaining_budget,
            time: self.t,
            noise: self.noise.clone(),
        }
    }

    pub fn finalize(&self) -> Result<Level, TeacherError> {
        if self.phase != Phase::Done {
            return Err(TeacherError::NotFinished(self.phase));
        }
        let (Some(a), Some(b)) = (self.agents[0], self.agents[1]) else {
            return Err(TeacherError::Unreachable(
                "agent could not be placed".into(),
            ));
        };
        let mut level = self.canvas.clone();
        level.set_agents([
            AgentStart::new(a, Direction::Up),
            AgentStart::new(b, Direction::Up),
        ]);
        let report = validate_with(&level, self.config.max_walls);
        if !report.valid {
            return Err(TeacherError::Invalid(report));
        }
        Ok(level)
    }
}

pub fn teacher_step(
    state: &TeacherState,
    action: usize,
) -> Result<(TeacherState, bool), TeacherError> {
    state.step(action)
}

/// Runs a full design episode with uniformly random actions.
pub fn random_design(
    seed: u64,
    config: &TeacherConfig,
) -> Result<(Level, Vec<usize>), TeacherError> {
    let mut state = teacher_reset(seed, config)?;
    let mut policy = seeded(seed ^ 0x7EAC_8E55);
    let cells = config.height * config.width;
    let mut script = Vec::new();
    loop {
        let action = uniform_index(&mut policy, cells);
        script.push(action);
        if state.step_in_place(action)? {
            break;
        }
    }
    Ok((state.finalize()?, script))
}

/// Feeds an action script through a fresh design episode.
pub fn replay_script(
    script: &[usize],
    seed: u64,
    config: &TeacherConfig,
) -> Result<Level, TeacherError> {
    let mut state = teacher_reset(seed, config)?;
    for &action in script {
        state.step_in_place(action)?;
    }
    state.finalize()
}

/// Action script that makes the teacher build exactly `level`, with no
/// relocation involved.
pub fn script_for_level(level: &Level, config: &TeacherConfig) -> Result<Vec<usize>, TeacherError> {
    if level.dims() != (config.height, config.width) {
        return Err(TeacherError::Unreachable(format!(
            "level is {}x{}, canvas is {}x{}",
            level.height(),
            level.width(),
            config.height,
            config.width
        )));
    }
    let mut walls = Vec::new();
    for p in level.cells() {
        let tile = level.tile(p);
        if level.is_border(p) {
            if tile != Tile::Wall {
                return Err(TeacherError::Unreachable(format!(
                    "{tile:?} on border cell {p}"
                )));
            }
        } else if tile == Tile::Wall {
            walls.push(level.index(p));
        }
    }
    if walls.len() > config.max_walls {
        return Err(TeacherError::Unreachable(format!(
            "{} walls exceed budget",
            walls.len()
        )));
    }
    if level.agents().iter().any(|a| a.dir != Direction::Up) {
        return Err(TeacherError::Unreachable(
            "teacher agents always face up".into(),
        ));
    }

    let mut script = Vec::new();
    if walls.is_empty() {
        // budget 1, spent on a border cell (dropped)
        script.extend([0, 0]);
    } else {
        script.push(walls.len() - 1);
        script.extend(&walls);
    }
    for a in level.agents() {
        script.push(level.index(a.pos));
    }
    for tile in STATION_ORDER {
        let cells = level.positions_of(tile);
        match cells.as_slice() {
            [p] => script.extend([level.index(*p); 2]),
            [p, q] => script.extend([level.index(*p), level.index(*q)]),
            _ => {
                return Err(TeacherError::Unreachable(format!(
                    "{} {tile:?} cells",
                    cells.len()
                )))
            }
        }
    }
    Ok(script)
}
