//! Two-agent cooking dynamics and the 26-channel observation encoder.
//!
//! Per step, in order: pots that are cooking tick down; movement actions
//! turn the agent and propose a move, resolved jointly by
//! [`resolve_movement`]; `Interact` actions then apply to the faced cell in
//! agent order (0 before 1). A pot that receives its last onion starts at
//! `cook_time` and first ticks on the following step.
//!
//! Observation channels, ego-first (`self` is the observing agent):
//!
//! | channel | content |
//! |---|---|
//! | 0 | self position |
//! | 1 | other agent position |
//! | 2–5 | self orientation one-hot (U, D, L, R) at self cell |
//! | 6–9 | other orientation one-hot at other cell |
//! | 10 | wall |
//! | 11 | onion pile |
//! | 12 | plate pile |
//! | 13 | pot |
//! | 14 | goal |
//! | 15/16/17 | pot holding exactly 1/2/3 onions |
//! | 18 | pot cooking |
//! | 19 | pot ready |
//! | 20/21/22 | loose onion/plate/soup on a counter |
//! | 23/24/25 | held onion/plate/soup, marked at the holder's cell |

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::{validate, Direction, Level, Pos, Tile, ValidationReport};
use crate::rng::splitmix64;

pub const NUM_ACTIONS: usize = 6;
pub const OBS_CHANNELS: usize = 26;
pub const CENTRAL_CHANNELS: usize = 2 * OBS_CHANNELS;
pub const DEFAULT_HORIZON: u32 = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Left,
    Right,
    Up,
    Down,
    Interact,
    Stay,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Left,
        Action::Right,
        Action::Up,
        Action::Down,
        Action::Interact,
        Action::Stay,
    ];

    pub fn index(self) -> usize {
        Action::ALL
            .iter()
            .position(|&a| a == self)
            .expect("action listed")
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Action::Left => Some(Direction::Left),
            Action::Right => Some(Direction::Right),
            Action::Up => Some(Direction::Up),
            Action::Down => Some(Direction::Down),
            Action::Interact | Action::Stay => None,
        }
    }

    pub fn from_direction(dir: Direction) -> Action {
        match dir {
            Direction::Up => Action::Up,
            Direction::Down => Action::Down,
            Direction::Left => Action::Left,
            Direction::Right => Action::Right,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Item {
    Onion,
    Plate,
    Soup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeldItem {
    Nothing,
    Onion,
    Plate,
    Soup,
}

impl HeldItem {
    pub fn item(self) -> Option<Item> {
        match self {
            HeldItem::Nothing => None,
            HeldItem::Onion => Some(Item::Onion),
            HeldItem::Plate => Some(Item::Plate),
            HeldItem::Soup => Some(Item::Soup),
        }
    }
}

impl From<Item> for HeldItem {
    fn from(item: Item) -> Self {
        match item {
            Item::Onion => HeldItem::Onion,
            Item::Plate => HeldItem::Plate,
            Item::Soup => HeldItem::Soup,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PotState {
    pub onions: u8,
    pub timer: u32,
    pub ready: bool,
}

impl PotState {
    pub fn is_cooking(&self) -> bool {
        self.timer > 0
    }

    pub fn accepts_onion(&self, capacity: u8) -> bool {
        self.onions < capacity && !self.ready && self.timer == 0
    }

    pub fn is_consistent(&self, capacity: u8, cook_time: u32) -> bool {
        self.onions <= capacity
            && self.timer <= cook_time
            && (self.timer == 0 || (self.onions == capacity && !self.ready))
            && (!self.ready || (self.onions == capacity && self.timer == 0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapedRewards {
    pub onion_potted: f64,
    pub plate_pickup: f64,
    pub soup_pickup: f64,
}

impl Default for ShapedRewards {
    fn default() -> Self {
        ShapedRewards {
            onion_potted: 3.0,
            plate_pickup: 3.0,
            soup_pickup: 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub horizon: u32,
    pub cook_time: u32,
    pub pot_capacity: u8,
    pub delivery_reward: f64,
    pub shaped: ShapedRewards,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            horizon: DEFAULT_HORIZON,
            cook_time: 20,
            pot_capacity: 3,
            delivery_reward: 20.0,
            shaped: ShapedRewards::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Delivery,
    OnionPotted,
    PlatePickup,
    SoupPickup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub agent: usize,
    pub kind: EventKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid level: {0}")]
    InvalidLevel(ValidationReport),
    #[error("episode already finished at t = {t}")]
    EpisodeDone { t: u32 },
    #[error("observation shapes differ: {a:?} vs {b:?}")]
    DimensionMismatch {
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },
}

/// Complete world state. Pots are listed in row-major order of their cells;
/// `counters` is indexed like the level grid and only ever holds items on
/// `Wall` cells.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    level: Arc<Level>,
    pub agent_pos: [Pos; 2],
    pub agent_dir: [Direction; 2],
    pub held: [HeldItem; 2],
    pub pots: Vec<(Pos, PotState)>,
    pub counters: Vec<Option<Item>>,
    pub t: u32,
    pub deliveries: u32,
    pub rng_state: u64,
}

impl EnvState {
    pub fn level(&self) -> &Level {
        &self.level
    }

    pub fn level_arc(&self) -> &Arc<Level> {
        &self.level
    }

    pub fn pot(&self, pos: Pos) -> Option<&PotState> {
        self.pots.iter().find(|(p, _)| *p == pos).map(|(_, s)| s)
    }

    pub fn pot_mut(&mut self, pos: Pos) -> Option<&mut PotState> {
        self.pots
            .iter_mut()
            .find(|(p, _)| *p == pos)
            .map(|(_, s)| s)
    }

    pub fn counter_item(&self, pos: Pos) -> Option<Item> {
        self.counters[self.level.index(pos)]
    }

    pub fn set_counter_item(&mut self, pos: Pos, item: Option<Item>) {
        let i = self.level.index(pos);
        self.counters[i] = item;
    }

    /// Cell the agent is facing, if it lies inside the grid.
    pub fn faced_cell(&self, agent: usize) -> Option<Pos> {
        let (h, w) = self.level.dims();
        self.agent_pos[agent].step(self.agent_dir[agent], h, w)
    }

    /// Puts the state back to its initial configuration without re-validating
    /// the level.
    pub fn restart(&mut self, seed: u64) {
        let starts = *self.level.agents();
        self.agent_pos = [starts[0].pos, starts[1].pos];
        self.agent_dir = [starts[0].dir, starts[1].dir];
        self.held = [HeldItem::Nothing; 2];
        for (_, pot) in &mut self.pots {
            *pot = PotState::default();
        }
        self.counters.fill(None);
        self.t = 0;
        self.deliveries = 0;
        self.rng_state = splitmix64(seed);
    }

    /// Applies `agent`'s interaction with its faced cell.
    pub fn apply_interact(&mut self, agent: usize, config: &EnvConfig) -> Option<EventKind> {
        let faced = self.faced_cell(agent)?;
        let tile = self.level.tile(faced);
        let held = self.held[agent];
        match (held, tile) {
            (HeldItem::Nothing, Tile::OnionPile) => {
                self.held[agent] = HeldItem::Onion;
                None
            }
            (HeldItem::Nothing, Tile::PlatePile) => {
                self.held[agent] = HeldItem::Plate;
                Some(EventKind::PlatePickup)
            }
            (HeldItem::Nothing, Tile::Wall) => {
                if let Some(item) = self.counter_item(faced) {
                    self.held[agent] = item.into();
                    self.set_counter_item(faced, None);
                }
                None
            }
            (_, Tile::Wall) => {
                if self.counter_item(faced).is_none() {
                    self.set_counter_item(faced, held.item());
                    self.held[agent] = HeldItem::Nothing;
                }
                None
            }
            (HeldItem::Onion, Tile::Pot) => {
                let capacity = config.pot_capacity;
                let cook_time = config.cook_time;
                let pot = self.pot_mut(faced)?;
                if !pot.accepts_onion(capacity) {
                    return None;
                }
                pot.onions += 1;
                if pot.onions == capacity {
                    if cook_time == 0 {
                        pot.ready = true;
                    } else {
                        pot.timer = cook_time;
                    }
                }
                self.held[agent] = HeldItem::Nothing;
                Some(EventKind::OnionPotted)
            }
            (HeldItem::Plate, Tile::Pot) => {
                let pot = self.pot_mut(faced)?;
                if !pot.ready {
                    return None;
                }
                *pot = PotState::default();
                self.held[agent] = HeldItem::Soup;
                Some(EventKind::SoupPickup)
            }
            (HeldItem::Soup, Tile::Goal) => {
                self.held[agent] = HeldItem::Nothing;
                self.deliveries += 1;
                Some(EventKind::Delivery)
            }
            _ => None,
        }
    }

    /// Encodes the state from `agent`'s point of view.
    pub fn observe(&self, agent: usize) -> Observation {
        let (h, w) = self.level.dims();
        let mut data = vec![false; OBS_CHANNELS * h * w];
        self.observe_into(agent, &mut data);
        Observation {
            channels: OBS_CHANNELS,
            height: h,
            width: w,
            data,
        }
    }

    /// Writes the observation into `buf` (length `26·h·w`, channel-major).
    pub fn observe_into(&self, agent: usize, buf: &mut [bool]) {
        let level = &*self.level;
        let plane = level.height() * level.width();
        assert_eq!(buf.len(), OBS_CHANNELS * plane, "observation buffer size");
        buf.fill(false);
        let mut set = |c: usize, p: Pos| buf[c * plane + level.index(p)] = true;

        let other = 1 - agent;
        set(0, self.agent_pos[agent]);
        set(1, self.agent_pos[other]);
        set(2 + self.agent_dir[agent].index(), self.agent_pos[agent]);
        set(6 + self.agent_dir[other].index(), self.agent_pos[other]);

        for (i, &tile) in level.grid().iter().enumerate() {
            let c = match tile {
                Tile::Floor => None,
                Tile::Wall => Some(10),
                Tile::OnionPile => Some(11),
                Tile::PlatePile => Some(12),
                Tile::Pot => Some(13),
                Tile::Goal => Some(14),
            };
            if let Some(c) = c {
                buf[c * plane + i] = true;
            }
            if let Some(item) = self.counters[i] {
                buf[(20 + item as usize) * plane + i] = true;
            }
        }
        for &(p, pot) in &self.pots {
            if (1..=3).contains(&pot.onions) {
                buf[(14 + pot.onions as usize) * plane + level.index(p)] = true;
            }
            if pot.is_cooking() {
                buf[18 * plane + level.index(p)] = true;
            }
            if pot.ready {
                buf[19 * plane + level.index(p)] = true;
            }
        }
        for a in 0..2 {
            if let Some(item) = self.held[a].item() {
                buf[(23 + item as usize) * plane + level.index(self.agent_pos[a])] = true;
            }
        }
    }

    /// Checks the state invariants; returns a description of the first
    /// failure.
    pub fn check_invariants(&self, config: &EnvConfig) -> Result<(), String> {
        for a in 0..2 {
            if !self.level.in_bounds(self.agent_pos[a])
                || self.level.tile(self.agent_pos[a]) != Tile::Floor
            {
                return Err(format!("agent {a} off floor at {}", self.agent_pos[a]));
            }
        }
        if self.agent_pos[0] == self.agent_pos[1] {
            return Err(format!("agents co-located at {}", self.agent_pos[0]));
        }
        for (p, pot) in &self.pots {
            if !pot.is_consistent(config.pot_capacity, config.cook_time) {
                return Err(format!("pot at {p} inconsistent: {pot:?}"));
            }
        }
        for (i, item) in self.counters.iter().enumerate() {
            if item.is_some() && self.level.grid()[i] != Tile::Wall {
                return Err(format!("item on non-counter cell {}", self.level.pos_of(i)));
            }
        }
        if self.t > config.horizon {
            return Err(format!("t = {} beyond horizon", self.t));
        }
        Ok(())
    }
}

/// Stack of boolean masks, channel-major (`channel`, `row`, `col`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Observation {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn channel(&self, c: usize) -> &[bool] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn get(&self, c: usize, pos: Pos) -> bool {
        self.channel(c)[pos.row * self.width + pos.col]
    }

    pub fn popcount(&self, c: usize) -> usize {
        self.channel(c).iter().filter(|&&b| b).count()
    }
}

/// Joint critic input: the channels of `a` followed by those of `b`.
pub fn centralized_observation(a: &Observation, b: &Observation) -> Result<Observation, EnvError> {
    if a.height != b.height || a.width != b.width {
        return Err(EnvError::DimensionMismatch {
            a: a.shape(),
            b: b.shape(),
        });
    }
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Ok(Observation {
        channels: a.channels + b.channels,
        height: a.height,
        width: a.width,
        data,
    })
}

/// Joint movement rule. Proposals into non-floor cells are cancelled; then
/// two agents targeting the same cell, or swapping cells, both stay.
pub fn resolve_movement(positions: [Pos; 2], proposals: [Pos; 2], level: &Level) -> [Pos; 2] {
    let mut target = proposals;
    for i in 0..2 {
        if !level.in_bounds(target[i]) || level.tile(target[i]) != Tile::Floor {
            target[i] = positions[i];
        }
    }
    if target[0] == target[1] {
        return positions;
    }
    if target[0] == positions[1] && target[1] == positions[0] {
        return positions;
    }
    target
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub reward: f64,
    pub shaped_reward: [f64; 2],
    pub done: bool,
    pub events: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub shaped_reward: [f64; 2],
    pub done: bool,
    pub events: Vec<Event>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Env {
    pub config: EnvConfig,
}

impl Env {
    pub fn new(config: EnvConfig) -> Self {
        Env { config }
    }

    pub fn reset(&self, level: impl Into<Arc<Level>>, seed: u64) -> Result<EnvState, EnvError> {
        let level: Arc<Level> = level.into();
        let report = validate(&level);
        if !report.valid {
            return Err(EnvError::InvalidLevel(report));
        }
        let pots = level
            .positions_of(Tile::Pot)
            .into_iter()
            .map(|p| (p, PotState::default()))
            .collect();
        let starts = *level.agents();
        let cells = level.height() * level.width();
        Ok(EnvState {
            agent_pos: [starts[0].pos, starts[1].pos],
            agent_dir: [starts[0].dir, starts[1].dir],
            held: [HeldItem::Nothing; 2],
            pots,
            counters: vec![None; cells],
            t: 0,
            deliveries: 0,
            rng_state: splitmix64(seed),
            level,
        })
    }

    /// Pure transition.
    pub fn step(&self, state: &EnvState, actions: [Action; 2]) -> Result<StepOutcome, EnvError> {
        let mut next = state.clone();
        let info = self.step_in_place(&mut next, actions)?;
        Ok(StepOutcome {
            next_state: next,
            reward: info.reward,
            shaped_reward: info.shaped_reward,
            done: info.done,
            events: info.events,
        })
    }

    pub fn step_in_place(
        &self,
        state: &mut EnvState,
        actions: [Action; 2],
    ) -> Result<StepInfo, EnvError> {
        let cfg = &self.config;
        if state.t >= cfg.horizon {
            return Err(EnvError::EpisodeDone { t: state.t });
        }

        for (_, pot) in &mut state.pots {
            if pot.timer > 0 {
                pot.timer -= 1;
                if pot.timer == 0 {
                    pot.ready = true;
                }
            }
        }

        let (h, w) = state.level.dims();
        let mut proposals = state.agent_pos;
        for i in 0..2 {
            if let Some(dir) = actions[i].direction() {
                state.agent_dir[i] = dir;
                if let Some(p) = state.agent_pos[i].step(dir, h, w) {
                    proposals[i] = p;
                }
            }
        }
        state.agent_pos = resolve_movement(state.agent_pos, proposals, &state.level);

        let mut reward = 0.0;
        let mut shaped = [0.0; 2];
        let mut events = Vec::new();
        for (i, &action) in actions.iter().enumerate() {
            if action != Action::Interact {
                continue;
            }
            if let Some(kind) = state.apply_interact(i, cfg) {
                match kind {
                    EventKind::Delivery => reward += cfg.delivery_reward,
                    EventKind::OnionPotted => shaped[i] += cfg.shaped.onion_potted,
                    EventKind::PlatePickup => shaped[i] += cfg.shaped.plate_pickup,
                    EventKind::SoupPickup => shaped[i] += cfg.shaped.soup_pickup,
                }
                events.push(Event { agent: i, kind });
            }
        }

        state.t += 1;
        Ok(StepInfo {
            reward,
            shaped_reward: shaped,
            done: state.t == cfg.horizon,
            events,
        })
    }
}

/// One line of a trajectory dump. `t` is the step index (time before the
/// step); `agent_pos` holds `[row, col]` after the step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub t: u32,
    pub actions: [Action; 2],
    pub reward: f64,
    pub shaped: [f64; 2],
    pub events: Vec<Event>,
    pub agent_pos: [[usize; 2]; 2],
}

impl TrajectoryStep {
    pub fn record(t: u32, actions: [Action; 2], info: &StepInfo, state: &EnvState) -> Self {
        TrajectoryStep {
            t,
            actions,
            reward: info.reward,
            shaped: info.shaped_reward,
            events: info.events.clone(),
            agent_pos: state.agent_pos.map(|p| [p.row, p.col]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{pad, parse_ascii};

    const EXAMPLE: &str = "WWPWW\nWA AW\nWO BW\nWWGWW\n";

    fn example() -> Level {
        parse_ascii(EXAMPLE).unwrap()
    }

    fn start(level: Level) -> (Env, EnvState) {
        let env = Env::default();
        let state = env.reset(level, 1).unwrap();
        (env, state)
    }

    #[test]
    fn reset_is_deterministic() {
        let env = Env::default();
        let a = env.reset(example(), 1).unwrap();
        let b = env.reset(example(), 1).unwrap();
        assert_eq!(a, b);
        let c = env.reset(example(), 2).unwrap();
        assert_ne!(a.rng_state, c.rng_state);
        let mut c2 = c.clone();
        c2.rng_state = a.rng_state;
        assert_eq!(c2, a);
        assert_eq!(a.agent_pos, [Pos::new(1, 1), Pos::new(1, 3)]);
        assert_eq!(a.held, [HeldItem::Nothing; 2]);
        assert_eq!(a.t, 0);
    }

    #[test]
    fn reset_rejects_invalid_level() {
        let mut level = example();
        level.set_tile(Pos::new(0, 2), Tile::Wall);
        assert!(matches!(
            Env::default().reset(level, 0),
            Err(EnvError::InvalidLevel(_))
        ));
    }

    #[test]
    fn movement_rules() {
        let level = parse_ascii("WWWWWW\nWA  AW\nW    W\nWOBPGW\nWWWWWW\n").unwrap();
        let a = Pos::new(1, 1);
        let b = Pos::new(1, 4);
        assert_eq!(resolve_movement([a, b], [a, b], &level), [a, b]);
        // same target
        let p = [Pos::new(1, 1), Pos::new(1, 3)];
        assert_eq!(
            resolve_movement(p, [Pos::new(1, 2), Pos::new(1, 2)], &level),
            p
        );
        // swap
        let p = [Pos::new(1, 1), Pos::new(1, 2)];
        assert_eq!(
            resolve_movement(p, [Pos::new(1, 2), Pos::new(1, 1)], &level),
            p
        );
        // into a wall
        assert_eq!(resolve_movement(p, [Pos::new(0, 1), p[1]], &level), p);
        // moving into a cell vacated in the same step
        let moved = resolve_movement(p, [Pos::new(1, 2), Pos::new(1, 3)], &level);
        assert_eq!(moved, [Pos::new(1, 2), Pos::new(1, 3)]);
        // moving into an agent that is blocked
        assert_eq!(
            resolve_movement(p, [Pos::new(1, 2), Pos::new(0, 2)], &level),
            p
        );
    }

    #[test]
    fn stay_stay_is_noop() {
        let (env, s) = start(example());
        let out = env.step(&s, [Action::Stay, Action::Stay]).unwrap();
        assert_eq!(out.next_state.agent_pos, s.agent_pos);
        assert_eq!(out.next_state.agent_dir, s.agent_dir);
        assert_eq!(out.next_state.held, s.held);
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.next_state.t, 1);
        assert!(!out.done);
    }

    #[test]
    fn onion_pickup_is_unshaped() {
        let (env, mut s) = start(example());
        s.agent_dir[0] = Direction::Down;
        let out = env.step(&s, [Action::Interact, Action::Stay]).unwrap();
        assert_eq!(out.next_state.held[0], HeldItem::Onion);
        assert_eq!(out.shaped_reward, [0.0, 0.0]);
        assert!(out.events.is_empty());
    }

    #[test]
    fn plate_pickup_is_shaped() {
        let (env, mut s) = start(example());
        s.agent_dir[1] = Direction::Down;
        let out = env.step(&s, [Action::Stay, Action::Interact]).unwrap();
        assert_eq!(out.next_state.held[1], HeldItem::Plate);
        assert_eq!(out.shaped_reward, [0.0, 3.0]);
        assert_eq!(
            out.events,
            vec![Event {
                agent: 1,
                kind: EventKind::PlatePickup
            }]
        );
    }

    #[test]
    fn soup_delivery() {
        let (env, mut s) = start(example());
        // agent 0 to (2,2), facing the goal below
        s.agent_pos[0] = Pos::new(2, 2);
        s.agent_dir[0] = Direction::Down;
        s.held[0] = HeldItem::Soup;
        let out = env.step(&s, [Action::Interact, Action::Stay]).unwrap();
        assert_eq!(out.reward, 20.0);
        assert_eq!(out.next_state.deliveries, 1);
        assert_eq!(out.next_state.held[0], HeldItem::Nothing);
        assert_eq!(
            out.events,
            vec![Event {
                agent: 0,
                kind: EventKind::Delivery
            }]
        );
    }

    #[test]
    fn interact_table() {
        let cfg = EnvConfig::default();
        let (_, mut s) = start(example());
        // facing floor: no-op
        s.agent_pos[0] = Pos::new(2, 2);
        s.agent_dir[0] = Direction::Up;
        let before = s.clone();
        assert_eq!(s.apply_interact(0, &cfg), None);
        assert_eq!(s, before);

        // pot filling: agent 0 at (1,2) facing the pot above
        s.agent_pos = [Pos::new(1, 2), Pos::new(1, 3)];
        s.agent_dir[0] = Direction::Up;
        let pot = Pos::new(0, 2);
        for n in 1..=3u8 {
            s.held[0] = HeldItem::Onion;
            assert_eq!(s.apply_interact(0, &cfg), Some(EventKind::OnionPotted));
            assert_eq!(s.pot(pot).unwrap().onions, n);
        }
        assert_eq!(
            *s.pot(pot).unwrap(),
            PotState {
                onions: 3,
                timer: 20,
                ready: false
            }
        );
        // a fourth onion is refused
        s.held[0] = HeldItem::Onion;
        assert_eq!(s.apply_interact(0, &cfg), None);
        assert_eq!(s.held[0], HeldItem::Onion);
        // plate on a pot that is not ready: no-op
        s.held[0] = HeldItem::Plate;
        assert_eq!(s.apply_interact(0, &cfg), None);
        assert_eq!(s.held[0], HeldItem::Plate);
        // ready pot yields soup and empties
        s.pot_mut(pot).unwrap().timer = 0;
        s.pot_mut(pot).unwrap().ready = true;
        assert_eq!(s.apply_interact(0, &cfg), Some(EventKind::SoupPickup));
        assert_eq!(s.held[0], HeldItem::Soup);
        assert_eq!(*s.pot(pot).unwrap(), PotState::default());
    }

    #[test]
    fn counters_hold_items() {
        let cfg = EnvConfig::default();
        let (_, mut s) = start(pad(&example(), 6, 9).unwrap());
        // agent 1 at (1,3) facing the wall to the right at (1,4)
        s.agent_dir[1] = Direction::Right;
        s.held[1] = HeldItem::Onion;
        s.apply_interact(1, &cfg);
        assert_eq!(s.held[1], HeldItem::Nothing);
        assert_eq!(s.counter_item(Pos::new(1, 4)), Some(Item::Onion));
        s.held[1] = HeldItem::Plate;
        s.apply_interact(1, &cfg);
        assert_eq!(s.held[1], HeldItem::Plate, "occupied counter refuses");
        s.held[1] = HeldItem::Nothing;
        s.apply_interact(1, &cfg);
        assert_eq!(s.held[1], HeldItem::Onion);
        assert_eq!(s.counter_item(Pos::new(1, 4)), None);
    }

    #[test]
    fn cooking_takes_cook_time_steps() {
        let (env, mut s) = start(example());
        s.agent_pos = [Pos::new(1, 2), Pos::new(1, 3)];
        s.agent_dir[0] = Direction::Up;
        s.pot_mut(Pos::new(0, 2)).unwrap().onions = 2;
        s.held[0] = HeldItem::Onion;
        let mut s = env
            .step(&s, [Action::Interact, Action::Stay])
            .unwrap()
            .next_state;
        assert_eq!(s.pot(Pos::new(0, 2)).unwrap().timer, 20);
        for k in 1..=20 {
            s = env
                .step(&s, [Action::Stay, Action::Stay])
                .unwrap()
                .next_state;
            let pot = s.pot(Pos::new(0, 2)).unwrap();
            assert_eq!(pot.timer, 20 - k);
            assert_eq!(pot.ready, k == 20);
        }
    }

    #[test]
    fn movement_turns_even_when_blocked() {
        let (env, s) = start(example());
        let out = env.step(&s, [Action::Left, Action::Right]).unwrap();
        assert_eq!(out.next_state.agent_pos, s.agent_pos);
        assert_eq!(
            out.next_state.agent_dir,
            [Direction::Left, Direction::Right]
        );
        let out = env.step(&s, [Action::Right, Action::Left]).unwrap();
        assert_eq!(
            out.next_state.agent_pos, s.agent_pos,
            "same-target conflict"
        );
        let out = env.step(&s, [Action::Down, Action::Stay]).unwrap();
        assert_eq!(
            out.next_state.agent_pos[0],
            Pos::new(1, 1),
            "onion pile below blocks"
        );
    }

    #[test]
    fn horizon_and_done() {
        let env = Env::new(EnvConfig {
            horizon: 3,
            ..EnvConfig::default()
        });
        let mut s = env.reset(example(), 0).unwrap();
        let mut dones = Vec::new();
        for _ in 0..3 {
            dones.push(env.step_in_place(&mut s, [Action::Stay; 2]).unwrap().done);
        }
        assert_eq!(dones, vec![false, false, true]);
        assert_eq!(
            env.step(&s, [Action::Stay; 2]),
            Err(EnvError::EpisodeDone { t: 3 })
        );
    }

    #[test]
    fn observation_layout() {
        let (_, mut s) = start(pad(&example(), 6, 9).unwrap());
        s.held[1] = HeldItem::Plate;
        s.set_counter_item(Pos::new(1, 4), Some(Item::Soup));
        let o0 = s.observe(0);
        let o1 = s.observe(1);
        assert_eq!(o0.shape(), (26, 6, 9));
        assert_eq!(o0.popcount(0), 1);
        assert_eq!(o0.popcount(1), 1);
        assert_eq!(o0.channel(0), o1.channel(1));
        assert_eq!(o0.channel(1), o1.channel(0));
        assert!(o0.get(0, Pos::new(1, 1)));
        assert!(o0.get(2, Pos::new(1, 1)), "facing up");
        assert!(o0.get(13, Pos::new(0, 2)));
        assert!(o0.get(14, Pos::new(3, 2)));
        assert!(o0.get(24, Pos::new(1, 3)));
        assert!(o1.get(24, Pos::new(1, 3)));
        assert!(o0.get(22, Pos::new(1, 4)));
        let walls = s.level().count(Tile::Wall);
        assert_eq!(o0.popcount(10), walls);
    }

    #[test]
    fn centralized_stack() {
        let (_, s) = start(example());
        let a = s.observe(0);
        let b = s.observe(1);
        let c = centralized_observation(&a, &b).unwrap();
        assert_eq!(c.channels, CENTRAL_CHANNELS);
        assert_eq!(&c.data[..a.data.len()], &a.data[..]);
        let d = centralized_observation(&b, &a).unwrap();
        assert_eq!(&d.data[..b.data.len()], &c.data[a.data.len()..]);
        let (_, big) = start(pad(&example(), 6, 9).unwrap());
        assert!(matches!(
            centralized_observation(&a, &big.observe(0)),
            Err(EnvError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn trajectory_record_fields() {
        let (env, mut s) = start(example());
        let info = env
            .step_in_place(&mut s, [Action::Stay, Action::Left])
            .unwrap();
        let rec = TrajectoryStep::record(0, [Action::Stay, Action::Left], &info, &s);
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            json,
            r#"{"t":0,"actions":["Stay","Left"],"reward":0.0,"shaped":[0.0,0.0],"events":[],"agent_pos":[[1,1],[1,2]]}"#
        );
    }
}
