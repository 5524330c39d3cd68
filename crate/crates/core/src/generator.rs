//! Domain-randomised level sampling.
//!
//! Placement order matches the teacher's: interior walls, the two agents,
//! then 1–2 goals, onion piles, pots and plate piles on free interior cells.
//! Every level produced here can therefore be re-created by a teacher
//! action script (see [`crate::teacher::script_for_level`]).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::{
    validate_with, AgentStart, Direction, Level, Pos, Tile, DEFAULT_CANVAS_H, DEFAULT_CANVAS_W,
    DEFAULT_MAX_WALLS,
};
use crate::rng::{slot_rng, uniform_index};

/// Attempts per level before giving up.
pub const MAX_ATTEMPTS: usize = 100;

/// Station placement order shared with the teacher.
pub const STATION_ORDER: [Tile; 4] = [Tile::Goal, Tile::OnionPile, Tile::Pot, Tile::PlatePile];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub canvas_h: usize,
    pub canvas_w: usize,
    /// Inclusive interval for the number of interior walls.
    pub wall_range: (usize, usize),
    pub max_walls: usize,
    /// Inclusive interval for the count of each station type.
    pub station_range: (usize, usize),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            canvas_h: DEFAULT_CANVAS_H,
            canvas_w: DEFAULT_CANVAS_W,
            wall_range: (0, DEFAULT_MAX_WALLS),
            max_walls: DEFAULT_MAX_WALLS,
            station_range: (1, 2),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("placement failed after {0} attempts")]
    Exhausted(usize),
    #[error("batch size must be at least 1")]
    EmptyBatch,
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<(), GenError> {
        let (lo, hi) = self.wall_range;
        if lo > hi || hi > self.max_walls {
            return Err(GenError::Config(format!(
                "wall range [{lo}, {hi}] not within [0, {}]",
                self.max_walls
            )));
        }
        if self.station_range != (1, 2) {
            return Err(GenError::Config("station range must be [1, 2]".into()));
        }
        if self.canvas_h < 3 || self.canvas_w < 3 {
            return Err(GenError::Config("canvas needs an interior".into()));
        }
        let interior = (self.canvas_h - 2) * (self.canvas_w - 2);
        let needed = hi + 2 + 4 * self.station_range.1;
        if interior < needed {
            return Err(GenError::Config(format!(
                "{}x{} canvas has {interior} interior cells, {needed} needed",
                self.canvas_h, self.canvas_w
            )));
        }
        Ok(())
    }
}

fn sample_once<R: Rng + ?Sized>(rng: &mut R, config: &GeneratorConfig) -> Option<Level> {
    let mut level = Level::bordered(config.canvas_h, config.canvas_w);
    let mut free: Vec<Pos> = level.cells().filter(|&p| !level.is_border(p)).collect();

    let (lo, hi) = config.wall_range;
    let n_walls = lo + uniform_index(rng, hi - lo + 1);
    let take = |rng: &mut R, free: &mut Vec<Pos>| -> Option<Pos> {
        if free.is_empty() {
            None
        } else {
            // `remove` keeps the remaining cells in row-major order
            Some(free.remove(uniform_index(rng, free.len())))
        }
    };
    for _ in 0..n_walls {
        let p = take(rng, &mut free)?;
        level.set_tile(p, Tile::Wall);
    }
    let a = take(rng, &mut free)?;
    let b = take(rng, &mut free)?;
    level.set_agents([
        AgentStart::new(a, Direction::Up),
        AgentStart::new(b, Direction::Up),
    ]);
    let (slo, shi) = config.station_range;
    for tile in STATION_ORDER {
        let k = slo + uniform_index(rng, shi - slo + 1);
        for _ in 0..k {
            let p = take(rng, &mut free)?;
            level.set_tile(p, tile);
        }
    }
    Some(level)
}

/// Draws one random level. Solvability is not checked.
pub fn sample_level<R: Rng + ?Sized>(
    rng: &mut R,
    config: &GeneratorConfig,
) -> Result<Level, GenError> {
    config.check()?;
    for _ in 0..MAX_ATTEMPTS {
        if let Some(level) = sample_once(rng, config) {
            if validate_with(&level, config.max_walls).valid {
                return Ok(level);
            }
        }
    }
    Err(GenError::Exhausted(MAX_ATTEMPTS))
}

/// `k` independent levels; slot `i` uses substream `i` of `seed`.
pub fn sample_batch(seed: u64, config: &GeneratorConfig, k: usize) -> Result<Vec<Level>, GenError> {
    if k == 0 {
        return Err(GenError::EmptyBatch);
    }
    config.check()?;
    (0..k)
        .into_par_iter()
        .map(|slot| sample_level(&mut slot_rng(seed, slot as u64), config))
        .collect()
}
