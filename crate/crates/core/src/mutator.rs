//! Level editing through five primitive operations: toggling a wall and
//! moving one goal, pot, plate pile or onion pile. Agents are never moved.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::{validate_with, Level, Pos, Tile, ValidationReport, DEFAULT_MAX_WALLS};
use crate::rng::{choose, uniform_index};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum MutationOp {
    ToggleWall { cell: Pos },
    MoveGoal { from: Pos, to: Pos },
    MovePot { from: Pos, to: Pos },
    MovePlatePile { from: Pos, to: Pos },
    MoveOnionPile { from: Pos, to: Pos },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    ToggleWall,
    MoveGoal,
    MovePot,
    MovePlatePile,
    MoveOnionPile,
}

impl OpKind {
    pub const ALL: [OpKind; 5] = [
        OpKind::ToggleWall,
        OpKind::MoveGoal,
        OpKind::MovePot,
        OpKind::MovePlatePile,
        OpKind::MoveOnionPile,
    ];

    fn station(self) -> Option<Tile> {
        match self {
            OpKind::ToggleWall => None,
            OpKind::MoveGoal => Some(Tile::Goal),
            OpKind::MovePot => Some(Tile::Pot),
            OpKind::MovePlatePile => Some(Tile::PlatePile),
            OpKind::MoveOnionPile => Some(Tile::OnionPile),
        }
    }

    fn with_cells(self, from: Pos, to: Pos) -> MutationOp {
        match self {
            OpKind::ToggleWall => MutationOp::ToggleWall { cell: to },
            OpKind::MoveGoal => MutationOp::MoveGoal { from, to },
            OpKind::MovePot => MutationOp::MovePot { from, to },
            OpKind::MovePlatePile => MutationOp::MovePlatePile { from, to },
            OpKind::MoveOnionPile => MutationOp::MoveOnionPile { from, to },
        }
    }
}

impl MutationOp {
    pub fn kind(&self) -> OpKind {
        match self {
            MutationOp::ToggleWall { .. } => OpKind::ToggleWall,
            MutationOp::MoveGoal { .. } => OpKind::MoveGoal,
            MutationOp::MovePot { .. } => OpKind::MovePot,
            MutationOp::MovePlatePile { .. } => OpKind::MovePlatePile,
            MutationOp::MoveOnionPile { .. } => OpKind::MoveOnionPile,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("inapplicable: {0}")]
pub struct Inapplicable(pub String);

fn toggle_target(level: &Level, p: Pos) -> bool {
    level.in_bounds(p)
        && !level.is_border(p)
        && !level.is_agent_start(p)
        && matches!(level.tile(p), Tile::Floor | Tile::Wall)
}

/// Cells a station may move to: interior floor or wall, or a non-corner
/// border wall; never an agent start.
fn move_target(level: &Level, p: Pos) -> bool {
    if !level.in_bounds(p) || level.is_corner(p) || level.is_agent_start(p) {
        return false;
    }
    match level.tile(p) {
        Tile::Wall => true,
        Tile::Floor => !level.is_border(p),
        _ => false,
    }
}

/// Applies a single operation. Does not check the wall budget; see
/// [`mutate`] for the budget-aware loop.
pub fn apply_op(level: &Level, op: MutationOp) -> Result<Level, Inapplicable> {
    let mut out = level.clone();
    match op {
        MutationOp::ToggleWall { cell } => {
            if !toggle_target(level, cell) {
                return Err(Inapplicable(format!("cannot toggle {cell}")));
            }
            let flipped = if level.tile(cell) == Tile::Wall {
                Tile::Floor
            } else {
                Tile::Wall
            };
            out.set_tile(cell, flipped);
        }
        _ => {
            let (from, to) = match op {
                MutationOp::MoveGoal { from, to }
                | MutationOp::MovePot { from, to }
                | MutationOp::MovePlatePile { from, to }
                | MutationOp::MoveOnionPile { from, to } => (from, to),
                MutationOp::ToggleWall { .. } => unreachable!(),
            };
            let station = op.kind().station().expect("move op names a station");
            if !level.in_bounds(from) || level.tile(from) != station {
                return Err(Inapplicable(format!("no {station:?} at {from}")));
            }
            if !move_target(level, to) {
                return Err(Inapplicable(format!("{to} is not a legal target")));
            }
            let vacated = if level.is_border(from) {
                Tile::Wall
            } else {
                Tile::Floor
            };
            out.set_tile(from, vacated);
            out.set_tile(to, station);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutatorConfig {
    pub max_walls: usize,
    /// Resample attempts per requested op before it is skipped.
    pub retries: usize,
}

impl Default for MutatorConfig {
    fn default() -> Self {
        MutatorConfig {
            max_walls: DEFAULT_MAX_WALLS,
            retries: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutationLog {
    pub ops: Vec<MutationOp>,
    pub skipped: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum MutateError {
    #[error("input level is invalid: {0}")]
    InvalidInput(ValidationReport),
}

fn sample_op<R: Rng + ?Sized>(rng: &mut R, level: &Level) -> Option<MutationOp> {
    let kind = OpKind::ALL[uniform_index(rng, OpKind::ALL.len())];
    match kind.station() {
        None => {
            let cells: Vec<Pos> = level.cells().filter(|&p| toggle_target(level, p)).collect();
            choose(rng, &cells).map(|&cell| MutationOp::ToggleWall { cell })
        }
        Some(station) => {
            let sources = level.positions_of(station);
            let from = *choose(rng, &sources)?;
            let targets: Vec<Pos> = level.cells().filter(|&p| move_target(level, p)).collect();
            choose(rng, &targets).map(|&to| kind.with_cells(from, to))
        }
    }
}

/// Applies `n` sampled operations in sequence. An op that is inapplicable or
/// would leave an invalid level (e.g. over the wall budget) is resampled up
/// to `config.retries` times, then skipped and counted in the log.
pub fn mutate<R: Rng + ?Sized>(
    level: &Level,
    n: usize,
    rng: &mut R,
    config: &MutatorConfig,
) -> Result<(Level, MutationLog), MutateError> {
    let report = validate_with(level, config.max_walls);
    if !report.valid {
        return Err(MutateError::InvalidInput(report));
    }
    let mut current = level.clone();
    let mut log = MutationLog {
        ops: Vec::with_capacity(n),
        skipped: 0,
    };
    for _ in 0..n {
        let mut applied = false;
        for _ in 0..config.retries {
            let Some(op) = sample_op(rng, &current) else {
                continue;
            };
            let Ok(next) = apply_op(&current, op) else {
                continue;
            };
            if validate_with(&next, config.max_walls).valid {
                current = next;
                log.ops.push(op);
                applied = true;
                break;
            }
        }
        if !applied {
            log.skipped += 1;
        }
    }
    Ok((current, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::parse_ascii;
    use crate::rng::seeded;

    const EXAMPLE: &str = "WWPWW\nWA AW\nWO BW\nWWGWW\n";

    fn example() -> Level {
        parse_ascii(EXAMPLE).unwrap()
    }

    #[test]
    fn toggle_floor_to_wall() {
        let level = example();
        let out = apply_op(
            &level,
            MutationOp::ToggleWall {
                cell: Pos::new(2, 2),
            },
        )
        .unwrap();
        assert_eq!(out.tile(Pos::new(2, 2)), Tile::Wall);
        let diffs = level
            .cells()
            .filter(|&p| level.tile(p) != out.tile(p))
            .count();
        assert_eq!(diffs, 1);
        let back = apply_op(
            &out,
            MutationOp::ToggleWall {
                cell: Pos::new(2, 2),
            },
        )
        .unwrap();
        assert_eq!(back, level);
    }

    #[test]
    fn toggle_preconditions() {
        let level = example();
        assert!(apply_op(
            &level,
            MutationOp::ToggleWall {
                cell: Pos::new(0, 1)
            }
        )
        .is_err());
        assert!(
            apply_op(
                &level,
                MutationOp::ToggleWall {
                    cell: Pos::new(2, 1)
                }
            )
            .is_err(),
            "station"
        );
        assert!(
            apply_op(
                &level,
                MutationOp::ToggleWall {
                    cell: Pos::new(1, 1)
                }
            )
            .is_err(),
            "agent"
        );
    }

    #[test]
    fn move_goal_conserves_count() {
        let level = example();
        let out = apply_op(
            &level,
            MutationOp::MoveGoal {
                from: Pos::new(3, 2),
                to: Pos::new(2, 2),
            },
        )
        .unwrap();
        assert_eq!(out.count(Tile::Goal), 1);
        assert_eq!(out.tile(Pos::new(2, 2)), Tile::Goal);
        assert_eq!(
            out.tile(Pos::new(3, 2)),
            Tile::Wall,
            "vacated border stays wall"
        );
        assert!(apply_op(
            &level,
            MutationOp::MoveGoal {
                from: Pos::new(2, 2),
                to: Pos::new(1, 2)
            }
        )
        .is_err());
        assert!(apply_op(
            &level,
            MutationOp::MovePot {
                from: Pos::new(0, 2),
                to: Pos::new(0, 0)
            }
        )
        .is_err());
        assert!(apply_op(
            &level,
            MutationOp::MovePot {
                from: Pos::new(0, 2),
                to: Pos::new(1, 1)
            }
        )
        .is_err());
    }

    #[test]
    fn zero_mutations_is_identity() {
        let level = example();
        let (out, log) = mutate(&level, 0, &mut seeded(1), &MutatorConfig::default()).unwrap();
        assert_eq!(out, level);
        assert_eq!(out.digest(), level.digest());
        assert!(log.ops.is_empty());
    }

    #[test]
    fn twenty_mutations_keep_agents() {
        let level = example();
        for seed in 0..50 {
            let (out, log) =
                mutate(&level, 20, &mut seeded(seed), &MutatorConfig::default()).unwrap();
            assert!(out.validate().valid);
            assert_eq!(out.agents(), level.agents());
            assert_eq!(log.ops.len() + log.skipped, 20);
            for t in Tile::STATIONS {
                assert_eq!(out.count(t), level.count(t));
            }
        }
        let a = mutate(&level, 20, &mut seeded(4), &MutatorConfig::default()).unwrap();
        let b = mutate(&level, 20, &mut seeded(4), &MutatorConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn op_log_serializes() {
        let log = MutationLog {
            ops: vec![MutationOp::ToggleWall {
                cell: Pos::new(1, 2),
            }],
            skipped: 0,
        };
        let json = serde_json::to_string(&log).unwrap();
        assert_eq!(
            json,
            r#"{"ops":[{"op":"ToggleWall","cell":{"row":1,"col":2}}],"skipped":0}"#
        );
        let back: MutationLog = serde_json::from_str(&json).unwrap();
        assert_eq!(back, log);
    }
}
