//! Bundled evaluation levels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::{
    pad, parse_ascii, AgentStart, Direction, Level, Pos, Tile, DEFAULT_CANVAS_H, DEFAULT_CANVAS_W,
};

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteLevel {
    pub name: String,
    pub level: Level,
}

const BUILTIN: [(&str, &str); 5] = [
    ("cramped_room", include_str!("../assets/cramped_room.txt")),
    (
        "asymmetric_advantages",
        include_str!("../assets/asymmetric_advantages.txt"),
    ),
    (
        "coordination_ring",
        include_str!("../assets/coordination_ring.txt"),
    ),
    (
        "forced_coordination",
        include_str!("../assets/forced_coordination.txt"),
    ),
    (
        "counter_circuit",
        include_str!("../assets/counter_circuit.txt"),
    ),
];

/// The five classic layouts, padded to the default 6x9 canvas.
pub fn builtin_eval_suite() -> Vec<SuiteLevel> {
    BUILTIN
        .iter()
        .map(|(name, text)| {
            let level = parse_ascii(text).expect("bundled layout parses");
            let level = pad(&level, DEFAULT_CANVAS_H, DEFAULT_CANVAS_W)
                .expect("bundled layout fits the canvas");
            SuiteLevel {
                name: (*name).to_string(),
                level,
            }
        })
        .collect()
}

/// Looks up one bundled layout by name (padded).
pub fn builtin_level(name: &str) -> Option<Level> {
    builtin_eval_suite()
        .into_iter()
        .find(|s| s.name == name)
        .map(|s| s.level)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Top,
    Right,
    Bottom,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Top, Side::Right, Side::Bottom, Side::Left];

    fn name(self) -> &'static str {
        match self {
            Side::Top => "top",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Left => "left",
        }
    }
}

/// Station run laid along one side, in clockwise order.
const KITCHEN: [Tile; 4] = [Tile::OnionPile, Tile::Pot, Tile::PlatePile, Tile::Goal];

#[derive(Debug, Error, PartialEq)]
pub enum SuiteError {
    #[error("ring kitchen of {height}x{width} needs at least 6x6")]
    TooSmall { height: usize, width: usize },
    #[error("ring kitchen of {height}x{width} does not fit the {canvas_h}x{canvas_w} canvas")]
    TooLarge {
        height: usize,
        width: usize,
        canvas_h: usize,
        canvas_w: usize,
    },
    #[error("requested {requested} levels, the parameters yield {available}")]
    Count { requested: usize, available: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryParams {
    pub sizes: Vec<(usize, usize)>,
    pub canvas: (usize, usize),
    pub count: usize,
}

impl Default for SymmetryParams {
    fn default() -> Self {
        SymmetryParams {
            sizes: vec![(6, 7), (6, 8), (6, 9)],
            canvas: (DEFAULT_CANVAS_H, DEFAULT_CANVAS_W),
            count: 24,
        }
    }
}

/// A circular kitchen: wall border, a wall island in the middle, a one-cell
/// ring of floor between them and the four stations along `side`.
pub fn ring_kitchen(
    height: usize,
    width: usize,
    side: Side,
    mirrored: bool,
) -> Result<Level, SuiteError> {
    if height < 6 || width < 6 {
        return Err(SuiteError::TooSmall { height, width });
    }
    let mut level = Level::bordered(height, width);
    for r in 2..height - 2 {
        for c in 2..width - 2 {
            level.set_tile(Pos::new(r, c), Tile::Wall);
        }
    }
    for (k, tile) in KITCHEN.into_iter().enumerate() {
        let p = match side {
            Side::Top => Pos::new(0, 1 + k),
            Side::Right => Pos::new(1 + k, width - 1),
            Side::Bottom => Pos::new(height - 1, width - 2 - k),
            Side::Left => Pos::new(height - 2 - k, 0),
        };
        level.set_tile(p, tile);
    }
    level.set_agents([
        AgentStart::new(Pos::new(1, width - 2), Direction::Up),
        AgentStart::new(Pos::new(height - 2, 1), Direction::Up),
    ]);
    Ok(if mirrored { mirror(&level) } else { level })
}

/// Left-right reflection of a level, agents included.
pub fn mirror(level: &Level) -> Level {
    let (h, w) = level.dims();
    let mut out = level.clone();
    for r in 0..h {
        for c in 0..w {
            out.set_tile(Pos::new(r, w - 1 - c), level.tile(Pos::new(r, c)));
        }
    }
    let flip = |a: &AgentStart| {
        let dir = match a.dir {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            d => d,
        };
        AgentStart::new(Pos::new(a.pos.row, w - 1 - a.pos.col), dir)
    };
    let [a, b] = level.agents();
    out.set_agents([flip(a), flip(b)]);
    out
}

/// Ring kitchens for every size, side and mirror flag, padded to the canvas.
pub fn symmetry_suite(params: &SymmetryParams) -> Result<Vec<SuiteLevel>, SuiteError> {
    let available = params.sizes.len() * Side::ALL.len() * 2;
    if params.count > available {
        return Err(SuiteError::Count {
            requested: params.count,
            available,
        });
    }
    let (canvas_h, canvas_w) = params.canvas;
    let mut out = Vec::with_capacity(available);
    for &(height, width) in &params.sizes {
        if height > canvas_h || width > canvas_w {
            return Err(SuiteError::TooLarge {
                height,
                width,
                canvas_h,
                canvas_w,
            });
        }
        for side in Side::ALL {
            for mirrored in [false, true] {
                let level = ring_kitchen(height, width, side, mirrored)?;
                let level = pad(&level, canvas_h, canvas_w).expect("size checked against canvas");
                let name = format!(
                    "ring_{height}x{width}_{}{}",
                    side.name(),
                    if mirrored { "_mirror" } else { "" }
                );
                out.push(SuiteLevel { name, level });
            }
        }
    }
    out.truncate(params.count);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::validate;
    use std::collections::HashSet;

    #[test]
    fn builtin_suite_is_valid_and_padded() {
        let suite = builtin_eval_suite();
        assert_eq!(suite.len(), 5);
        for s in &suite {
            assert_eq!(s.level.dims(), (6, 9), "{}", s.name);
            let report = validate(&s.level);
            assert!(report.valid, "{}: {report}", s.name);
        }
        assert!(builtin_level("forced_coordination").is_some());
        assert!(builtin_level("nope").is_none());
    }

    #[test]
    fn symmetry_suite_default() {
        let suite = symmetry_suite(&SymmetryParams::default()).unwrap();
        assert_eq!(suite.len(), 24);
        let digests: HashSet<_> = suite.iter().map(|s| s.level.digest()).collect();
        assert_eq!(digests.len(), 24);
        for s in &suite {
            assert!(validate(&s.level).valid, "{}", s.name);
        }
    }

    #[test]
    fn mirrors_are_paired() {
        for (h, w) in SymmetryParams::default().sizes {
            for side in Side::ALL {
                let base = ring_kitchen(h, w, side, false).unwrap();
                let flipped = ring_kitchen(h, w, side, true).unwrap();
                assert_eq!(flipped, mirror(&base));
                assert_ne!(flipped, base);
                assert_eq!(mirror(&flipped), base);
            }
        }
    }

    #[test]
    fn symmetry_errors() {
        assert_eq!(
            ring_kitchen(5, 9, Side::Left, false),
            Err(SuiteError::TooSmall {
                height: 5,
                width: 9
            })
        );
        let params = SymmetryParams {
            count: 25,
            ..SymmetryParams::default()
        };
        assert!(matches!(
            symmetry_suite(&params),
            Err(SuiteError::Count { .. })
        ));
        let params = SymmetryParams {
            sizes: vec![(7, 9)],
            count: 8,
            ..SymmetryParams::default()
        };
        assert!(matches!(
            symmetry_suite(&params),
            Err(SuiteError::TooLarge { .. })
        ));
    }
}
