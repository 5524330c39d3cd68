//! Level representation: tile grid, agent starts, validation, ASCII and
//! JSON serialization, padding and stable digests.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Default upper bound on interior walls.
pub const DEFAULT_MAX_WALLS: usize = 15;
/// Default padded canvas height.
pub const DEFAULT_CANVAS_H: usize = 6;
/// Default padded canvas width.
pub const DEFAULT_CANVAS_W: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Self {
        Pos { row, col }
    }

    /// Neighbouring cell in `dir`, or `None` when it leaves an `h`×`w` grid.
    pub fn step(self, dir: Direction, h: usize, w: usize) -> Option<Pos> {
        let (dr, dc) = dir.delta();
        let r = self.row as isize + dr;
        let c = self.col as isize + dc;
        if r < 0 || c < 0 || r as usize >= h || c as usize >= w {
            None
        } else {
            Some(Pos::new(r as usize, c as usize))
        }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    /// Neighbour expansion order used everywhere a tie-break is needed.
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];

    pub const fn delta(self) -> (isize, isize) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
        }
    }

    pub const fn index(self) -> usize {
        match self {
            Direction::Up => 0,
            Direction::Down => 1,
            Direction::Left => 2,
            Direction::Right => 3,
        }
    }

    pub const fn symbol(self) -> char {
        match self {
            Direction::Up => 'U',
            Direction::Down => 'D',
            Direction::Left => 'L',
            Direction::Right => 'R',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'U' => Some(Direction::Up),
            'D' => Some(Direction::Down),
            'L' => Some(Direction::Left),
            'R' => Some(Direction::Right),
            _ => None,
        }
    }

    /// Direction pointing from `from` to an orthogonally adjacent `to`.
    pub fn between(from: Pos, to: Pos) -> Option<Self> {
        Direction::ALL.into_iter().find(|d| {
            let (dr, dc) = d.delta();
            from.row as isize + dr == to.row as isize && from.col as isize + dc == to.col as isize
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tile {
    Floor,
    Wall,
    OnionPile,
    PlatePile,
    Pot,
    Goal,
}

impl Tile {
    pub const ALL: [Tile; 6] = [
        Tile::Floor,
        Tile::Wall,
        Tile::OnionPile,
        Tile::PlatePile,
        Tile::Pot,
        Tile::Goal,
    ];
    pub const STATIONS: [Tile; 4] = [Tile::OnionPile, Tile::PlatePile, Tile::Pot, Tile::Goal];

    pub const fn is_station(self) -> bool {
        matches!(
            self,
            Tile::OnionPile | Tile::PlatePile | Tile::Pot | Tile::Goal
        )
    }

    pub const fn is_passable(self) -> bool {
        matches!(self, Tile::Floor)
    }

    pub const fn symbol(self) -> char {
        match self {
            Tile::Floor => ' ',
            Tile::Wall => 'W',
            Tile::OnionPile => 'O',
            Tile::PlatePile => 'B',
            Tile::Pot => 'P',
            Tile::Goal => 'G',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        Tile::ALL.into_iter().find(|t| t.symbol() == c)
    }

    /// Rule id used by [`validate`] for per-station count violations.
    pub const fn count_rule(self) -> &'static str {
        match self {
            Tile::OnionPile => "onion-count",
            Tile::PlatePile => "plate-count",
            Tile::Pot => "pot-count",
            Tile::Goal => "goal-count",
            Tile::Floor | Tile::Wall => "tile-count",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentStart {
    pub pos: Pos,
    pub dir: Direction,
}

impl AgentStart {
    pub const fn new(pos: Pos, dir: Direction) -> Self {
        AgentStart { pos, dir }
    }
}

/// A fully specified layout.
///
/// Construction only checks that the grid matches the dimensions; the
/// layout rules are checked by [`validate`] so that broken levels can be
/// represented and reported on.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Level {
    height: usize,
    width: usize,
    grid: Vec<Tile>,
    agents: [AgentStart; 2],
}

#[derive(Debug, Error, PartialEq)]
pub enum LevelError {
    #[error("grid has {found} cells, expected {height}x{width}")]
    GridSize {
        height: usize,
        width: usize,
        found: usize,
    },
    #[error("cannot pad a {height}x{width} level to {target_h}x{target_w}")]
    PadTooSmall {
        height: usize,
        width: usize,
        target_h: usize,
        target_w: usize,
    },
    #[error("level is invalid: {0}")]
    Invalid(ValidationReport),
}

impl Level {
    pub fn new(
        height: usize,
        width: usize,
        grid: Vec<Tile>,
        agents: [AgentStart; 2],
    ) -> Result<Self, LevelError> {
        if grid.len() != height * width {
            return Err(LevelError::GridSize {
                height,
                width,
                found: grid.len(),
            });
        }
        Ok(Level {
            height,
            width,
            grid,
            agents,
        })
    }

    /// Canvas of the given size with a wall border and an empty interior.
    /// Agents are placed at the first two interior cells; callers move them.
    pub fn bordered(height: usize, width: usize) -> Self {
        let mut grid = vec![Tile::Floor; height * width];
        for r in 0..height {
            for c in 0..width {
                if r == 0 || c == 0 || r + 1 == height || c + 1 == width {
                    grid[r * width + c] = Tile::Wall;
                }
            }
        }
        let agents = [
            AgentStart::new(Pos::new(1, 1), Direction::Up),
            AgentStart::new(Pos::new(1, 2), Direction::Up),
        ];
        Level {
            height,
            width,
            grid,
            agents,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn grid(&self) -> &[Tile] {
        &self.grid
    }

    pub fn agents(&self) -> &[AgentStart; 2] {
        &self.agents
    }

    pub fn set_agents(&mut self, agents: [AgentStart; 2]) {
        self.agents = agents;
    }

    pub fn index(&self, pos: Pos) -> usize {
        pos.row * self.width + pos.col
    }

    pub fn pos_of(&self, index: usize) -> Pos {
        Pos::new(index / self.width, index % self.width)
    }

    pub fn in_bounds(&self, pos: Pos) -> bool {
        pos.row < self.height && pos.col < self.width
    }

    pub fn tile(&self, pos: Pos) -> Tile {
        self.grid[self.index(pos)]
    }

    pub fn set_tile(&mut self, pos: Pos, tile: Tile) {
        let i = self.index(pos);
        self.grid[i] = tile;
    }

    pub fn is_border(&self, pos: Pos) -> bool {
        pos.row == 0 || pos.col == 0 || pos.row + 1 == self.height || pos.col + 1 == self.width
    }

    pub fn is_corner(&self, pos: Pos) -> bool {
        (pos.row == 0 || pos.row + 1 == self.height) && (pos.col == 0 || pos.col + 1 == self.width)
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.height * self.width).map(move |i| self.pos_of(i))
    }

    pub fn neighbors(&self, pos: Pos) -> impl Iterator<Item = Pos> + '_ {
        Direction::ALL
            .into_iter()
            .filter_map(move |d| pos.step(d, self.height, self.width))
    }

    pub fn count(&self, tile: Tile) -> usize {
        self.grid.iter().filter(|&&t| t == tile).count()
    }

    pub fn positions_of(&self, tile: Tile) -> Vec<Pos> {
        self.cells().filter(|&p| self.tile(p) == tile).collect()
    }

    pub fn is_agent_start(&self, pos: Pos) -> bool {
        self.agents.iter().any(|a| a.pos == pos)
    }

    /// Interior walls: non-border `Wall` cells with at least one `Floor`
    /// neighbour. Padding walls and walls sealed inside wall mass are not
    /// counted, so padded layouts keep the same count as their originals.
    pub fn interior_wall_count(&self) -> usize {
        self.cells()
            .filter(|&p| {
                !self.is_border(p)
                    && self.tile(p) == Tile::Wall
                    && self.neighbors(p).any(|n| self.tile(n) == Tile::Floor)
            })
            .count()
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn render_ascii(&self) -> String {
        render_ascii(self)
    }

    pub fn digest(&self) -> LevelDigest {
        level_digest(self)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_ascii(self))
    }
}

impl FromStr for Level {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_ascii(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub message: String,
    pub cell: Option<Pos>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return f.write_str("valid");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| match v.cell {
                Some(c) => format!("{} at {}: {}", v.rule, c, v.message),
                None => format!("{}: {}", v.rule, v.message),
            })
            .collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate(level: &Level) -> ValidationReport {
    validate_with(level, DEFAULT_MAX_WALLS)
}

/// Checks every layout rule and reports all violations.
pub fn validate_with(level: &Level, max_walls: usize) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |rule: &str, message: String, cell: Option<Pos>| {
        violations.push(Violation {
            rule: rule.to_string(),
            message,
            cell,
        });
    };

    if level.height < 3 || level.width < 3 {
        push(
            "too-small",
            format!("{}x{} leaves no interior", level.height, level.width),
            None,
        );
    }

    for p in level.cells() {
        if level.is_border(p) && level.tile(p) == Tile::Floor {
            push("border", "border cell is floor".into(), Some(p));
        }
    }

    for (i, a) in level.agents.iter().enumerate() {
        if !level.in_bounds(a.pos) {
            push(
                "agent-bounds",
                format!("agent {i} outside the grid"),
                Some(a.pos),
            );
        } else if level.tile(a.pos) != Tile::Floor {
            push(
                "agent-floor",
                format!("agent {i} not on floor"),
                Some(a.pos),
            );
        }
    }
    if level.agents[0].pos == level.agents[1].pos {
        push(
            "agent-distinct",
            "agents share a start cell".into(),
            Some(level.agents[0].pos),
        );
    }

    for tile in Tile::STATIONS {
        let n = level.count(tile);
        if !(1..=2).contains(&n) {
            push(
                tile.count_rule(),
                format!("{n} {tile:?} cells, expected 1 or 2"),
                None,
            );
        }
    }

    let walls = level.interior_wall_count();
    if walls > max_walls {
        push(
            "wall-budget",
            format!("{walls} interior walls exceed the budget of {max_walls}"),
            None,
        );
    }

    ValidationReport {
        valid: violations.is_empty(),
        violations,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("empty level text")]
    Empty,
    #[error("row {row} has width {found}, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown symbol {symbol:?} at ({row}, {col})")]
    UnknownSymbol {
        row: usize,
        col: usize,
        symbol: char,
    },
    #[error("expected exactly 2 agents, found {0}")]
    AgentCount(usize),
    #[error("malformed level record: {0}")]
    Record(String),
    #[error("{0}")]
    Level(#[from] LevelError),
}

/// Parses the ASCII grid format. A single trailing newline is accepted;
/// rows are not trimmed because `' '` is a floor cell.
pub fn parse_ascii(text: &str) -> Result<Level, ParseError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(ParseError::Empty);
    }
    let rows: Vec<&str> = body
        .split('\n')
        .map(|r| r.strip_suffix('\r').unwrap_or(r))
        .collect();
    let width = rows[0].chars().count();
    let height = rows.len();
    let mut grid = Vec::with_capacity(height * width);
    let mut agents = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        let found = row.chars().count();
        if found != width {
            return Err(ParseError::RaggedRow {
                row: r,
                expected: width,
                found,
            });
        }
        for (c, ch) in row.chars().enumerate() {
            if ch == 'A' {
                agents.push(AgentStart::new(Pos::new(r, c), Direction::Up));
                grid.push(Tile::Floor);
            } else {
                let tile = Tile::from_symbol(ch).ok_or(ParseError::UnknownSymbol {
                    row: r,
                    col: c,
                    symbol: ch,
                })?;
                grid.push(tile);
            }
        }
    }
    if agents.len() != 2 {
        return Err(ParseError::AgentCount(agents.len()));
    }
    let level = Level::new(height, width, grid, [agents[0], agents[1]])?;
    let report = validate(&level);
    if !report.valid {
        return Err(LevelError::Invalid(report).into());
    }
    Ok(level)
}

/// Canonical text: one line per row, each terminated by `'\n'`.
pub fn render_ascii(level: &Level) -> String {
    let mut out = String::with_capacity(level.height * (level.width + 1));
    for r in 0..level.height {
        for c in 0..level.width {
            let p = Pos::new(r, c);
            if level.is_agent_start(p) {
                out.push('A');
            } else {
                out.push(level.tile(p).symbol());
            }
        }
        out.push('\n');
    }
    out
}

/// JSON-lines level record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub height: usize,
    pub width: usize,
    /// Rows joined by `"\n"`, agents rendered as floor.
    pub grid: String,
    /// `[row, col, dir]` with dir one of `U`, `D`, `L`, `R`.
    pub agents: Vec<(usize, usize, char)>,
}

impl LevelRecord {
    pub fn from_level(level: &Level) -> Self {
        let rows: Vec<String> = (0..level.height)
            .map(|r| {
                (0..level.width)
                    .map(|c| level.tile(Pos::new(r, c)).symbol())
                    .collect()
            })
            .collect();
        LevelRecord {
            height: level.height,
            width: level.width,
            grid: rows.join("\n"),
            agents: level
                .agents
                .iter()
                .map(|a| (a.pos.row, a.pos.col, a.dir.symbol()))
                .collect(),
        }
    }

    pub fn to_level(&self) -> Result<Level, ParseError> {
        let mut grid = Vec::with_capacity(self.height * self.width);
        for (r, row) in self.grid.split('\n').enumerate() {
            let found = row.chars().count();
            if found != self.width {
                return Err(ParseError::RaggedRow {
                    row: r,
                    expected: self.width,
                    found,
                });
            }
            for (c, ch) in row.chars().enumerate() {
                grid.push(Tile::from_symbol(ch).ok_or(ParseError::UnknownSymbol {
                    row: r,
                    col: c,
                    symbol: ch,
                })?);
            }
        }
        if self.agents.len() != 2 {
            return Err(ParseError::AgentCount(self.agents.len()));
        }
        let mut agents = [AgentStart::new(Pos::new(0, 0), Direction::Up); 2];
        for (slot, &(r, c, d)) in agents.iter_mut().zip(&self.agents) {
            let dir = Direction::from_symbol(d)
                .ok_or_else(|| ParseError::Record(format!("bad direction {d:?}")))?;
            *slot = AgentStart::new(Pos::new(r, c), dir);
        }
        let level = Level::new(self.height, self.width, grid, agents)?;
        let report = validate(&level);
        if !report.valid {
            return Err(LevelError::Invalid(report).into());
        }
        Ok(level)
    }
}

pub fn to_json_line(level: &Level) -> String {
    serde_json::to_string(&LevelRecord::from_level(level)).expect("level record serializes")
}

pub fn from_json_line(line: &str) -> Result<Level, ParseError> {
    let record: LevelRecord =
        serde_json::from_str(line).map_err(|e| ParseError::Record(e.to_string()))?;
    record.to_level()
}

/// Reads a level file: JSON-lines records when the text starts with `{`,
/// otherwise a single ASCII grid.
pub fn parse_levels(text: &str) -> Result<Vec<Level>, ParseError> {
    if text.trim_start().starts_with('{') {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(from_json_line)
            .collect()
    } else {
        Ok(vec![parse_ascii(text)?])
    }
}

/// Pads with walls, anchoring the original content at the top-left.
pub fn pad(level: &Level, target_h: usize, target_w: usize) -> Result<Level, LevelError> {
    if target_h < level.height || target_w < level.width {
        return Err(LevelError::PadTooSmall {
            height: level.height,
            width: level.width,
            target_h,
            target_w,
        });
    }
    let mut grid = vec![Tile::Wall; target_h * target_w];
    for r in 0..level.height {
        let src = &level.grid[r * level.width..(r + 1) * level.width];
        grid[r * target_w..r * target_w + level.width].copy_from_slice(src);
    }
    Ok(Level {
        height: target_h,
        width: target_w,
        grid,
        agents: level.agents,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelDigest(pub u64);

impl fmt::Display for LevelDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for LevelDigest {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(LevelDigest)
    }
}

impl Serialize for LevelDigest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LevelDigest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// First 64 bits of SHA-256 over a fixed byte encoding of the level.
pub fn level_digest(level: &Level) -> LevelDigest {
    let mut h = Sha256::new();
    h.update(b"ogc-level/1");
    h.update((level.height as u32).to_le_bytes());
    h.update((level.width as u32).to_le_bytes());
    let tiles: Vec<u8> = level.grid.iter().map(|t| t.symbol() as u8).collect();
    h.update(&tiles);
    for a in &level.agents {
        h.update((a.pos.row as u32).to_le_bytes());
        h.update((a.pos.col as u32).to_le_bytes());
        h.update([a.dir.symbol() as u8]);
    }
    let out = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&out[..8]);
    LevelDigest(u64::from_be_bytes(bytes))
}
