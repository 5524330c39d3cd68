//! Policy interface and scripted partners.
//!
//! The greedy policy is *privileged*: it reads the full [`EnvState`] rather
//! than the observation masks. It exists to exercise the dynamics and to
//! demonstrate that a level can be solved, not to be a fair baseline.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::env::{resolve_movement, Action, EnvState, HeldItem, Item, Observation};
use crate::level::{Direction, Level, Pos, Tile};
use crate::rng::{slot_rng, uniform_index, ChaCha8Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observability {
    /// Acts on the 26-channel observation.
    Masked,
    /// Reads the complete environment state.
    Privileged,
}

/// What a policy gets to see on each step. The rollout fills `observation`
/// for masked policies and `state` for privileged ones.
#[derive(Clone, Copy, Debug, Default)]
pub struct PolicyInput<'a> {
    pub observation: Option<&'a Observation>,
    pub state: Option<&'a EnvState>,
}

/// Per-episode memory, owned by the rollout worker.
#[derive(Clone, Debug)]
pub struct PolicyMemory {
    pub rng: ChaCha8Rng,
    /// Consecutive planned moves that led back to a recently seen joint
    /// position.
    pub stuck: u32,
    pub recent: VecDeque<[Pos; 2]>,
    pub last_was_move: bool,
    /// Free slot for recurrent state of externally supplied policies.
    pub hidden: Vec<f32>,
    pub reach: ReachCache,
}

type JointReach = Arc<[Vec<bool>; 2]>;

/// Memoised [`joint_reach`] for one level. Joint moves are reversible, so
/// every joint position found by one search shares its answer.
#[derive(Clone, Debug, Default)]
pub struct ReachCache {
    level: Option<Level>,
    sets: HashMap<[Pos; 2], JointReach>,
}

impl ReachCache {
    pub fn get(&mut self, level: &Level, at: [Pos; 2]) -> JointReach {
        if self.level.as_ref() != Some(level) {
            self.level = Some(level.clone());
            self.sets.clear();
        }
        if let Some(r) = self.sets.get(&at) {
            return r.clone();
        }
        let (reach, states) = joint_component(level, at);
        let reach = Arc::new(reach);
        for ps in states {
            self.sets.insert(ps, reach.clone());
        }
        self.sets.entry(at).or_insert(reach).clone()
    }
}

impl PolicyMemory {
    pub fn new(rng: ChaCha8Rng) -> Self {
        PolicyMemory {
            rng,
            stuck: 0,
            recent: VecDeque::new(),
            last_was_move: false,
            hidden: Vec::new(),
            reach: ReachCache::default(),
        }
    }
}

pub trait Policy: Send + Sync {
    fn name(&self) -> String;
    fn observability(&self) -> Observability;
    fn reset_memory(&self, episode_seed: u64) -> PolicyMemory;
    fn act(&self, input: &PolicyInput<'_>, agent: usize, memory: &mut PolicyMemory) -> Action;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StayPolicy;

impl Policy for StayPolicy {
    fn name(&self) -> String {
        "stay".into()
    }

    fn observability(&self) -> Observability {
        Observability::Masked
    }

    fn reset_memory(&self, episode_seed: u64) -> PolicyMemory {
        PolicyMemory::new(slot_rng(0, episode_seed))
    }

    fn act(&self, _: &PolicyInput<'_>, _: usize, _: &mut PolicyMemory) -> Action {
        Action::Stay
    }
}

pub fn stay_policy() -> StayPolicy {
    StayPolicy
}

/// Uniform over the six actions. The stream depends on the policy seed and
/// the episode seed only.
#[derive(Clone, Copy, Debug)]
pub struct RandomPolicy {
    pub seed: u64,
}

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        format!("random:{}", self.seed)
    }

    fn observability(&self) -> Observability {
        Observability::Masked
    }

    fn reset_memory(&self, episode_seed: u64) -> PolicyMemory {
        PolicyMemory::new(slot_rng(self.seed, episode_seed))
    }

    fn act(&self, _: &PolicyInput<'_>, _: usize, memory: &mut PolicyMemory) -> Action {
        Action::ALL[uniform_index(&mut memory.rng, Action::ALL.len())]
    }
}

pub fn random_policy(seed: u64) -> RandomPolicy {
    RandomPolicy { seed }
}

/// Planned moves ending in an already visited joint position (stalls and
/// oscillations alike) before a random sidestep.
pub const STUCK_LIMIT: u32 = 8;

#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyPolicy;

pub fn greedy_policy() -> GreedyPolicy {
    GreedyPolicy
}

impl Policy for GreedyPolicy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn observability(&self) -> Observability {
        Observability::Privileged
    }

    fn reset_memory(&self, episode_seed: u64) -> PolicyMemory {
        PolicyMemory::new(slot_rng(0x6EED, episode_seed))
    }

    fn act(&self, input: &PolicyInput<'_>, agent: usize, memory: &mut PolicyMemory) -> Action {
        let Some(state) = input.state else {
            return Action::Stay;
        };
        let joint = state.agent_pos;
        if memory.last_was_move && memory.recent.contains(&joint) {
            memory.stuck += 1;
        } else if !memory.recent.contains(&joint) {
            memory.stuck = 0;
        }
        if memory.recent.len() == STUCK_LIMIT as usize {
            memory.recent.pop_front();
        }
        memory.recent.push_back(joint);

        if memory.stuck >= STUCK_LIMIT {
            memory.stuck = 0;
            memory.recent.clear();
            memory.last_was_move = false;
            let dir = Direction::ALL[memory.rng.gen_range(0..4u64) as usize];
            return Action::from_direction(dir);
        }

        let reach = memory.reach.get(state.level(), joint);
        let plans = [plan(state, 0, &reach), plan(state, 1, &reach)];

        // Blocked by the partner: both agents derive the same joint plan from
        // the shared state, so each can execute its own half of it.
        if let Some(joint) = coordinate(state, &plans) {
            memory.last_was_move = joint[agent].direction().is_some();
            return joint[agent];
        }

        let (mine, theirs) = (&plans[agent], &plans[1 - agent]);
        let (action, moving) = match (mine.next, theirs.next) {
            // both heading into one cell: the second agent gives way
            (Some(a), Some(b)) if a == b && agent == 1 => (Action::Stay, false),
            _ => (mine.action, mine.moving),
        };
        memory.last_was_move = moving;
        action
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("unknown policy {0:?} (expected stay, greedy or random:<seed>)")]
    Unknown(String),
}

/// Resolves `stay`, `greedy` and `random:<seed>`.
pub fn parse_policy(name: &str) -> Result<Box<dyn Policy>, PolicyError> {
    match name {
        "stay" => Ok(Box::new(StayPolicy)),
        "greedy" => Ok(Box::new(GreedyPolicy)),
        _ => {
            let seed = name
                .strip_prefix("random:")
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| PolicyError::Unknown(name.to_string()))?;
            Ok(Box::new(RandomPolicy { seed }))
        }
    }
}

/// BFS distances over floor cells from `from`; `blocked` is treated as a
/// wall.
pub fn floor_distances(level: &Level, from: Pos, blocked: Option<Pos>) -> Vec<Option<u32>> {
    let mut dist = vec![None; level.height() * level.width()];
    if level.tile(from) != Tile::Floor {
        return dist;
    }
    dist[level.index(from)] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(p) = queue.pop_front() {
        let d = dist[level.index(p)].expect("queued cells have a distance");
        for n in level.neighbors(p) {
            let i = level.index(n);
            if dist[i].is_none() && level.tile(n) == Tile::Floor && Some(n) != blocked {
                dist[i] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Shortest 4-neighbour floor path from `from` to any floor cell adjacent to
/// `target`. The returned path starts at `from`. Neighbours are expanded in
/// Up, Down, Left, Right order, so ties favour vertical moves.
pub fn bfs_path(level: &Level, from: Pos, target: Pos, blocked: Option<Pos>) -> Option<Vec<Pos>> {
    if level.tile(from) != Tile::Floor {
        return None;
    }
    let adjacent = |p: Pos| p.manhattan(target) == 1;
    let mut prev: Vec<Option<Pos>> = vec![None; level.height() * level.width()];
    let mut seen = vec![false; level.height() * level.width()];
    seen[level.index(from)] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(p) = queue.pop_front() {
        if adjacent(p) {
            let mut path = vec![p];
            let mut cur = p;
            while let Some(q) = prev[level.index(cur)] {
                path.push(q);
                cur = q;
            }
            path.reverse();
            return Some(path);
        }
        for n in level.neighbors(p) {
            let i = level.index(n);
            if !seen[i] && level.tile(n) == Tile::Floor && Some(n) != blocked {
                seen[i] = true;
                prev[i] = Some(p);
                queue.push_back(n);
            }
        }
    }
    None
}

struct Scene<'a> {
    state: &'a EnvState,
    level: &'a Level,
    me: usize,
    mine: Vec<Option<u32>>,
    theirs: Vec<Option<u32>>,
    same_region: bool,
}

impl<'a> Scene<'a> {
    fn new(state: &'a EnvState, me: usize, reach: &[Vec<bool>; 2]) -> Self {
        let level = state.level();
        let (me_at, other_at) = (state.agent_pos[me], state.agent_pos[1 - me]);
        let mut mine = floor_distances(level, me_at, None);
        let mut theirs = floor_distances(level, other_at, None);
        let mut same_region = mine[level.index(other_at)].is_some();
        if same_region {
            // the partner may pin a corridor or a dead end for good
            for (dist, ok) in [(&mut mine, &reach[me]), (&mut theirs, &reach[1 - me])] {
                for (d, ok) in dist.iter_mut().zip(ok) {
                    if !ok {
                        *d = None;
                    }
                }
            }
            same_region = reach[0].iter().zip(&reach[1]).any(|(a, b)| *a && *b);
        }
        Scene {
            state,
            level,
            me,
            mine,
            theirs,
            same_region,
        }
    }

    fn other_held(&self) -> HeldItem {
        self.state.held[1 - self.me]
    }

    /// Distance to the nearest floor cell from which `cell` can be used.
    fn reach_cost(&self, dist: &[Option<u32>], cell: Pos) -> Option<u32> {
        self.level
            .neighbors(cell)
            .filter_map(|n| dist[self.level.index(n)])
            .min()
    }

    fn i_touch(&self, cell: Pos) -> bool {
        self.reach_cost(&self.mine, cell).is_some()
    }

    fn they_touch(&self, cell: Pos) -> bool {
        self.reach_cost(&self.theirs, cell).is_some()
    }

    fn nearest(&self, cells: impl IntoIterator<Item = Pos>) -> Option<Pos> {
        cells
            .into_iter()
            .filter_map(|c| self.reach_cost(&self.mine, c).map(|d| (d, c)))
            .min()
            .map(|(_, c)| c)
    }

    fn counters(&self) -> impl Iterator<Item = Pos> + '_ {
        self.level
            .cells()
            .filter(|&p| self.level.tile(p) == Tile::Wall)
    }

    fn loose(&self, item: Item) -> impl Iterator<Item = Pos> + '_ {
        self.counters()
            .filter(move |&p| self.state.counter_item(p) == Some(item))
    }

    fn empty_counters(&self) -> impl Iterator<Item = Pos> + '_ {
        self.counters()
            .filter(|&p| self.state.counter_item(p).is_none())
    }

    /// Counters shared with the other agent's region, when the regions differ.
    fn empty_handovers(&self) -> Vec<Pos> {
        if self.same_region {
            return Vec::new();
        }
        self.empty_counters()
            .filter(|&p| self.i_touch(p) && self.they_touch(p))
            .collect()
    }

    fn full_handovers(&self) -> Vec<Pos> {
        if self.same_region {
            return Vec::new();
        }
        self.counters()
            .filter(|&p| {
                self.state.counter_item(p).is_some() && self.i_touch(p) && self.they_touch(p)
            })
            .collect()
    }

    /// Free counters that are not handovers, falling back to handovers.
    fn drop_spot(&self) -> Option<Pos> {
        let shared = |p: &Pos| !self.same_region && self.they_touch(*p);
        self.nearest(self.empty_counters().filter(|p| !shared(p)))
            .or_else(|| self.nearest(self.empty_counters()))
    }

    fn pots(&self) -> impl Iterator<Item = (Pos, crate::env::PotState)> + '_ {
        self.state.pots.iter().copied()
    }

    /// Items of one kind already on their way to `dests`.
    fn in_flight(&self, item: Item, held: HeldItem, dests: &[Pos]) -> usize {
        let i_use = dests.iter().any(|&d| self.i_touch(d));
        let they_use = dests.iter().any(|&d| self.they_touch(d));
        let loose = self
            .loose(item)
            .filter(|&p| (i_use && self.i_touch(p)) || (they_use && self.they_touch(p)))
            .count();
        loose + usize::from(self.other_held() == held)
    }
}

/// Nearest of `mine`; else a handover if the partner has a use for the
/// item; else any free counter, to get the hands free.
fn carry(s: &Scene, mine: &[Pos], theirs: &[Pos]) -> Option<Pos> {
    s.nearest(mine.iter().copied())
        .or_else(|| {
            (!theirs.is_empty())
                .then(|| s.nearest(s.empty_handovers()))
                .flatten()
        })
        .or_else(|| s.drop_spot())
}

fn choose_target(state: &EnvState, me: usize, reach: &[Vec<bool>; 2]) -> Option<Pos> {
    let s = Scene::new(state, me, reach);
    let capacity = 3;
    let goals = s.level.positions_of(Tile::Goal);
    // soup from this pot can reach a goal, possibly over a counter
    let i_serve = goals.iter().any(|&g| s.i_touch(g));
    let they_serve = goals.iter().any(|&g| s.they_touch(g));
    let linked = s.same_region || s.counters().any(|c| s.i_touch(c) && s.they_touch(c));
    let i_can_serve = |p: Pos| s.i_touch(p) && (i_serve || (linked && they_serve));
    let they_can_serve = |p: Pos| s.they_touch(p) && (they_serve || (linked && i_serve));
    let servable = |p: Pos| i_can_serve(p) || they_can_serve(p);
    let accepting: Vec<Pos> = s
        .pots()
        .filter(|&(c, p)| p.accepts_onion(capacity) && servable(c))
        .map(|(c, _)| c)
        .collect();
    let ready: Vec<Pos> = s.pots().filter(|(_, p)| p.ready).map(|(c, _)| c).collect();
    let cooking: Vec<Pos> = s
        .pots()
        .filter(|(_, p)| p.is_cooking())
        .map(|(c, _)| c)
        .collect();

    match state.held[me] {
        HeldItem::Soup => s.nearest(goals.iter().copied()).or_else(|| {
            goals
                .iter()
                .any(|&g| s.they_touch(g))
                .then(|| s.nearest(s.empty_handovers()))
                .flatten()
        }),
        HeldItem::Onion => {
            let theirs: Vec<Pos> = accepting
                .iter()
                .copied()
                .filter(|&p| s.they_touch(p))
                .collect();
            carry(&s, &accepting, &theirs)
        }
        HeldItem::Plate => {
            let serving: Vec<Pos> = ready.iter().chain(&cooking).copied().collect();
            let mine = |ps: &[Pos]| {
                ps.iter()
                    .copied()
                    .filter(|&p| i_can_serve(p))
                    .collect::<Vec<_>>()
            };
            let theirs: Vec<Pos> = serving
                .iter()
                .copied()
                .filter(|&p| they_can_serve(p))
                .collect();
            s.nearest(mine(&ready))
                .or_else(|| carry(&s, &mine(&cooking), &theirs))
        }
        HeldItem::Nothing => {
            // the partner is waiting to hand something over: clear a counter
            let serving: Vec<Pos> = ready.iter().chain(&cooking).copied().collect();
            let dests: &[Pos] = match s.other_held() {
                HeldItem::Soup => &goals,
                HeldItem::Onion => &accepting,
                HeldItem::Plate => &serving,
                HeldItem::Nothing => &[],
            };
            let theirs_only =
                dests.iter().any(|&d| s.i_touch(d)) && !dests.iter().any(|&d| s.they_touch(d));
            if theirs_only && s.empty_handovers().is_empty() {
                let useless = |p: &Pos| {
                    let theirs: &[Pos] = match s.state.counter_item(*p) {
                        Some(Item::Soup) => &goals,
                        Some(Item::Onion) => &accepting,
                        Some(Item::Plate) => &serving,
                        None => &[],
                    };
                    !theirs.iter().any(|&d| s.they_touch(d))
                };
                if let Some(c) = s.nearest(s.full_handovers().into_iter().filter(useless)) {
                    return Some(c);
                }
            }

            // soup waiting on a counter
            if goals.iter().any(|&g| s.i_touch(g)) {
                if let Some(c) = s.nearest(s.loose(Item::Soup)) {
                    return Some(c);
                }
            }

            let relay = !s.empty_handovers().is_empty();
            let usable = |p: &Pos| s.i_touch(*p) || (relay && s.they_touch(*p));

            let serving: Vec<Pos> = ready
                .iter()
                .chain(&cooking)
                .copied()
                .filter(|&p| i_can_serve(p) || (relay && they_can_serve(p)))
                .collect();
            // a handed-over plate only helps if someone collects it
            if serving.iter().any(|&p| i_can_serve(p)) {
                if let Some(c) = s.nearest(s.loose(Item::Plate)) {
                    return Some(c);
                }
            }
            if s.in_flight(Item::Plate, HeldItem::Plate, &serving) < serving.len() {
                let direct = serving.iter().any(|&p| i_can_serve(p));
                let mut sources = s.level.positions_of(Tile::PlatePile);
                if direct {
                    sources.extend(s.loose(Item::Plate));
                }
                if let Some(c) = s.nearest(sources) {
                    return Some(c);
                }
            }

            let feeding: Vec<Pos> = accepting.iter().copied().filter(usable).collect();
            let needed: usize = feeding
                .iter()
                .map(|&p| usize::from(capacity - state.pot(p).map_or(capacity, |pot| pot.onions)))
                .sum();
            if feeding.iter().any(|&p| s.i_touch(p)) {
                if let Some(c) = s.nearest(s.loose(Item::Onion)) {
                    return Some(c);
                }
            }
            if s.in_flight(Item::Onion, HeldItem::Onion, &feeding) < needed {
                let direct = feeding.iter().any(|&p| s.i_touch(p));
                let mut sources = s.level.positions_of(Tile::OnionPile);
                if direct {
                    sources.extend(s.loose(Item::Onion));
                }
                if let Some(c) = s.nearest(sources) {
                    return Some(c);
                }
            }
            None
        }
    }
}

struct Plan {
    action: Action,
    /// Planned step onto `next`.
    moving: bool,
    next: Option<Pos>,
    target: Option<Pos>,
    /// Next to the target and doing useful work there.
    busy: bool,
    /// Every route to the target passes through the other agent.
    blocked: bool,
}

fn plan(state: &EnvState, agent: usize, reach: &[Vec<bool>; 2]) -> Plan {
    let idle = Plan {
        action: Action::Stay,
        moving: false,
        next: None,
        target: None,
        busy: false,
        blocked: false,
    };
    let Some(target) = choose_target(state, agent, reach) else {
        return idle;
    };
    let level = state.level();
    let me = state.agent_pos[agent];
    if me.manhattan(target) == 1 {
        let dir = Direction::between(me, target).expect("adjacent");
        // holding a plate next to a pot that is still cooking is not work
        let waiting =
            state.held[agent] == HeldItem::Plate && state.pot(target).is_some_and(|p| !p.ready);
        let action = if state.agent_dir[agent] == dir {
            Action::Interact
        } else {
            Action::from_direction(dir)
        };
        return Plan {
            action,
            target: Some(target),
            busy: !waiting,
            ..idle
        };
    }
    let other = state.agent_pos[1 - agent];
    match bfs_path(level, me, target, Some(other)) {
        Some(path) => {
            let dir = Direction::between(path[0], path[1]).expect("path steps are adjacent");
            Plan {
                action: Action::from_direction(dir),
                moving: true,
                next: Some(path[1]),
                target: Some(target),
                ..idle
            }
        }
        None => {
            let blocked = bfs_path(level, me, target, None).is_some();
            Plan {
                target: Some(target),
                blocked,
                ..idle
            }
        }
    }
}

/// Joint first step when an agent is blocked by a partner that is making no
/// progress of its own (idle, waiting, or blocked too). The lower-index
/// blocked agent has priority.
fn coordinate(state: &EnvState, plans: &[Plan; 2]) -> Option<[Action; 2]> {
    (0..2).find_map(|a| {
        let p = &plans[a];
        let partner = &plans[1 - a];
        if !p.blocked || partner.busy || partner.moving {
            return None;
        }
        joint_step(state.level(), state.agent_pos, a, p.target?)
    })
}

const JOINT_MOVES: [Action; 5] = [
    Action::Stay,
    Action::Up,
    Action::Down,
    Action::Left,
    Action::Right,
];

/// Joint floor positions of both agents, indexed densely.
struct JointSpace<'a> {
    level: &'a Level,
    id: Vec<usize>,
    n: usize,
}

impl<'a> JointSpace<'a> {
    fn new(level: &'a Level) -> Self {
        let mut id = vec![usize::MAX; level.height() * level.width()];
        let mut n = 0;
        for p in level.cells().filter(|&p| level.tile(p) == Tile::Floor) {
            id[level.index(p)] = n;
            n += 1;
        }
        JointSpace { level, id, n }
    }

    fn states(&self) -> usize {
        self.n * self.n
    }

    fn key(&self, ps: [Pos; 2]) -> usize {
        self.id[self.level.index(ps[0])] * self.n + self.id[self.level.index(ps[1])]
    }

    fn on_floor(&self, ps: [Pos; 2]) -> bool {
        ps.iter().all(|&p| self.level.tile(p) == Tile::Floor)
    }

    fn successors(&self, ps: [Pos; 2]) -> impl Iterator<Item = ([Action; 2], [Pos; 2])> + '_ {
        let (h, w) = self.level.dims();
        JOINT_MOVES.into_iter().flat_map(move |a0| {
            JOINT_MOVES.into_iter().map(move |a1| {
                let acts = [a0, a1];
                let mut proposals = ps;
                for i in 0..2 {
                    if let Some(q) = acts[i].direction().and_then(|d| ps[i].step(d, h, w)) {
                        proposals[i] = q;
                    }
                }
                (acts, resolve_movement(ps, proposals, self.level))
            })
        })
    }
}

/// BFS over joint positions under the movement rule (no shared cells, no
/// swaps) until agent `mover` stands next to `target`. Returns the first
/// joint action of a shortest plan.
pub fn joint_step(
    level: &Level,
    start: [Pos; 2],
    mover: usize,
    target: Pos,
) -> Option<[Action; 2]> {
    let space = JointSpace::new(level);
    if !space.on_floor(start) {
        return None;
    }
    // first joint action that led to each state
    let mut first: Vec<Option<[Action; 2]>> = vec![None; space.states()];
    let mut seen = vec![false; space.states()];
    seen[space.key(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(ps) = queue.pop_front() {
        if ps[mover].manhattan(target) == 1 {
            return first[space.key(ps)];
        }
        for (acts, next) in space.successors(ps) {
            let k = space.key(next);
            if !seen[k] {
                seen[k] = true;
                first[k] = first[space.key(ps)].or(Some(acts));
                queue.push_back(next);
            }
        }
    }
    None
}

/// Cells each agent can occupy in some joint position reachable from `start`.
pub fn joint_reach(level: &Level, start: [Pos; 2]) -> [Vec<bool>; 2] {
    joint_component(level, start).0
}

fn joint_component(level: &Level, start: [Pos; 2]) -> ([Vec<bool>; 2], Vec<[Pos; 2]>) {
    let cells = level.height() * level.width();
    let mut reach = [vec![false; cells], vec![false; cells]];
    let space = JointSpace::new(level);
    if !space.on_floor(start) {
        return (reach, Vec::new());
    }
    let mut seen = vec![false; space.states()];
    seen[space.key(start)] = true;
    let mut visited = vec![start];
    let mut i = 0;
    while i < visited.len() {
        let ps = visited[i];
        i += 1;
        reach[0][level.index(ps[0])] = true;
        reach[1][level.index(ps[1])] = true;
        for (_, next) in space.successors(ps) {
            let k = space.key(next);
            if !seen[k] {
                seen[k] = true;
                visited.push(next);
            }
        }
    }
    (reach, visited)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Env, EventKind};
    use crate::level::parse_ascii;

    #[test]
    fn stay_always_stays() {
        let p = stay_policy();
        let mut m = p.reset_memory(3);
        let before = m.stuck;
        assert_eq!(p.act(&PolicyInput::default(), 0, &mut m), Action::Stay);
        assert_eq!(m.stuck, before);
    }

    #[test]
    fn random_is_seeded() {
        let p = random_policy(7);
        let draw = |p: &RandomPolicy| {
            let mut m = p.reset_memory(0);
            (0..50)
                .map(|_| p.act(&PolicyInput::default(), 0, &mut m))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(&p), draw(&p));
        assert_ne!(draw(&p), draw(&random_policy(8)));
    }

    #[test]
    fn policy_names() {
        assert_eq!(parse_policy("stay").unwrap().name(), "stay");
        assert_eq!(
            parse_policy("greedy").unwrap().observability(),
            Observability::Privileged
        );
        assert_eq!(parse_policy("random:42").unwrap().name(), "random:42");
        assert!(parse_policy("random").is_err());
        assert!(parse_policy("random:x").is_err());
        assert!(parse_policy("mappo").is_err());
    }

    #[test]
    fn corridor_path_is_manhattan() {
        let mut corridor = Level::bordered(3, 8);
        corridor.set_tile(Pos::new(1, 7), Tile::Goal);
        let from = Pos::new(1, 1);
        let target = Pos::new(1, 7);
        let path = bfs_path(&corridor, from, target, None).unwrap();
        // start cell plus one cell per step, ending next to the goal
        assert_eq!(path.len(), from.manhattan(target));
        assert_eq!(path.first(), Some(&from));
        assert_eq!(path.last(), Some(&Pos::new(1, 6)));
    }

    #[test]
    fn walled_off_target() {
        let mut level = Level::bordered(5, 7);
        for r in 1..4 {
            level.set_tile(Pos::new(r, 3), Tile::Wall);
        }
        level.set_tile(Pos::new(2, 6), Tile::Pot);
        assert!(bfs_path(&level, Pos::new(2, 1), Pos::new(2, 6), None).is_none());
        assert!(bfs_path(&level, Pos::new(2, 4), Pos::new(2, 6), None).is_some());
    }

    #[test]
    fn tie_break_prefers_vertical() {
        // (2,3) and (3,2) are both three steps from (1,1)
        let mut level = Level::bordered(5, 5);
        level.set_tile(Pos::new(3, 3), Tile::Wall);
        let path = bfs_path(&level, Pos::new(1, 1), Pos::new(3, 3), None).unwrap();
        let expected = [
            Pos::new(1, 1),
            Pos::new(2, 1),
            Pos::new(3, 1),
            Pos::new(3, 2),
        ];
        assert_eq!(path, expected);
    }

    #[test]
    fn blocked_agent_is_avoided() {
        let mut level = Level::bordered(4, 6);
        level.set_tile(Pos::new(1, 5), Tile::Goal);
        let path = bfs_path(&level, Pos::new(1, 1), Pos::new(1, 5), Some(Pos::new(1, 2))).unwrap();
        assert_eq!(path[1], Pos::new(2, 1));
    }

    #[test]
    fn greedy_fetches_onion_first() {
        let level = parse_ascii("WWPWW\nWA AW\nWO BW\nWWGWW\n").unwrap();
        let state = Env::default().reset(level, 0).unwrap();
        let p = greedy_policy();
        let mut m = p.reset_memory(0);
        let input = PolicyInput {
            observation: None,
            state: Some(&state),
        };
        // agent 0 stands above the onion pile and faces up: turn down first
        assert_eq!(p.act(&input, 0, &mut m), Action::Down);
    }

    #[test]
    fn random_frequencies_are_uniform() {
        let p = random_policy(2024);
        let mut m = p.reset_memory(0);
        let mut counts = [0usize; 6];
        let n = 60_000;
        for _ in 0..n {
            let a = p.act(&PolicyInput::default(), 0, &mut m);
            counts[Action::ALL.iter().position(|&b| b == a).unwrap()] += 1;
        }
        for c in counts {
            assert!(
                (c as f64 / n as f64 - 1.0 / 6.0).abs() <= 0.02,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn single_corridor_keeps_delivering() {
        // agents can never pass each other; every pot and goal cell is shared
        let level = parse_ascii("WWPWWWW\nOA   AB\nWWWGWWW\n").unwrap();
        let env = Env::default();
        let mut state = env.reset(level, 0).unwrap();
        let p = greedy_policy();
        let mut mem = [p.reset_memory(0), p.reset_memory(1)];
        let mut deliveries = 0;
        let mut longest_freeze = 0;
        let mut freeze = 0;
        for _ in 0..400 {
            let input = PolicyInput {
                observation: None,
                state: Some(&state),
            };
            let actions = [p.act(&input, 0, &mut mem[0]), p.act(&input, 1, &mut mem[1])];
            let before = (state.agent_pos, state.held);
            let info = env.step_in_place(&mut state, actions).unwrap();
            deliveries += info
                .events
                .iter()
                .filter(|e| e.kind == EventKind::Delivery)
                .count();
            freeze = if (state.agent_pos, state.held) == before {
                freeze + 1
            } else {
                0
            };
            longest_freeze = longest_freeze.max(freeze);
        }
        assert!(deliveries >= 2, "{deliveries} deliveries");
        // only waiting on the pot (cook time 20) may hold everything still
        assert!(longest_freeze <= 20, "frozen for {longest_freeze} steps");
    }

    #[test]
    fn agents_in_a_corridor_keep_their_sides() {
        let level = parse_ascii("WWPWWWW\nOA   AB\nWWWGWWW\n").unwrap();
        let reach = joint_reach(&level, [Pos::new(1, 1), Pos::new(1, 5)]);
        let cells = |r: &Vec<bool>| {
            (1..6)
                .filter(|&c| r[level.index(Pos::new(1, c))])
                .collect::<Vec<_>>()
        };
        assert_eq!(cells(&reach[0]), [1, 2, 3, 4]);
        assert_eq!(cells(&reach[1]), [2, 3, 4, 5]);
        let open = Level::bordered(4, 5);
        let reach = joint_reach(&open, [Pos::new(1, 1), Pos::new(1, 3)]);
        assert!(reach[0][open.index(Pos::new(1, 3))]);
    }

    #[test]
    fn greedy_without_state_stays() {
        let p = greedy_policy();
        let mut m = p.reset_memory(0);
        assert_eq!(p.act(&PolicyInput::default(), 0, &mut m), Action::Stay);
    }
}
