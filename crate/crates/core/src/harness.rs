//! Rollouts, evaluation metrics, cross-play, solvability analysis, heatmaps,
//! throughput measurement and a scripted curriculum driver.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    greedy_policy, random_policy, Observability, Policy, PolicyInput, PolicyMemory,
};
use crate::curriculum::{
    accel_edit_cycle, decide_batch, insert_or_update, maxmc_score_with, relative_regret,
    CurriculumError, EpisodeSummary, LevelBuffer, LevelBufferEntry, PlrConfig, ReturnTracker,
    Source,
};
use crate::env::{Action, Env, EnvConfig, EnvError, EnvState, TrajectoryStep, DEFAULT_HORIZON};
use crate::generator::{sample_level, GenError, GeneratorConfig};
use crate::level::{Level, LevelDigest, Pos, Tile};
use crate::rng::{derive_seed, slot_rng, uniform_index, ChaCha8Rng};
use crate::suites::SuiteLevel;
use crate::teacher::{random_design, TeacherConfig, TeacherError};

/// Deliveries needed for an episode to count as solved.
pub const DEFAULT_SOLVED_THRESHOLD: u32 = 2;

pub const DEFAULT_BENCH_ENVS: [usize; 6] = [1, 32, 256, 1024, 4096, 16384];
pub const DEFAULT_BENCH_STEPS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapingSchedule {
    pub initial: f64,
    pub anneal_steps: u64,
}

impl Default for ShapingSchedule {
    fn default() -> Self {
        ShapingSchedule {
            initial: 1.0,
            anneal_steps: 1,
        }
    }
}

/// Linear anneal of the shaped-reward multiplier down to zero.
pub fn shaping_coefficient(step: u64, schedule: &ShapingSchedule) -> f64 {
    if schedule.anneal_steps == 0 {
        return 0.0;
    }
    schedule.initial * (1.0 - step as f64 / schedule.anneal_steps as f64).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub horizon: u32,
    pub n_envs: usize,
    pub seed: u64,
    pub shaping: ShapingSchedule,
    /// Carried for downstream learners; also discounts scripted value targets.
    pub gamma: f64,
    pub solved_threshold: u32,
    pub env: EnvConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            horizon: DEFAULT_HORIZON,
            n_envs: 32,
            seed: 0,
            shaping: ShapingSchedule::default(),
            gamma: 0.999,
            solved_threshold: DEFAULT_SOLVED_THRESHOLD,
            env: EnvConfig::default(),
        }
    }
}

impl HarnessConfig {
    pub fn env(&self) -> Env {
        Env::new(EnvConfig {
            horizon: self.horizon,
            ..self.env
        })
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        if self.horizon == 0 {
            return Err(HarnessError::Config("horizon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid harness config: {0}")]
    Config(String),
    #[error("no levels given")]
    EmptyBatch,
    #[error("no policies given")]
    EmptyPolicies,
    #[error("no episodes given")]
    EmptyStats,
    #[error("episodes come from grids of different size")]
    MixedDims,
    #[error("trajectory line {line}: {message}")]
    Trajectory { line: usize, message: String },
    #[error("agent position {0} lies outside the {1}x{2} grid")]
    OutOfGrid(Pos, usize, usize),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error(transparent)]
    Teacher(#[from] TeacherError),
}

/// The one place that decides whether an episode counts as solved.
pub fn is_solved(deliveries: u32, threshold: u32) -> bool {
    deliveries >= threshold
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub digest: LevelDigest,
    pub shared_return: f64,
    pub shaped_returns: [f64; 2],
    pub deliveries: u32,
    pub solved: bool,
    pub height: usize,
    pub width: usize,
    /// Row-major visits by either agent, counted after every step.
    pub visit_counts: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub stats: EpisodeStats,
    pub trajectory: Option<Vec<TrajectoryStep>>,
}

fn act(policy: &dyn Policy, state: &EnvState, agent: usize, memory: &mut PolicyMemory) -> Action {
    match policy.observability() {
        Observability::Privileged => policy.act(
            &PolicyInput {
                observation: None,
                state: Some(state),
            },
            agent,
            memory,
        ),
        Observability::Masked => {
            let obs = state.observe(agent);
            policy.act(
                &PolicyInput {
                    observation: Some(&obs),
                    state: None,
                },
                agent,
                memory,
            )
        }
    }
}

/// One full episode. Policy memories are seeded from `seed` so the whole
/// rollout is a function of its arguments.
pub fn rollout_traced(
    level: impl Into<Arc<Level>>,
    policy_a: &dyn Policy,
    policy_b: &dyn Policy,
    config: &HarnessConfig,
    seed: u64,
    trace: bool,
) -> Result<Rollout, HarnessError> {
    config.check()?;
    let env = config.env();
    let mut state = env.reset(level, seed)?;
    let (h, w) = state.level().dims();
    let mut memories = [
        policy_a.reset_memory(derive_seed(seed, 0)),
        policy_b.reset_memory(derive_seed(seed, 1)),
    ];
    let mut visits = vec![0u32; h * w];
    let mut shared = 0.0;
    let mut shaped = [0.0; 2];
    let mut trajectory = trace.then(|| Vec::with_capacity(config.horizon as usize));
    loop {
        let t = state.t;
        let actions = [
            act(policy_a, &state, 0, &mut memories[0]),
            act(policy_b, &state, 1, &mut memories[1]),
        ];
        let info = env.step_in_place(&mut state, actions)?;
        shared += info.reward;
        shaped[0] += info.shaped_reward[0];
        shaped[1] += info.shaped_reward[1];
        for p in state.agent_pos {
            visits[p.row * w + p.col] += 1;
        }
        if let Some(traj) = trajectory.as_mut() {
            traj.push(TrajectoryStep::record(t, actions, &info, &state));
        }
        if info.done {
            break;
        }
    }
    let stats = EpisodeStats {
        digest: state.level().digest(),
        shared_return: shared,
        shaped_returns: shaped,
        deliveries: state.deliveries,
        solved: is_solved(state.deliveries, config.solved_threshold),
        height: h,
        width: w,
        visit_counts: visits,
    };
    Ok(Rollout { stats, trajectory })
}

pub fn rollout(
    level: impl Into<Arc<Level>>,
    policy_a: &dyn Policy,
    policy_b: &dyn Policy,
    config: &HarnessConfig,
    seed: u64,
) -> Result<EpisodeStats, HarnessError> {
    rollout_traced(level, policy_a, policy_b, config, seed, false).map(|r| r.stats)
}

/// Slot `i` runs `levels[i]` with seed `derive_seed(config.seed, i)`.
/// Identical to running the slots one after another.
pub fn rollout_batch(
    levels: &[Arc<Level>],
    policy_a: &dyn Policy,
    policy_b: &dyn Policy,
    config: &HarnessConfig,
) -> Result<Vec<EpisodeStats>, HarnessError> {
    if levels.is_empty() {
        return Err(HarnessError::EmptyBatch);
    }
    levels
        .par_iter()
        .enumerate()
        .map(|(i, level)| {
            rollout(
                Arc::clone(level),
                policy_a,
                policy_b,
                config,
                derive_seed(config.seed, i as u64),
            )
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mean_return: f64,
    pub solved_rate: f64,
    pub n_episodes: usize,
}

pub fn metrics(stats: &[EpisodeStats]) -> Result<Metrics, HarnessError> {
    if stats.is_empty() {
        return Err(HarnessError::EmptyStats);
    }
    let n = stats.len() as f64;
    Ok(Metrics {
        mean_return: stats.iter().map(|s| s.shared_return).sum::<f64>() / n,
        solved_rate: stats.iter().filter(|s| s.solved).count() as f64 / n,
        n_episodes: stats.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub name: String,
    pub digest: LevelDigest,
    pub mean_return: f64,
    /// Population standard deviation of the shared return.
    pub std_return: f64,
    pub solved_rate: f64,
    pub mean_deliveries: f64,
    pub n_episodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_return: f64,
    pub solved_rate: f64,
    pub n_episodes: usize,
    pub per_level: Vec<LevelReport>,
}

/// Runs `episodes` episodes on every level. Episode `e` of level `l` uses
/// seed `derive_seed(config.seed, l * episodes + e)`.
pub fn evaluate_suite(
    levels: &[SuiteLevel],
    policy_a: &dyn Policy,
    policy_b: &dyn Policy,
    episodes: usize,
    config: &HarnessConfig,
) -> Result<EvalReport, HarnessError> {
    if levels.is_empty() {
        return Err(HarnessError::EmptyBatch);
    }
    if episodes == 0 {
        return Err(HarnessError::EmptyStats);
    }
    let arcs: Vec<Arc<Level>> = levels.iter().map(|s| Arc::new(s.level.clone())).collect();
    let stats: Vec<EpisodeStats> = (0..levels.len() * episodes)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(config.seed, k as u64);
            rollout(
                Arc::clone(&arcs[k / episodes]),
                policy_a,
                policy_b,
                config,
                seed,
            )
        })
        .collect::<Result<_, _>>()?;

    let overall = metrics(&stats)?;
    let per_level = levels
        .iter()
        .zip(stats.chunks(episodes))
        .map(|(suite, chunk)| {
            let m = metrics(chunk).expect("non-empty chunk");
            let var = chunk
                .iter()
                .map(|s| (s.shared_return - m.mean_return).powi(2))
                .sum::<f64>()
                / chunk.len() as f64;
            LevelReport {
                name: suite.name.clone(),
                digest: suite.level.digest(),
                mean_return: m.mean_return,
                std_return: var.sqrt(),
                solved_rate: m.solved_rate,
                mean_deliveries: chunk.iter().map(|s| s.deliveries as f64).sum::<f64>()
                    / chunk.len() as f64,
                n_episodes: chunk.len(),
            }
        })
        .collect();
    Ok(EvalReport {
        mean_return: overall.mean_return,
        solved_rate: overall.solved_rate,
        n_episodes: overall.n_episodes,
        per_level,
    })
}

/// Cell `(i, j)` pairs policy `i` (agent 0) with policy `j` (agent 1),
/// pooled over all levels and episodes.
pub fn crossplay_matrix(
    policies: &[&dyn Policy],
    levels: &[SuiteLevel],
    episodes_per_cell: usize,
    config: &HarnessConfig,
) -> Result<Vec<Vec<Metrics>>, HarnessError> {
    if policies.is_empty() {
        return Err(HarnessError::EmptyPolicies);
    }
    policies
        .iter()
        .map(|&a| {
            policies
                .iter()
                .map(|&b| {
                    let report = evaluate_suite(levels, a, b, episodes_per_cell, config)?;
                    Ok(Metrics {
                        mean_return: report.mean_return,
                        solved_rate: report.solved_rate,
                        n_episodes: report.n_episodes,
                    })
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionInfo {
    /// Agents whose start lies in this region.
    pub agents: Vec<usize>,
    pub size: usize,
    /// Station cells 4-adjacent to the region.
    pub stations: Vec<Pos>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub pot: Pos,
    /// Region that puts onions into the pot.
    pub load_region: usize,
    /// Region that collects the soup and serves it.
    pub serve_region: usize,
    pub onion_pile: Pos,
    pub plate_pile: Pos,
    pub goal: Pos,
    /// Counters used to pass items between regions; empty if none needed.
    pub handovers: Vec<Pos>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solvability {
    pub solvable: bool,
    pub regions: Vec<RegionInfo>,
    /// Wall cells adjacent to two different agent regions.
    pub shared_counters: Vec<Pos>,
    pub certificate: Option<Certificate>,
}

fn flood(level: &Level, start: Pos) -> Vec<bool> {
    let mut seen = vec![false; level.height() * level.width()];
    if level.tile(start) != Tile::Floor {
        return seen;
    }
    seen[level.index(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(p) = queue.pop_front() {
        for n in level.neighbors(p) {
            let i = level.index(n);
            if !seen[i] && level.tile(n) == Tile::Floor {
                seen[i] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Static region analysis; ignores timing. A certificate names one pot and
/// the sources that can reach it, possibly across a shared counter.
pub fn solvability_check(level: &Level) -> Solvability {
    solvability_check_with(level, true)
}

pub fn solvability_check_with(level: &Level, allow_handover: bool) -> Solvability {
    let starts = level.agents();
    let mut masks: Vec<Vec<bool>> = Vec::new();
    let mut agents_of: Vec<Vec<usize>> = Vec::new();
    for (a, start) in starts.iter().enumerate() {
        match masks.iter().position(|m| m[level.index(start.pos)]) {
            Some(r) => agents_of[r].push(a),
            None => {
                masks.push(flood(level, start.pos));
                agents_of.push(vec![a]);
            }
        }
    }
    let touches = |r: usize, cell: Pos| level.neighbors(cell).any(|n| masks[r][level.index(n)]);
    let regions: Vec<RegionInfo> = masks
        .iter()
        .enumerate()
        .map(|(r, m)| RegionInfo {
            agents: agents_of[r].clone(),
            size: m.iter().filter(|&&b| b).count(),
            stations: level
                .cells()
                .filter(|&c| level.tile(c).is_station() && touches(r, c))
                .collect(),
        })
        .collect();

    let shared_counters: Vec<Pos> = if regions.len() == 2 {
        level
            .cells()
            .filter(|&c| level.tile(c) == Tile::Wall && touches(0, c) && touches(1, c))
            .collect()
    } else {
        Vec::new()
    };
    let linked = allow_handover && !shared_counters.is_empty();

    // (source cell, needs a handover) for a tile reachable by region r
    let source_for = |r: usize, tile: Tile, relay: bool| -> Option<(Pos, bool)> {
        let direct = level
            .positions_of(tile)
            .into_iter()
            .find(|&c| touches(r, c));
        match direct {
            Some(c) => Some((c, false)),
            None if relay => (0..regions.len())
                .filter(|&o| o != r)
                .find_map(|o| {
                    level
                        .positions_of(tile)
                        .into_iter()
                        .find(|&c| touches(o, c))
                })
                .map(|c| (c, true)),
            None => None,
        }
    };

    let mut certificate = None;
    // first pass without handovers so the simplest plan is reported
    'search: for relay in [false, linked] {
        for pot in level.positions_of(Tile::Pot) {
            for load in (0..regions.len()).filter(|&r| touches(r, pot)) {
                for serve in (0..regions.len()).filter(|&r| touches(r, pot)) {
                    let onion = source_for(load, Tile::OnionPile, relay);
                    let plate = source_for(serve, Tile::PlatePile, relay);
                    let goal = source_for(serve, Tile::Goal, relay);
                    if let (Some(o), Some(p), Some(g)) = (onion, plate, goal) {
                        let needs = o.1 || p.1 || g.1;
                        certificate = Some(Certificate {
                            pot,
                            load_region: load,
                            serve_region: serve,
                            onion_pile: o.0,
                            plate_pile: p.0,
                            goal: g.0,
                            handovers: if needs {
                                shared_counters.clone()
                            } else {
                                Vec::new()
                            },
                        });
                        break 'search;
                    }
                }
            }
        }
        if !linked {
            break;
        }
    }
    Solvability {
        solvable: certificate.is_some(),
        regions,
        shared_counters,
        certificate,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u64>,
}

impl Heatmap {
    pub fn new(height: usize, width: usize) -> Self {
        Heatmap {
            height,
            width,
            counts: vec![0; height * width],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, p: Pos) -> u64 {
        self.counts[p.row * self.width + p.col]
    }

    /// One CSV row per grid row, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.counts.chunks(self.width) {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Sums visit counts of episodes played on grids of one size.
pub fn visit_heatmap(stats: &[EpisodeStats]) -> Result<Heatmap, HarnessError> {
    let first = stats.first().ok_or(HarnessError::EmptyStats)?;
    let mut map = Heatmap::new(first.height, first.width);
    for s in stats {
        if (s.height, s.width) != (map.height, map.width) {
            return Err(HarnessError::MixedDims);
        }
        for (c, v) in map.counts.iter_mut().zip(&s.visit_counts) {
            *c += u64::from(*v);
        }
    }
    Ok(map)
}

/// Heatmap from trajectory JSON lines on a `height` x `width` grid.
pub fn heatmap_from_trajectory(
    text: &str,
    height: usize,
    width: usize,
) -> Result<Heatmap, HarnessError> {
    let mut map = Heatmap::new(height, width);
    let mut lines = 0;
    for (n, raw) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let step: TrajectoryStep =
            serde_json::from_str(raw).map_err(|e| HarnessError::Trajectory {
                line: n + 1,
                message: e.to_string(),
            })?;
        for [r, c] in step.agent_pos {
            if r >= height || c >= width {
                return Err(HarnessError::OutOfGrid(Pos::new(r, c), height, width));
            }
            map.counts[r * width + c] += 1;
        }
        lines += 1;
    }
    if lines == 0 {
        return Err(HarnessError::EmptyStats);
    }
    Ok(map)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub env: String,
    pub n_envs: usize,
    pub steps: usize,
    pub seconds: f64,
    /// Aggregate environment steps per wall-clock second.
    pub sps: f64,
}

struct BenchSlot {
    state: EnvState,
    rng: ChaCha8Rng,
    episodes: u64,
    seed: u64,
}

/// Steps `n` copies of `level` with uniformly random joint actions for
/// `steps` batched steps per entry of `env_counts`, resetting finished
/// episodes in place.
pub fn throughput_bench(
    name: &str,
    level: &Level,
    env_counts: &[usize],
    steps: usize,
    seed: u64,
) -> Result<Vec<BenchRow>, HarnessError> {
    if steps == 0 {
        return Err(HarnessError::Config("steps must be at least 1".into()));
    }
    if env_counts.is_empty() || env_counts.contains(&0) {
        return Err(HarnessError::Config("env counts must be positive".into()));
    }
    let env = Env::default();
    let template = env.reset(level.clone(), seed)?;
    let mut rows = Vec::with_capacity(env_counts.len());
    for &n in env_counts {
        let mut slots: Vec<BenchSlot> = (0..n)
            .map(|i| {
                let s = derive_seed(seed, i as u64);
                let mut state = template.clone();
                state.restart(s);
                BenchSlot {
                    state,
                    rng: slot_rng(seed, i as u64),
                    episodes: 0,
                    seed: s,
                }
            })
            .collect();
        let start = Instant::now();
        for _ in 0..steps {
            slots.par_iter_mut().with_min_len(64).for_each(|slot| {
                let actions = [
                    Action::ALL[uniform_index(&mut slot.rng, Action::ALL.len())],
                    Action::ALL[uniform_index(&mut slot.rng, Action::ALL.len())],
                ];
                let info = env
                    .step_in_place(&mut slot.state, actions)
                    .expect("episodes are reset when done");
                if info.done {
                    slot.episodes += 1;
                    slot.state.restart(derive_seed(slot.seed, slot.episodes));
                }
            });
        }
        let seconds = start.elapsed().as_secs_f64();
        let total = (n * steps) as f64;
        rows.push(BenchRow {
            env: name.to_string(),
            n_envs: n,
            steps,
            seconds,
            sps: total / seconds.max(1e-12),
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("env,n_envs,steps,seconds,sps\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.1}",
            r.env, r.n_envs, r.steps, r.seconds, r.sps
        );
    }
    out
}

/// Discounted reward-to-go at every step: the value targets a scripted
/// evaluator reports in place of a learned critic.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[i] = acc;
    }
    out
}

/// Evaluates a level with a scripted pair and packages the episode for
/// scoring. `tracker` supplies the running best return per level.
pub fn scripted_summary(
    level: &Level,
    policy_a: &dyn Policy,
    policy_b: &dyn Policy,
    config: &HarnessConfig,
    seed: u64,
    tracker: &mut ReturnTracker,
) -> Result<(EpisodeSummary, EpisodeStats), HarnessError> {
    let run = rollout_traced(level.clone(), policy_a, policy_b, config, seed, true)?;
    let traj = run.trajectory.expect("traced rollout");
    let rewards: Vec<f64> = traj.iter().map(|s| s.reward).collect();
    let stats = run.stats;
    let best = tracker.observe(stats.digest, stats.shared_return);
    let summary = EpisodeSummary {
        digest: stats.digest,
        agent_returns: vec![stats.shared_return; 2],
        shared_return: stats.shared_return,
        values: discounted_returns(&rewards, config.gamma),
        max_known_return: best,
    };
    Ok((summary, stats))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurriculumMethod {
    Dr,
    Plr,
    RobustPlr,
    Accel,
    Paired,
}

impl CurriculumMethod {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "dr" => Some(CurriculumMethod::Dr),
            "plr" => Some(CurriculumMethod::Plr),
            "robust-plr" => Some(CurriculumMethod::RobustPlr),
            "accel" => Some(CurriculumMethod::Accel),
            "paired" => Some(CurriculumMethod::Paired),
            _ => None,
        }
    }

    /// Buffer settings for the method at a given capacity.
    pub fn plr_config(self, capacity: usize) -> PlrConfig {
        match self {
            CurriculumMethod::Dr | CurriculumMethod::Paired => PlrConfig::domain_randomization(),
            CurriculumMethod::Plr => PlrConfig {
                capacity,
                robust: false,
                ..PlrConfig::plr()
            },
            CurriculumMethod::RobustPlr => PlrConfig {
                capacity,
                ..PlrConfig::plr()
            },
            CurriculumMethod::Accel => PlrConfig {
                capacity,
                ..PlrConfig::accel()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumRunConfig {
    pub method: CurriculumMethod,
    pub iters: u64,
    /// Parallel level slots per iteration.
    pub slots: usize,
    pub plr: PlrConfig,
    pub generator: GeneratorConfig,
    pub teacher: TeacherConfig,
    pub harness: HarnessConfig,
    pub seed: u64,
}

impl CurriculumRunConfig {
    pub fn new(method: CurriculumMethod, iters: u64, capacity: usize, seed: u64) -> Self {
        CurriculumRunConfig {
            method,
            iters,
            slots: 4,
            plr: method.plr_config(capacity),
            generator: GeneratorConfig::default(),
            teacher: TeacherConfig::default(),
            harness: HarnessConfig {
                seed,
                ..HarnessConfig::default()
            },
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumRecord {
    pub iter: u64,
    pub slot: usize,
    /// generate, replay, edit or teacher.
    pub source: String,
    pub digest: LevelDigest,
    pub update_policy: bool,
    pub score: f64,
    pub shared_return: f64,
    pub deliveries: u32,
    pub buffer_size: usize,
}

#[derive(Clone, Debug)]
pub struct CurriculumRun {
    pub records: Vec<CurriculumRecord>,
    pub buffer: LevelBuffer,
}

/// Simulated curriculum loop with scripted students: decide, generate or
/// replay, evaluate, score, insert. The greedy pair is the evaluator; the
/// teacher-based mode scores designs by the regret of the greedy pair over a
/// random pair. This exercises the machinery only; nothing is learned.
pub fn run_curriculum(
    config: &CurriculumRunConfig,
    mut on_iter: impl FnMut(u64, &LevelBuffer),
) -> Result<CurriculumRun, HarnessError> {
    config.plr.check()?;
    config.harness.check()?;
    let greedy = greedy_policy();
    let mut buffer = LevelBuffer::new(config.plr.capacity);
    let mut tracker = ReturnTracker::new();
    let mut records = Vec::new();
    let clamp = config.plr.clamp_negative;

    for iter in 0..config.iters {
        let iter_seed = derive_seed(config.seed, iter);
        if config.method == CurriculumMethod::Paired {
            let noise = random_policy(iter_seed);
            for slot in 0..config.slots {
                let seed = derive_seed(iter_seed, slot as u64);
                let (level, _) = random_design(seed, &config.teacher)?;
                let a = rollout(level.clone(), &greedy, &greedy, &config.harness, seed)?;
                let b = rollout(level.clone(), &noise, &noise, &config.harness, seed)?;
                let regret = relative_regret(&[a.shared_return, b.shared_return])?;
                records.push(CurriculumRecord {
                    iter,
                    slot,
                    source: "teacher".into(),
                    digest: a.digest,
                    update_policy: true,
                    score: regret,
                    shared_return: a.shared_return,
                    deliveries: a.deliveries,
                    buffer_size: 0,
                });
            }
            on_iter(iter, &buffer);
            continue;
        }

        let decisions = decide_batch(
            &mut buffer,
            &config.plr,
            iter,
            slot_rng(iter_seed, 0).gen(),
            config.slots,
        )?;
        let mut replayed: Vec<LevelBufferEntry> = Vec::new();
        for (slot, decision) in decisions.into_iter().enumerate() {
            let (level, source) = match decision.source {
                Source::Replay(entry) => {
                    replayed.push((*entry).clone());
                    (entry.level, "replay")
                }
                Source::Generate => (
                    sample_level(&mut slot_rng(iter_seed, 1 + slot as u64), &config.generator)?,
                    "generate",
                ),
            };
            let seed = derive_seed(iter_seed, slot as u64);
            let (summary, stats) = scripted_summary(
                &level,
                &greedy,
                &greedy,
                &config.harness,
                seed,
                &mut tracker,
            )?;
            let score = maxmc_score_with(&summary, clamp)?;
            insert_or_update(&mut buffer, &level, score, iter, &config.plr)?;
            records.push(CurriculumRecord {
                iter,
                slot,
                source: source.into(),
                digest: stats.digest,
                update_policy: decision.update_policy,
                score,
                shared_return: stats.shared_return,
                deliveries: stats.deliveries,
                buffer_size: buffer.len(),
            });
        }

        if config.method == CurriculumMethod::Accel && !replayed.is_empty() {
            let mut rng = slot_rng(iter_seed, u64::MAX);
            let harness = config.harness;
            let mut k = 0u64;
            let children = accel_edit_cycle(
                &mut buffer,
                &replayed,
                &config.plr,
                iter,
                &mut rng,
                |child| {
                    k += 1;
                    scripted_summary(
                        child,
                        &greedy,
                        &greedy,
                        &harness,
                        derive_seed(iter_seed, 1000 + k),
                        &mut tracker,
                    )
                    .map(|(s, _)| s)
                    .map_err(|e| CurriculumError::Evaluator(e.to_string()))
                },
            )?;
            for (slot, child) in children.into_iter().enumerate() {
                let best = tracker.get(child.child.digest()).unwrap_or(0.0);
                records.push(CurriculumRecord {
                    iter,
                    slot,
                    source: "edit".into(),
                    digest: child.child.digest(),
                    update_policy: false,
                    score: child.score,
                    shared_return: best,
                    deliveries: 0,
                    buffer_size: buffer.len(),
                });
            }
        }
        on_iter(iter, &buffer);
    }
    Ok(CurriculumRun { records, buffer })
}
