//! Replay-based curricula: a prioritised level buffer, replay/generate
//! decisions, regret-style scores and the mutation ("edit") cycle.
//!
//! The buffer has a single writer. Rollout workers only ever see cloned
//! levels.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::{
    parse_ascii, AgentStart, Direction, Level, LevelDigest, Pos, DEFAULT_MAX_WALLS,
};
use crate::mutator::{mutate, MutatorConfig};
use crate::rng::slot_rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelConfig {
    pub n_mutations: usize,
    /// Highest-scoring replayed levels edited per cycle.
    pub subsample: usize,
    pub max_walls: usize,
}

impl Default for AccelConfig {
    fn default() -> Self {
        AccelConfig {
            n_mutations: 20,
            subsample: 4,
            max_walls: DEFAULT_MAX_WALLS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlrConfig {
    pub capacity: usize,
    pub replay_prob: f64,
    pub staleness_coef: f64,
    pub temperature: f64,
    pub rank_prioritization: bool,
    pub min_fill_ratio: f64,
    pub force_unique: bool,
    /// Fresh levels are scored but not trained on.
    pub robust: bool,
    pub accel: Option<AccelConfig>,
    /// Clamp negative per-step MaxMC terms at zero. Off by default.
    pub clamp_negative: bool,
}

impl PlrConfig {
    pub fn plr() -> Self {
        PlrConfig {
            capacity: 4000,
            replay_prob: 0.5,
            staleness_coef: 0.3,
            temperature: 0.1,
            rank_prioritization: true,
            min_fill_ratio: 0.5,
            force_unique: true,
            robust: true,
            accel: None,
            clamp_negative: false,
        }
    }

    pub fn accel() -> Self {
        PlrConfig {
            replay_prob: 0.8,
            accel: Some(AccelConfig::default()),
            ..PlrConfig::plr()
        }
    }

    /// Degenerate buffer that always generates.
    pub fn domain_randomization() -> Self {
        PlrConfig {
            capacity: 0,
            ..PlrConfig::plr()
        }
    }

    pub fn check(&self) -> Result<(), CurriculumError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.replay_prob) || !unit(self.staleness_coef) || !unit(self.min_fill_ratio) {
            return Err(CurriculumError::Config(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(CurriculumError::Config(
                "temperature must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for PlrConfig {
    fn default() -> Self {
        PlrConfig::plr()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CurriculumError {
    #[error("value estimates are empty")]
    EmptyValues,
    #[error("relative regret needs at least 2 students, got {0}")]
    TooFewStudents(usize),
    #[error("buffer is empty")]
    EmptyBuffer,
    #[error("invalid curriculum config: {0}")]
    Config(String),
    #[error("score must be finite, got {0}")]
    NonFiniteScore(f64),
    #[error("evaluator failed: {0}")]
    Evaluator(String),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
}

/// Result of evaluating one level with some policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub digest: LevelDigest,
    pub agent_returns: Vec<f64>,
    pub shared_return: f64,
    /// Per-step value estimates from the evaluating policy.
    pub values: Vec<f64>,
    /// Best return seen on this level so far, including this episode.
    pub max_known_return: f64,
}

/// Mean over steps of `max_known_return - value_t`. Signed.
pub fn maxmc_score(ep: &EpisodeSummary) -> Result<f64, CurriculumError> {
    maxmc_score_with(ep, false)
}

pub fn maxmc_score_with(ep: &EpisodeSummary, clamp_negative: bool) -> Result<f64, CurriculumError> {
    if ep.values.is_empty() {
        return Err(CurriculumError::EmptyValues);
    }
    let total: f64 = ep
        .values
        .iter()
        .map(|v| {
            let gap = ep.max_known_return - v;
            if clamp_negative {
                gap.max(0.0)
            } else {
                gap
            }
        })
        .sum();
    Ok(total / ep.values.len() as f64)
}

/// Best return minus the mean of the remaining students.
pub fn relative_regret(returns: &[f64]) -> Result<f64, CurriculumError> {
    if returns.len() < 2 {
        return Err(CurriculumError::TooFewStudents(returns.len()));
    }
    let best = returns
        .iter()
        .enumerate()
        .fold(0, |b, (i, &r)| if r > returns[b] { i } else { b });
    let rest: f64 = returns
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, r)| r)
        .sum();
    Ok(returns[best] - rest / (returns.len() - 1) as f64)
}

/// Running maximum return per level, initialised by the first observation.
#[derive(Clone, Debug, Default)]
pub struct ReturnTracker {
    best: HashMap<LevelDigest, f64>,
}

impl ReturnTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, digest: LevelDigest, ret: f64) -> f64 {
        let best = self.best.entry(digest).or_insert(ret);
        if ret > *best {
            *best = ret;
        }
        *best
    }

    pub fn get(&self, digest: LevelDigest) -> Option<f64> {
        self.best.get(&digest).copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelBufferEntry {
    pub level: Level,
    pub digest: LevelDigest,
    pub score: f64,
    pub last_sampled_episode: u64,
    pub insert_episode: u64,
    /// Insertion sequence number; breaks ties within one episode.
    pub seq: u64,
}

impl LevelBufferEntry {
    fn older_than(&self, other: &LevelBufferEntry) -> bool {
        (self.insert_episode, self.seq) < (other.insert_episode, other.seq)
    }
}

#[derive(Clone, Debug, Default)]
pub struct LevelBuffer {
    capacity: usize,
    entries: Vec<LevelBufferEntry>,
    by_digest: HashMap<LevelDigest, usize>,
    next_seq: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// Digest already present; its score was replaced.
    Updated,
    Evicted(LevelDigest),
    /// Buffer full and the score did not beat the minimum.
    Rejected,
}

impl LevelBuffer {
    pub fn new(capacity: usize) -> Self {
        LevelBuffer {
            capacity,
            ..Default::default()
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LevelBufferEntry] {
        &self.entries
    }

    pub fn get(&self, digest: LevelDigest) -> Option<&LevelBufferEntry> {
        match self.by_digest.get(&digest) {
            Some(&i) => Some(&self.entries[i]),
            None => self.entries.iter().find(|e| e.digest == digest),
        }
    }

    pub fn fill_ratio(&self) -> f64 {
        if self.capacity == 0 {
            0.0
        } else {
            self.entries.len() as f64 / self.capacity as f64
        }
    }

    /// Index of the lowest score, oldest first among ties.
    fn min_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            best = match best {
                None => Some(i),
                Some(b) => {
                    let cur = &self.entries[b];
                    if e.score < cur.score || (e.score == cur.score && e.older_than(cur)) {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best
    }

    fn make_entry(
        &mut self,
        level: Level,
        digest: LevelDigest,
        score: f64,
        episode: u64,
    ) -> LevelBufferEntry {
        let seq = self.next_seq;
        self.next_seq += 1;
        LevelBufferEntry {
            level,
            digest,
            score,
            last_sampled_episode: episode,
            insert_episode: episode,
            seq,
        }
    }
}

/// Adds `level` with `score`, or updates the score if it is already present
/// (when `force_unique`). A full buffer evicts its minimum only for a
/// strictly higher score.
pub fn insert_or_update(
    buffer: &mut LevelBuffer,
    level: &Level,
    score: f64,
    episode: u64,
    config: &PlrConfig,
) -> Result<InsertOutcome, CurriculumError> {
    if !score.is_finite() {
        return Err(CurriculumError::NonFiniteScore(score));
    }
    let digest = level.digest();
    if config.force_unique {
        if let Some(&i) = buffer.by_digest.get(&digest) {
            buffer.entries[i].score = score;
            return Ok(InsertOutcome::Updated);
        }
    }
    if buffer.capacity == 0 {
        return Ok(InsertOutcome::Rejected);
    }
    if buffer.entries.len() < buffer.capacity {
        let entry = buffer.make_entry(level.clone(), digest, score, episode);
        buffer.by_digest.insert(digest, buffer.entries.len());
        buffer.entries.push(entry);
        return Ok(InsertOutcome::Inserted);
    }
    let i = buffer
        .min_index()
        .expect("full buffer with positive capacity");
    if score <= buffer.entries[i].score {
        return Ok(InsertOutcome::Rejected);
    }
    let entry = buffer.make_entry(level.clone(), digest, score, episode);
    let old = std::mem::replace(&mut buffer.entries[i], entry);
    if buffer.by_digest.get(&old.digest) == Some(&i) {
        buffer.by_digest.remove(&old.digest);
    }
    buffer.by_digest.insert(digest, i);
    Ok(InsertOutcome::Evicted(old.digest))
}

fn normalized(weights: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if total > 0.0 && total.is_finite() {
        weights.into_iter().map(|w| w / total).collect()
    } else {
        let n = weights.len() as f64;
        vec![1.0 / n; weights.len()]
    }
}

/// Replay probability of every entry, in buffer order.
pub fn replay_distribution(buffer: &LevelBuffer, config: &PlrConfig, episode: u64) -> Vec<f64> {
    let entries = &buffer.entries;
    if entries.is_empty() {
        return Vec::new();
    }
    let inv_t = 1.0 / config.temperature;
    let score_w = if config.rank_prioritization {
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (&entries[a], &entries[b]);
            eb.score
                .total_cmp(&ea.score)
                .then((ea.insert_episode, ea.seq).cmp(&(eb.insert_episode, eb.seq)))
        });
        let mut w = vec![0.0; entries.len()];
        for (rank0, &i) in order.iter().enumerate() {
            w[i] = (1.0 / (rank0 + 1) as f64).powf(inv_t);
        }
        w
    } else {
        entries
            .iter()
            .map(|e| e.score.max(0.0).powf(inv_t))
            .collect()
    };
    let stale_w: Vec<f64> = entries
        .iter()
        .map(|e| episode.saturating_sub(e.last_sampled_episode) as f64)
        .collect();
    let c = config.staleness_coef;
    normalized(score_w)
        .into_iter()
        .zip(normalized(stale_w))
        .map(|(w, u)| (1.0 - c) * w + c * u)
        .collect()
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding slack: last entry with positive mass
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Draws a level for replay and marks it as sampled at `episode`.
pub fn sample_from_buffer<R: Rng + ?Sized>(
    buffer: &mut LevelBuffer,
    config: &PlrConfig,
    episode: u64,
    rng: &mut R,
) -> Result<LevelBufferEntry, CurriculumError> {
    if buffer.is_empty() {
        return Err(CurriculumError::EmptyBuffer);
    }
    let probs = replay_distribution(buffer, config, episode);
    let i = sample_index(&probs, rng);
    buffer.entries[i].last_sampled_episode = episode;
    Ok(buffer.entries[i].clone())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Replay(Box<LevelBufferEntry>),
    Generate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub source: Source,
    /// Whether the learner should train on this episode.
    pub update_policy: bool,
}

impl Decision {
    pub fn is_replay(&self) -> bool {
        matches!(self.source, Source::Replay(_))
    }
}

/// Replay from the buffer or generate a fresh level.
pub fn decide_source<R: Rng + ?Sized>(
    buffer: &mut LevelBuffer,
    config: &PlrConfig,
    episode: u64,
    rng: &mut R,
) -> Result<Decision, CurriculumError> {
    let generate = Decision {
        source: Source::Generate,
        update_policy: !config.robust,
    };
    if buffer.capacity == 0 || buffer.is_empty() || buffer.fill_ratio() < config.min_fill_ratio {
        return Ok(generate);
    }
    let u: f64 = rng.gen();
    if u < config.replay_prob {
        let entry = sample_from_buffer(buffer, config, episode, rng)?;
        Ok(Decision {
            source: Source::Replay(Box::new(entry)),
            update_policy: true,
        })
    } else {
        Ok(generate)
    }
}

/// Decisions for `slots` parallel environments. Slot `i` draws from
/// substream `i` of `seed`; decisions are made in slot order by the single
/// writer.
pub fn decide_batch(
    buffer: &mut LevelBuffer,
    config: &PlrConfig,
    episode: u64,
    seed: u64,
    slots: usize,
) -> Result<Vec<Decision>, CurriculumError> {
    (0..slots)
        .map(|i| decide_source(buffer, config, episode, &mut slot_rng(seed, i as u64)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccelChild {
    pub parent: LevelDigest,
    pub child: Level,
    pub score: f64,
    pub outcome: InsertOutcome,
    /// Mutations skipped because no budget-respecting edit was found.
    pub skipped_ops: usize,
}

/// One edit cycle: the `subsample` highest-scoring levels of `replay_batch`
/// (or a single freshly sampled entry when the batch is empty) are mutated,
/// evaluated, scored with MaxMC and offered to the buffer. Children are
/// never trained on directly.
pub fn accel_edit_cycle<R, F>(
    buffer: &mut LevelBuffer,
    replay_batch: &[LevelBufferEntry],
    config: &PlrConfig,
    episode: u64,
    rng: &mut R,
    mut evaluator: F,
) -> Result<Vec<AccelChild>, CurriculumError>
where
    R: Rng + ?Sized,
    F: FnMut(&Level) -> Result<EpisodeSummary, CurriculumError>,
{
    let accel = config
        .accel
        .ok_or_else(|| CurriculumError::Config("edit settings missing".into()))?;
    let mut parents: Vec<LevelBufferEntry> = if replay_batch.is_empty() {
        vec![sample_from_buffer(buffer, config, episode, rng)?]
    } else {
        replay_batch.to_vec()
    };
    parents.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then((a.insert_episode, a.seq).cmp(&(b.insert_episode, b.seq)))
    });
    parents.truncate(accel.subsample);

    let mcfg = MutatorConfig {
        max_walls: accel.max_walls,
        ..MutatorConfig::default()
    };
    let mut children = Vec::with_capacity(parents.len());
    for parent in parents {
        let (child, log) = mutate(&parent.level, accel.n_mutations, rng, &mcfg)
            .map_err(|e| CurriculumError::Evaluator(e.to_string()))?;
        let summary = evaluator(&child)?;
        let score = maxmc_score_with(&summary, config.clamp_negative)?;
        let outcome = insert_or_update(buffer, &child, score, episode, config)?;
        children.push(AccelChild {
            parent: parent.digest,
            child,
            score,
            outcome,
            skipped_ops: log.skipped,
        });
    }
    Ok(children)
}

#[derive(Serialize, Deserialize)]
struct CheckpointLine {
    digest: LevelDigest,
    level: String,
    /// Agent starts in index order; the ASCII grid alone orders them row-major.
    agents: Vec<(usize, usize, char)>,
    score: String,
    last_sampled_episode: u64,
    insert_episode: u64,
}

/// JSON lines, one entry each, in buffer order. Scores carry 17
/// significant digits so reloading is bit-exact.
pub fn checkpoint_jsonl(buffer: &LevelBuffer) -> String {
    let mut out = String::new();
    for e in &buffer.entries {
        let line = CheckpointLine {
            digest: e.digest,
            level: e.level.render_ascii(),
            agents: e
                .level
                .agents()
                .iter()
                .map(|a| (a.pos.row, a.pos.col, a.dir.symbol()))
                .collect(),
            score: format!("{:.16e}", e.score),
            last_sampled_episode: e.last_sampled_episode,
            insert_episode: e.insert_episode,
        };
        out.push_str(&serde_json::to_string(&line).expect("checkpoint line serializes"));
        out.push('\n');
    }
    out
}

pub fn load_checkpoint(text: &str, capacity: usize) -> Result<LevelBuffer, CurriculumError> {
    let mut buffer = LevelBuffer::new(capacity);
    for (n, raw) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let err = |message: String| CurriculumError::Checkpoint {
            line: n + 1,
            message,
        };
        let line: CheckpointLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let mut level = parse_ascii(&line.level).map_err(|e| err(e.to_string()))?;
        let agents: Vec<AgentStart> = line
            .agents
            .iter()
            .map(|&(r, c, d)| Direction::from_symbol(d).map(|d| AgentStart::new(Pos::new(r, c), d)))
            .collect::<Option<_>>()
            .ok_or_else(|| err("bad agent direction".into()))?;
        let agents: [AgentStart; 2] = agents
            .try_into()
            .map_err(|_| err("expected two agents".into()))?;
        level.set_agents(agents);
        if level.digest() != line.digest {
            return Err(err(format!(
                "digest {} does not match level {}",
                line.digest,
                level.digest()
            )));
        }
        let score: f64 = line
            .score
            .parse()
            .map_err(|e: std::num::ParseFloatError| err(e.to_string()))?;
        if buffer.entries.len() >= capacity {
            return Err(err(format!("more entries than capacity {capacity}")));
        }
        let mut entry = buffer.make_entry(level, line.digest, score, line.insert_episode);
        entry.last_sampled_episode = line.last_sampled_episode;
        buffer
            .by_digest
            .entry(line.digest)
            .or_insert(buffer.entries.len());
        buffer.entries.push(entry);
    }
    Ok(buffer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{sample_level, GeneratorConfig};
    use crate::rng::seeded;

    fn summary(values: Vec<f64>, max: f64) -> EpisodeSummary {
        EpisodeSummary {
            digest: LevelDigest(0),
            agent_returns: vec![0.0, 0.0],
            shared_return: 0.0,
            values,
            max_known_return: max,
        }
    }

    fn levels(n: usize, seed: u64) -> Vec<Level> {
        let mut rng = seeded(seed);
        (0..n)
            .map(|_| sample_level(&mut rng, &GeneratorConfig::default()).unwrap())
            .collect()
    }

    #[test]
    fn maxmc_examples() {
        assert_eq!(
            maxmc_score(&summary(vec![0.0, 10.0, 20.0], 20.0)).unwrap(),
            10.0
        );
        assert_eq!(maxmc_score(&summary(vec![20.0; 5], 20.0)).unwrap(), 0.0);
        assert_eq!(maxmc_score(&summary(vec![30.0], 20.0)).unwrap(), -10.0);
        assert_eq!(
            maxmc_score_with(&summary(vec![30.0], 20.0), true).unwrap(),
            0.0
        );
        assert_eq!(
            maxmc_score(&summary(vec![], 20.0)),
            Err(CurriculumError::EmptyValues)
        );
    }

    #[test]
    fn regret_examples() {
        assert_eq!(relative_regret(&[30.0, 10.0]).unwrap(), 20.0);
        assert_eq!(relative_regret(&[5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(relative_regret(&[0.0, 7.0]).unwrap(), 7.0);
        assert_eq!(relative_regret(&[9.0, 0.0, 6.0]).unwrap(), 6.0);
        assert_eq!(
            relative_regret(&[1.0]),
            Err(CurriculumError::TooFewStudents(1))
        );
    }

    #[test]
    fn tracker_keeps_running_max() {
        let mut t = ReturnTracker::new();
        let d = LevelDigest(1);
        assert_eq!(t.observe(d, 5.0), 5.0);
        assert_eq!(t.observe(d, 3.0), 5.0);
        assert_eq!(t.observe(d, 8.0), 8.0);
        assert_eq!(t.observe(LevelDigest(2), -1.0), -1.0);
    }

    #[test]
    fn rank_distribution_closed_form() {
        let cfg = PlrConfig {
            staleness_coef: 0.0,
            ..PlrConfig::plr()
        };
        let mut buf = LevelBuffer::new(10);
        for (level, score) in levels(3, 1).iter().zip([10.0, 5.0, 1.0]) {
            insert_or_update(&mut buf, level, score, 0, &cfg).unwrap();
        }
        let p = replay_distribution(&buf, &cfg, 0);
        let z = 1.0 + 2f64.powi(-10) + 3f64.powi(-10);
        let expected = [1.0 / z, 2f64.powi(-10) / z, 3f64.powi(-10) / z];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rank_ties_prefer_older() {
        let cfg = PlrConfig {
            staleness_coef: 0.0,
            ..PlrConfig::plr()
        };
        let mut buf = LevelBuffer::new(10);
        let ls = levels(2, 2);
        insert_or_update(&mut buf, &ls[0], 1.0, 3, &cfg).unwrap();
        insert_or_update(&mut buf, &ls[1], 1.0, 1, &cfg).unwrap();
        let p = replay_distribution(&buf, &cfg, 5);
        assert!(p[1] > p[0]);
    }

    #[test]
    fn staleness_only() {
        let cfg = PlrConfig {
            staleness_coef: 1.0,
            ..PlrConfig::plr()
        };
        let mut buf = LevelBuffer::new(10);
        for (i, level) in levels(3, 3).iter().enumerate() {
            insert_or_update(&mut buf, level, 1.0, i as u64, &cfg).unwrap();
        }
        // staleness at episode 4: 4, 3, 2
        let p = replay_distribution(&buf, &cfg, 4);
        for (a, b) in p.iter().zip([4.0 / 9.0, 3.0 / 9.0, 2.0 / 9.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_entry_is_certain() {
        let cfg = PlrConfig::plr();
        let mut buf = LevelBuffer::new(4);
        let l = levels(1, 4).remove(0);
        insert_or_update(&mut buf, &l, 2.5, 0, &cfg).unwrap();
        assert_eq!(replay_distribution(&buf, &cfg, 7), vec![1.0]);
        let e = sample_from_buffer(&mut buf, &cfg, 7, &mut seeded(0)).unwrap();
        assert_eq!(e.digest, l.digest());
        assert_eq!(buf.entries()[0].last_sampled_episode, 7);
        let mut empty = LevelBuffer::new(4);
        assert_eq!(
            sample_from_buffer(&mut empty, &cfg, 0, &mut seeded(0)),
            Err(CurriculumError::EmptyBuffer)
        );
    }

    #[test]
    fn eviction_rules() {
        let cfg = PlrConfig::plr();
        let ls = levels(4, 5);
        let mut buf = LevelBuffer::new(2);
        insert_or_update(&mut buf, &ls[0], 1.0, 0, &cfg).unwrap();
        insert_or_update(&mut buf, &ls[1], 1.0, 1, &cfg).unwrap();
        assert_eq!(
            insert_or_update(&mut buf, &ls[2], 0.5, 2, &cfg).unwrap(),
            InsertOutcome::Rejected
        );
        assert_eq!(
            insert_or_update(&mut buf, &ls[2], 1.0, 2, &cfg).unwrap(),
            InsertOutcome::Rejected
        );
        assert_eq!(
            insert_or_update(&mut buf, &ls[2], 2.0, 2, &cfg).unwrap(),
            InsertOutcome::Evicted(ls[0].digest()),
            "oldest of the tied minimum goes"
        );
        assert_eq!(
            insert_or_update(&mut buf, &ls[1], 9.0, 3, &cfg).unwrap(),
            InsertOutcome::Updated
        );
        assert_eq!(buf.len(), 2);
        assert_eq!(buf.get(ls[1].digest()).unwrap().score, 9.0);
        assert!(insert_or_update(&mut buf, &ls[3], f64::NAN, 0, &cfg).is_err());
    }

    #[test]
    fn decisions() {
        let cfg = PlrConfig {
            capacity: 10,
            ..PlrConfig::plr()
        };
        let mut buf = LevelBuffer::new(10);
        let mut rng = seeded(0);
        let d = decide_source(&mut buf, &cfg, 0, &mut rng).unwrap();
        assert_eq!(
            d,
            Decision {
                source: Source::Generate,
                update_policy: false
            }
        );

        for (i, level) in levels(4, 6).iter().enumerate() {
            insert_or_update(&mut buf, level, i as f64, 0, &cfg).unwrap();
        }
        // fill 0.4: always generate
        for _ in 0..200 {
            assert!(!decide_source(&mut buf, &cfg, 1, &mut rng)
                .unwrap()
                .is_replay());
        }

        let always = PlrConfig {
            replay_prob: 1.0,
            min_fill_ratio: 0.0,
            ..cfg
        };
        let d = decide_source(&mut buf, &always, 1, &mut rng).unwrap();
        assert!(d.is_replay() && d.update_policy);

        let plain = PlrConfig {
            robust: false,
            ..cfg
        };
        assert!(
            decide_source(&mut buf, &plain, 1, &mut rng)
                .unwrap()
                .update_policy
        );

        let dr = PlrConfig::domain_randomization();
        let mut none = LevelBuffer::new(0);
        for _ in 0..50 {
            assert!(!decide_source(&mut none, &dr, 0, &mut rng)
                .unwrap()
                .is_replay());
        }
    }

    #[test]
    fn batch_decisions_are_reproducible() {
        let cfg = PlrConfig {
            capacity: 4,
            min_fill_ratio: 0.5,
            ..PlrConfig::plr()
        };
        let mut a = LevelBuffer::new(4);
        for (i, level) in levels(4, 7).iter().enumerate() {
            insert_or_update(&mut a, level, i as f64, 0, &cfg).unwrap();
        }
        let mut b = a.clone();
        let da = decide_batch(&mut a, &cfg, 3, 11, 32).unwrap();
        let db = decide_batch(&mut b, &cfg, 3, 11, 32).unwrap();
        assert_eq!(da, db);
        assert_eq!(da.len(), 32);
        assert!(da.iter().any(|d| d.is_replay()) && da.iter().any(|d| !d.is_replay()));
    }

    #[test]
    fn accel_children() {
        let cfg = PlrConfig {
            capacity: 16,
            ..PlrConfig::accel()
        };
        let mut buf = LevelBuffer::new(16);
        for (i, level) in levels(4, 8).iter().enumerate() {
            insert_or_update(&mut buf, level, i as f64, 0, &cfg).unwrap();
        }
        let batch: Vec<LevelBufferEntry> = buf.entries().to_vec();
        let eval = |l: &Level| Ok(summary(vec![0.0; 4], l.interior_wall_count() as f64));
        let kids = accel_edit_cycle(&mut buf, &batch, &cfg, 1, &mut seeded(1), eval).unwrap();
        assert_eq!(kids.len(), 4);
        for k in &kids {
            assert!(k.child.validate().valid);
            assert!(k.child.interior_wall_count() <= 15);
            assert_eq!(k.score, k.child.interior_wall_count() as f64);
        }
        assert!(buf.len() <= 16);

        let no_edit = PlrConfig::plr();
        assert!(accel_edit_cycle(&mut buf, &batch, &no_edit, 1, &mut seeded(1), eval).is_err());
    }

    #[test]
    fn constant_scores_stop_evicting() {
        let cfg = PlrConfig {
            capacity: 4,
            ..PlrConfig::accel()
        };
        let mut buf = LevelBuffer::new(4);
        for level in levels(4, 9) {
            insert_or_update(&mut buf, &level, 1.0, 0, &cfg).unwrap();
        }
        let before: Vec<LevelDigest> = buf.entries().iter().map(|e| e.digest).collect();
        let eval = |_: &Level| Ok(summary(vec![0.0], 1.0));
        for ep in 1..5 {
            let batch = buf.entries().to_vec();
            accel_edit_cycle(&mut buf, &batch, &cfg, ep, &mut seeded(ep), eval).unwrap();
        }
        let after: Vec<LevelDigest> = buf.entries().iter().map(|e| e.digest).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn checkpoint_is_bit_exact() {
        let cfg = PlrConfig::plr();
        let mut buf = LevelBuffer::new(8);
        let scores = [
            0.1 + 0.2,
            -1.0 / 3.0,
            1e-300,
            12345.678901234567,
            f64::MIN_POSITIVE,
        ];
        for (level, s) in levels(5, 10).iter().zip(scores) {
            insert_or_update(&mut buf, level, s, 2, &cfg).unwrap();
        }
        buf.entries[1].last_sampled_episode = 9;
        let text = checkpoint_jsonl(&buf);
        let back = load_checkpoint(&text, 8).unwrap();
        assert_eq!(back.len(), buf.len());
        for (a, b) in back.entries().iter().zip(buf.entries()) {
            assert_eq!(a.score.to_bits(), b.score.to_bits());
            assert_eq!(
                (a.digest, a.last_sampled_episode, a.insert_episode),
                (b.digest, b.last_sampled_episode, b.insert_episode)
            );
            assert_eq!(a.level, b.level);
        }
        assert_eq!(checkpoint_jsonl(&back), text);

        let tampered = text.replacen(&buf.entries[0].digest.to_string(), "0000000000000000", 1);
        assert!(matches!(
            load_checkpoint(&tampered, 8),
            Err(CurriculumError::Checkpoint { line: 1, .. })
        ));
    }

    #[test]
    fn config_ranges() {
        assert!(PlrConfig::plr().check().is_ok());
        assert!(PlrConfig {
            replay_prob: 1.5,
            ..PlrConfig::plr()
        }
        .check()
        .is_err());
        assert!(PlrConfig {
            temperature: 0.0,
            ..PlrConfig::plr()
        }
        .check()
        .is_err());
        assert_eq!(PlrConfig::accel().replay_prob, 0.8);
        assert_eq!(PlrConfig::accel().accel.unwrap().subsample, 4);
    }
}
