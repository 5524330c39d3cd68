//! Two-agent cooperative cooking gridworld with unsupervised environment
//! design tooling: random, mutation-based and teacher-driven level
//! generation, a prioritised level-replay curriculum engine, scripted
//! agents and a batched evaluation harness.

pub mod agents;
pub mod curriculum;
pub mod env;
pub mod generator;
pub mod harness;
pub mod level;
pub mod mutator;
pub mod rng;
pub mod suites;
pub mod teacher;

pub use env::{Action, Env, EnvConfig, EnvState, Observation};
pub use level::{Level, LevelDigest, Pos, Tile};
