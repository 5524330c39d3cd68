use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use ogc_core::agents::{parse_policy, Policy, PolicyError};
use ogc_core::curriculum::{checkpoint_jsonl, CurriculumError};
use ogc_core::generator::{sample_batch, GenError, GeneratorConfig};
use ogc_core::harness::{
    bench_csv, evaluate_suite, heatmap_from_trajectory, rollout_traced, run_curriculum,
    solvability_check, throughput_bench, CurriculumMethod, CurriculumRunConfig, HarnessConfig,
    HarnessError, DEFAULT_BENCH_ENVS, DEFAULT_BENCH_STEPS,
};
use ogc_core::level::{parse_levels, render_ascii, to_json_line, Level, LevelRecord, ParseError};
use ogc_core::mutator::{mutate, MutateError, MutatorConfig};
use ogc_core::rng::seeded;
use ogc_core::suites::{
    builtin_eval_suite, builtin_level, symmetry_suite, SuiteError, SuiteLevel, SymmetryParams,
};
use ogc_core::teacher::{random_design, TeacherConfig, TeacherError};

/// Level generation, curricula and scripted evaluation for the two-agent
/// cooking gridworld.
#[derive(Parser, Debug)]
#[command(name = "ogc", version)]
struct Cli {
    /// Seed for every random draw. Required by stochastic subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Canvas size for generated and designed levels.
    #[arg(long, global = true, default_value = "6x9", value_parser = parse_canvas)]
    canvas: (usize, usize),
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format. Each subcommand accepts a subset.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Ascii,
    Jsonl,
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample random levels.
    Generate {
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Apply random edits to a level.
    Mutate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        n_ops: usize,
    },
    /// Run one teacher design episode.
    Design {
        #[arg(long, default_value = "random")]
        teacher: String,
    },
    /// Play one episode and report its statistics.
    Rollout {
        /// Level file, or `builtin:<name>`.
        #[arg(long)]
        level: String,
        #[command(flatten)]
        pair: PolicyPair,
        #[arg(long, default_value_t = 400)]
        horizon: u32,
        /// Also write the step-by-step trajectory (JSON lines) here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate a policy pair over a level suite.
    Eval {
        /// builtin5, symmetry24, or a directory of level files.
        #[arg(long)]
        suite: String,
        #[command(flatten)]
        pair: PolicyPair,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long, default_value_t = 400)]
        horizon: u32,
    },
    /// Simulated curriculum loop with scripted students (no learning).
    Curriculum {
        #[arg(long)]
        method: String,
        #[arg(long)]
        iters: u64,
        #[arg(long, default_value = "greedy")]
        evaluator: String,
        #[arg(long, default_value_t = 4000)]
        capacity: usize,
        #[arg(long, default_value_t = 4)]
        slots: usize,
        /// Write a buffer checkpoint every this many iterations.
        #[arg(long, default_value_t = 0)]
        checkpoint_every: u64,
        /// Directory for `buffer_<iter>.jsonl` checkpoints.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Check whether a level admits a delivery.
    Solve {
        #[arg(long)]
        level: String,
    },
    /// Visit counts from a trajectory file, as CSV.
    Heatmap {
        #[arg(long)]
        traj: PathBuf,
    },
    /// Environment throughput at several batch sizes.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BENCH_ENVS.to_vec())]
        envs: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_BENCH_STEPS)]
        steps: usize,
        #[arg(long, default_value = "builtin:cramped_room")]
        level: String,
    },
}

#[derive(Args, Debug)]
struct PolicyPair {
    /// stay, greedy or random:<seed>
    #[arg(long, default_value = "greedy")]
    policy_a: String,
    #[arg(long, default_value = "greedy")]
    policy_b: String,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("--seed is required for `{0}`")]
    MissingSeed(&'static str),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {source}")]
    Level { path: String, source: ParseError },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error(transparent)]
    Mutate(#[from] MutateError),
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MissingSeed(_) => "missing_seed",
            CliError::Io { .. } => "io",
            CliError::Level { .. } => "level",
            CliError::Policy(_) => "policy",
            CliError::Harness(_) => "harness",
            CliError::Generator(_) => "generator",
            CliError::Mutate(_) => "mutate",
            CliError::Teacher(_) => "teacher",
            CliError::Suite(_) => "suite",
            CliError::Curriculum(_) => "curriculum",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::MissingSeed(_) => 2,
            _ => 1,
        }
    }
}

fn parse_canvas(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let dim = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad canvas dimension {v:?}"))
    };
    Ok((dim(h)?, dim(w)?))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn load_levels(path: &Path) -> Result<Vec<Level>, CliError> {
    parse_levels(&read(path)?).map_err(|source| CliError::Level {
        path: path.display().to_string(),
        source,
    })
}

/// A level file with exactly one level, or `builtin:<name>`.
fn load_one(arg: &str) -> Result<Level, CliError> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        return builtin_level(name)
            .ok_or_else(|| CliError::Usage(format!("no bundled level named {name:?}")));
    }
    let mut levels = load_levels(Path::new(arg))?;
    if levels.len() != 1 {
        return Err(CliError::Usage(format!(
            "{arg}: expected one level, found {}",
            levels.len()
        )));
    }
    Ok(levels.remove(0))
}

/// Every `.txt`/`.jsonl` file in `dir`, sorted by file name. Files holding
/// several levels get a `#<index>` suffix.
fn load_dir(dir: &Path) -> Result<Vec<SuiteLevel>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("txt" | "jsonl")
            )
        })
        .collect();
    files.sort();
    let mut suite = Vec::new();
    for path in files {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("level")
            .to_string();
        let levels = load_levels(&path)?;
        let several = levels.len() > 1;
        for (i, level) in levels.into_iter().enumerate() {
            let name = if several {
                format!("{stem}#{i}")
            } else {
                stem.clone()
            };
            suite.push(SuiteLevel { name, level });
        }
    }
    if suite.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no .txt or .jsonl level files",
            dir.display()
        )));
    }
    Ok(suite)
}

type PolicyBoxes = (Box<dyn Policy>, Box<dyn Policy>);

fn policies(pair: &PolicyPair) -> Result<PolicyBoxes, CliError> {
    Ok((parse_policy(&pair.policy_a)?, parse_policy(&pair.policy_b)?))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn ascii_block(levels: &[Level]) -> String {
    levels
        .iter()
        .map(render_ascii)
        .collect::<Vec<_>>()
        .join("\n")
}

struct Ctx {
    seed: Option<u64>,
    canvas: (usize, usize),
    format: Option<Format>,
}

impl Ctx {
    fn seed(&self, command: &'static str) -> Result<u64, CliError> {
        self.seed.ok_or(CliError::MissingSeed(command))
    }

    /// The requested format if `allowed` contains it, else the first allowed one.
    fn format(&self, allowed: &[Format]) -> Result<Format, CliError> {
        match self.format {
            None => Ok(allowed[0]),
            Some(f) if allowed.contains(&f) => Ok(f),
            Some(f) => Err(CliError::Usage(format!(
                "format {f:?} not supported here (use one of {allowed:?})"
            ))),
        }
    }

    fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            canvas_h: self.canvas.0,
            canvas_w: self.canvas.1,
            ..GeneratorConfig::default()
        }
    }

    fn teacher(&self) -> TeacherConfig {
        TeacherConfig {
            height: self.canvas.0,
            width: self.canvas.1,
            ..TeacherConfig::default()
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let ctx = Ctx {
        seed: cli.seed,
        canvas: cli.canvas,
        format: cli.format,
    };
    match cli.command {
        Command::Generate { count } => {
            let format = ctx.format(&[Format::Jsonl, Format::Ascii])?;
            let levels = sample_batch(ctx.seed("generate")?, &ctx.generator(), count)?;
            Ok(match format {
                Format::Ascii => ascii_block(&levels),
                _ => levels.iter().map(|l| to_json_line(l) + "\n").collect(),
            })
        }
        Command::Mutate { input, n_ops } => {
            let format = ctx.format(&[Format::Json, Format::Ascii])?;
            let level = load_one(&input.display().to_string())?;
            let mut rng = seeded(ctx.seed("mutate")?);
            let (child, log) = mutate(&level, n_ops, &mut rng, &MutatorConfig::default())?;
            Ok(match format {
                Format::Ascii => render_ascii(&child),
                _ => pretty(&json!({
                    "level": LevelRecord::from_level(&child),
                    "digest": child.digest(),
                    "log": log,
                })),
            })
        }
        Command::Design { teacher } => {
            if teacher != "random" {
                return Err(CliError::Usage(format!(
                    "unknown teacher {teacher:?} (only `random` ships)"
                )));
            }
            let format = ctx.format(&[Format::Json, Format::Ascii])?;
            let (level, script) = random_design(ctx.seed("design")?, &ctx.teacher())?;
            Ok(match format {
                Format::Ascii => render_ascii(&level),
                _ => pretty(&json!({
                    "level": LevelRecord::from_level(&level),
                    "digest": level.digest(),
                    "script": script,
                })),
            })
        }
        Command::Rollout {
            level,
            pair,
            horizon,
            trace,
        } => {
            ctx.format(&[Format::Json])?;
            let level = load_one(&level)?;
            let (a, b) = policies(&pair)?;
            let seed = ctx.seed("rollout")?;
            let config = HarnessConfig {
                horizon,
                seed,
                ..HarnessConfig::default()
            };
            let out = rollout_traced(
                level,
                a.as_ref(),
                b.as_ref(),
                &config,
                seed,
                trace.is_some(),
            )?;
            if let (Some(path), Some(steps)) = (trace, &out.trajectory) {
                let text: String = steps
                    .iter()
                    .map(|s| serde_json::to_string(s).expect("trajectory serializes") + "\n")
                    .collect();
                fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            }
            Ok(pretty(&out.stats))
        }
        Command::Eval {
            suite,
            pair,
            episodes,
            horizon,
        } => {
            ctx.format(&[Format::Json])?;
            let levels = match suite.as_str() {
                "builtin5" => builtin_eval_suite(),
                "symmetry24" => symmetry_suite(&SymmetryParams::default())?,
                dir => load_dir(Path::new(dir))?,
            };
            let (a, b) = policies(&pair)?;
            let config = HarnessConfig {
                horizon,
                seed: ctx.seed("eval")?,
                ..HarnessConfig::default()
            };
            let report = evaluate_suite(&levels, a.as_ref(), b.as_ref(), episodes, &config)?;
            Ok(pretty(&report))
        }
        Command::Curriculum {
            method,
            iters,
            evaluator,
            capacity,
            slots,
            checkpoint_every,
            checkpoint_dir,
        } => {
            ctx.format(&[Format::Jsonl])?;
            let method = CurriculumMethod::parse(&method).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown method {method:?} (dr, plr, robust-plr, accel, paired)"
                ))
            })?;
            if evaluator != "greedy" {
                return Err(CliError::Usage(format!(
                    "unknown evaluator {evaluator:?} (only `greedy` ships)"
                )));
            }
            if checkpoint_every > 0 && checkpoint_dir.is_none() {
                return Err(CliError::Usage(
                    "--checkpoint-every needs --checkpoint-dir".into(),
                ));
            }
            let mut config =
                CurriculumRunConfig::new(method, iters, capacity, ctx.seed("curriculum")?);
            config.slots = slots;
            config.generator = ctx.generator();
            config.teacher = ctx.teacher();
            if let Some(dir) = &checkpoint_dir {
                fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            }
            let mut write_error = None;
            let run = run_curriculum(&config, |iter, buffer| {
                let due = checkpoint_every > 0 && (iter + 1) % checkpoint_every == 0;
                if let (true, Some(dir), None) = (due, &checkpoint_dir, &write_error) {
                    let path = dir.join(format!("buffer_{:06}.jsonl", iter + 1));
                    if let Err(e) = fs::write(&path, checkpoint_jsonl(buffer)) {
                        write_error = Some(io_err(&path, e));
                    }
                }
            })?;
            if let Some(e) = write_error {
                return Err(e);
            }
            Ok(run
                .records
                .iter()
                .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
                .collect())
        }
        Command::Solve { level } => {
            ctx.format(&[Format::Json])?;
            Ok(pretty(&solvability_check(&load_one(&level)?)))
        }
        Command::Heatmap { traj } => {
            ctx.format(&[Format::Csv])?;
            let (h, w) = ctx.canvas;
            Ok(heatmap_from_trajectory(&read(&traj)?, h, w)?.to_csv())
        }
        Command::Bench { envs, steps, level } => {
            let format = ctx.format(&[Format::Csv, Format::Json])?;
            let name = level.strip_prefix("builtin:").unwrap_or(&level).to_string();
            let level = load_one(&level)?;
            let rows = throughput_bench(&name, &level, &envs, steps, ctx.seed("bench")?)?;
            Ok(match format {
                Format::Json => pretty(&rows),
                _ => bench_csv(&rows),
            })
        }
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end(), 2),
    };
    let out = cli.out.clone();
    let text = match run(cli) {
        Ok(text) => text,
        Err(e) => return fail(e.kind(), &e.to_string(), e.exit_code()),
    };
    let written = match &out {
        Some(path) => fs::write(path, &text).map_err(|e| io_err(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), e.exit_code()),
    }
}
