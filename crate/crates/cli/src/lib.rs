//! Command-line driver: `simulate`, `solve`, `experiment` and `validate`.

pub mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qedlab::control::{solve_discounted, solve_ergodic, write_grid_file};
use qedlab::diffusion::DiffusionModel;
use qedlab::error::Error;
use qedlab::experiments::{content_hash, run_experiment, write_report, ExperimentConfig, OutputSpec};
use qedlab::queue::{unscale, write_snapshots_csv, Engine, SnapshotRecorder, TrajectoryStats};
use qedlab::rng::stream;

use config::{AnyConfig, Problem, SimulationConfig, SolveConfig};

#[derive(Debug, Parser)]
#[command(
    name = "qedlab",
    version,
    about = "Many-server queues with interruptions in the Halfin-Whitt regime"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory of the n-th queueing system.
    Simulate(CommonArgs),
    /// Solve the discounted or ergodic HJB equation of the limit diffusion.
    Solve(CommonArgs),
    /// Run an experiment and check its acceptance criteria.
    Experiment(CommonArgs),
    /// Parse and validate a configuration file without running it.
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Overrides the output directory of the configuration.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Size of the worker pool (defaults to the number of cores).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// The configuration or the command line is invalid.
    Validation(String),
    /// The experiment ran but some of its checks failed.
    Acceptance(String),
    /// Anything else.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Acceptance(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Acceptance(m) | Failure::Runtime(m) => m,
        }
    }
}

fn invalid(e: Error) -> Failure {
    Failure::Validation(e.to_string())
}

fn runtime(e: Error) -> Failure {
    match e {
        Error::Config { .. } | Error::Validation(_) => invalid(e),
        other => Failure::Runtime(other.to_string()),
    }
}

/// Files written by a command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub summary: String,
}

struct Loaded {
    config: AnyConfig,
    text: String,
    base: PathBuf,
}

fn load(args: &CommonArgs) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", args.config.display())))?;
    let config = AnyConfig::parse(&text).map_err(invalid)?;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    config.validate(&base).map_err(invalid)?;
    Ok(Loaded { config, text, base })
}

fn output_dir(args: &CommonArgs, base: &Path, spec: &OutputSpec) -> PathBuf {
    match &args.out {
        Some(dir) => dir.clone(),
        None if spec.dir.is_absolute() => spec.dir.clone(),
        None => base.join(&spec.dir),
    }
}

fn set_workers(workers: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Failure::Validation("--workers must be at least 1".into()));
        }
        // A pool may already exist when the library is driven in-process.
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("keeping the existing worker pool: {e}");
        }
    }
    Ok(())
}

fn wrong_kind(expected: &str, found: &str) -> Failure {
    Failure::Validation(format!(
        "this subcommand needs a {expected} configuration, found kind `{found}`"
    ))
}

#[derive(Serialize)]
struct Metadata<'a, T: Serialize, S: Serialize> {
    schema_version: u32,
    kind: &'a str,
    seed: u64,
    config_hash: String,
    library_version: &'static str,
    config: &'a T,
    summary: S,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn simulate(args: &CommonArgs, cfg: &SimulationConfig, text: &str, base: &Path) -> Result<Outcome, Failure> {
    let seed = args.seed.unwrap_or(cfg.seed);
    let params = cfg.system.at(cfg.n).map_err(invalid)?;
    let policy = cfg.policy.build(&params, base).map_err(runtime)?;
    let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.0; params.d()]);
    let engine = Engine::new(&params, policy.as_ref());
    let mut rng = stream(seed, 0);
    let mut state = engine.build(&unscale(&params, &x0), &mut rng).map_err(runtime)?;
    let mut rec = SnapshotRecorder::every(cfg.every, cfg.horizon);
    let stats: TrajectoryStats = engine.run(&mut state, cfg.horizon, &mut rng, &mut [&mut rec]);
    let dir = output_dir(args, base, &cfg.output);
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    let stem = cfg.stem();
    let csv = dir.join(format!("{stem}.csv"));
    write_snapshots_csv(create(&csv)?, &rec.snapshots).map_err(runtime)?;
    let json = dir.join(format!("{stem}.json"));
    write_json(
        &json,
        &Metadata {
            schema_version: cfg.schema_version,
            kind: config::SIMULATION_KIND,
            seed,
            config_hash: content_hash(text),
            library_version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            summary: &stats,
        },
    )?;
    Ok(Outcome {
        summary: format!("{} events over [0, {}]", stats.events, cfg.horizon),
        written: vec![csv, json],
    })
}

#[derive(Serialize)]
struct SolveSummary {
    mode: serde_json::Value,
    value_at_origin: f64,
    rho: Option<f64>,
    residual: f64,
    converged: bool,
    policy_iterations: usize,
    nodes: usize,
}

fn solve(args: &CommonArgs, cfg: &SolveConfig, text: &str, base: &Path) -> Result<Outcome, Failure> {
    let model = DiffusionModel::from_spec(&cfg.system).map_err(invalid)?;
    let sol = match cfg.problem {
        Problem::Discounted { alpha } => solve_discounted(&model, &cfg.cost, alpha, &cfg.solver),
        Problem::Ergodic => solve_ergodic(&model, &cfg.cost, &cfg.solver),
    }
    .map_err(runtime)?;
    let dir = output_dir(args, base, &cfg.output);
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    let stem = cfg.stem();
    let grid = dir.join(format!("{stem}.grid"));
    write_grid_file(create(&grid)?, &sol).map_err(runtime)?;
    let summary = SolveSummary {
        mode: serde_json::to_value(sol.mode).map_err(|e| Failure::Runtime(e.to_string()))?,
        value_at_origin: sol.value_at(&vec![0.0; model.d()]),
        rho: sol.rho,
        residual: sol.residual,
        converged: sol.converged,
        policy_iterations: sol.log.len(),
        nodes: sol.grid.len(),
    };
    let line = match summary.rho {
        Some(rho) => format!("optimal average cost {rho:.6}"),
        None => format!("value at the origin {:.6}", summary.value_at_origin),
    };
    let json = dir.join(format!("{stem}.json"));
    write_json(
        &json,
        &Metadata {
            schema_version: cfg.schema_version,
            kind: config::SOLVE_KIND,
            seed: args.seed.unwrap_or(cfg.seed),
            config_hash: content_hash(text),
            library_version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            summary,
        },
    )?;
    Ok(Outcome {
        summary: line,
        written: vec![grid, json],
    })
}

fn experiment(args: &CommonArgs, cfg: &ExperimentConfig, text: &str, base: &Path) -> Result<Outcome, Failure> {
    let mut cfg = cfg.clone();
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let report = run_experiment(&cfg, base).map_err(runtime)?;
    let dir = output_dir(args, base, &cfg.output);
    let (csv, json) = write_report(&report, &cfg, text, &dir).map_err(runtime)?;
    let lines: Vec<String> = report
        .checks
        .iter()
        .map(|c| format!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect();
    let summary = lines.join("\n");
    if !report.passed() {
        return Err(Failure::Acceptance(format!(
            "{summary}\nreports written to {} and {}",
            csv.display(),
            json.display()
        )));
    }
    Ok(Outcome {
        written: vec![csv, json],
        summary,
    })
}

/// Runs one command.
pub fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let (args, name) = match &cli.command {
        Command::Simulate(a) => (a, "simulate"),
        Command::Solve(a) => (a, "solve"),
        Command::Experiment(a) => (a, "experiment"),
        Command::Validate(a) => (a, "validate"),
    };
    set_workers(args.workers)?;
    let loaded = load(args)?;
    let (cfg, text, base) = (&loaded.config, loaded.text.as_str(), loaded.base.as_path());
    match (name, cfg) {
        ("validate", c) => Ok(Outcome {
            written: Vec::new(),
            summary: format!("{}: valid {} configuration", args.config.display(), c.kind()),
        }),
        ("simulate", AnyConfig::Simulation(c)) => simulate(args, c, text, base),
        ("solve", AnyConfig::Solve(c)) => solve(args, c, text, base),
        ("experiment", AnyConfig::Experiment(c)) => experiment(args, c, text, base),
        ("simulate", c) => Err(wrong_kind(config::SIMULATION_KIND, c.kind())),
        ("solve", c) => Err(wrong_kind(config::SOLVE_KIND, c.kind())),
        (_, c) => Err(wrong_kind("experiment", c.kind())),
    }
}
