//! Configuration files of the `simulate` and `solve` subcommands. Both
//! share the schema version of the experiment files and are told apart by
//! their top-level `kind`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use qedlab::control::{CostSpec, SolverOptions};
use qedlab::error::{Error, Result};
use qedlab::experiments::{parse_toml, ExperimentConfig, OutputSpec, PolicySpec, SCHEMA_VERSION};
use qedlab::queue::HalfinWhittSpec;

/// Marker kind of a simulation file.
pub const SIMULATION_KIND: &str = "simulation";
/// Marker kind of a solve file.
pub const SOLVE_KIND: &str = "solve";

/// One trajectory of the n-th queueing system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub schema_version: u32,
    pub kind: String,
    #[serde(default)]
    pub seed: u64,
    pub n: u64,
    pub horizon: f64,
    /// Snapshot spacing.
    #[serde(default = "default_every")]
    pub every: f64,
    /// Scaled initial state; the centering point when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub policy: PolicySpec,
    pub system: HalfinWhittSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_every() -> f64 {
    0.1
}

/// Which control problem to solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Problem {
    Discounted { alpha: f64 },
    Ergodic,
}

/// An HJB solve for the limit diffusion of `system`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub schema_version: u32,
    pub kind: String,
    #[serde(default)]
    pub seed: u64,
    pub problem: Problem,
    pub cost: CostSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    pub system: HalfinWhittSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Any configuration file the command line understands.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyConfig {
    Simulation(SimulationConfig),
    Solve(SolveConfig),
    Experiment(ExperimentConfig),
}

#[derive(Deserialize)]
struct Peek {
    kind: Option<String>,
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::config(
            "schema_version",
            format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

fn check_positive(v: f64, path: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::config(path, format!("must be positive, got {v}")));
    }
    Ok(())
}

impl SimulationConfig {
    pub fn validate(&self, base: &Path) -> Result<()> {
        check_version(self.schema_version)?;
        if self.n == 0 {
            return Err(Error::config("n", "must be positive"));
        }
        check_positive(self.horizon, "horizon")?;
        check_positive(self.every, "every")?;
        let params = self
            .system
            .at(self.n)
            .map_err(|e| Error::config("system", e.to_string()))?;
        if let Some(x0) = &self.x0 {
            if x0.len() != params.d() || x0.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("x0", format!("needs {} finite coordinates", params.d())));
            }
        }
        self.policy.check_files(base, "policy")?;
        Ok(())
    }

    pub fn stem(&self) -> String {
        self.output.stem.clone().unwrap_or_else(|| SIMULATION_KIND.into())
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        self.cost.validate().map_err(|e| Error::config("cost", e.to_string()))?;
        if let Problem::Discounted { alpha } = self.problem {
            check_positive(alpha, "problem.alpha")?;
        }
        check_positive(self.solver.a, "solver.a")?;
        check_positive(self.solver.h, "solver.h")?;
        self.system
            .limit_data()
            .map_err(|e| Error::config("system", e.to_string()))?;
        Ok(())
    }

    pub fn stem(&self) -> String {
        self.output.stem.clone().unwrap_or_else(|| SOLVE_KIND.into())
    }
}

impl AnyConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let peek: Peek = parse_toml(text)?;
        Ok(match peek.kind.as_deref() {
            Some(SIMULATION_KIND) => AnyConfig::Simulation(parse_toml(text)?),
            Some(SOLVE_KIND) => AnyConfig::Solve(parse_toml(text)?),
            _ => AnyConfig::Experiment(ExperimentConfig::from_toml(text)?),
        })
    }

    pub fn validate(&self, base: &Path) -> Result<()> {
        match self {
            AnyConfig::Simulation(c) => c.validate(base),
            AnyConfig::Solve(c) => c.validate(),
            AnyConfig::Experiment(c) => c.validate(base),
        }
    }

    pub fn kind(&self) -> &str {
        match self {
            AnyConfig::Simulation(_) => SIMULATION_KIND,
            AnyConfig::Solve(_) => SOLVE_KIND,
            AnyConfig::Experiment(c) => c.kind.name(),
        }
    }
}
