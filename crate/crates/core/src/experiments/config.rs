use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::lyapunov::LyapunovSpec;
use crate::control::{read_grid_file, CostSpec, SolverOptions};
use crate::error::{Error, Result};
use crate::policy::{markov_from_control, ControlField, IdlingPolicy, ModifiedPriority, Policy, StaticPriority};
use crate::queue::{HalfinWhittSpec, SystemParams};
use crate::renewal::RenewalSpec;

/// Version of the configuration schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Experiment kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    IdentitySuite,
    CpLimit,
    Scaling,
    DiscountedGap,
    ErgodicGap,
    MomentBound,
    Lyapunov,
    Occupation,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::IdentitySuite => "identity_suite",
            ExperimentKind::CpLimit => "cp_limit",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::DiscountedGap => "discounted_gap",
            ExperimentKind::ErgodicGap => "ergodic_gap",
            ExperimentKind::MomentBound => "moment_bound",
            ExperimentKind::Lyapunov => "lyapunov",
            ExperimentKind::Occupation => "occupation",
        }
    }
}

/// Where reports go.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// File stem; the experiment kind when absent.
    pub stem: Option<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("results"),
            stem: None,
        }
    }
}

/// Scheduling policy of the queueing system.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    #[default]
    ModifiedPriority,
    /// Static priority in index order.
    StaticPriority,
    /// Non-work-conserving caps `⌊fraction·nρ_i⌋`.
    Idling { fraction: f64 },
    /// Markov policy from the control column of a grid file.
    MarkovControl { file: PathBuf },
}

impl PolicySpec {
    pub fn build(&self, params: &SystemParams, base: &Path) -> Result<Box<dyn Policy>> {
        let l = &params.limit;
        Ok(match self {
            PolicySpec::ModifiedPriority => Box::new(ModifiedPriority::new(params.n, &l.rho, &l.gamma)),
            PolicySpec::StaticPriority => Box::new(StaticPriority::by_index(params.n, params.d())),
            PolicySpec::Idling { fraction } => {
                if !(*fraction > 0.0 && *fraction <= 1.0) {
                    return Err(Error::config(
                        "policy.fraction",
                        format!("must lie in (0, 1], got {fraction}"),
                    ));
                }
                Box::new(IdlingPolicy::new(params.n, &l.rho, *fraction))
            }
            PolicySpec::MarkovControl { file } => {
                let path = base.join(file);
                let grid = read_grid_file(std::fs::File::open(&path)?)?;
                if grid.grid.d != params.d() {
                    return Err(Error::config(
                        "policy.file",
                        format!("grid file has d = {}, system has d = {}", grid.grid.d, params.d()),
                    ));
                }
                Box::new(markov_from_control(ControlField::Grid(grid.control_grid()?), params))
            }
        })
    }

    pub fn check_files(&self, base: &Path, path: &str) -> Result<()> {
        if let PolicySpec::MarkovControl { file } = self {
            if !base.join(file).is_file() {
                return Err(Error::config(
                    format!("{path}.file"),
                    format!("{} does not exist", file.display()),
                ));
            }
        }
        Ok(())
    }
}

fn default_points() -> usize {
    100
}
fn default_max_age() -> f64 {
    5.0
}
fn one() -> f64 {
    1.0
}
fn default_identity_tolerance() -> f64 {
    1e-5
}
fn default_kinds() -> Vec<RenewalSpec> {
    vec![
        RenewalSpec::Exponential { rate: None },
        RenewalSpec::Erlang { k: 2, rate: None },
        RenewalSpec::HyperexponentialScv { scv: 2.0 },
    ]
}
fn default_batches() -> usize {
    20
}
fn default_dt() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySuiteConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_max_age")]
    pub max_age: f64,
    #[serde(default = "one")]
    pub rate: f64,
    #[serde(default = "default_identity_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<RenewalSpec>,
}

impl Default for IdentitySuiteConfig {
    fn default() -> Self {
        IdentitySuiteConfig {
            points: default_points(),
            max_age: default_max_age(),
            rate: 1.0,
            tolerance: default_identity_tolerance(),
            kinds: default_kinds(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpLimitConfig {
    pub n: u64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default)]
    pub downtime: RenewalSpec,
    pub horizon: f64,
    pub reps: usize,
    /// Relative tolerance on the mean and variance rates.
    #[serde(default = "cp_tolerance")]
    pub tolerance: f64,
}

fn cp_tolerance() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub system: HalfinWhittSpec,
    pub ns: Vec<u64>,
    #[serde(default)]
    pub policy: PolicySpec,
    pub horizon: f64,
    pub burn_in: f64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    pub diffusion_horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Relative tolerance of the final-n agreement.
    #[serde(default = "scaling_tolerance")]
    pub tolerance: f64,
}

fn scaling_tolerance() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscountedGapConfig {
    pub system: HalfinWhittSpec,
    pub ns: Vec<u64>,
    pub cost: CostSpec,
    pub alpha: f64,
    /// Scaled initial state; the origin when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverOptions,
    pub reps: usize,
    pub diffusion_reps: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "gap_tolerance")]
    pub tolerance: f64,
    /// Agreement required between the solver and diffusion Monte Carlo.
    #[serde(default = "pde_tolerance")]
    pub pde_tolerance: f64,
}

fn gap_tolerance() -> f64 {
    0.1
}
fn pde_tolerance() -> f64 {
    0.02
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicGapConfig {
    pub system: HalfinWhittSpec,
    pub ns: Vec<u64>,
    pub cost: CostSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Radius of the ball where the computed control is followed.
    pub radius: f64,
    pub horizon: f64,
    pub burn_in: f64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "ergodic_tolerance")]
    pub tolerance: f64,
}

fn ergodic_tolerance() -> f64 {
    0.15
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentBoundConfig {
    pub system: HalfinWhittSpec,
    pub ns: Vec<u64>,
    #[serde(default = "two")]
    pub kappa: f64,
    #[serde(default)]
    pub policy: PolicySpec,
    pub horizon: f64,
    pub burn_in: f64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Largest allowed ratio between the estimates.
    #[serde(default = "two")]
    pub max_ratio: f64,
}

fn two() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    pub system: HalfinWhittSpec,
    pub n: u64,
    pub function: LyapunovSpec,
    /// Scaled probe states.
    pub probes: Vec<Vec<f64>>,
    /// Probe step; `0.01 / max μ` when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    pub reps: usize,
    #[serde(default)]
    pub policy: PolicySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationConfig {
    pub system: HalfinWhittSpec,
    /// Diffusion horizon.
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Systems for the queue-side residual.
    #[serde(default)]
    pub ns: Vec<u64>,
    #[serde(default)]
    pub queue_horizon: f64,
    #[serde(default)]
    pub queue_burn_in: f64,
    #[serde(default)]
    pub policy: PolicySpec,
}

/// Deserializes TOML text; errors carry the dotted path of the offending
/// field, or `<document>` for syntax errors.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message().trim()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().message().trim().to_string())
    })
}

/// A versioned experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_suite: Option<IdentitySuiteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_limit: Option<CpLimitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discounted_gap: Option<DiscountedGapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ergodic_gap: Option<ErgodicGapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_bound: Option<MomentBoundConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<OccupationConfig>,
}

fn require<T>(section: &Option<T>, kind: ExperimentKind) -> Result<&T> {
    section.as_ref().ok_or_else(|| {
        Error::config(
            kind.name(),
            format!("section [{}] is required for this kind", kind.name()),
        )
    })
}

fn check_ns(ns: &[u64], path: &str) -> Result<()> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::config(path, "needs at least one positive system size"));
    }
    Ok(())
}

fn check_positive(v: f64, path: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::config(path, format!("must be positive, got {v}")));
    }
    Ok(())
}

fn check_window(horizon: f64, burn_in: f64, path: &str) -> Result<()> {
    if !(horizon > burn_in && burn_in >= 0.0) {
        return Err(Error::config(
            format!("{path}.horizon"),
            format!("horizon {horizon} must exceed burn-in {burn_in}"),
        ));
    }
    Ok(())
}

fn check_system(spec: &HalfinWhittSpec, path: &str) -> Result<()> {
    spec.at(1)
        .map(|_| ())
        .map_err(|e| Error::config(format!("{path}.system"), e.to_string()))
}

impl ExperimentConfig {
    /// Parses TOML, reporting the path of the offending field.
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_toml(text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Checks the schema version, the presence of the kind's section, value
    /// ranges and referenced files (relative to `base`).
    pub fn validate(&self, base: &Path) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let k = self.kind;
        let p = k.name();
        match k {
            ExperimentKind::IdentitySuite => {
                if let Some(c) = &self.identity_suite {
                    if c.points < 2 {
                        return Err(Error::config("identity_suite.points", "needs at least 2 ages"));
                    }
                    check_positive(c.max_age, "identity_suite.max_age")?;
                    check_positive(c.rate, "identity_suite.rate")?;
                    for (i, kind) in c.kinds.iter().enumerate() {
                        kind.build()
                            .map_err(|e| Error::config(format!("identity_suite.kinds[{i}]"), e.to_string()))?;
                    }
                }
            }
            ExperimentKind::CpLimit => {
                let c = require(&self.cp_limit, k)?;
                check_positive(c.beta, "cp_limit.beta")?;
                check_positive(c.theta, "cp_limit.theta")?;
                check_positive(c.horizon, "cp_limit.horizon")?;
                if c.reps < 2 {
                    return Err(Error::config("cp_limit.reps", "needs at least 2 replications"));
                }
                c.downtime
                    .build()
                    .map_err(|e| Error::config("cp_limit.downtime", e.to_string()))?;
            }
            ExperimentKind::Scaling => {
                let c = require(&self.scaling, k)?;
                check_system(&c.system, p)?;
                check_ns(&c.ns, "scaling.ns")?;
                check_window(c.horizon, c.burn_in, p)?;
                check_positive(c.diffusion_horizon, "scaling.diffusion_horizon")?;
                check_positive(c.dt, "scaling.dt")?;
                c.policy.check_files(base, "scaling.policy")?;
            }
            ExperimentKind::DiscountedGap => {
                let c = require(&self.discounted_gap, k)?;
                check_system(&c.system, p)?;
                check_ns(&c.ns, "discounted_gap.ns")?;
                c.cost.validate()?;
                check_positive(c.alpha, "discounted_gap.alpha")?;
                check_positive(c.dt, "discounted_gap.dt")?;
                if let Some(x0) = &c.x0 {
                    if x0.len() != c.system.d() {
                        return Err(Error::config(
                            "discounted_gap.x0",
                            "length must equal the number of classes",
                        ));
                    }
                }
                if c.reps < 20 || c.diffusion_reps < 20 {
                    return Err(Error::config("discounted_gap.reps", "needs at least 20 replications"));
                }
            }
            ExperimentKind::ErgodicGap => {
                let c = require(&self.ergodic_gap, k)?;
                check_system(&c.system, p)?;
                check_ns(&c.ns, "ergodic_gap.ns")?;
                c.cost.require_ergodic()?;
                check_positive(c.radius, "ergodic_gap.radius")?;
                check_window(c.horizon, c.burn_in, p)?;
            }
            ExperimentKind::MomentBound => {
                let c = require(&self.moment_bound, k)?;
                check_system(&c.system, p)?;
                check_ns(&c.ns, "moment_bound.ns")?;
                check_positive(c.kappa, "moment_bound.kappa")?;
                check_window(c.horizon, c.burn_in, p)?;
                c.policy.check_files(base, "moment_bound.policy")?;
            }
            ExperimentKind::Lyapunov => {
                let c = require(&self.lyapunov, k)?;
                check_system(&c.system, p)?;
                c.function.validate()?;
                if c.function.xi.len() != c.system.d() {
                    return Err(Error::config(
                        "lyapunov.function.xi",
                        "length must equal the number of classes",
                    ));
                }
                if let Some((i, _)) = c.probes.iter().enumerate().find(|(_, x)| x.len() != c.system.d()) {
                    return Err(Error::config(format!("lyapunov.probes[{i}]"), "wrong dimension"));
                }
                if let Some(dl) = c.delta {
                    check_positive(dl, "lyapunov.delta")?;
                }
                if c.reps < 2 {
                    return Err(Error::config("lyapunov.reps", "needs at least 2 replications"));
                }
                c.policy.check_files(base, "lyapunov.policy")?;
            }
            ExperimentKind::Occupation => {
                let c = require(&self.occupation, k)?;
                check_system(&c.system, p)?;
                check_window(c.horizon, c.burn_in, p)?;
                check_positive(c.dt, "occupation.dt")?;
                if !c.ns.is_empty() {
                    check_window(c.queue_horizon, c.queue_burn_in, "occupation.queue")?;
                }
                c.policy.check_files(base, "occupation.policy")?;
            }
        }
        Ok(())
    }

    /// File stem of the reports.
    pub fn stem(&self) -> String {
        self.output.stem.clone().unwrap_or_else(|| self.kind.name().to_string())
    }
}

/// Git-style content hash: SHA-256 of `"blob <len>\0" + text`, hex encoded.
pub fn content_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", text.len()).as_bytes());
    h.update(text.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
