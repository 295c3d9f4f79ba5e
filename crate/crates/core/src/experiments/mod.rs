//! Cost functionals, Monte Carlo estimators, Lyapunov drift probes, the
//! mean empirical measure and the experiment harness.

mod config;
mod empirical;
mod estimators;
mod lyapunov;
mod suite;

pub use crate::control::{running_cost, CostSpec};
pub use config::{
    content_hash, parse_toml, CpLimitConfig, DiscountedGapConfig, ErgodicGapConfig, ExperimentConfig, ExperimentKind,
    IdentitySuiteConfig, LyapunovConfig, MomentBoundConfig, OccupationConfig, OutputSpec, PolicySpec, ScalingConfig,
    SCHEMA_VERSION,
};
pub use empirical::{
    empirical_generator_residual, record_empirical_measure, EmpiricalRecorder, MeanEmpiricalMeasure, ScaledGenerator,
};
pub use estimators::{
    estimate_discounted, estimate_discounted_at, estimate_ergodic, stationary_moments, DiscountedEstimate, Source,
    StationaryMoments, TRUNCATION_TARGET,
};
pub use lyapunov::{drift_slope, lyapunov_drift_probe, saturated_classes, thresholds, DriftProbe, LyapunovSpec};
pub use suite::{
    approaches, run_cp_limit, run_discounted_gap, run_ergodic_gap, run_experiment, run_identity_suite, run_lyapunov,
    run_moment_bound, run_occupation, run_scaling, sub_seed, write_report, Check, CpOutcome, DiscountedOutcome,
    ErgodicOutcome, ExperimentReport, GapRow, IdentityOutcome, LyapunovOutcome, MomentOutcome, MomentRow,
    OccupationOutcome, ReportMetadata, ScalingOutcome,
};
