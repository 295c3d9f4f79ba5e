//! Discrete-event simulation of the multiclass many-server system in an
//! up–down environment, and its diffusion-scaling transforms.

mod engine;
mod observe;
mod params;
mod scale;
mod state;

pub use engine::{Engine, EventKind, EventRecord, InitialCondition, TrajectoryStats};
pub use observe::{downtime_scaled, Observer, Occupancy, SnapshotRecorder, TimeAverage};
pub use params::{
    validate_halfin_whitt, ClassParams, ClassSpec, EnvironmentParams, EnvironmentSpec, HalfinWhittSpec, LimitData,
    ScalingReport, ScalingRow, SystemParams,
};
pub use scale::{augmented_scaled, diffusion_scale, queue_scale, residual_augmented, server_scale, unscale};
pub use state::{write_snapshots_csv, Phase, Snapshot, SystemState};
