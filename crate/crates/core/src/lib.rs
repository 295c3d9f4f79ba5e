//! Simulation and control of multiclass many-server queues with service
//! interruptions in the Halfin–Whitt regime.

pub mod control;
pub mod diffusion;
pub mod error;
pub mod experiments;
pub mod io;
pub mod par;
pub mod policy;
pub mod quad;
pub mod queue;
pub mod renewal;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
