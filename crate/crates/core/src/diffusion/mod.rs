//! The limiting controlled jump diffusion: drift, simulation, generator and
//! occupation-measure residuals.

mod generator;
mod model;
mod simulate;

pub use generator::{
    generator_apply, generator_general, occupation_residual, test_function_library, CutoffPolynomial, Factor,
    Polynomial, TestFunction,
};
pub use model::{DiffusionModel, JumpMeasure, JumpQuadrature, ModelSummary};
pub use simulate::{run_path, simulate, simulate_recorded, DiffPath, JumpRecord, PathEvent};
