//! Discounted and ergodic HJB solvers for the limit process (`d ≤ 2`),
//! Markov-control extraction and ε-optimal shaping.

mod cost;
mod file;
mod grid;
mod hamiltonian;
mod shaping;
mod solver;

pub use cost::{running_cost, CostSpec};
pub use file::{read_grid_file, write_grid_file, GridFile};
pub use grid::{stationary_scale, Grid};
pub use hamiltonian::{hamiltonian_objective, minimize_hamiltonian};
pub use shaping::epsilon_optimal_control;
pub use solver::{
    solve_discounted, solve_ergodic, AlphaRecord, Boundary, IterationRecord, SolveMode, SolverOptions, SolverOutput,
};
