//! Growth of an avascular tumour spheroid and recovery of its nutrient
//! kinetics from data.
//!
//! The model is solved on the front-fixed coordinate `y = r / S(t)`. The
//! [`forward`] module marches live-cell density, nutrient and velocity in
//! time; [`adjoint`] marches the Lagrange multipliers backwards;
//! [`objective`] combines the two into the value and gradient of the misfit
//! and [`optimizer`] minimizes it over a box of admissible parameters.

// `!(x > 0.0)` is used on purpose: it also rejects NaN. Loops over the
// three parameter components index several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjoint;
pub mod error;
pub mod forward;
pub mod grid;
pub mod io;
pub mod kinetics;
pub mod objective;
pub mod optimizer;
mod tridiag;
pub mod verify;

pub use adjoint::{solve_adjoint, AdjointTrajectory, ShootingConfig};
pub use error::{Error, Result};
pub use forward::{grow_from_seed, solve_forward, InitialCondition, SolverConfig, StateTrajectory};
pub use grid::{Grid, SpaceField, SpaceTimeField};
pub use io::{NoiseSpec, NoiseTarget, RunConfig, SweepResult, SweepSpec};
pub use kinetics::{ModelConstants, Parameters};
pub use objective::{eval_j, reduced_objective, FaultInjection, GradientVector, Observations, Problem};
pub use optimizer::{minimize, AdmissibleBox, OptimizationResult, OptimizerConfig, StopRule};
pub use verify::{grad_check, residual_audit, GradCheckReport, ResidualAudit};
