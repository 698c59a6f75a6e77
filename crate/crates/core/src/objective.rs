//! Misfit functional and its reduced gradient.
//!
//! ```text
//! J = μ1/2 ∬ (N - N*)² dy dt + μ2/2 ∫ (S - S*)² dt
//! ```
//!
//! `J` depends on the parameters only through the state, so the gradient is
//! `(∂E/∂p)* λ` alone.

use serde::{Deserialize, Serialize};

use crate::adjoint::{solve_adjoint, AdjointTrajectory, ShootingConfig};
use crate::error::{check_len, Error, Result};
use crate::forward::{solve_forward, InitialCondition, SolverConfig, StateTrajectory};
use crate::grid::{Grid, SpaceTimeField};
use crate::kinetics::{rates_dp, ModelConstants, Parameters};

/// Target data on the solver grid and the misfit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub n_star: SpaceTimeField,
    pub s_star: Vec<f64>,
    pub mu1: f64,
    pub mu2: f64,
}

impl Observations {
    /// Noiseless observations copied from a trajectory.
    pub fn from_trajectory(traj: &StateTrajectory, mu1: f64, mu2: f64) -> Self {
        Self {
            n_star: traj.n.clone(),
            s_star: traj.s.clone(),
            mu1,
            mu2,
        }
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        self.n_star.check_shape(grid, "observed N*")?;
        check_len("observed S*", grid.levels(), self.s_star.len())
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.check_grid(grid)?;
        if !(self.mu1 >= 0.0 && self.mu2 >= 0.0) || self.mu1 + self.mu2 == 0.0 {
            return Err(Error::Config(format!(
                "misfit weights must be nonnegative and not both zero (got {}, {})",
                self.mu1, self.mu2
            )));
        }
        if self
            .n_star
            .as_slice()
            .iter()
            .chain(&self.s_star)
            .any(|x| !x.is_finite())
        {
            return Err(Error::Config("observations contain non-finite values".into()));
        }
        Ok(())
    }
}

/// `dJ/d(c_c, c_d, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradientVector(pub [f64; 3]);

impl GradientVector {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

/// Deliberate faults for checking that the verification oracles notice them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FaultInjection {
    /// Flip the sign of the `λ2` term of the gradient.
    pub flip_lambda2: bool,
}

/// Misfit of a trajectory against observations (trapezoid in `y` and `t`).
pub fn eval_j(traj: &StateTrajectory, obs: &Observations) -> Result<f64> {
    let grid = &traj.grid;
    obs.check_grid(grid)?;
    let per_level: Vec<f64> = (0..grid.levels())
        .map(|k| {
            let sq: Vec<f64> = traj
                .n
                .level(k)
                .iter()
                .zip(obs.n_star.level(k))
                .map(|(n, m)| (n - m) * (n - m))
                .collect();
            let ds = traj.s[k] - obs.s_star[k];
            0.5 * obs.mu1 * grid.trapezoid(&sq) + 0.5 * obs.mu2 * ds * ds
        })
        .collect();
    Ok(grid.time_trapezoid(&per_level))
}

/// `(∂E/∂p)* λ`.
///
/// The time sum runs over the levels `0..n_t` with the state and multipliers
/// of the same level, which is how the explicit march couples them.
pub fn assemble_gradient(
    traj: &StateTrajectory,
    adj: &AdjointTrajectory,
    p: &Parameters,
    mc: &ModelConstants,
    fault: FaultInjection,
) -> Result<GradientVector> {
    let grid = &traj.grid;
    adj.l1.check_shape(grid, "lambda1")?;
    adj.l2.check_shape(grid, "lambda2")?;
    adj.l3.check_shape(grid, "lambda3")?;
    let l2_sign = if fault.flip_lambda2 { -1.0 } else { 1.0 };
    let mut g = [0.0; 3];
    let mut integrand = vec![[0.0; 3]; grid.n_y];
    for k in 0..grid.n_t {
        let s = traj.s[k];
        for (i, slot) in integrand.iter_mut().enumerate() {
            let n = traj.n.get(k, i);
            let jac = rates_dp(traj.c.get(k, i), p, mc)?;
            let (l1, l2, l3) = (adj.l1.get(k, i), l2_sign * adj.l2.get(k, i), adj.l3.get(k, i));
            for j in 0..3 {
                let (da, db, dk) = (jac.rows[0][j], jac.rows[1][j], jac.rows[2][j]);
                slot[j] = -l1 * n * (da - n * db) - l2 * n * s * db - l3 * n * s * s * dk;
            }
        }
        for (j, gj) in g.iter_mut().enumerate() {
            let col: Vec<f64> = integrand.iter().map(|r| r[j]).collect();
            *gj += grid.dt * grid.trapezoid(&col);
        }
    }
    let g = GradientVector(g);
    if !g.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(g)
}

/// Everything needed to evaluate the reduced functional at a parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub ic: InitialCondition,
    pub obs: Observations,
    pub grid: Grid,
    pub constants: ModelConstants,
    pub solver: SolverConfig,
    pub shooting: ShootingConfig,
    pub fault: FaultInjection,
}

/// Value and gradient of the reduced functional, with the solves behind them.
#[derive(Debug, Clone)]
pub struct ReducedEvaluation {
    pub j: f64,
    pub gradient: GradientVector,
    pub state: StateTrajectory,
    pub adjoint: AdjointTrajectory,
}

impl Problem {
    pub fn new(ic: InitialCondition, obs: Observations, grid: Grid) -> Self {
        Self {
            ic,
            obs,
            grid,
            constants: ModelConstants::default(),
            solver: SolverConfig::default(),
            shooting: ShootingConfig::default(),
            fault: FaultInjection::default(),
        }
    }

    pub fn forward(&self, p: &Parameters) -> Result<StateTrajectory> {
        solve_forward(p, &self.ic, &self.grid, &self.constants, &self.solver)
    }

    /// `J̃(p)` from one forward solve.
    pub fn value(&self, p: &Parameters) -> Result<f64> {
        eval_j(&self.forward(p)?, &self.obs)
    }

    /// `J̃(p)` and its gradient from one forward and one adjoint solve.
    pub fn evaluate(&self, p: &Parameters) -> Result<ReducedEvaluation> {
        let state = self.forward(p)?;
        let j = eval_j(&state, &self.obs)?;
        let adjoint = solve_adjoint(&state, &self.obs, p, &self.constants, &self.shooting)?;
        let gradient = assemble_gradient(&state, &adjoint, p, &self.constants, self.fault)?;
        Ok(ReducedEvaluation {
            j,
            gradient,
            state,
            adjoint,
        })
    }
}

/// `(J̃(p), J̃'(p))`.
pub fn reduced_objective(problem: &Problem, p: &Parameters) -> Result<(f64, GradientVector)> {
    let e = problem.evaluate(p)?;
    Ok((e.j, e.gradient))
}
