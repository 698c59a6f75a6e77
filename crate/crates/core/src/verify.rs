//! Independent checks: finite-difference gradients and discrete residuals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::forward::{InitialCondition, StateTrajectory};
use crate::grid::Grid;
use crate::kinetics::{rates, ModelConstants, Parameters};
use crate::objective::{GradientVector, Problem};
use crate::optimizer::AdmissibleBox;

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_REL_TOL: f64 = 1e-2;
/// Denominator floor of the relative error.
pub const REL_FLOOR: f64 = 1e-12;
/// Differences below this count as agreement; central differences of a
/// functional that vanishes at its minimum do not return an exact zero.
pub const DEFAULT_ABS_TOL: f64 = 1e-8;

/// Central differences of `f` at `p`. The six evaluations run in parallel and
/// are combined in a fixed order.
pub fn fd_gradient<F>(f: F, p: &Parameters, h: f64) -> Result<GradientVector>
where
    F: Fn(&Parameters) -> Result<f64> + Sync,
{
    let base = p.to_array();
    let values = (0..6)
        .into_par_iter()
        .map(|m| {
            let mut q = base;
            q[m / 2] += if m % 2 == 0 { h } else { -h };
            f(&Parameters::from_array(q))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut g = [0.0; 3];
    for (j, gj) in g.iter_mut().enumerate() {
        *gj = (values[2 * j] - values[2 * j + 1]) / (2.0 * h);
    }
    Ok(GradientVector(g))
}

/// Finite-difference gradient of the reduced functional.
pub fn fd_gradient_of(problem: &Problem, p: &Parameters, h: f64) -> Result<GradientVector> {
    fd_gradient(|q| problem.value(q), p, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub p: Parameters,
    pub j: f64,
    pub adjoint_gradient: GradientVector,
    pub fd_gradient: GradientVector,
    pub rel_errors: [f64; 3],
    pub abs_errors: [f64; 3],
    pub h: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub passed: bool,
}

/// Componentwise relative error `|a - b| / max(|b|, floor)`.
pub fn relative_errors(a: &GradientVector, reference: &GradientVector) -> [f64; 3] {
    let mut out = [0.0; 3];
    for j in 0..3 {
        out[j] = (a.0[j] - reference.0[j]).abs() / reference.0[j].abs().max(REL_FLOOR);
    }
    out
}

/// Compares the adjoint gradient with central differences.
///
/// A component passes if its relative error is below `rel_tol` or its
/// absolute difference is below `abs_tol`.
pub fn grad_check(problem: &Problem, p: &Parameters, h: f64, rel_tol: f64, abs_tol: f64) -> Result<GradCheckReport> {
    let eval = problem.evaluate(p)?;
    let fd = fd_gradient_of(problem, p, h)?;
    let rel_errors = relative_errors(&eval.gradient, &fd);
    let mut abs_errors = [0.0; 3];
    for j in 0..3 {
        abs_errors[j] = (eval.gradient.0[j] - fd.0[j]).abs();
    }
    let passed = (0..3).all(|j| rel_errors[j] < rel_tol || abs_errors[j] < abs_tol);
    Ok(GradCheckReport {
        p: *p,
        j: eval.j,
        adjoint_gradient: eval.gradient,
        fd_gradient: fd,
        rel_errors,
        abs_errors,
        h,
        rel_tol,
        abs_tol,
        passed,
    })
}

/// `count` points drawn uniformly from the box.
pub fn sample_box(bounds: &AdmissibleBox, count: usize, seed: u64) -> Vec<Parameters> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut a = [0.0; 3];
            for (j, x) in a.iter_mut().enumerate() {
                *x = rng.gen_range(bounds.lo[j]..=bounds.hi[j]);
            }
            Parameters::from_array(a)
        })
        .collect()
}

/// Whether a residual row should vanish to rounding or is a truncation
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Discrete,
    Truncation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualRow {
    pub name: &'static str,
    pub kind: ResidualKind,
    pub max_abs: f64,
}

/// Max-norm residuals of the nine constraint rows on a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualAudit {
    pub rows: Vec<ResidualRow>,
}

impl ResidualAudit {
    /// True if every discrete row is below `tol`.
    pub fn holds(&self, tol: f64) -> bool {
        self.rows
            .iter()
            .filter(|r| r.kind == ResidualKind::Discrete)
            .all(|r| r.max_abs <= tol)
    }

    pub fn row(&self, name: &str) -> Option<&ResidualRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Evaluates every row of the constraint operator on `traj`.
///
/// The equations are the discrete ones the solver is meant to satisfy,
/// written out again here rather than calling the solver:
///
/// * density: forward Euler with first-order upwinding,
/// * velocity: `y²V` differenced over a cell against Simpson's rule for
///   `∫ s² bNS ds` with `bNS` linear on the cell (exact),
/// * nutrient: the three-point radial stencil with the symmetric ghost node,
///   scaled by `h²`,
/// * radius: forward Euler.
///
/// `C_y(0)` is measured by a second-order one-sided difference and is a
/// truncation estimate; all other rows should vanish to solver tolerance.
pub fn residual_audit(
    traj: &StateTrajectory,
    ic: &InitialCondition,
    p: &Parameters,
    mc: &ModelConstants,
) -> Result<ResidualAudit> {
    let grid: &Grid = &traj.grid;
    let (h, dt, m) = (grid.h(), grid.dt, grid.n_y);
    let mut density = 0.0_f64;
    let mut velocity = 0.0_f64;
    let mut nutrient = 0.0_f64;
    let mut radius = 0.0_f64;
    let mut slope_origin = 0.0_f64;
    let mut c_boundary = 0.0_f64;
    let mut v_origin = 0.0_f64;

    for k in 0..grid.levels() {
        let n = traj.n.level(k);
        let c = traj.c.level(k);
        let v = traj.v.level(k);
        let s = traj.s[k];
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        let mut kk = vec![0.0; m];
        for i in 0..m {
            let r = rates(c[i], p, mc)?;
            (a[i], b[i], kk[i]) = (r.a, r.b, r.k);
        }

        // nutrient, on the deviation C - 1
        let d: Vec<f64> = c.iter().map(|x| x - 1.0).collect();
        for i in 0..m - 1 {
            let lap = if i == 0 {
                6.0 * (d[1] - d[0])
            } else {
                let inv = 1.0 / i as f64;
                (1.0 + inv) * d[i + 1] - 2.0 * d[i] + (1.0 - inv) * d[i - 1]
            };
            nutrient = nutrient.max((lap - h * h * kk[i] * s * s * n[i]).abs());
        }
        c_boundary = c_boundary.max((c[m - 1] - 1.0).abs());
        slope_origin = slope_origin.max(((-3.0 * c[0] + 4.0 * c[1] - c[2]) / (2.0 * h)).abs());

        let g: Vec<f64> = (0..m).map(|i| b[i] * n[i] * s).collect();
        for i in 0..m - 1 {
            let (y0, y1) = (grid.y(i), grid.y(i + 1));
            let ym = 0.5 * (y0 + y1);
            let simpson =
                (y1 - y0) / 6.0 * (y0 * y0 * g[i] + 4.0 * ym * ym * 0.5 * (g[i] + g[i + 1]) + y1 * y1 * g[i + 1]);
            let r = y1 * y1 * v[i + 1] - y0 * y0 * v[i] - simpson;
            velocity = velocity.max(r.abs() / (y1 - y0));
        }
        v_origin = v_origin.max(v[0].abs());

        if k < grid.n_t {
            let next = traj.n.level(k + 1);
            let sp = v[m - 1];
            for i in 0..m {
                let w = (v[i] - grid.y(i) * sp) / s;
                let slope = if w > 0.0 && i > 0 || i == m - 1 {
                    (n[i] - n[i - 1]) / h
                } else {
                    (n[i + 1] - n[i]) / h
                };
                let adv = if w == 0.0 { 0.0 } else { w * slope };
                let r = (next[i] - n[i]) / dt + adv - n[i] * (a[i] - b[i] * n[i]);
                density = density.max(r.abs());
            }
            radius = radius.max(((traj.s[k + 1] - s) / dt - sp).abs());
        }
    }

    let initial_n = traj
        .n
        .level(0)
        .iter()
        .zip(&ic.n0)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()));
    let row = |name, kind, max_abs| ResidualRow { name, kind, max_abs };
    use ResidualKind::*;
    Ok(ResidualAudit {
        rows: vec![
            row("density", Discrete, density),
            row("velocity", Discrete, velocity),
            row("nutrient", Discrete, nutrient),
            row("radius", Discrete, radius),
            row("nutrient_slope_origin", Truncation, slope_origin),
            row("nutrient_boundary", Discrete, c_boundary),
            row("velocity_origin", Discrete, v_origin),
            row("initial_density", Discrete, initial_n),
            row("initial_radius", Discrete, (traj.s[0] - ic.s0).abs()),
        ],
    })
}
