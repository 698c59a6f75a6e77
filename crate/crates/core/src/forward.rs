//! The direct problem on the fixed domain `y = r / S(t) ∈ [0, 1]`:
//!
//! ```text
//! N_t + (V - y S') / S N_y = N (a(C) - b(C) N)
//! C_yy + 2/y C_y          = k(C) S^2 N,   C_y(0) = 0, C(1) = 1
//! V_y + 2/y V             = b(C) N S,     V(0) = 0
//! S'                      = V(1)
//! ```
//!
//! Each time level solves the quasi-steady nutrient problem, integrates the
//! velocity, and then advances `N` (first-order upwind, forward Euler) and `S`
//! (forward Euler) to the next level.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::{Grid, SpaceField, SpaceTimeField};
use crate::kinetics::{rates, ModelConstants, Parameters};
use crate::tridiag;

/// Tolerances and limits of the forward solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Max-norm tolerance on the Picard update of the nutrient problem.
    pub bvp_tol: f64,
    pub max_picard: usize,
    /// Max-norm tolerance for the discrete residual audit.
    pub residual_tol: f64,
    /// Give up seed growth after this much dimensionless time.
    pub max_seed_time: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            bvp_tol: 1e-10,
            max_picard: 100,
            residual_tol: 1e-6,
            max_seed_time: 200.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bvp_tol > 0.0 && self.residual_tol > 0.0 && self.max_seed_time > 0.0) || self.max_picard == 0 {
            return Err(Error::Config(format!("invalid solver config {self:?}")));
        }
        Ok(())
    }
}

/// Initial live-cell profile and radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub n0: SpaceField,
    pub s0: f64,
}

impl InitialCondition {
    /// A single cell of live tissue: `N ≡ 1`, `S = 1`.
    pub fn seed(n_y: usize) -> Self {
        Self {
            n0: vec![1.0; n_y],
            s0: 1.0,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        check_len("initial profile", grid.n_y, self.n0.len())?;
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::Config(format!(
                "initial radius must be positive (got {})",
                self.s0
            )));
        }
        if self.n0.iter().any(|&n| !(0.0..=1.0).contains(&n)) {
            return Err(Error::Config("initial profile must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Solution of the direct problem on every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub grid: Grid,
    pub n: SpaceTimeField,
    pub c: SpaceTimeField,
    pub v: SpaceTimeField,
    pub s: Vec<f64>,
    /// `S'(t_k) = V(1, t_k)`.
    pub s_prime: Vec<f64>,
}

/// Summary of the physical invariants of a trajectory. Violations are
/// reported, never clamped away.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantReport {
    pub min_n: f64,
    pub max_n: f64,
    pub min_c: f64,
    pub max_c: f64,
    /// Largest decrease `C_i - C_{i+1}` between neighbouring nodes.
    pub max_c_decrease: f64,
    pub max_abs_c_boundary_error: f64,
    pub max_abs_v_origin: f64,
    pub min_s: f64,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.min_n >= 0.0
            && self.max_n <= 1.0
            && self.min_c >= 0.0
            && self.max_c <= 1.0
            && self.max_c_decrease <= 0.0
            && self.max_abs_c_boundary_error == 0.0
            && self.max_abs_v_origin == 0.0
            && self.min_s > 0.0
    }
}

impl StateTrajectory {
    pub fn invariant_report(&self) -> InvariantReport {
        let fold = |f: &SpaceTimeField| {
            f.as_slice()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(x), hi.max(x))
                })
        };
        let (min_n, max_n) = fold(&self.n);
        let (min_c, max_c) = fold(&self.c);
        let mut max_c_decrease = f64::NEG_INFINITY;
        let mut max_abs_c_boundary_error = 0.0_f64;
        let mut max_abs_v_origin = 0.0_f64;
        for k in 0..self.grid.levels() {
            let c = self.c.level(k);
            for w in c.windows(2) {
                max_c_decrease = max_c_decrease.max(w[0] - w[1]);
            }
            max_abs_c_boundary_error = max_abs_c_boundary_error.max((c[c.len() - 1] - 1.0).abs());
            max_abs_v_origin = max_abs_v_origin.max(self.v.get(k, 0).abs());
        }
        InvariantReport {
            min_n,
            max_n,
            min_c,
            max_c,
            max_c_decrease,
            max_abs_c_boundary_error,
            max_abs_v_origin,
            min_s: self.s.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Radius at the final level.
    pub fn final_radius(&self) -> f64 {
        self.s[self.s.len() - 1]
    }
}

/// Solves `L C - r C = f` with `L = d²/dy² + 2/y d/dy`, `C_y(0) = 0` and
/// `C(1) = 1`. At the origin `L → 3 d²/dy²`.
///
/// The unknown is the deviation `D = C - 1` (so `L D - r D = f + r`,
/// `D(1) = 0`), which keeps a flat profile exact.
fn solve_radial(grid: &Grid, reaction: &[f64], source: &[f64]) -> Vec<f64> {
    let m = grid.n_y - 1;
    let h2 = grid.h() * grid.h();
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let rhs: Vec<f64> = (0..m).map(|i| source[i] + reaction[i]).collect();

    // ghost node D_{-1} = D_1
    diag[0] = -6.0 / h2 - reaction[0];
    upper[0] = 6.0 / h2;
    for i in 1..m {
        let inv_i = 1.0 / i as f64;
        lower[i] = (1.0 - inv_i) / h2;
        diag[i] = -2.0 / h2 - reaction[i];
        upper[i] = (1.0 + inv_i) / h2;
    }
    upper[m - 1] = 0.0;

    let mut c: Vec<f64> = tridiag::solve(&lower, &diag, &upper, &rhs)
        .into_iter()
        .map(|d| 1.0 + d)
        .collect();
    c.push(1.0);
    c
}

/// Quasi-steady nutrient profile for one level.
///
/// The consumption `k(C) S² N` is written as `κ(C) S² N C` with
/// `κ = beta_hat_a / (c_c + C)`; each Picard sweep freezes `κ` and solves the
/// resulting linear tridiagonal problem.
pub fn solve_nutrient(
    n: &[f64],
    s: f64,
    p: &Parameters,
    mc: &ModelConstants,
    grid: &Grid,
    cfg: &SolverConfig,
) -> Result<SpaceField> {
    solve_nutrient_from(n, s, p, mc, grid, cfg, None)
}

pub(crate) fn solve_nutrient_from(
    n: &[f64],
    s: f64,
    p: &Parameters,
    mc: &ModelConstants,
    grid: &Grid,
    cfg: &SolverConfig,
    guess: Option<&[f64]>,
) -> Result<SpaceField> {
    check_len("nutrient: N slice", grid.n_y, n.len())?;
    if !(s > 0.0) {
        return Err(Error::Domain(format!("radius must be positive (got {s})")));
    }
    let mut c: Vec<f64> = match guess {
        Some(g) => g.to_vec(),
        None => vec![1.0; grid.n_y],
    };
    let zero = vec![0.0; grid.n_y];
    let s2 = s * s;
    let mut last_update = f64::INFINITY;
    for _ in 0..cfg.max_picard {
        let reaction: Vec<f64> = c
            .iter()
            .zip(n)
            .map(|(&ci, &ni)| mc.beta_hat_a / (p.c_c + ci.max(0.0)) * s2 * ni)
            .collect();
        let next = solve_radial(grid, &reaction, &zero);
        last_update = next.iter().zip(&c).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        c = next;
        if !last_update.is_finite() {
            return Err(Error::NonFinite("nutrient iteration"));
        }
        if last_update < cfg.bvp_tol {
            return Ok(c);
        }
    }
    Err(Error::NutrientNonConvergence {
        iterations: cfg.max_picard,
        last_update,
    })
}

/// `∫_{y_{i-1}}^{y_i} s² g(s) ds` with `g` linear between the nodal values.
fn weighted_cell_integral(y0: f64, y1: f64, g0: f64, g1: f64) -> f64 {
    let h = y1 - y0;
    // ∫ s² (y1 - s) ds and ∫ s² (s - y0) ds over [y0, y1]
    let m2 = (y1.powi(3) - y0.powi(3)) / 3.0;
    let m3 = (y1.powi(4) - y0.powi(4)) / 4.0;
    let w0 = (y1 * m2 - m3) / h;
    let w1 = (m3 - y0 * m2) / h;
    w0 * g0 + w1 * g1
}

/// `V(y) = y^{-2} ∫_0^y s² g(s) ds` for nodal source values `g`.
pub(crate) fn integrate_velocity(grid: &Grid, g: &[f64]) -> SpaceField {
    let mut v = vec![0.0; grid.n_y];
    let mut acc = 0.0;
    for i in 1..grid.n_y {
        let (y0, y1) = (grid.y(i - 1), grid.y(i));
        acc += weighted_cell_integral(y0, y1, g[i - 1], g[i]);
        v[i] = acc / (y1 * y1);
    }
    v
}

/// Velocity profile from `(y² V)_y = y² b(C) N S`, `V(0) = 0`.
pub fn solve_velocity(
    n: &[f64],
    c: &[f64],
    s: f64,
    p: &Parameters,
    mc: &ModelConstants,
    grid: &Grid,
) -> Result<SpaceField> {
    check_len("velocity: N slice", grid.n_y, n.len())?;
    check_len("velocity: C slice", grid.n_y, c.len())?;
    let g = n
        .iter()
        .zip(c)
        .map(|(&ni, &ci)| Ok(rates(ci, p, mc)?.b * ni * s))
        .collect::<Result<Vec<f64>>>()?;
    Ok(integrate_velocity(grid, &g))
}

/// `V_y` from the velocity equation itself: `V_y = bNS - 2V/y`, and
/// `bNS / 3` at the origin.
pub(crate) fn velocity_slope(grid: &Grid, g: &[f64], v: &[f64]) -> Vec<f64> {
    (0..grid.n_y)
        .map(|i| {
            if i == 0 {
                g[0] / 3.0
            } else {
                g[i] - 2.0 * v[i] / grid.y(i)
            }
        })
        .collect()
}

/// Advection speed `(V - y S') / S` in the fixed frame.
pub(crate) fn frame_speed(grid: &Grid, v: &[f64], s: f64, s_prime: f64) -> Vec<f64> {
    (0..grid.n_y).map(|i| (v[i] - grid.y(i) * s_prime) / s).collect()
}

/// Upwind difference of `f` at node `i` for advection speed `w`.
#[inline]
pub(crate) fn upwind_slope(f: &[f64], i: usize, w: f64, h: f64) -> f64 {
    let last = f.len() - 1;
    if (w > 0.0 && i > 0) || i == last {
        (f[i] - f[i - 1]) / h
    } else {
        (f[i + 1] - f[i]) / h
    }
}

/// One explicit step of `N_t + w N_y = N (a - b N)`.
pub(crate) fn advect_react(n: &[f64], w: &[f64], a: &[f64], b: &[f64], dt: f64, h: f64) -> Result<SpaceField> {
    for (i, &wi) in w.iter().enumerate() {
        let courant = wi.abs() * dt / h;
        if courant > 1.0 {
            return Err(Error::Cfl { courant, node: i });
        }
    }
    let out: Vec<f64> = (0..n.len())
        .map(|i| {
            let adv = if w[i] == 0.0 {
                0.0
            } else {
                w[i] * upwind_slope(n, i, w[i], h)
            };
            n[i] + dt * (-adv + n[i] * (a[i] - b[i] * n[i]))
        })
        .collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("density step"));
    }
    Ok(out)
}

/// Advances the live-cell fraction by `dt`.
#[allow(clippy::too_many_arguments)]
pub fn step_density(
    n: &[f64],
    c: &[f64],
    v: &[f64],
    s: f64,
    s_prime: f64,
    p: &Parameters,
    mc: &ModelConstants,
    grid: &Grid,
    dt: f64,
) -> Result<SpaceField> {
    check_len("density: N slice", grid.n_y, n.len())?;
    check_len("density: C slice", grid.n_y, c.len())?;
    check_len("density: V slice", grid.n_y, v.len())?;
    let mut a = Vec::with_capacity(grid.n_y);
    let mut b = Vec::with_capacity(grid.n_y);
    for &ci in c {
        let r = rates(ci, p, mc)?;
        a.push(r.a);
        b.push(r.b);
    }
    let w = frame_speed(grid, v, s, s_prime);
    advect_react(n, &w, &a, &b, dt, grid.h())
}

/// Forward Euler step of `S' = V(1)`.
pub fn step_radius(s: f64, v_boundary: f64, dt: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::RadiusCollapse(s));
    }
    let next = s + dt * v_boundary;
    if !(next > 0.0) {
        return Err(Error::RadiusCollapse(next));
    }
    Ok(next)
}

/// Nutrient and velocity at one level given `N` and `S`.
fn close_level(
    n: &[f64],
    s: f64,
    p: &Parameters,
    mc: &ModelConstants,
    grid: &Grid,
    cfg: &SolverConfig,
    guess: Option<&[f64]>,
) -> Result<(SpaceField, SpaceField)> {
    let c = solve_nutrient_from(n, s, p, mc, grid, cfg, guess)?;
    let v = solve_velocity(n, &c, s, p, mc, grid)?;
    Ok((c, v))
}

/// Marches the direct problem over `[0, T]`.
pub fn solve_forward(
    p: &Parameters,
    ic: &InitialCondition,
    grid: &Grid,
    mc: &ModelConstants,
    cfg: &SolverConfig,
) -> Result<StateTrajectory> {
    grid.validate()?;
    p.validate()?;
    ic.validate(grid)?;

    let levels = grid.levels();
    let mut n_f = SpaceTimeField::zeros(grid.n_y, levels);
    let mut c_f = SpaceTimeField::zeros(grid.n_y, levels);
    let mut v_f = SpaceTimeField::zeros(grid.n_y, levels);
    let mut s = Vec::with_capacity(levels);
    let mut s_prime = Vec::with_capacity(levels);

    let mut n = ic.n0.clone();
    let mut radius = ic.s0;
    let mut prev_c: Option<Vec<f64>> = None;
    for k in 0..levels {
        let (c, v) = close_level(&n, radius, p, mc, grid, cfg, prev_c.as_deref())?;
        let sp = v[grid.n_y - 1];
        n_f.set_level(k, &n);
        c_f.set_level(k, &c);
        v_f.set_level(k, &v);
        s.push(radius);
        s_prime.push(sp);
        if k + 1 < levels {
            n = step_density(&n, &c, &v, radius, sp, p, mc, grid, grid.dt)?;
            radius = step_radius(radius, sp, grid.dt)?;
        }
        prev_c = Some(c);
    }

    Ok(StateTrajectory {
        grid: *grid,
        n: n_f,
        c: c_f,
        v: v_f,
        s,
        s_prime,
    })
}

/// Grows a single seeded cell until its radius reaches `target_s`.
///
/// The march uses `grid.dt`; the last step is shortened so that the returned
/// radius equals `target_s` exactly.
pub fn grow_from_seed(
    p: &Parameters,
    mc: &ModelConstants,
    grid: &Grid,
    cfg: &SolverConfig,
    target_s: f64,
) -> Result<InitialCondition> {
    grid.validate()?;
    p.validate()?;
    let mut state = InitialCondition::seed(grid.n_y);
    if target_s <= state.s0 {
        return Ok(state);
    }
    let mut t = 0.0;
    let mut guess: Option<Vec<f64>> = None;
    while state.s0 < target_s {
        if t > cfg.max_seed_time {
            return Err(Error::SeedGrowth {
                target: target_s,
                max_time: cfg.max_seed_time,
                reached: state.s0,
            });
        }
        let (c, v) = close_level(&state.n0, state.s0, p, mc, grid, cfg, guess.as_deref())?;
        let sp = v[grid.n_y - 1];
        let mut dt = grid.dt;
        let last = sp > 0.0 && state.s0 + dt * sp >= target_s;
        if last {
            dt = (target_s - state.s0) / sp;
        }
        state.n0 = step_density(&state.n0, &c, &v, state.s0, sp, p, mc, grid, dt)?;
        state.s0 = if last { target_s } else { step_radius(state.s0, sp, dt)? };
        t += dt;
        guess = Some(c);
    }
    log::debug!("seed reached S = {target_s} after t = {t:.4}");
    Ok(state)
}
