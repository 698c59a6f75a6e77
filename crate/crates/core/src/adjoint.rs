//! Backward-in-time multiplier system of the tumour model.
//!
//! The multipliers `λ1..λ9` pair with the nine rows of the constraint
//! operator (density, velocity and nutrient equations, the free-boundary
//! condition, three boundary conditions and two initial conditions):
//!
//! ```text
//! -λ1_t - (V - yS')/S λ1_y - ((V_y - S')/S + a - 2bN) λ1 - bS λ2 - kS² λ3 = μ1 (N* - N)
//! λ2_y - 2/y λ2 - N_y/S λ1 = 0,                         λ2(1) = -λ4
//! λ3_yy - 2/y λ3_y + (2/y² - k_C N S²) λ3 - b_C N S λ2 - N (a_C - b_C N) λ1 = 0,
//!                                                       λ3_y(0) = 0, λ3(1) = 0
//! λ4_t = ∫ (N_y V/S² λ1 - y/S ∂t(N_y λ1) + bN λ2 + 2kNS λ3) dy + μ2 (S* - S)
//! λ1(·, T) = 0,  λ4(T) = -∫ y N_y λ1 / S dy at T
//! ```
//!
//! Levels are visited from `T` down to `0`. At each level `λ1` and `λ4` are
//! stepped first, then `λ2` is integrated inwards from `y = 1` and `λ3` is
//! found by shooting on its slope at `y = 1`. Both spatial problems are
//! singular at the origin; they are integrated down to `y = ε` and extended to
//! `y = 0` with a first-order Taylor step.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::forward::{frame_speed, upwind_slope, velocity_slope, StateTrajectory};
use crate::grid::{derivative, interpolate, Grid, SpaceField, SpaceTimeField};
use crate::kinetics::{rates, rates_dc, ModelConstants, Parameters};
use crate::objective::Observations;

/// Settings of the `λ3` shooting solve and the origin cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    /// Cutoff `ε` as a fraction of the grid spacing.
    pub epsilon_fraction: f64,
    /// RK4 steps on `[ε, y_1]`.
    pub origin_substeps: usize,
    pub root_tol: f64,
    pub bracket: (f64, f64),
    pub max_root_iter: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            epsilon_fraction: 0.01,
            origin_substeps: 16,
            root_tol: 1e-12,
            bracket: (-1.0, 1.0),
            max_root_iter: 100,
        }
    }
}

impl ShootingConfig {
    pub fn epsilon(&self, grid: &Grid) -> f64 {
        self.epsilon_fraction * grid.h()
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.epsilon_fraction;
        if !(f > 0.0 && f < 1.0) || self.origin_substeps == 0 {
            return Err(Error::Config(format!(
                "epsilon_fraction must lie in (0, 1) and origin_substeps be positive (got {f}, {})",
                self.origin_substeps
            )));
        }
        if !(self.root_tol > 0.0) || !(self.bracket.0 < self.bracket.1) || self.max_root_iter == 0 {
            return Err(Error::Config(format!("invalid shooting config {self:?}")));
        }
        Ok(())
    }
}

/// All nine multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub l1: SpaceTimeField,
    pub l2: SpaceTimeField,
    pub l3: SpaceTimeField,
    pub l4: Vec<f64>,
    pub l5: Vec<f64>,
    pub l6: Vec<f64>,
    pub l7: Vec<f64>,
    pub l8: SpaceField,
    pub l9: f64,
    /// `λ4_t` used by the backward step out of each level (`0` at level 0).
    pub l4_rate: Vec<f64>,
}

impl AdjointTrajectory {
    /// Largest absolute value over every multiplier.
    pub fn max_abs(&self) -> f64 {
        let series = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        [
            self.l1.max_abs(),
            self.l2.max_abs(),
            self.l3.max_abs(),
            series(&self.l4),
            series(&self.l5),
            series(&self.l6),
            series(&self.l7),
            series(&self.l8),
            self.l9.abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Coefficients of the state that the multiplier equations need at one level.
#[derive(Debug, Clone)]
pub(crate) struct LevelCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub k: Vec<f64>,
    pub da: Vec<f64>,
    pub db: Vec<f64>,
    pub dk: Vec<f64>,
    pub n_y: Vec<f64>,
    pub v_y: Vec<f64>,
    pub speed: Vec<f64>,
}

impl LevelCoefficients {
    pub(crate) fn new(traj: &StateTrajectory, k: usize, p: &Parameters, mc: &ModelConstants) -> Result<Self> {
        let grid = &traj.grid;
        let n = traj.n.level(k);
        let c = traj.c.level(k);
        let v = traj.v.level(k);
        let s = traj.s[k];
        let m = grid.n_y;
        let (mut a, mut b, mut kk) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
        let (mut da, mut db, mut dk) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
        for &ci in c {
            let r = rates(ci, p, mc)?;
            let d = rates_dc(ci, p, mc)?;
            a.push(r.a);
            b.push(r.b);
            kk.push(r.k);
            da.push(d.da);
            db.push(d.db);
            dk.push(d.dk);
        }
        let g: Vec<f64> = b.iter().zip(n).map(|(bi, ni)| bi * ni * s).collect();
        Ok(Self {
            v_y: velocity_slope(grid, &g, v),
            n_y: derivative(n, grid.h()),
            speed: frame_speed(grid, v, s, traj.s_prime[k]),
            a,
            b,
            k: kk,
            da,
            db,
            dk,
        })
    }
}

/// Trapezoid weight of level `k` relative to `dt`.
pub(crate) fn level_weight(grid: &Grid, k: usize) -> f64 {
    if k == 0 || k == grid.n_t {
        0.5
    } else {
        1.0
    }
}

/// Terminal multipliers at `t = T`: `(λ1, λ2, λ3, λ4)`.
pub fn terminal_slice(
    traj: &StateTrajectory,
    p: &Parameters,
    mc: &ModelConstants,
    sc: &ShootingConfig,
) -> Result<(SpaceField, SpaceField, SpaceField, f64)> {
    let grid = &traj.grid;
    let last = grid.n_t;
    let l1 = vec![0.0; grid.n_y];
    let n_y = derivative(traj.n.level(last), grid.h());
    let l4 = boundary_flux(grid, &n_y, &l1, traj.s[last]);
    let coef = LevelCoefficients::new(traj, last, p, mc)?;
    let l2 = solve_lambda2_ode(&l1, &n_y, traj.s[last], l4, grid, sc)?;
    let l3 = solve_lambda3_bvp(&l1, &l2, traj.n.level(last), traj.s[last], &coef, grid, sc)?.values;
    Ok((l1, l2, l3, l4))
}

/// `-∫ y N_y λ1 / S dy`, the value of `λ4` forced by the boundary terms.
fn boundary_flux(grid: &Grid, n_y: &[f64], l1: &[f64], s: f64) -> f64 {
    let f: Vec<f64> = (0..grid.n_y).map(|i| grid.y(i) * n_y[i] * l1[i] / s).collect();
    -grid.trapezoid(&f)
}

/// Classical RK4 from `y = 1` down to `y = ε`, one step per grid cell and
/// `origin_substeps` geometrically shrinking steps on `[ε, y_1]`.
///
/// Returns the state at every node `i >= 1` (index 0 is left untouched) and
/// the state at `ε`.
fn march_inward<const D: usize>(
    grid: &Grid,
    eps: f64,
    origin_substeps: usize,
    start: [f64; D],
    rhs: impl Fn(f64, &[f64; D]) -> [f64; D],
) -> Result<(Vec<[f64; D]>, [f64; D])> {
    let rk4 = |y: f64, x: &[f64; D], step: f64| -> [f64; D] {
        let add = |x: &[f64; D], k: &[f64; D], f: f64| {
            let mut out = *x;
            for d in 0..D {
                out[d] += f * k[d];
            }
            out
        };
        let k1 = rhs(y, x);
        let k2 = rhs(y + 0.5 * step, &add(x, &k1, 0.5 * step));
        let k3 = rhs(y + 0.5 * step, &add(x, &k2, 0.5 * step));
        let k4 = rhs(y + step, &add(x, &k3, step));
        let mut out = *x;
        for d in 0..D {
            out[d] += step / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        out
    };
    let last = grid.n_y - 1;
    let mut nodes = vec![[0.0; D]; grid.n_y];
    nodes[last] = start;
    let mut x = start;
    for i in (1..last).rev() {
        x = rk4(grid.y(i + 1), &x, grid.y(i) - grid.y(i + 1));
        nodes[i] = x;
    }
    // geometric substeps from y_1 down to ε keep the 1/y² terms resolved
    let ratio = (eps / grid.y(1)).powf(1.0 / origin_substeps as f64);
    let mut y = grid.y(1);
    for _ in 0..origin_substeps {
        let next = y * ratio;
        x = rk4(y, &x, next - y);
        y = next;
    }
    let at_eps = x;
    if at_eps.iter().chain(nodes.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("inward integration"));
    }
    Ok((nodes, at_eps))
}

/// `λ2` from `λ2_y = 2λ2/y + N_y λ1 / S` with `λ2(1) = -λ4`.
pub fn solve_lambda2_ode(
    l1: &[f64],
    n_y: &[f64],
    s: f64,
    l4: f64,
    grid: &Grid,
    sc: &ShootingConfig,
) -> Result<SpaceField> {
    check_len("lambda2: lambda1 slice", grid.n_y, l1.len())?;
    check_len("lambda2: N_y slice", grid.n_y, n_y.len())?;
    let forcing: Vec<f64> = n_y.iter().zip(l1).map(|(d, l)| d * l / s).collect();
    let h = grid.h();
    let rhs = |y: f64, x: &[f64; 1]| [2.0 * x[0] / y + interpolate(&forcing, h, y)];
    let eps = sc.epsilon(grid);
    let (nodes, at_eps) = march_inward(grid, eps, sc.origin_substeps, [-l4], rhs)?;
    let mut out: Vec<f64> = nodes.into_iter().map(|x| x[0]).collect();
    out[0] = at_eps[0] - eps * rhs(eps, &at_eps)[0];
    Ok(out)
}

/// One shot of the `λ3` system: `u = λ3`, `v = λ3_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotProfile {
    pub u: SpaceField,
    pub v: SpaceField,
    /// Slope at `y = 1` that started the shot.
    pub q: f64,
}

impl ShotProfile {
    /// `F(q) = v(0)`.
    pub fn origin_slope(&self) -> f64 {
        self.v[0]
    }
}

/// Shooting solver for
/// `u'' - 2/y u' + (2/y² - P(y)) u = R(y)`, `u(1) = 0`, `u'(0) = 0`.
///
/// `coef(y)` returns `(P(y), R(y))`.
pub struct Lambda3Shooter<'g, F> {
    grid: &'g Grid,
    eps: f64,
    substeps: usize,
    coef: F,
}

impl<'g, F: Fn(f64) -> (f64, f64)> Lambda3Shooter<'g, F> {
    pub fn new(grid: &'g Grid, sc: &ShootingConfig, coef: F) -> Self {
        Self {
            grid,
            eps: sc.epsilon(grid),
            substeps: sc.origin_substeps,
            coef,
        }
    }

    fn rhs(&self, y: f64, x: &[f64; 2]) -> [f64; 2] {
        let (pot, src) = (self.coef)(y);
        let [u, v] = *x;
        [v, 2.0 * v / y - (2.0 / (y * y) - pot) * u + src]
    }

    /// Integrates from `y = 1` with `u(1) = 0`, `v(1) = q`.
    pub fn shoot(&self, q: f64) -> Result<ShotProfile> {
        let (nodes, at_eps) = march_inward(self.grid, self.eps, self.substeps, [0.0, q], |y, x| self.rhs(y, x))?;
        let mut u: Vec<f64> = nodes.iter().map(|x| x[0]).collect();
        let mut v: Vec<f64> = nodes.iter().map(|x| x[1]).collect();
        let slope = self.rhs(self.eps, &at_eps);
        u[0] = at_eps[0] - self.eps * slope[0];
        v[0] = at_eps[1] - self.eps * slope[1];
        Ok(ShotProfile { u, v, q })
    }

    /// `F(q)`, the extrapolated slope at the origin.
    pub fn residual(&self, q: f64) -> Result<f64> {
        Ok(self.shoot(q)?.origin_slope())
    }

    /// Finds `q` with `F(q) = 0`: the bracket is widened until it changes
    /// sign, then narrowed by false-position steps with a bisection fallback.
    pub fn solve(&self, sc: &ShootingConfig) -> Result<ShotProfile> {
        let (mut lo, mut hi) = sc.bracket;
        let mut f_lo = self.residual(lo)?;
        let mut f_hi = self.residual(hi)?;
        let mut widen = 0;
        while f_lo * f_hi > 0.0 {
            if widen == 60 {
                return Err(Error::RootNotBracketed { lo, hi });
            }
            let (mid, half) = (0.5 * (lo + hi), hi - lo);
            lo = mid - half;
            hi = mid + half;
            f_lo = self.residual(lo)?;
            f_hi = self.residual(hi)?;
            widen += 1;
        }
        if f_lo == 0.0 {
            return self.shoot(lo);
        }
        if f_hi == 0.0 {
            return self.shoot(hi);
        }
        let scale = f_lo.abs().max(f_hi.abs());
        let tol = sc.root_tol * scale.max(1.0);
        let mut best = None;
        for _ in 0..sc.max_root_iter {
            let secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
            let q = if secant > lo && secant < hi {
                secant
            } else {
                0.5 * (lo + hi)
            };
            let shot = self.shoot(q)?;
            let f = shot.origin_slope();
            if f.abs() <= tol || hi - lo <= f64::EPSILON * (lo.abs() + hi.abs()) {
                return Ok(shot);
            }
            if f * f_lo < 0.0 {
                hi = q;
                f_hi = f;
            } else {
                lo = q;
                f_lo = f;
            }
            best = Some(shot);
        }
        best.ok_or(Error::RootNotBracketed { lo, hi })
    }
}

/// Result of the `λ3` solve at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambda3Solution {
    pub values: SpaceField,
    pub slopes: SpaceField,
    /// The root `q̂ = λ3_y(1)`.
    pub q: f64,
}

/// `λ3` at one level by shooting on `λ3_y(1)`.
pub(crate) fn solve_lambda3_bvp(
    l1: &[f64],
    l2: &[f64],
    n: &[f64],
    s: f64,
    coef: &LevelCoefficients,
    grid: &Grid,
    sc: &ShootingConfig,
) -> Result<Lambda3Solution> {
    check_len("lambda3: lambda1 slice", grid.n_y, l1.len())?;
    check_len("lambda3: lambda2 slice", grid.n_y, l2.len())?;
    let potential: Vec<f64> = (0..grid.n_y).map(|i| coef.dk[i] * n[i] * s * s).collect();
    let source: Vec<f64> = (0..grid.n_y)
        .map(|i| coef.db[i] * n[i] * s * l2[i] + n[i] * (coef.da[i] - coef.db[i] * n[i]) * l1[i])
        .collect();
    let h = grid.h();
    let shooter = Lambda3Shooter::new(grid, sc, |y| {
        (interpolate(&potential, h, y), interpolate(&source, h, y))
    });
    let shot = shooter.solve(sc)?;
    Ok(Lambda3Solution {
        values: shot.u,
        slopes: shot.v,
        q: shot.q,
    })
}

/// Backward step of `λ1` from level `k` to `k - 1`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_lambda1_backward(
    l1: &[f64],
    l2: &[f64],
    l3: &[f64],
    n: &[f64],
    n_star: &[f64],
    s: f64,
    s_prime: f64,
    coef: &LevelCoefficients,
    data_weight: f64,
    grid: &Grid,
) -> Result<SpaceField> {
    let (dt, h) = (grid.dt, grid.h());
    for (i, &w) in coef.speed.iter().enumerate() {
        let courant = w.abs() * dt / h;
        if courant > 1.0 {
            return Err(Error::Cfl { courant, node: i });
        }
    }
    let out: Vec<f64> = (0..grid.n_y)
        .map(|i| {
            let w = coef.speed[i];
            // going backwards the multiplier is carried with speed -w
            let adv = if w == 0.0 { 0.0 } else { w * upwind_slope(l1, i, -w, h) };
            let growth = (coef.v_y[i] - s_prime) / s + coef.a[i] - 2.0 * coef.b[i] * n[i];
            let rate = adv
                + growth * l1[i]
                + coef.b[i] * s * l2[i]
                + coef.k[i] * s * s * l3[i]
                + data_weight * (n_star[i] - n[i]);
            l1[i] + dt * rate
        })
        .collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("lambda1 step"));
    }
    Ok(out)
}

/// `λ4_t` at level `k`, given `λ1` at `k` and `k - 1`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lambda4_rate(
    traj: &StateTrajectory,
    k: usize,
    coef: &LevelCoefficients,
    prev_n_y: &[f64],
    l1: &[f64],
    l1_prev: &[f64],
    l2: &[f64],
    l3: &[f64],
    s_misfit: f64,
) -> f64 {
    let grid = &traj.grid;
    let n = traj.n.level(k);
    let v = traj.v.level(k);
    let s = traj.s[k];
    let integrand: Vec<f64> = (0..grid.n_y)
        .map(|i| {
            let y = grid.y(i);
            let flux_rate = (coef.n_y[i] * l1[i] - prev_n_y[i] * l1_prev[i]) / grid.dt;
            coef.n_y[i] * v[i] / (s * s) * l1[i] - y / s * flux_rate
                + coef.b[i] * n[i] * l2[i]
                + 2.0 * coef.k[i] * n[i] * s * l3[i]
        })
        .collect();
    grid.trapezoid(&integrand) + s_misfit
}

/// Solves the multiplier system backwards from `T`.
#[allow(clippy::too_many_arguments)]
pub fn solve_adjoint(
    traj: &StateTrajectory,
    obs: &Observations,
    p: &Parameters,
    mc: &ModelConstants,
    sc: &ShootingConfig,
) -> Result<AdjointTrajectory> {
    let grid = traj.grid;
    obs.check_grid(&grid)?;
    sc.validate()?;
    let levels = grid.levels();
    let last = grid.n_t;

    let mut l1 = SpaceTimeField::zeros(grid.n_y, levels);
    let mut l2 = SpaceTimeField::zeros(grid.n_y, levels);
    let mut l3 = SpaceTimeField::zeros(grid.n_y, levels);
    let mut l3_slopes = SpaceTimeField::zeros(grid.n_y, levels);
    let mut l4 = vec![0.0; levels];
    let mut l4_rate = vec![0.0; levels];
    let mut q_hat = vec![0.0; levels];

    let (t1, t2, t3, t4) = terminal_slice(traj, p, mc, sc)?;
    l1.set_level(last, &t1);
    l2.set_level(last, &t2);
    l3.set_level(last, &t3);
    l4[last] = t4;

    let mut coef = LevelCoefficients::new(traj, last, p, mc)?;
    for k in (1..levels).rev() {
        let prev = LevelCoefficients::new(traj, k - 1, p, mc)?;
        let w = level_weight(&grid, k);

        let next_l1 = step_lambda1_backward(
            l1.level(k),
            l2.level(k),
            l3.level(k),
            traj.n.level(k),
            obs.n_star.level(k),
            traj.s[k],
            traj.s_prime[k],
            &coef,
            w * obs.mu1,
            &grid,
        )?;

        let rate = lambda4_rate(
            traj,
            k,
            &coef,
            &prev.n_y,
            l1.level(k),
            &next_l1,
            l2.level(k),
            l3.level(k),
            w * obs.mu2 * (obs.s_star[k] - traj.s[k]),
        );
        l4_rate[k] = rate;
        l4[k - 1] = l4[k] - grid.dt * rate;

        let s_prev = traj.s[k - 1];
        let next_l2 = solve_lambda2_ode(&next_l1, &prev.n_y, s_prev, l4[k - 1], &grid, sc)?;
        let sol = solve_lambda3_bvp(&next_l1, &next_l2, traj.n.level(k - 1), s_prev, &prev, &grid, sc)?;

        l1.set_level(k - 1, &next_l1);
        l2.set_level(k - 1, &next_l2);
        l3.set_level(k - 1, &sol.values);
        l3_slopes.set_level(k - 1, &sol.slopes);
        q_hat[k - 1] = sol.q;
        coef = prev;
    }

    let aux = auxiliary_multipliers(traj, &l1, &l2, &l3, &l3_slopes, &l4)?;
    Ok(AdjointTrajectory {
        l1,
        l2,
        l3,
        l4,
        l5: aux.l5,
        l6: aux.l6,
        l7: aux.l7,
        l8: aux.l8,
        l9: aux.l9,
        l4_rate,
    })
}

/// The multipliers of the boundary and initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryMultipliers {
    pub l5: Vec<f64>,
    pub l6: Vec<f64>,
    pub l7: Vec<f64>,
    pub l8: SpaceField,
    pub l9: f64,
}

/// `λ5 = λ2(0)`, `λ6 = λ3_y(1) - 2λ3(1)`, `λ7 = 3λ3(0)`, `λ8 = λ1(·, 0)` and
/// `λ9 = -∫ y N_y λ1 / S dy - λ4` at `t = 0`.
pub fn auxiliary_multipliers(
    traj: &StateTrajectory,
    l1: &SpaceTimeField,
    l2: &SpaceTimeField,
    l3: &SpaceTimeField,
    l3_slopes: &SpaceTimeField,
    l4: &[f64],
) -> Result<AuxiliaryMultipliers> {
    let grid = &traj.grid;
    l1.check_shape(grid, "lambda1")?;
    l2.check_shape(grid, "lambda2")?;
    l3.check_shape(grid, "lambda3")?;
    let last = grid.n_y - 1;
    let l5 = (0..grid.levels()).map(|k| l2.get(k, 0)).collect();
    let l6 = (0..grid.levels())
        .map(|k| l3_slopes.get(k, last) - 2.0 * l3.get(k, last))
        .collect();
    let l7 = (0..grid.levels()).map(|k| 3.0 * l3.get(k, 0)).collect();
    let l8 = l1.level(0).to_vec();
    let n_y0 = derivative(traj.n.level(0), grid.h());
    let l9 = boundary_flux(grid, &n_y0, l1.level(0), traj.s[0]) - l4[0];
    Ok(AuxiliaryMultipliers { l5, l6, l7, l8, l9 })
}

/// `λ4(t_k)` from its closed form
///
/// ```text
/// λ4(t) = ∫_t^T ∫ ([N_t - N(a - bN)] λ1/S - bNλ2 - 2kNSλ3) dy dτ
///         - ∫ y N_y λ1 / S dy |_t + μ2 ∫_t^T (S - S*) dτ
/// ```
///
/// with the time integral taken over the levels `k+1..=n_t`, matching the
/// backward march. Used to cross-check the stepped values.
pub fn lambda4_explicit(
    traj: &StateTrajectory,
    adj: &AdjointTrajectory,
    obs: &Observations,
    p: &Parameters,
    mc: &ModelConstants,
    k: usize,
) -> Result<f64> {
    let grid = &traj.grid;
    let mut total = 0.0;
    for j in (k + 1)..=grid.n_t {
        let coef = LevelCoefficients::new(traj, j, p, mc)?;
        let n = traj.n.level(j);
        let s = traj.s[j];
        let n_t: Vec<f64> = if j < grid.n_t {
            let next = traj.n.level(j + 1);
            (0..grid.n_y).map(|i| (next[i] - n[i]) / grid.dt).collect()
        } else {
            let prev = traj.n.level(j - 1);
            (0..grid.n_y).map(|i| (n[i] - prev[i]) / grid.dt).collect()
        };
        let integrand: Vec<f64> = (0..grid.n_y)
            .map(|i| {
                (n_t[i] - n[i] * (coef.a[i] - coef.b[i] * n[i])) * adj.l1.get(j, i) / s
                    - coef.b[i] * n[i] * adj.l2.get(j, i)
                    - 2.0 * coef.k[i] * n[i] * s * adj.l3.get(j, i)
            })
            .collect();
        let w = level_weight(grid, j);
        total += grid.dt * (grid.trapezoid(&integrand) + w * obs.mu2 * (s - obs.s_star[j]));
    }
    let n_y = derivative(traj.n.level(k), grid.h());
    Ok(total + boundary_flux(grid, &n_y, adj.l1.level(k), traj.s[k]))
}
