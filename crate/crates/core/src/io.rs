//! Run configuration, synthetic data, parameter sweeps and file formats.
//!
//! Every CSV starts with a header row. Spatial fields are written wide: one
//! row per time level, one column per node, with the node position in the
//! column name. All quantities are dimensionless; lengths are in units of
//! the single-cell radius `r0`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjoint::{AdjointTrajectory, ShootingConfig};
use crate::error::{check_len, Error, Result};
use crate::forward::{grow_from_seed, solve_forward, InitialCondition, SolverConfig, StateTrajectory};
use crate::grid::{Grid, SpaceTimeField};
use crate::kinetics::{ModelConstants, Parameters};
use crate::objective::{FaultInjection, Observations, Problem};
use crate::optimizer::{IterationRecord, OptimizerConfig};

/// Which observed quantities receive noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    NStar,
    SStar,
}

/// Multiplicative noise `x <- x (1 + level u)` with `u ~ U[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub level: f64,
    #[serde(default = "default_targets")]
    pub targets: Vec<NoiseTarget>,
}

fn default_targets() -> Vec<NoiseTarget> {
    vec![NoiseTarget::NStar]
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            level: 0.0,
            targets: default_targets(),
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.level >= 0.0 && self.level.is_finite()) {
            return Err(Error::Config(format!("noise level must be >= 0 (got {})", self.level)));
        }
        Ok(())
    }
}

/// Forward-solves at `p_true` and perturbs the result.
///
/// The draws come from one ChaCha stream seeded with `seed`: all `N*` samples
/// level by level, then all `S*` samples, skipping targets that are not
/// selected.
#[allow(clippy::too_many_arguments)]
pub fn generate_observations(
    p_true: &Parameters,
    ic: &InitialCondition,
    grid: &Grid,
    mc: &ModelConstants,
    cfg: &SolverConfig,
    noise: &NoiseSpec,
    seed: u64,
    weights: (f64, f64),
) -> Result<(Observations, StateTrajectory)> {
    noise.validate()?;
    let traj = solve_forward(p_true, ic, grid, mc, cfg)?;
    let mut obs = Observations::from_trajectory(&traj, weights.0, weights.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturb = |x: &mut f64| *x *= 1.0 + noise.level * rng.gen_range(-1.0..=1.0);
    if noise.level > 0.0 {
        if noise.targets.contains(&NoiseTarget::NStar) {
            for k in 0..grid.levels() {
                obs.n_star.level_mut(k).iter_mut().for_each(&mut perturb);
            }
        }
        if noise.targets.contains(&NoiseTarget::SStar) {
            obs.s_star.iter_mut().for_each(&mut perturb);
        }
    }
    Ok((obs, traj))
}

/// Where the initial state comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Grow a single seeded cell at the true parameters up to this radius.
    Seed { radius: f64 },
    /// Read a JSON file holding `n0` and `s0`.
    File { path: PathBuf },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Seed { radius: 34.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationSpec {
    pub mu1: f64,
    pub mu2: f64,
    pub noise: NoiseSpec,
    /// Observation CSV to load instead of generating synthetic data.
    pub file: Option<PathBuf>,
}

impl Default for ObservationSpec {
    fn default() -> Self {
        Self {
            mu1: 100.0,
            mu2: 1.0,
            noise: NoiseSpec::default(),
            file: None,
        }
    }
}

/// Evenly spaced values `lo..=hi`; a single value is `lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            1 => vec![self.lo],
            n => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    pub fn spacing(&self) -> f64 {
        if self.count > 1 {
            (self.hi - self.lo) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 || !(self.lo <= self.hi) || !(self.lo > 0.0) {
            return Err(Error::Config(format!("invalid sweep axis {name}: {self:?}")));
        }
        Ok(())
    }
}

/// `J` over a `c_c` x `c_d` grid at fixed `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub c_c: Axis,
    pub c_d: Axis,
    pub sigma: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            c_c: Axis {
                lo: 0.05,
                hi: 0.2,
                count: 20,
            },
            c_d: Axis {
                lo: 0.01,
                hi: 0.1,
                count: 20,
            },
            sigma: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSpec {
    pub h: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Extra points drawn uniformly from the admissible box.
    pub random_points: usize,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        Self {
            h: crate::verify::DEFAULT_FD_STEP,
            rel_tol: crate::verify::DEFAULT_REL_TOL,
            abs_tol: crate::verify::DEFAULT_ABS_TOL,
            random_points: 0,
        }
    }
}

/// The JSON configuration read by the command-line driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Grid,
    pub constants: ModelConstants,
    pub solver: SolverConfig,
    pub shooting: ShootingConfig,
    /// Parameters for the `forward` command.
    pub parameters: Parameters,
    /// Parameters that generate synthetic observations.
    pub true_parameters: Parameters,
    /// Starting point of the inversion and the gradient check.
    pub initial_guess: Parameters,
    pub initial_condition: InitialSpec,
    pub observations: ObservationSpec,
    pub optimizer: OptimizerConfig,
    pub sweep: SweepSpec,
    pub gradcheck: GradCheckSpec,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: Grid::standard(),
            constants: ModelConstants::default(),
            solver: SolverConfig::default(),
            shooting: ShootingConfig::default(),
            parameters: Parameters::standard(),
            true_parameters: Parameters::standard(),
            initial_guess: Parameters::new(0.16, 0.03, 1.0),
            initial_condition: InitialSpec::default(),
            observations: ObservationSpec::default(),
            optimizer: OptimizerConfig::default(),
            sweep: SweepSpec::default(),
            gradcheck: GradCheckSpec::default(),
            seed: 42,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Reads and validates a configuration. Relative paths inside it are
    /// resolved against the directory of `path`.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InitialSpec::File { path } = &mut self.initial_condition {
            fix(path);
        }
        if let Some(p) = &mut self.observations.file {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.constants.validate()?;
        self.solver.validate()?;
        self.shooting.validate()?;
        self.optimizer.validate()?;
        self.observations.noise.validate()?;
        for p in [&self.parameters, &self.true_parameters, &self.initial_guess] {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let (mu1, mu2) = (self.observations.mu1, self.observations.mu2);
        if !(mu1 >= 0.0 && mu2 >= 0.0) || mu1 + mu2 == 0.0 {
            return Err(Error::Config("mu1 and mu2 must be >= 0 and not both zero".into()));
        }
        match &self.initial_condition {
            InitialSpec::Seed { radius } if !(*radius >= 1.0 && radius.is_finite()) => {
                return Err(Error::Config(format!("seed radius must be >= 1 (got {radius})")));
            }
            InitialSpec::File { path } if !path.is_file() => {
                return Err(Error::Config(format!(
                    "initial condition file {} not found",
                    path.display()
                )));
            }
            _ => {}
        }
        if let Some(p) = &self.observations.file {
            if !p.is_file() {
                return Err(Error::Config(format!("observation file {} not found", p.display())));
            }
        }
        self.sweep.c_c.validate("c_c")?;
        self.sweep.c_d.validate("c_d")?;
        if !(self.sweep.sigma >= 0.0) {
            return Err(Error::Config("sweep sigma must be >= 0".into()));
        }
        let gc = &self.gradcheck;
        if !(gc.h > 0.0 && gc.rel_tol > 0.0 && gc.abs_tol >= 0.0) {
            return Err(Error::Config(format!("invalid gradcheck settings {gc:?}")));
        }
        Ok(())
    }

    /// The initial state: read from file or grown from a seed at the true
    /// parameters.
    pub fn initial_state(&self) -> Result<InitialCondition> {
        let ic = match &self.initial_condition {
            InitialSpec::Seed { radius } => grow_from_seed(
                &self.true_parameters,
                &self.constants,
                &self.grid,
                &self.solver,
                *radius,
            )?,
            InitialSpec::File { path } => read_initial_condition(path)?,
        };
        ic.validate(&self.grid)?;
        Ok(ic)
    }

    /// Loaded or synthetic observations.
    pub fn observations(&self, ic: &InitialCondition) -> Result<Observations> {
        let spec = &self.observations;
        let weights = (spec.mu1, spec.mu2);
        match &spec.file {
            Some(path) => read_observations(path, &self.grid, weights),
            None => Ok(generate_observations(
                &self.true_parameters,
                ic,
                &self.grid,
                &self.constants,
                &self.solver,
                &spec.noise,
                self.seed,
                weights,
            )?
            .0),
        }
    }

    pub fn problem(&self, ic: InitialCondition, obs: Observations) -> Problem {
        Problem {
            ic,
            obs,
            grid: self.grid,
            constants: self.constants,
            solver: self.solver,
            shooting: self.shooting,
            fault: FaultInjection::default(),
        }
    }
}

/// One sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub c_c: f64,
    pub c_d: f64,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Row-major with `c_c` varying slowest.
    pub cells: Vec<SweepCell>,
    pub argmin: SweepCell,
}

impl SweepResult {
    pub fn at(&self, i_cc: usize, i_cd: usize) -> &SweepCell {
        &self.cells[i_cc * self.spec.c_d.count + i_cd]
    }
}

/// Evaluates `J` on every sweep cell (in parallel, ordered output).
pub fn sweep(problem: &Problem, spec: &SweepSpec) -> Result<SweepResult> {
    let points: Vec<(f64, f64)> = spec
        .c_c
        .values()
        .into_iter()
        .flat_map(|cc| spec.c_d.values().into_iter().map(move |cd| (cc, cd)))
        .collect();
    let cells = points
        .par_iter()
        .map(|&(c_c, c_d)| {
            let j = problem.value(&Parameters::new(c_c, c_d, spec.sigma))?;
            Ok(SweepCell { c_c, c_d, j })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmin = *cells
        .iter()
        .min_by(|a, b| a.j.total_cmp(&b.j))
        .ok_or_else(|| Error::Config("empty sweep".into()))?;
    Ok(SweepResult {
        spec: *spec,
        cells,
        argmin,
    })
}

fn node_header(grid: &Grid, name: &str) -> Vec<String> {
    grid.nodes().iter().map(|y| format!("{name}(y={y:.6}) [-]")).collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

/// Writes a field in wide form: `t`, then one column per node.
pub fn write_field(path: &Path, grid: &Grid, name: &str, field: &SpaceTimeField) -> Result<()> {
    field.check_shape(grid, "field")?;
    let mut w = csv_writer(path)?;
    let mut header = vec!["t [-]".to_string()];
    header.extend(node_header(grid, name));
    w.write_record(&header)?;
    for (k, level) in field.iter_levels().enumerate() {
        let mut row = vec![fmt(grid.t(k))];
        row.extend(level.iter().map(|&x| fmt(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `t, S, S'` per level.
pub fn write_radius(path: &Path, traj: &StateTrajectory) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t [-]", "S [r0]", "S_prime [r0]"])?;
    for k in 0..traj.grid.levels() {
        w.write_record([fmt(traj.grid.t(k)), fmt(traj.s[k]), fmt(traj.s_prime[k])])?;
    }
    w.flush()?;
    Ok(())
}

/// Radius and the three fields of a trajectory into `dir`.
pub fn write_trajectory(dir: &Path, traj: &StateTrajectory) -> Result<()> {
    write_radius(&dir.join("radius.csv"), traj)?;
    write_field(&dir.join("density.csv"), &traj.grid, "N", &traj.n)?;
    write_field(&dir.join("nutrient.csv"), &traj.grid, "C", &traj.c)?;
    write_field(&dir.join("velocity.csv"), &traj.grid, "V", &traj.v)
}

/// Multiplier fields and series into `dir`.
pub fn write_adjoint(dir: &Path, grid: &Grid, adj: &AdjointTrajectory) -> Result<()> {
    write_field(&dir.join("lambda1.csv"), grid, "lambda1", &adj.l1)?;
    write_field(&dir.join("lambda2.csv"), grid, "lambda2", &adj.l2)?;
    write_field(&dir.join("lambda3.csv"), grid, "lambda3", &adj.l3)?;
    let mut w = csv_writer(&dir.join("lambda_series.csv"))?;
    w.write_record(["t [-]", "lambda4", "lambda5", "lambda6", "lambda7"])?;
    for k in 0..grid.levels() {
        w.write_record([grid.t(k), adj.l4[k], adj.l5[k], adj.l6[k], adj.l7[k]].map(fmt))?;
    }
    w.flush()?;
    let mut w = csv_writer(&dir.join("lambda_initial.csv"))?;
    w.write_record(["y [-]", "lambda8", "lambda9"])?;
    for (i, y) in grid.nodes().into_iter().enumerate() {
        w.write_record([fmt(y), fmt(adj.l8[i]), fmt(adj.l9)])?;
    }
    w.flush()?;
    Ok(())
}

/// `t, S_star`, then `N_star` per node.
pub fn write_observations(path: &Path, grid: &Grid, obs: &Observations) -> Result<()> {
    obs.check_grid(grid)?;
    let mut w = csv_writer(path)?;
    let mut header = vec!["t [-]".to_string(), "S_star [r0]".to_string()];
    header.extend(node_header(grid, "N_star"));
    w.write_record(&header)?;
    for k in 0..grid.levels() {
        let mut row = vec![fmt(grid.t(k)), fmt(obs.s_star[k])];
        row.extend(obs.n_star.level(k).iter().map(|&x| fmt(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn config_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {msg}", path.display()))
}

/// Reads an observation file written by [`write_observations`]. The times
/// must match the grid levels.
pub fn read_observations(path: &Path, grid: &Grid, weights: (f64, f64)) -> Result<Observations> {
    let mut r = csv::Reader::from_path(path).map_err(|e| config_err(path, e))?;
    let width = r.headers().map_err(|e| config_err(path, e))?.len();
    check_len("observation columns", grid.n_y + 2, width)?;
    let mut s_star = Vec::with_capacity(grid.levels());
    let mut levels = Vec::with_capacity(grid.levels());
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| config_err(path, e))?;
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| config_err(path, format!("row {}: {e}", k + 1)))?;
        if (vals[0] - grid.t(k)).abs() > 1e-9 * grid.horizon().max(1.0) {
            return Err(config_err(
                path,
                format!("row {} has t = {}, expected {}", k + 1, vals[0], grid.t(k)),
            ));
        }
        s_star.push(vals[1]);
        levels.push(vals[2..].to_vec());
    }
    check_len("observation rows", grid.levels(), levels.len())?;
    let obs = Observations {
        n_star: SpaceTimeField::from_levels(levels)?,
        s_star,
        mu1: weights.0,
        mu2: weights.1,
    };
    obs.validate(grid)?;
    Ok(obs)
}

pub fn write_initial_condition(path: &Path, ic: &InitialCondition) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(ic)? + "\n")?;
    Ok(())
}

pub fn read_initial_condition(path: &Path) -> Result<InitialCondition> {
    let text = fs::read_to_string(path).map_err(|e| config_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| config_err(path, e))
}

/// `k, c_c, c_d, sigma, J, gnorm, step`.
pub fn write_trace(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["k", "c_c [-]", "c_d [-]", "sigma [-]", "J [-]", "gnorm [-]", "step [-]"])?;
    for r in trace {
        let [c_c, c_d, sigma] = r.p.to_array();
        let mut row = vec![r.k.to_string()];
        row.extend([c_c, c_d, sigma, r.j, r.gradient.norm(), r.step_norm].map(fmt));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `c_c, c_d, J` per sweep cell.
pub fn write_sweep(path: &Path, result: &SweepResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["c_c [-]", "c_d [-]", "J [-]"])?;
    for c in &result.cells {
        w.write_record([c.c_c, c.c_d, c.j].map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
