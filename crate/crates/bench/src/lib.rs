//! Fixtures shared by the benchmarks in `benches/`.

use spheroid_core::{Parameters, Problem, RunConfig};

/// Noiseless data from a seed grown to `S = 34` on the default grid.
pub fn standard_problem() -> Problem {
    let cfg = RunConfig::default();
    let ic = cfg.initial_state().expect("seed growth");
    let obs = cfg.observations(&ic).expect("observations");
    cfg.problem(ic, obs)
}

/// The usual starting point of the inversion.
pub const START: Parameters = Parameters::new(0.16, 0.03, 1.0);
