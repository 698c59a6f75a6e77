#![allow(dead_code)]

use spheroid_core::io::{NoiseSpec, NoiseTarget, RunConfig};
use spheroid_core::{InitialCondition, Observations, Problem};

/// Noiseless data from a seed grown to `S = 34`, 30 nodes, 50 steps of 0.01.
pub fn standard_config() -> RunConfig {
    RunConfig::default()
}

/// 5% multiplicative noise on `N*` from a seed grown to `S = 53`.
pub fn noisy_config() -> RunConfig {
    let mut cfg = RunConfig {
        initial_condition: spheroid_core::io::InitialSpec::Seed { radius: 53.0 },
        ..Default::default()
    };
    cfg.observations.noise = NoiseSpec {
        level: 0.05,
        targets: vec![NoiseTarget::NStar],
    };
    cfg.optimizer.max_iter = 6000;
    cfg
}

pub fn build(cfg: &RunConfig) -> (Problem, InitialCondition, Observations) {
    let ic = cfg.initial_state().expect("initial state");
    let obs = cfg.observations(&ic).expect("observations");
    (cfg.problem(ic.clone(), obs.clone()), ic, obs)
}

pub fn standard_problem() -> Problem {
    build(&standard_config()).0
}
