mod common;

use std::fs;

use spheroid_core::io::{
    self, generate_observations, read_initial_condition, read_observations, Axis, NoiseSpec, NoiseTarget, RunConfig,
    SweepSpec,
};
use spheroid_core::{eval_j, solve_forward, Error, Parameters};

#[test]
fn observations_survive_a_csv_round_trip() {
    let cfg = common::noisy_config();
    let (_, ic, obs) = common::build(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    io::write_observations(&path, &cfg.grid, &obs).unwrap();
    let back = read_observations(&path, &cfg.grid, (obs.mu1, obs.mu2)).unwrap();
    assert_eq!(back, obs);

    let ic_path = dir.path().join("ic.json");
    io::write_initial_condition(&ic_path, &ic).unwrap();
    assert_eq!(read_initial_condition(&ic_path).unwrap(), ic);
}

#[test]
fn observation_file_on_the_wrong_grid_is_rejected() {
    let cfg = common::standard_config();
    let (_, _, obs) = common::build(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    io::write_observations(&path, &cfg.grid, &obs).unwrap();
    let mut other = cfg.grid;
    other.n_y = 20;
    assert!(read_observations(&path, &other, (1.0, 1.0)).is_err());
    other = cfg.grid;
    other.dt = 0.02;
    assert!(matches!(
        read_observations(&path, &other, (1.0, 1.0)),
        Err(Error::Config(_))
    ));
}

#[test]
fn zero_noise_reproduces_the_trajectory() {
    let cfg = common::standard_config();
    let ic = cfg.initial_state().unwrap();
    let noise = NoiseSpec {
        level: 0.0,
        targets: vec![NoiseTarget::NStar, NoiseTarget::SStar],
    };
    let (obs, traj) = generate_observations(
        &cfg.true_parameters,
        &ic,
        &cfg.grid,
        &cfg.constants,
        &cfg.solver,
        &noise,
        7,
        (100.0, 1.0),
    )
    .unwrap();
    assert_eq!(obs.n_star, traj.n);
    assert_eq!(obs.s_star, traj.s);
}

#[test]
fn noise_is_seeded() {
    let cfg = common::standard_config();
    let ic = cfg.initial_state().unwrap();
    let noise = NoiseSpec {
        level: 0.05,
        targets: vec![NoiseTarget::NStar, NoiseTarget::SStar],
    };
    let gen = |seed| {
        generate_observations(
            &cfg.true_parameters,
            &ic,
            &cfg.grid,
            &cfg.constants,
            &cfg.solver,
            &noise,
            seed,
            (100.0, 1.0),
        )
        .unwrap()
        .0
    };
    assert_eq!(gen(3), gen(3));
    assert_ne!(gen(3), gen(4));
}

/// For `u ~ U[-1, 1]`, `E[u²] = 1/3`, so the expected misfit of the clean
/// trajectory against noisy `N*` is `μ1/2 · level²/3 · ∬ N²`.
#[test]
fn noisy_misfit_matches_the_second_moment() {
    let cfg = common::standard_config();
    let ic = cfg.initial_state().unwrap();
    let level = 0.05;
    let noise = NoiseSpec {
        level,
        targets: vec![NoiseTarget::NStar],
    };
    let traj = solve_forward(&cfg.true_parameters, &ic, &cfg.grid, &cfg.constants, &cfg.solver).unwrap();
    let per_level: Vec<f64> = (0..cfg.grid.levels())
        .map(|k| {
            cfg.grid
                .trapezoid(&traj.n.level(k).iter().map(|n| n * n).collect::<Vec<_>>())
        })
        .collect();
    let expected = 0.5 * 100.0 * level * level / 3.0 * cfg.grid.time_trapezoid(&per_level);
    let seeds = 60;
    let mean = (0..seeds)
        .map(|seed| {
            let (obs, _) = generate_observations(
                &cfg.true_parameters,
                &ic,
                &cfg.grid,
                &cfg.constants,
                &cfg.solver,
                &noise,
                seed,
                (100.0, 1.0),
            )
            .unwrap();
            eval_j(&traj, &obs).unwrap()
        })
        .sum::<f64>()
        / seeds as f64;
    assert!((mean / expected - 1.0).abs() < 0.05, "mean {mean}, expected {expected}");
}

#[test]
fn single_cell_sweep_matches_the_objective() {
    let problem = common::standard_problem();
    let spec = SweepSpec {
        c_c: Axis {
            lo: 0.13,
            hi: 0.13,
            count: 1,
        },
        c_d: Axis {
            lo: 0.04,
            hi: 0.04,
            count: 1,
        },
        sigma: 0.8,
    };
    let result = io::sweep(&problem, &spec).unwrap();
    assert_eq!(result.cells.len(), 1);
    let (j, _) = spheroid_core::reduced_objective(&problem, &Parameters::new(0.13, 0.04, 0.8)).unwrap();
    assert_eq!(result.argmin.j, j);
}

#[test]
fn sweep_order_is_row_major() {
    let problem = common::standard_problem();
    let spec = SweepSpec {
        c_c: Axis {
            lo: 0.08,
            hi: 0.12,
            count: 3,
        },
        c_d: Axis {
            lo: 0.04,
            hi: 0.06,
            count: 2,
        },
        sigma: 0.9,
    };
    let result = io::sweep(&problem, &spec).unwrap();
    let cell = result.at(2, 1);
    assert_eq!((cell.c_c, cell.c_d), (0.12, 0.06));
    assert_eq!(cell.j, problem.value(&Parameters::new(0.12, 0.06, 0.9)).unwrap());
}

#[test]
fn config_paths_resolve_against_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::standard_config();
    let ic = cfg.initial_state().unwrap();
    fs::create_dir(dir.path().join("data")).unwrap();
    io::write_initial_condition(&dir.path().join("data/ic.json"), &ic).unwrap();
    let path = dir.path().join("run.json");
    fs::write(
        &path,
        r#"{"initial_condition": {"file": {"path": "data/ic.json"}}, "output_dir": "results"}"#,
    )
    .unwrap();
    let loaded = RunConfig::load(&path).unwrap();
    assert_eq!(loaded.initial_state().unwrap(), ic);
    assert_eq!(loaded.output_dir, dir.path().join("results"));

    fs::write(
        &path,
        r#"{"initial_condition": {"file": {"path": "data/missing.json"}}}"#,
    )
    .unwrap();
    assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
    fs::write(&path, r#"{"grid": {"n_y": 2, "dt": 0.01, "n_t": 50}}"#).unwrap();
    assert!(RunConfig::load(&path).is_err());
}
