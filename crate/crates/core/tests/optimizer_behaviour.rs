mod common;

use spheroid_core::optimizer::minimize;
use spheroid_core::{OptimizerConfig, Parameters, StopRule};

#[test]
fn starting_at_the_truth_stops_immediately() {
    let problem = common::standard_problem();
    let run = minimize(&problem, &Parameters::standard(), &OptimizerConfig::default()).unwrap();
    assert_eq!(run.trace.len(), 1);
    assert_eq!(run.stopped_by, vec![StopRule::Functional, StopRule::Gradient]);
    assert_eq!(run.p_final, Parameters::standard());
}

#[test]
fn trace_respects_the_iteration_cap() {
    let problem = common::standard_problem();
    let cfg = OptimizerConfig {
        max_iter: 12,
        ..Default::default()
    };
    let run = minimize(&problem, &Parameters::new(0.16, 0.03, 1.0), &cfg).unwrap();
    assert_eq!(run.trace.len(), 13);
    assert_eq!(run.stopped_by, vec![StopRule::MaxIter]);
    for (k, r) in run.trace.iter().enumerate() {
        assert_eq!(r.k, k);
        assert!(cfg.bounds.contains(&r.p));
    }
}

#[test]
fn noiseless_descent_is_monotone() {
    let problem = common::standard_problem();
    let cfg = OptimizerConfig {
        max_iter: 80,
        ..Default::default()
    };
    let run = minimize(&problem, &Parameters::new(0.16, 0.03, 1.0), &cfg).unwrap();
    for w in run.trace[1..].windows(2) {
        assert!(w[1].j <= w[0].j, "J rose at k = {}: {} -> {}", w[1].k, w[0].j, w[1].j);
    }
    assert!(!run.step_size_warning);
    assert!(run.j_final < run.trace[0].j);
}

/// A step far too long bounces between faces of the box; the report keeps
/// the best iterate rather than the last.
#[test]
fn oversized_step_returns_the_best_iterate() {
    let problem = common::standard_problem();
    let cfg = OptimizerConfig {
        alpha: 50.0,
        max_iter: 20,
        ..Default::default()
    };
    let run = minimize(&problem, &Parameters::new(0.16, 0.03, 1.0), &cfg).unwrap();
    assert!(run.trace.iter().all(|r| cfg.bounds.contains(&r.p)));
    let best = run.trace.iter().min_by(|a, b| a.j.total_cmp(&b.j)).unwrap();
    assert_eq!(run.p_final, best.p);
    assert_eq!(run.j_final, best.j);
    assert!(run.trace.last().unwrap().j > run.j_final);
}

#[test]
fn start_outside_the_box_is_refused() {
    let problem = common::standard_problem();
    let err = minimize(&problem, &Parameters::new(3.0, 0.05, 0.9), &OptimizerConfig::default()).unwrap_err();
    assert_eq!(err.iteration, 0);
    assert!(err.trace.is_empty());
}
