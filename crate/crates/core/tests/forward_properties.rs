use proptest::prelude::*;
use spheroid_core::verify::{residual_audit, ResidualKind};
use spheroid_core::{solve_forward, Grid, InitialCondition, ModelConstants, Parameters, SolverConfig};

fn scenario() -> impl Strategy<Value = (Parameters, InitialCondition)> {
    (
        0.02f64..1.0,
        0.02f64..1.0,
        0.0f64..2.0,
        0.05f64..1.0,
        0.0f64..0.9,
        2.0f64..40.0,
    )
        .prop_map(|(c_c, c_d, sigma, top, dip, s0)| {
            let grid = small_grid();
            // smooth, flat at the origin, inside [0, 1]
            let n0 = grid.nodes().iter().map(|y| top * (1.0 - dip * (1.0 - y * y))).collect();
            (Parameters::new(c_c, c_d, sigma), InitialCondition { n0, s0 })
        })
}

fn small_grid() -> Grid {
    Grid::new(21, 0.01, 20).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariants_hold_across_the_box((p, ic) in scenario()) {
        let grid = small_grid();
        let mc = ModelConstants::default();
        let cfg = SolverConfig::default();
        let traj = solve_forward(&p, &ic, &grid, &mc, &cfg).unwrap();
        let inv = traj.invariant_report();
        prop_assert_eq!(inv.max_abs_c_boundary_error, 0.0);
        prop_assert_eq!(inv.max_abs_v_origin, 0.0);
        prop_assert!(inv.max_c_decrease <= 0.0, "C decreases by {}", inv.max_c_decrease);
        prop_assert!(inv.min_n >= 0.0);
        // sigma > 1 makes the death rate negative where C is high, which
        // lifts the logistic ceiling a/b above one
        if p.sigma <= 1.0 {
            prop_assert!(inv.max_n <= 1.0, "max N {}", inv.max_n);
            prop_assert!(inv.holds());
        }
        prop_assert!(inv.min_c >= 0.0 && inv.max_c <= 1.0);

        let audit = residual_audit(&traj, &ic, &p, &mc).unwrap();
        for row in &audit.rows {
            if row.kind == ResidualKind::Discrete {
                prop_assert!(row.max_abs <= cfg.residual_tol, "{} residual {}", row.name, row.max_abs);
            }
        }
    }

    #[test]
    fn empty_tumour_stays_empty(s0 in 1.0f64..80.0, sigma in 0.0f64..2.0) {
        let grid = small_grid();
        let ic = InitialCondition { n0: vec![0.0; grid.n_y], s0 };
        let p = Parameters::new(0.1, 0.05, sigma);
        let traj = solve_forward(&p, &ic, &grid, &ModelConstants::default(), &SolverConfig::default()).unwrap();
        prop_assert!(traj.n.as_slice().iter().all(|&x| x == 0.0));
        prop_assert!(traj.s.iter().all(|&s| s == s0));
    }
}

#[test]
fn standard_radius_grows_strictly() {
    let cfg = spheroid_core::RunConfig::default();
    let ic = cfg.initial_state().unwrap();
    let traj = solve_forward(&cfg.parameters, &ic, &cfg.grid, &cfg.constants, &cfg.solver).unwrap();
    assert!(traj.s.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(traj.s[0], 34.0);
}

#[test]
fn density_above_one_is_reported_not_clamped() {
    let grid = Grid::new(21, 0.01, 200).unwrap();
    let ic = InitialCondition {
        n0: vec![0.99; grid.n_y],
        s0: 3.0,
    };
    let p = Parameters::new(0.02, 0.02, 1.9);
    let traj = solve_forward(&p, &ic, &grid, &ModelConstants::default(), &SolverConfig::default()).unwrap();
    let inv = traj.invariant_report();
    assert!(inv.max_n > 1.0);
    assert!(!inv.holds());
}
