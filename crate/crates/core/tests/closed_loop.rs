//! Closed-loop behavior of the full simulation stack: linear-dynamics
//! recovery, exact-matching invariance, projection flow invariance under
//! saturation, and integration convergence.

use nalgebra::{DMatrix, DVector};
use safemrac::adapt::ProjectionBounds;
use safemrac::certify::{solve_lyapunov, vdp_error_matrix, vdp_nominal};
use safemrac::model::{vdp_plant, vdp_reference};
use safemrac::safety::{LevelSet, PerformanceBound};
use safemrac::selfcheck::linear_flow_2x2;
use safemrac::sim::{run, sweep, ClosedLoopSystem, ControllerMode, SimConfig, Verdict};

fn study_p() -> DMatrix<f64> {
    solve_lyapunov(&vdp_error_matrix(3.0, 3.0), &DMatrix::identity(2, 2))
        .unwrap()
        .p()
        .clone()
}

fn system(lambda: f64, uncertainty: bool) -> ClosedLoopSystem {
    ClosedLoopSystem {
        plant: vdp_plant(lambda, uncertainty).unwrap(),
        reference: vdp_reference(1.0),
        nominal: vdp_nominal(3.0, 3.0, 1.0, &DMatrix::identity(2, 2)).unwrap().0,
    }
}

fn consistent_config(mode: ControllerMode) -> SimConfig {
    let p = study_p();
    let safe = LevelSet::new(p.clone(), 24.0).unwrap();
    let refs = LevelSet::new(p, 8.0).unwrap();
    SimConfig {
        dt: 1e-3,
        horizon: 30.0,
        x0: DVector::from_vec(vec![2.0, 2.0]),
        xr0: DVector::from_vec(vec![2.0, 2.0]),
        gamma: 1.0,
        bound: PerformanceBound::constant(1.3, safe, Some(refs)).unwrap(),
        controller_mode: mode,
        w_hat0: DMatrix::zeros(4, 1),
        projection: ProjectionBounds::symmetric(4, 10.0, 0.1).unwrap(),
        log_stride: 10,
    }
}

#[test]
fn nominal_error_tracks_matrix_exponential() {
    // Without uncertainty and with unit effectiveness, the nominal loop's
    // error obeys e-dot = A e exactly; the integrated error must match the
    // closed-form flow.
    let sys = system(1.0, false);
    let mut cfg = consistent_config(ControllerMode::NominalOnly);
    cfg.horizon = 10.0;
    cfg.x0 = DVector::from_vec(vec![2.5, 1.5]);
    let e0 = &cfg.x0 - &cfg.xr0;
    let a = vdp_error_matrix(3.0, 3.0);
    let log = run(&cfg, &sys).unwrap();
    assert_eq!(log.verdict, Verdict::Completed);
    let mut worst: f64 = 0.0;
    for s in &log.samples {
        let expected = linear_flow_2x2(&a, &e0, s.t);
        worst = worst.max((&s.e - expected).norm());
    }
    assert!(worst <= 1e-6, "worst deviation {worst}");
}

#[test]
fn exact_matching_keeps_error_at_zero() {
    // Perfect initial weights with no uncertainty make (e, W-tilde) = 0 a
    // fixed point; integration must not drift off it.
    let sys = system(1.0, false);
    let mut cfg = consistent_config(ControllerMode::Adaptive);
    cfg.horizon = 10.0;
    cfg.w_hat0 = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 0.0, -1.0]);
    let log = run(&cfg, &sys).unwrap();
    assert_eq!(log.verdict, Verdict::Completed);
    assert!(
        log.stats.sup_e_norm <= 1e-12,
        "error drifted to {}",
        log.stats.sup_e_norm
    );
}

#[test]
fn saturated_weights_stay_inside_hypercube() {
    // A hypercube just wide enough for the matched weights forces the
    // projection's boundary layer into play; the estimate must never
    // leave the cube beyond integrator tolerance.
    let sys = system(0.75, true);
    for gamma in [1.0, 5.0] {
        let mut cfg = consistent_config(ControllerMode::Adaptive);
        cfg.gamma = gamma;
        cfg.projection = ProjectionBounds::symmetric(4, 1.5, 0.1).unwrap();
        let log = run(&cfg, &sys).unwrap();
        assert_eq!(log.verdict, Verdict::Completed, "gamma {gamma}");
        assert!(
            log.stats.min_w_margin >= -1e-9,
            "gamma {gamma}: margin {}",
            log.stats.min_w_margin
        );
        // The tight cube is actually exercised.
        assert!(
            log.stats.min_w_margin <= 1e-3,
            "gamma {gamma}: cube never approached, margin {}",
            log.stats.min_w_margin
        );
    }
}

#[test]
fn halving_the_step_leaves_terminal_error_unchanged() {
    let sys = system(0.75, true);
    let cfg = consistent_config(ControllerMode::Adaptive);
    let mut cfg_half = cfg.clone();
    cfg_half.dt = 5e-4;
    cfg_half.log_stride = 20;
    let a = run(&cfg, &sys).unwrap();
    let b = run(&cfg_half, &sys).unwrap();
    let ea = a.samples.last().unwrap().e_norm;
    let eb = b.samples.last().unwrap().e_norm;
    assert!((ea - eb).abs() < 1e-6, "difference {}", (ea - eb).abs());
}

#[test]
fn identical_configs_give_identical_logs() {
    let sys = system(0.75, true);
    let mut cfg = consistent_config(ControllerMode::Adaptive);
    cfg.horizon = 5.0;
    let a = run(&cfg, &sys).unwrap();
    let b = run(&cfg, &sys).unwrap();
    assert_eq!(a, b);
}

#[test]
fn both_bound_modes_complete_safely_at_unit_rate() {
    let sys = system(0.75, true);
    let constant = consistent_config(ControllerMode::Adaptive);
    let p = study_p();
    let tv = SimConfig {
        bound: PerformanceBound::time_varying(
            LevelSet::new(p.clone(), 24.0).unwrap(),
            Some(LevelSet::new(p, 8.0).unwrap()),
        ),
        ..constant.clone()
    };
    for (label, cfg) in [("constant", constant), ("time_varying", tv)] {
        let log = run(&cfg, &sys).unwrap();
        assert_eq!(log.verdict, Verdict::Completed, "{label}");
        assert!(log.stats.min_h > 0.0, "{label}: min_h {}", log.stats.min_h);
        assert!(
            log.stats.min_safe_margin > 0.0,
            "{label}: margin {}",
            log.stats.min_safe_margin
        );
    }
}

#[test]
fn slower_adaptation_approaches_the_boundary_closer() {
    let sys = system(0.75, true);
    let cfg = consistent_config(ControllerMode::Adaptive);
    let entries = sweep(&cfg, &sys, &[0.2, 1.0]).unwrap();
    let slow = entries[0].outcome.as_ref().unwrap();
    let fast = entries[1].outcome.as_ref().unwrap();
    assert!(slow.min_h <= fast.min_h);
    assert!(slow.min_h > 0.0);
}

#[test]
fn energy_stays_below_its_initial_ceiling_scale() {
    // Monitored quantity: psi is finite and bounded along a completed run.
    let sys = system(0.75, true);
    let cfg = consistent_config(ControllerMode::Adaptive);
    let log = run(&cfg, &sys).unwrap();
    assert_eq!(log.verdict, Verdict::Completed);
    assert!(log.stats.max_psi.is_finite());
    assert!(log.stats.max_psi > 0.0);
}
