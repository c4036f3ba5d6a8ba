// Scratch exploration of the study dynamics (not part of the deliverable).

use nalgebra::{DMatrix, DVector};
use safemrac::adapt::ProjectionBounds;
use safemrac::certify::{solve_lyapunov, vdp_error_matrix, vdp_nominal};
use safemrac::model::{vdp_plant, vdp_reference};
use safemrac::safety::{LevelSet, PerformanceBound};
use safemrac::sim::{run, ClosedLoopSystem, ControllerMode, SimConfig};

fn main() {
    let p = solve_lyapunov(&vdp_error_matrix(3.0, 3.0), &DMatrix::identity(2, 2))
        .unwrap()
        .p()
        .clone();
    let safe = LevelSet::new(p.clone(), 24.0).unwrap();
    let refs = LevelSet::new(p.clone(), 8.0).unwrap();

    let base = SimConfig {
        dt: 1e-3,
        horizon: 30.0,
        x0: DVector::from_vec(vec![2.0, 2.0]),
        xr0: DVector::from_vec(vec![2.0, 2.0]),
        gamma: 1.0,
        bound: PerformanceBound::constant(1.3, safe.clone(), Some(refs.clone())).unwrap(),
        controller_mode: ControllerMode::Adaptive,
        w_hat0: DMatrix::zeros(4, 1),
        projection: ProjectionBounds::symmetric(4, 10.0, 0.1).unwrap(),
        log_stride: 10,
    };

    // Exact matching: delta = 0, lambda = 1, w_hat0 = (0,0,0,-1).
    let sys_clean = ClosedLoopSystem {
        plant: vdp_plant(1.0, false).unwrap(),
        reference: vdp_reference(1.0),
        nominal: vdp_nominal(3.0, 3.0, 1.0, &DMatrix::identity(2, 2)).unwrap().0,
    };
    let mut cfg = base.clone();
    cfg.horizon = 10.0;
    cfg.w_hat0 = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 0.0, -1.0]);
    let log = run(&cfg, &sys_clean).unwrap();
    println!(
        "exact matching: {:?} sup_e {:.3e} (should be << 1e-6)",
        log.verdict, log.stats.sup_e_norm
    );

    // Saturation stress: tight hypercube that still contains the matched
    // weights (max magnitude 4/3).
    let sys = ClosedLoopSystem {
        plant: vdp_plant(0.75, true).unwrap(),
        reference: vdp_reference(1.0),
        nominal: vdp_nominal(3.0, 3.0, 1.0, &DMatrix::identity(2, 2)).unwrap().0,
    };
    for limit in [1.5, 2.0] {
        for gamma in [1.0, 5.0] {
            let mut cfg = base.clone();
            cfg.gamma = gamma;
            cfg.projection = ProjectionBounds::symmetric(4, limit, 0.1).unwrap();
            match run(&cfg, &sys) {
                Ok(log) => println!(
                    "limit {limit} gamma {gamma}: {:?} min_h {:.5} w_margin {:.3e} sup_e {:.4}",
                    log.verdict, log.stats.min_h, log.stats.min_w_margin, log.stats.sup_e_norm
                ),
                Err(e) => println!("limit {limit} gamma {gamma}: ERROR {e}"),
            }
        }
    }

    // Step halving on the frozen consistent config.
    let log_a = run(&base, &sys).unwrap();
    let mut cfg_half = base.clone();
    cfg_half.dt = 5e-4;
    cfg_half.log_stride = 20;
    let log_b = run(&cfg_half, &sys).unwrap();
    let ea = log_a.samples.last().unwrap().e_norm;
    let eb = log_b.samples.last().unwrap().e_norm;
    println!("step halving: |diff| = {:.3e}", (ea - eb).abs());

    // Time-varying rate-condition monitor on the consistent geometry.
    let cfg_tv = SimConfig {
        bound: PerformanceBound::time_varying(safe.clone(), Some(refs.clone())),
        ..base.clone()
    };
    let log_tv = run(&cfg_tv, &sys).unwrap();
    let eps: Vec<f64> = log_tv.samples.iter().map(|s| s.eps).collect();
    let alpha1 = {
        let data = solve_lyapunov(&vdp_error_matrix(3.0, 3.0), &DMatrix::identity(2, 2)).unwrap();
        let cert = safemrac::certify::quadratic_certificate(&data).unwrap();
        cert.alpha1()
    };
    let viols =
        safemrac::safety::rate_condition_violations(&eps, 1e-2, alpha1, 1e-9).unwrap();
    let flagged: usize = viols.iter().map(|v| v.end_index - v.start_index + 1).sum();
    println!(
        "tv rate monitor: {} intervals, {} / {} samples flagged",
        viols.len(),
        flagged,
        eps.len()
    );
}
