//! Built-in certificate and geometry self-checks behind the `verify` verb.
//!
//! Each check prints one `ok`/`FAIL` line; the verb exits nonzero if any
//! check fails. These are fast versions of the cross-validation performed
//! by the test suites.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safemrac::adapt::{proj, ProjectionBounds};
use safemrac::certify::{
    quadratic_certificate, solve_lyapunov, vdp_error_matrix, verify_certificate,
};
use safemrac::safety::{dist_between_level_sets, dist_point_to_boundary, LevelSet};
use safemrac::selfcheck::{boundary_distance_sampled, level_set_gap_sampled};
use safemrac::sim::rk4_step;

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(checks: &[Check]) -> bool {
    let mut all = true;
    for c in checks {
        let status = if c.passed { "ok  " } else { "FAIL" };
        println!("{status} {:<38} {}", c.name, c.detail);
        all &= c.passed;
    }
    all
}

/// Runs all self-checks; returns true when everything passed.
pub fn run_self_checks() -> bool {
    let mut checks = Vec::new();

    // Lyapunov solve for the study gains against the hand-solved entries.
    let a = vdp_error_matrix(3.0, 3.0);
    let r = DMatrix::<f64>::identity(2, 2);
    match solve_lyapunov(&a, &r) {
        Ok(data) => {
            let expected =
                DMatrix::from_row_slice(2, 2, &[29.0 / 24.0, 0.125, 0.125, 5.0 / 24.0]);
            let entry_err = (data.p() - &expected).amax();
            checks.push(Check {
                name: "lyapunov solve",
                passed: entry_err <= 1e-10 && data.residual() <= 1e-10,
                detail: format!(
                    "entry error {:.2e}, residual {:.2e}",
                    entry_err,
                    data.residual()
                ),
            });

            let cert = quadratic_certificate(&data).expect("certificate from solved data");
            let field = {
                let a = a.clone();
                move |e: &DVector<f64>| &a * e
            };
            let rep = verify_certificate(&cert, &field, 2, 2.0, 10_000, 1e-9, 42);
            checks.push(Check {
                name: "certificate sampling",
                passed: rep.passed(),
                detail: format!(
                    "{} samples, worst decay margin {:.2e}",
                    rep.samples, rep.worst_decay_margin
                ),
            });

            let p = data.p().clone();
            let safe = LevelSet::new(p.clone(), 3.2).expect("safe set");
            let refs = LevelSet::new(p, 2.8).expect("reference set");
            let gap = dist_between_level_sets(&refs, &safe).expect("gap");
            let sampled = level_set_gap_sampled(&refs, &safe, 4096, 8192);
            checks.push(Check {
                name: "level-set gap vs sampling",
                passed: (gap - sampled).abs() <= 1e-4,
                detail: format!("closed form {gap:.6}, sampled {sampled:.6}"),
            });

            let x = DVector::from_vec(vec![0.2, -0.1]);
            let fast = dist_point_to_boundary(&x, &safe);
            let slow = boundary_distance_sampled(&x, &safe, 200_000);
            checks.push(Check {
                name: "point distance vs sampling",
                passed: (fast - slow).abs() <= 1e-4,
                detail: format!("solver {fast:.6}, sampled {slow:.6}"),
            });
        }
        Err(e) => checks.push(Check {
            name: "lyapunov solve",
            passed: false,
            detail: e.to_string(),
        }),
    }

    // Identity-shape distance is exactly radial.
    let disk = LevelSet::new(DMatrix::identity(2, 2), 1.0).expect("disk");
    let d = dist_point_to_boundary(&DVector::from_vec(vec![0.5, 0.0]), &disk);
    checks.push(Check {
        name: "radial distance on a disk",
        passed: (d - 0.5).abs() <= 1e-10,
        detail: format!("got {d:.12}"),
    });

    // Projection inner-product inequality on seeded triples.
    let bounds = ProjectionBounds::symmetric(4, 10.0, 0.1).expect("bounds");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let theta = DVector::from_fn(4, |_, _| rng.random::<f64>() * 20.0 - 10.0);
        let star = DVector::from_fn(4, |_, _| rng.random::<f64>() * 19.8 - 9.9);
        let y = DVector::from_fn(4, |_, _| rng.random::<f64>() * 10.0 - 5.0);
        let p = proj(&theta, &y, &bounds).expect("theta in bounds");
        worst = worst.max((&theta - &star).dot(&(&p - &y)));
    }
    checks.push(Check {
        name: "projection inequality",
        passed: worst <= 1e-12,
        detail: format!("worst inner product {worst:.2e}"),
    });

    // RK4 order check on the scalar exponential.
    let rhs = |_t: f64, y: &DVector<f64>| Ok(-y.clone());
    let terminal_err = |dt: f64| {
        let mut y = DVector::from_element(1, 1.0);
        for k in 0..(1.0 / dt).round() as usize {
            y = rk4_step(&rhs, k as f64 * dt, &y, dt).expect("finite");
        }
        (y[0] - (-1.0f64).exp()).abs()
    };
    let ratio = terminal_err(0.01) / terminal_err(0.005);
    checks.push(Check {
        name: "rk4 order",
        passed: (12.0..=20.0).contains(&ratio),
        detail: format!("halving ratio {ratio:.2}"),
    });

    report(&checks)
}
