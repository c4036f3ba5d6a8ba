//! Brute-force reference computations used to cross-check the fast paths.
//!
//! Everything here is deliberately independent of the production
//! implementations: distances come from dense boundary sampling and linear
//! flows from the closed-form 2x2 matrix exponential. These routines back
//! the `verify` self-checks and the test suites; they are slow by design.

use nalgebra::{DMatrix, DVector};

use crate::safety::LevelSet;

/// Minimum distance from `x` to the boundary of a planar level set,
/// estimated by sampling `samples` points `y(θ) = √c P^{-1/2}(cos θ, sin θ)`.
///
/// Only supports two-dimensional sets.
pub fn boundary_distance_sampled(x: &DVector<f64>, set: &LevelSet, samples: usize) -> f64 {
    assert_eq!(set.dim(), 2, "sampling oracle is two-dimensional");
    let inv_sqrt = shape_inverse_sqrt(set.shape());
    let scale = set.level().sqrt();
    let mut best = f64::INFINITY;
    for k in 0..samples {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let u = DVector::from_vec(vec![theta.cos(), theta.sin()]);
        let y = &inv_sqrt * u * scale;
        best = best.min((x - y).norm());
    }
    best
}

/// Minimum gap between the boundaries of two planar level sets, estimated
/// by exhaustive sampling of both boundaries.
pub fn level_set_gap_sampled(
    inner: &LevelSet,
    outer: &LevelSet,
    inner_samples: usize,
    outer_samples: usize,
) -> f64 {
    assert_eq!(inner.dim(), 2, "sampling oracle is two-dimensional");
    assert_eq!(outer.dim(), 2, "sampling oracle is two-dimensional");
    let inner_sqrt = shape_inverse_sqrt(inner.shape());
    let outer_sqrt = shape_inverse_sqrt(outer.shape());
    let ci = inner.level().sqrt();
    let co = outer.level().sqrt();
    let outer_pts: Vec<DVector<f64>> = (0..outer_samples)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / outer_samples as f64;
            &outer_sqrt * DVector::from_vec(vec![theta.cos(), theta.sin()]) * co
        })
        .collect();
    let mut best = f64::INFINITY;
    for k in 0..inner_samples {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / inner_samples as f64;
        let p = &inner_sqrt * DVector::from_vec(vec![theta.cos(), theta.sin()]) * ci;
        for q in &outer_pts {
            best = best.min((&p - q).norm());
        }
    }
    best
}

fn shape_inverse_sqrt(shape: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = shape.clone().symmetric_eigen();
    let mut d = DMatrix::zeros(shape.nrows(), shape.ncols());
    for i in 0..shape.nrows() {
        d[(i, i)] = 1.0 / eig.eigenvalues[i].sqrt();
    }
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Closed-form `exp(A t) e0` for a real 2x2 matrix, covering complex,
/// distinct-real, and repeated eigenvalue cases.
pub fn linear_flow_2x2(a: &DMatrix<f64>, e0: &DVector<f64>, t: f64) -> DVector<f64> {
    assert_eq!(a.nrows(), 2);
    assert_eq!(a.ncols(), 2);
    let tr = a[(0, 0)] + a[(1, 1)];
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let alpha = tr / 2.0;
    let disc = alpha * alpha - det;
    let id = DMatrix::<f64>::identity(2, 2);
    let exp_at = if disc < -1e-14 {
        // Complex pair alpha ± i beta.
        let beta = (-disc).sqrt();
        (alpha * t).exp() * ((beta * t).cos() * &id + ((beta * t).sin() / beta) * (a - alpha * &id))
    } else if disc > 1e-14 {
        // Distinct real eigenvalues.
        let root = disc.sqrt();
        let l1 = alpha - root;
        let l2 = alpha + root;
        let e1 = (l1 * t).exp();
        let e2 = (l2 * t).exp();
        ((l2 * e1 - l1 * e2) / (l2 - l1)) * &id + ((e2 - e1) / (l2 - l1)) * a
    } else {
        // Repeated eigenvalue.
        (alpha * t).exp() * (&id + t * (a - alpha * &id))
    };
    exp_at * e0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_flow_matches_scalar_exponential() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let e0 = DVector::from_vec(vec![1.0, 1.0]);
        let out = linear_flow_2x2(&a, &e0, 0.7);
        assert!((out[0] - (-0.7f64).exp()).abs() <= 1e-14);
        assert!((out[1] - (-1.4f64).exp()).abs() <= 1e-14);
    }

    #[test]
    fn linear_flow_complex_case_is_norm_preserving_for_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e0 = DVector::from_vec(vec![1.0, 0.0]);
        let out = linear_flow_2x2(&a, &e0, std::f64::consts::FRAC_PI_2);
        assert!((out[0] - 0.0).abs() <= 1e-12);
        assert!((out[1] - -1.0).abs() <= 1e-12);
    }

    #[test]
    fn linear_flow_repeated_eigenvalue() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        let e0 = DVector::from_vec(vec![0.0, 1.0]);
        let out = linear_flow_2x2(&a, &e0, 2.0);
        // exp(At) = e^{-t} [[1, t], [0, 1]]
        assert!((out[0] - 2.0 * (-2.0f64).exp()).abs() <= 1e-14);
        assert!((out[1] - (-2.0f64).exp()).abs() <= 1e-14);
    }

    #[test]
    fn sampled_distance_on_circle() {
        let set = LevelSet::new(DMatrix::identity(2, 2), 4.0).unwrap();
        let x = DVector::from_vec(vec![0.5, 0.5]);
        let d = boundary_distance_sampled(&x, &set, 100_000);
        let exact = 2.0 - x.norm();
        assert!((d - exact).abs() <= 1e-6);
    }
}
