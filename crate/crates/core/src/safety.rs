//! Safe-set geometry: quadratic level sets, performance bounds, and the
//! rate-condition monitor.
//!
//! A [`LevelSet`] is the open set `{x : xᵀPx < c}` with `P` symmetric
//! positive definite. The time-varying performance bound `ε(t)` is the
//! Euclidean distance from the reference state to the complement of the
//! safe set; the constant bound is either supplied directly or derived as
//! the gap between the reference set and the safe-set boundary.

use nalgebra::{DMatrix, DVector};

use crate::certify::symmetric_eigen_bounds;
use crate::error::{Error, Result};

/// Open sublevel set `{x : xᵀPx < c}` of a positive-definite quadratic form.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    shape: DMatrix<f64>,
    level: f64,
}

impl LevelSet {
    /// Validates the shape matrix (symmetric positive definite) and level.
    pub fn new(shape: DMatrix<f64>, level: f64) -> Result<Self> {
        let (lo, _) = symmetric_eigen_bounds(&shape)?;
        if lo <= 0.0 {
            return Err(Error::Config(format!(
                "level-set shape must be positive definite, minimum eigenvalue {lo}"
            )));
        }
        if !(level > 0.0) {
            return Err(Error::Config(format!(
                "level must be positive, got {level}"
            )));
        }
        Ok(Self { shape, level })
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.shape.nrows()
    }

    /// Quadratic form `xᵀPx`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.shape * x)[0]
    }
}

/// Membership test returning `(x ∈ set, margin c − xᵀPx)`.
///
/// The set is open: a point exactly on the boundary is outside.
pub fn in_safe_set(x: &DVector<f64>, set: &LevelSet) -> (bool, f64) {
    let margin = set.level() - set.quad_form(x);
    (margin > 0.0, margin)
}

/// Euclidean distance from an interior point to the boundary ellipsoid
/// `{y : yᵀPy = c}`. Returns 0 for points on or outside the boundary.
///
/// Solves the stationarity condition `y = (I + λP)⁻¹x` for the multiplier
/// by safeguarded root-finding (bisection plus Newton polish) on the
/// constraint `yᵀPy = c`, in the eigenbasis of `P`.
pub fn dist_point_to_boundary(x: &DVector<f64>, set: &LevelSet) -> f64 {
    if set.quad_form(x) >= set.level() {
        return 0.0;
    }
    let eig = set.shape().clone().symmetric_eigen();
    let z = eig.eigenvectors.transpose() * x;
    boundary_distance_rotated(z.as_slice(), eig.eigenvalues.as_slice(), set.level())
}

/// Distance solve in coordinates where the shape matrix is diagonal with
/// entries `sigma`. Assumes the point is strictly interior.
///
/// Parametrized by `t = λ + 1/σ_max ∈ (0, 1/σ_max]` so the critical
/// denominators `(1 − σᵢ/σ_max) + tσᵢ` are computed without cancellation.
fn boundary_distance_rotated(z: &[f64], sigma: &[f64], c: f64) -> f64 {
    let s_max = sigma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let t_hi = 1.0 / s_max;
    let den = |t: f64, i: usize| (1.0 - sigma[i] / s_max) + t * sigma[i];
    // Components with z_i = 0 contribute nothing; skipping them avoids
    // 0/0 on the top eigenspace where den(0, i) = 0.
    let phi = |t: f64| -> f64 {
        z.iter()
            .zip(sigma)
            .enumerate()
            .filter(|(_, (zi, _))| **zi != 0.0)
            .map(|(i, (zi, si))| {
                let d = den(t, i);
                si * zi * zi / (d * d)
            })
            .sum()
    };

    // Hard case: x carries no mass on the top eigenspace and the remaining
    // components cannot reach the level for any multiplier. The nearest
    // boundary point then gains a component along that eigenspace.
    let top_mass: f64 = z
        .iter()
        .zip(sigma)
        .enumerate()
        .filter(|(i, _)| den(0.0, *i) == 0.0)
        .map(|(_, (zi, _))| zi * zi)
        .sum();
    if top_mass == 0.0 {
        let phi0 = phi(0.0);
        if phi0 < c {
            let d2: f64 = z
                .iter()
                .zip(sigma)
                .enumerate()
                .filter(|(i, (zi, _))| **zi != 0.0 && den(0.0, *i) > 0.0)
                .map(|(i, (zi, si))| {
                    let gap = zi * si * t_hi / den(0.0, i);
                    gap * gap
                })
                .sum();
            let tau2 = (c - phi0) / s_max;
            return (d2 + tau2).sqrt();
        }
    }

    // Bracket: phi is strictly decreasing with phi(t_hi) = xᵀPx < c and
    // phi(t) -> infinity (top mass present) or phi(0) >= c as t -> 0.
    let mut t_lo = t_hi;
    let mut halvings = 0usize;
    while phi(t_lo) < c && halvings < 1200 {
        t_lo *= 0.5;
        halvings += 1;
    }
    let (mut a, mut b) = (t_lo, t_hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if phi(mid) >= c {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mut t = 0.5 * (a + b);
    for _ in 0..4 {
        let f = phi(t) - c;
        let fp: f64 = z
            .iter()
            .zip(sigma)
            .enumerate()
            .filter(|(_, (zi, _))| **zi != 0.0)
            .map(|(i, (zi, si))| {
                let d = den(t, i);
                -2.0 * si * si * zi * zi / (d * d * d)
            })
            .sum();
        if fp == 0.0 {
            break;
        }
        let next = t - f / fp;
        if next <= a || next >= b {
            break;
        }
        t = next;
    }

    // x − y = (t − t_hi) diag(σᵢ/denᵢ) z in the eigenbasis.
    let gap2: f64 = z
        .iter()
        .zip(sigma)
        .enumerate()
        .filter(|(_, (zi, _))| **zi != 0.0)
        .map(|(i, (zi, si))| {
            let g = zi * si / den(t, i);
            g * g
        })
        .sum();
    (t_hi - t).abs() * gap2.sqrt()
}

/// Minimum Euclidean gap between the boundaries of two nested level sets
/// sharing the same shape matrix: `(√c_out − √c_in)/√λ_max(P)`.
///
/// The gap is attained along the eigenvector of the largest eigenvalue,
/// where both boundaries come closest to the origin with aligned normals.
pub fn dist_between_level_sets(inner: &LevelSet, outer: &LevelSet) -> Result<f64> {
    if inner.shape() != outer.shape() {
        return Err(Error::Geometry(
            "level sets with different shape matrices are not supported".into(),
        ));
    }
    if inner.level() >= outer.level() {
        return Err(Error::Geometry(format!(
            "inner level {} must be strictly below outer level {}",
            inner.level(),
            outer.level()
        )));
    }
    let (_, l_max) = symmetric_eigen_bounds(inner.shape())?;
    Ok((outer.level().sqrt() - inner.level().sqrt()) / l_max.sqrt())
}

/// Whether the performance bound is a constant or tracks the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    Constant,
    TimeVarying,
}

/// Performance bound on the tracking error, backed by the safe-set
/// geometry.
#[derive(Clone)]
pub struct PerformanceBound {
    mode: BoundMode,
    eps_bar: Option<f64>,
    safe_set: LevelSet,
    ref_set: Option<LevelSet>,
}

impl PerformanceBound {
    /// Constant bound with a directly supplied `ε̄`.
    pub fn constant(eps_bar: f64, safe_set: LevelSet, ref_set: Option<LevelSet>) -> Result<Self> {
        if !(eps_bar > 0.0) {
            return Err(Error::Config(format!(
                "constant performance bound must be positive, got {eps_bar}"
            )));
        }
        Ok(Self {
            mode: BoundMode::Constant,
            eps_bar: Some(eps_bar),
            safe_set,
            ref_set,
        })
    }

    /// Constant bound derived as the gap between the reference set and the
    /// safe-set boundary.
    pub fn constant_derived(safe_set: LevelSet, ref_set: LevelSet) -> Result<Self> {
        let eps_bar = dist_between_level_sets(&ref_set, &safe_set)?;
        Self::constant(eps_bar, safe_set, Some(ref_set))
    }

    /// Time-varying bound `ε(t) = dist(x_r(t), boundary of the safe set)`.
    pub fn time_varying(safe_set: LevelSet, ref_set: Option<LevelSet>) -> Self {
        Self {
            mode: BoundMode::TimeVarying,
            eps_bar: None,
            safe_set,
            ref_set,
        }
    }

    pub fn mode(&self) -> BoundMode {
        self.mode
    }

    pub fn eps_bar(&self) -> Option<f64> {
        self.eps_bar
    }

    pub fn safe_set(&self) -> &LevelSet {
        &self.safe_set
    }

    pub fn ref_set(&self) -> Option<&LevelSet> {
        self.ref_set.as_ref()
    }
}

/// Evaluates the active performance bound at time `t`.
///
/// In time-varying mode the reference state must be strictly inside the
/// safe set; otherwise the bound is undefined and the problem setup is
/// invalid.
pub fn performance_bound_at(t: f64, xr: &DVector<f64>, bound: &PerformanceBound) -> Result<f64> {
    match bound.mode {
        BoundMode::Constant => Ok(bound.eps_bar.expect("constant bound carries eps_bar")),
        BoundMode::TimeVarying => {
            let eps = dist_point_to_boundary(xr, &bound.safe_set);
            if eps <= 0.0 {
                return Err(Error::ReferenceEscape { t });
            }
            Ok(eps)
        }
    }
}

/// A maximal run of consecutive samples violating the rate condition.
#[derive(Debug, Clone, PartialEq)]
pub struct RateViolationInterval {
    pub start_index: usize,
    pub end_index: usize,
    pub t_start: f64,
    pub t_end: f64,
}

/// Checks the decrease-rate condition `|ε̇| ≤ (α₁/2) ε` (required only
/// while `ε` is decreasing) on a uniformly sampled trace.
///
/// `ε̇` is estimated by central differences, so only interior samples are
/// examined. An empty result means the condition holds on the trace.
pub fn rate_condition_violations(
    eps: &[f64],
    dt: f64,
    alpha1: f64,
    tol: f64,
) -> Result<Vec<RateViolationInterval>> {
    if eps.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: eps.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("sample step must be positive, got {dt}")));
    }
    if !(alpha1 > 0.0) {
        return Err(Error::Config(format!(
            "decay ratio must be positive, got {alpha1}"
        )));
    }
    let mut intervals: Vec<RateViolationInterval> = Vec::new();
    for i in 1..eps.len() - 1 {
        let rate = (eps[i + 1] - eps[i - 1]) / (2.0 * dt);
        let violated = rate < 0.0 && rate.abs() > 0.5 * alpha1 * eps[i] + tol;
        if violated {
            let t = i as f64 * dt;
            match intervals.last_mut() {
                Some(last) if last.end_index + 1 == i => {
                    last.end_index = i;
                    last.t_end = t;
                }
                _ => intervals.push(RateViolationInterval {
                    start_index: i,
                    end_index: i,
                    t_start: t,
                    t_end: t,
                }),
            }
        }
    }
    Ok(intervals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{solve_lyapunov, vdp_error_matrix};
    use crate::selfcheck::boundary_distance_sampled;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn vdp_p() -> DMatrix<f64> {
        solve_lyapunov(&vdp_error_matrix(3.0, 3.0), &DMatrix::identity(2, 2))
            .unwrap()
            .p()
            .clone()
    }

    #[test]
    fn distance_from_center_of_unit_disk() {
        let set = LevelSet::new(DMatrix::identity(2, 2), 1.0).unwrap();
        assert!(close(dist_point_to_boundary(&DVector::zeros(2), &set), 1.0, 1e-12));
    }

    #[test]
    fn distance_is_radial_for_identity_shape() {
        let set = LevelSet::new(DMatrix::identity(2, 2), 1.0).unwrap();
        let x = DVector::from_vec(vec![0.5, 0.0]);
        assert!(close(dist_point_to_boundary(&x, &set), 0.5, 1e-10));
    }

    #[test]
    fn distance_matches_dense_boundary_sampling() {
        let set = LevelSet::new(vdp_p(), 3.2).unwrap();
        let x = DVector::from_vec(vec![0.2, -0.1]);
        let fast = dist_point_to_boundary(&x, &set);
        let slow = boundary_distance_sampled(&x, &set, 1_000_000);
        assert!(close(fast, slow, 1e-4), "fast {fast} vs sampled {slow}");
    }

    #[test]
    fn distance_zero_outside() {
        let set = LevelSet::new(vdp_p(), 3.2).unwrap();
        let x = DVector::from_vec(vec![2.0, 2.0]);
        assert_eq!(dist_point_to_boundary(&x, &set), 0.0);
    }

    #[test]
    fn distance_monotone_in_level() {
        let p = vdp_p();
        let x = DVector::from_vec(vec![0.3, 0.4]);
        let inner = LevelSet::new(p.clone(), 1.5).unwrap();
        let outer = LevelSet::new(p, 3.0).unwrap();
        assert!(dist_point_to_boundary(&x, &inner) <= dist_point_to_boundary(&x, &outer));
    }

    #[test]
    fn distance_on_max_eigenvector_free_axis() {
        // Point orthogonal to the dominant eigenvector: the nearest
        // boundary point jumps onto that eigenspace.
        let set = LevelSet::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])), 4.0)
            .unwrap();
        // Interior point on the slow axis; boundary along it is at y2 = 2.
        let x = DVector::from_vec(vec![0.0, 0.5]);
        let fast = dist_point_to_boundary(&x, &set);
        let slow = boundary_distance_sampled(&x, &set, 1_000_000);
        assert!(close(fast, slow, 1e-4), "fast {fast} vs sampled {slow}");
    }

    #[test]
    fn gap_between_concentric_circles() {
        let inner = LevelSet::new(DMatrix::identity(2, 2), 1.0).unwrap();
        let outer = LevelSet::new(DMatrix::identity(2, 2), 4.0).unwrap();
        assert!(close(dist_between_level_sets(&inner, &outer).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn gap_along_short_axis() {
        let p = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let inner = LevelSet::new(p.clone(), 1.0).unwrap();
        let outer = LevelSet::new(p, 4.0).unwrap();
        assert!(close(dist_between_level_sets(&inner, &outer).unwrap(), 0.5, 1e-12));
    }

    #[test]
    fn gap_for_study_levels() {
        let p = vdp_p();
        let inner = LevelSet::new(p.clone(), 2.8).unwrap();
        let outer = LevelSet::new(p.clone(), 3.2).unwrap();
        let gap = dist_between_level_sets(&inner, &outer).unwrap();
        let (_, l_max) = symmetric_eigen_bounds(&p).unwrap();
        let expected = (3.2f64.sqrt() - 2.8f64.sqrt()) / l_max.sqrt();
        assert!(close(gap, expected, 1e-12));
        assert!(close(gap, 0.1045, 2e-4));
    }

    #[test]
    fn gap_rejects_bad_pairs() {
        let p = vdp_p();
        let a = LevelSet::new(p.clone(), 3.0).unwrap();
        let b = LevelSet::new(p, 2.0).unwrap();
        assert!(matches!(dist_between_level_sets(&a, &b), Err(Error::Geometry(_))));
        let other = LevelSet::new(DMatrix::identity(2, 2), 4.0).unwrap();
        assert!(matches!(dist_between_level_sets(&a, &other), Err(Error::Geometry(_))));
    }

    #[test]
    fn constant_bound_is_constant() {
        let set = LevelSet::new(vdp_p(), 3.2).unwrap();
        let bound = PerformanceBound::constant(1.3, set, None).unwrap();
        for t in [0.0, 1.0, 100.0] {
            let eps =
                performance_bound_at(t, &DVector::from_vec(vec![5.0, 5.0]), &bound).unwrap();
            assert_eq!(eps, 1.3);
        }
    }

    #[test]
    fn time_varying_bound_at_center() {
        let p = vdp_p();
        let (_, l_max) = symmetric_eigen_bounds(&p).unwrap();
        let set = LevelSet::new(p, 3.2).unwrap();
        let bound = PerformanceBound::time_varying(set, None);
        let eps = performance_bound_at(0.0, &DVector::zeros(2), &bound).unwrap();
        assert!(close(eps, (3.2 / l_max).sqrt(), 1e-8));
    }

    #[test]
    fn time_varying_bound_rejects_escaped_reference() {
        let set = LevelSet::new(vdp_p(), 3.2).unwrap();
        let bound = PerformanceBound::time_varying(set, None);
        let out = performance_bound_at(1.5, &DVector::from_vec(vec![2.0, 2.0]), &bound);
        assert!(matches!(out, Err(Error::ReferenceEscape { .. })));
    }

    #[test]
    fn membership_and_margin() {
        let set = LevelSet::new(vdp_p(), 3.2).unwrap();
        let (inside, margin) = in_safe_set(&DVector::zeros(2), &set);
        assert!(inside);
        assert_eq!(margin, 3.2);

        let x = DVector::from_vec(vec![2.0, 2.0]);
        let (inside, margin) = in_safe_set(&x, &set);
        assert!(!inside);
        assert!(close(margin, 3.2 - 20.0 / 3.0, 1e-10));
    }

    #[test]
    fn boundary_point_is_outside() {
        let set = LevelSet::new(DMatrix::identity(2, 2), 1.0).unwrap();
        let (inside, margin) = in_safe_set(&DVector::from_vec(vec![1.0, 0.0]), &set);
        assert!(!inside);
        assert_eq!(margin, 0.0);
    }

    #[test]
    fn error_ball_inside_bound_stays_safe() {
        // If ‖e‖ < ε(t) and xr is strictly inside, xr + e is in the set.
        let set = LevelSet::new(vdp_p(), 3.2).unwrap();
        let bound = PerformanceBound::time_varying(set.clone(), None);
        let xr = DVector::from_vec(vec![0.4, -0.6]);
        let eps = performance_bound_at(0.0, &xr, &bound).unwrap();
        for k in 0..200 {
            let ang = k as f64 * 0.0315;
            let rad = eps * (1.0 - 1e-9) * (0.5 + 0.5 * (3.0 * ang).sin().abs());
            let e = DVector::from_vec(vec![rad * ang.cos(), rad * ang.sin()]);
            let (inside, _) = in_safe_set(&(&xr + &e), &set);
            assert!(inside, "escaped at angle {ang} radius {rad}");
        }
    }

    #[test]
    fn rate_monitor_accepts_constant_trace() {
        let eps = vec![1.3; 100];
        let v = rate_condition_violations(&eps, 0.01, 0.8, 1e-9).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn rate_monitor_accepts_slow_decay() {
        let alpha1 = 0.8172;
        let dt = 0.01;
        let eps: Vec<f64> = (0..500)
            .map(|i| (-(alpha1 / 4.0) * i as f64 * dt).exp() * 1.3)
            .collect();
        let v = rate_condition_violations(&eps, dt, alpha1, 1e-9).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn rate_monitor_flags_fast_decay() {
        let alpha1 = 0.8172;
        let dt = 0.01;
        let n = 500;
        let eps: Vec<f64> = (0..n)
            .map(|i| (-alpha1 * i as f64 * dt).exp() * 1.3)
            .collect();
        let v = rate_condition_violations(&eps, dt, alpha1, 1e-9).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].start_index, 1);
        assert_eq!(v[0].end_index, n - 2);
    }

    #[test]
    fn rate_monitor_needs_three_samples() {
        let out = rate_condition_violations(&[1.0, 0.9], 0.1, 1.0, 0.0);
        assert!(matches!(out, Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn level_set_rejects_indefinite_shape() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(LevelSet::new(bad, 1.0).is_err());
        assert!(LevelSet::new(DMatrix::identity(2, 2), 0.0).is_err());
    }
}
