//! Nominal controllers and their exponential-stability certificates.
//!
//! A [`Certificate`] packages a Lyapunov function `V` with constants
//! `k0, k1, k2` such that `k1‖e‖² ≤ V(e) ≤ k2‖e‖²` and the nominal
//! closed-loop error field decays at least as fast as `−k0‖e‖²`. For
//! quadratic `V(e) = eᵀPe` the constants are derived from the Lyapunov
//! equation `AᵀP + PA + R = 0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::VectorField;

/// Scalar field `e -> V(e)`.
pub type ScalarField = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
/// Control law `(x, xr, c) -> u`.
pub type ControlLaw =
    Arc<dyn Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Frobenius-norm tolerance on the Lyapunov-equation residual.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;

/// Lyapunov data certifying exponential stability of the nominal error
/// dynamics.
#[derive(Clone)]
pub struct Certificate {
    lyap: ScalarField,
    lyap_grad: VectorField,
    k0: f64,
    k1: f64,
    k2: f64,
    alpha1: f64,
}

impl Certificate {
    /// Wraps a user-supplied Lyapunov function with its constants.
    ///
    /// `dim` is the error-vector dimension, used to check `V(0) = 0` and
    /// `∇V(0) = 0`. The decay ratio `alpha1 = k0/k2` is derived, not taken
    /// as input.
    pub fn new(
        lyap: ScalarField,
        lyap_grad: VectorField,
        k0: f64,
        k1: f64,
        k2: f64,
        dim: usize,
    ) -> Result<Self> {
        if !(k0 > 0.0 && k1 > 0.0 && k2 > 0.0) {
            return Err(Error::Config(format!(
                "certificate constants must be positive, got k0 = {k0}, k1 = {k1}, k2 = {k2}"
            )));
        }
        if k1 > k2 {
            return Err(Error::Config(format!(
                "certificate requires k1 <= k2, got k1 = {k1} > k2 = {k2}"
            )));
        }
        let zero = DVector::zeros(dim);
        let v0 = lyap(&zero);
        if v0.abs() > 1e-12 {
            return Err(Error::Config(format!(
                "Lyapunov function must vanish at the origin, got V(0) = {v0}"
            )));
        }
        let g0 = lyap_grad(&zero);
        if g0.norm() > 1e-12 {
            return Err(Error::Config(format!(
                "Lyapunov gradient must vanish at the origin, got |∇V(0)| = {}",
                g0.norm()
            )));
        }
        Ok(Self {
            lyap,
            lyap_grad,
            k0,
            k1,
            k2,
            alpha1: k0 / k2,
        })
    }

    pub fn v(&self, e: &DVector<f64>) -> f64 {
        (self.lyap)(e)
    }

    pub fn grad(&self, e: &DVector<f64>) -> DVector<f64> {
        (self.lyap_grad)(e)
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    /// Decay ratio `k0 / k2`.
    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }
}

/// A nominal control law together with its stability certificate.
#[derive(Clone)]
pub struct NominalController {
    law: ControlLaw,
    certificate: Certificate,
}

impl NominalController {
    pub fn new(law: ControlLaw, certificate: Certificate) -> Self {
        Self { law, certificate }
    }

    pub fn law(&self, x: &DVector<f64>, xr: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
        (self.law)(x, xr, c)
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }
}

/// Solution data of the Lyapunov equation `AᵀP + PA + R = 0`.
#[derive(Debug, Clone)]
pub struct QuadraticCertificateData {
    p: DMatrix<f64>,
    r: DMatrix<f64>,
    a_err: DMatrix<f64>,
}

impl QuadraticCertificateData {
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn error_matrix(&self) -> &DMatrix<f64> {
        &self.a_err
    }

    /// Frobenius norm of `AᵀP + PA + R`.
    pub fn residual(&self) -> f64 {
        (self.a_err.transpose() * &self.p + &self.p * &self.a_err + &self.r).norm()
    }
}

/// Minimum and maximum eigenvalues of a symmetric matrix.
///
/// The 2x2 case uses the trace/determinant closed form; larger matrices go
/// through an iterative symmetric eigensolver.
pub fn symmetric_eigen_bounds(mat: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = mat.nrows();
    if n != mat.ncols() {
        return Err(Error::Config(format!(
            "eigenvalue bounds need a square matrix, got {}x{}",
            n,
            mat.ncols()
        )));
    }
    if (mat - mat.transpose()).norm() > 1e-10 * (1.0 + mat.norm()) {
        return Err(Error::Config("matrix is not symmetric".into()));
    }
    match n {
        0 => Err(Error::Config("empty matrix".into())),
        1 => Ok((mat[(0, 0)], mat[(0, 0)])),
        2 => {
            let tr = mat[(0, 0)] + mat[(1, 1)];
            let det = mat[(0, 0)] * mat[(1, 1)] - mat[(0, 1)] * mat[(1, 0)];
            let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
            Ok(((tr - disc) / 2.0, (tr + disc) / 2.0))
        }
        _ => {
            let eig = mat.clone().symmetric_eigen();
            let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = eig
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((lo, hi))
        }
    }
}

fn check_spd(mat: &DMatrix<f64>, name: &str) -> Result<()> {
    let (lo, _) = symmetric_eigen_bounds(mat)
        .map_err(|e| Error::Config(format!("{name}: {e}")))?;
    if lo <= 0.0 {
        return Err(Error::Config(format!(
            "{name} must be positive definite, minimum eigenvalue {lo}"
        )));
    }
    Ok(())
}

/// Solves `AᵀP + PA + R = 0` for symmetric `P` by writing the equation as
/// a linear system in the `n(n+1)/2` distinct entries of `P`.
///
/// Requires `A` Hurwitz and `R` symmetric positive definite; the returned
/// data carries a residual below [`LYAPUNOV_RESIDUAL_TOL`].
pub fn solve_lyapunov(a_err: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<QuadraticCertificateData> {
    let n = a_err.nrows();
    if a_err.ncols() != n {
        return Err(Error::Config(format!(
            "error matrix must be square, got {}x{}",
            n,
            a_err.ncols()
        )));
    }
    if r.nrows() != n || r.ncols() != n {
        return Err(Error::Config(format!(
            "R is {}x{}, expected {n}x{n}",
            r.nrows(),
            r.ncols()
        )));
    }
    check_spd(r, "R")?;
    let eigs = a_err.complex_eigenvalues();
    if let Some(bad) = eigs.iter().find(|l| l.re >= 0.0) {
        return Err(Error::Solver(format!(
            "error matrix is not Hurwitz: eigenvalue {} + {}i has nonnegative real part",
            bad.re, bad.im
        )));
    }

    // Unknowns p_{ij} for i <= j; one equation per upper-triangle entry of
    // AᵀP + PA = -R.
    let unknowns = n * (n + 1) / 2;
    let idx = |i: usize, j: usize| -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * n - i * (i + 1) / 2 + j
    };
    let mut system = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut rhs = DVector::<f64>::zeros(unknowns);
    for a in 0..n {
        for b in a..n {
            let row = idx(a, b);
            // (AᵀP)_{ab} = sum_k A_{ka} P_{kb}; (PA)_{ab} = sum_k P_{ak} A_{kb}
            for k in 0..n {
                system[(row, idx(k, b))] += a_err[(k, a)];
                system[(row, idx(a, k))] += a_err[(k, b)];
            }
            rhs[row] = -r[(a, b)];
        }
    }
    let lu = system.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("Lyapunov system is singular".into()))?;
    let mut p = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            p[(i, j)] = sol[idx(i, j)];
            p[(j, i)] = sol[idx(i, j)];
        }
    }
    let data = QuadraticCertificateData {
        p,
        r: r.clone(),
        a_err: a_err.clone(),
    };
    let res = data.residual();
    if res > LYAPUNOV_RESIDUAL_TOL {
        return Err(Error::Solver(format!(
            "Lyapunov residual {res} exceeds {LYAPUNOV_RESIDUAL_TOL}"
        )));
    }
    check_spd(&data.p, "P")?;
    Ok(data)
}

/// Builds the quadratic certificate `V(e) = eᵀPe` with the tightest
/// constants: `k1 = λ_min(P)`, `k2 = λ_max(P)`, `k0 = λ_min(R)`.
pub fn quadratic_certificate(data: &QuadraticCertificateData) -> Result<Certificate> {
    let (k1, k2) = symmetric_eigen_bounds(data.p())?;
    let (k0, _) = symmetric_eigen_bounds(data.r())?;
    let p_v = data.p().clone();
    let p_g = data.p().clone();
    let lyap: ScalarField = Arc::new(move |e: &DVector<f64>| (e.transpose() * &p_v * e)[0]);
    let grad: VectorField = Arc::new(move |e: &DVector<f64>| 2.0 * (&p_g * e));
    Certificate::new(lyap, grad, k0, k1, k2, data.p().nrows())
}

/// Error matrix of the Van der Pol study's nominal closed loop,
/// `A = [0, 1; -(1+l1), -l2]`.
pub fn vdp_error_matrix(l1: f64, l2: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -(1.0 + l1), -l2])
}

/// The Van der Pol study's closed-form nominal controller
/// `u_n = -l1 e1 - l2 e2 + x1 x2 - x2² + c + mu xr2 (1 - xr1²)`
/// with the quadratic certificate solved from its error matrix and `r`.
pub fn vdp_nominal(
    l1: f64,
    l2: f64,
    mu: f64,
    r: &DMatrix<f64>,
) -> Result<(NominalController, QuadraticCertificateData)> {
    if l1 <= 0.0 || l2 <= 0.0 {
        return Err(Error::Config(format!(
            "nominal gains must be positive, got l1 = {l1}, l2 = {l2}"
        )));
    }
    let data = solve_lyapunov(&vdp_error_matrix(l1, l2), r)?;
    let cert = quadratic_certificate(&data)?;
    let law: ControlLaw = Arc::new(move |x, xr, c| {
        let e1 = x[0] - xr[0];
        let e2 = x[1] - xr[1];
        DVector::from_element(
            1,
            -l1 * e1 - l2 * e2 + x[0] * x[1] - x[1] * x[1]
                + c[0]
                + mu * xr[1] * (1.0 - xr[0] * xr[0]),
        )
    });
    Ok((NominalController::new(law, cert), data))
}

/// Which certificate inequality a sample violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    LowerBound,
    UpperBound,
    Decay,
}

#[derive(Debug, Clone)]
pub struct ViolationSample {
    pub e: DVector<f64>,
    pub kind: ViolationKind,
    pub margin: f64,
}

/// Outcome of sampling-based certificate verification.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub samples: usize,
    pub sandwich_violations: usize,
    pub decay_violations: usize,
    /// Minimum over samples of `V(e) - k1‖e‖²`.
    pub worst_lower_margin: f64,
    /// Minimum over samples of `k2‖e‖² - V(e)`.
    pub worst_upper_margin: f64,
    /// Minimum over samples of `-∇V(e)ᵀg(e) - k0‖e‖²`.
    pub worst_decay_margin: f64,
    pub first_violation: Option<ViolationSample>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.sandwich_violations == 0 && self.decay_violations == 0
    }
}

/// Samples the certificate inequalities over a ball of the given radius.
///
/// `error_rhs` must be the nominal closed-loop error field (uncertainty
/// off, unit control effectiveness). Violations beyond `tol` are counted
/// and reported, not raised.
pub fn verify_certificate(
    cert: &Certificate,
    error_rhs: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    dim: usize,
    radius: f64,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> CertificateReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CertificateReport {
        samples: 0,
        sandwich_violations: 0,
        decay_violations: 0,
        worst_lower_margin: f64::INFINITY,
        worst_upper_margin: f64::INFINITY,
        worst_decay_margin: f64::INFINITY,
        first_violation: None,
    };
    let check = |e: DVector<f64>, report: &mut CertificateReport| {
        let n2 = e.norm_squared();
        let v = cert.v(&e);
        let lower = v - cert.k1() * n2;
        let upper = cert.k2() * n2 - v;
        let decay = -cert.grad(&e).dot(&error_rhs(&e)) - cert.k0() * n2;
        report.worst_lower_margin = report.worst_lower_margin.min(lower);
        report.worst_upper_margin = report.worst_upper_margin.min(upper);
        report.worst_decay_margin = report.worst_decay_margin.min(decay);
        let record = |kind: ViolationKind, margin: f64, rep: &mut CertificateReport| {
            if rep.first_violation.is_none() {
                rep.first_violation = Some(ViolationSample {
                    e: e.clone(),
                    kind,
                    margin,
                });
            }
        };
        if lower < -tol {
            report.sandwich_violations += 1;
            record(ViolationKind::LowerBound, lower, report);
        }
        if upper < -tol {
            report.sandwich_violations += 1;
            record(ViolationKind::UpperBound, upper, report);
        }
        if decay < -tol {
            report.decay_violations += 1;
            record(ViolationKind::Decay, decay, report);
        }
        report.samples += 1;
    };
    // The origin holds every inequality with equality; include it first.
    check(DVector::zeros(dim), &mut report);
    for _ in 0..n_samples {
        let mut dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = dir.norm();
        if norm == 0.0 {
            continue;
        }
        dir /= norm;
        let rad = radius * rng.random::<f64>().powf(1.0 / dim as f64);
        check(dir * rad, &mut report);
    }
    report
}
