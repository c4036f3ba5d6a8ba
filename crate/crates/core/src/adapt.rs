//! The projection operator, the barrier-weighted update law, and the
//! adaptive control law.
//!
//! The update direction is rescaled by `(h + V)/h²` where
//! `h(t, e) = k1 ε²(t) − V(e)` is the barrier between the current Lyapunov
//! value and the performance bound. The projection keeps every column of
//! the weight estimate inside the hypercube `Ω`; the barrier weight grows
//! without bound as the error approaches the performance boundary, which
//! is what enforces the bound independently of the adaptation rate.

use nalgebra::{DMatrix, DVector};

use crate::certify::{Certificate, NominalController};
use crate::error::{Error, Result};
use crate::model::{PlantModel, VectorField};

/// Slack admitted when checking that a parameter lies in `Ω`, matching the
/// tolerance a fixed-step integrator can transiently introduce.
pub const PROJECTION_DOMAIN_SLACK: f64 = 1e-9;

/// Componentwise parameter hypercube `Ω` with boundary-layer width `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBounds {
    theta_min: DVector<f64>,
    theta_max: DVector<f64>,
    nu: f64,
}

impl ProjectionBounds {
    /// Validates that both `Ω` and the shrunk hypercube `Ω_ν` are nonempty.
    pub fn new(theta_min: DVector<f64>, theta_max: DVector<f64>, nu: f64) -> Result<Self> {
        if theta_min.len() != theta_max.len() {
            return Err(Error::Config(format!(
                "bound vectors have lengths {} and {}",
                theta_min.len(),
                theta_max.len()
            )));
        }
        if !(nu > 0.0) {
            return Err(Error::Config(format!(
                "boundary-layer width must be positive, got {nu}"
            )));
        }
        for i in 0..theta_min.len() {
            if theta_min[i] + 2.0 * nu >= theta_max[i] {
                return Err(Error::Config(format!(
                    "component {i}: need min + 2ν < max, got [{}, {}] with ν = {nu}",
                    theta_min[i], theta_max[i]
                )));
            }
        }
        Ok(Self {
            theta_min,
            theta_max,
            nu,
        })
    }

    /// Symmetric hypercube `[-limit, limit]^dim`.
    pub fn symmetric(dim: usize, limit: f64, nu: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(dim, -limit),
            DVector::from_element(dim, limit),
            nu,
        )
    }

    pub fn dim(&self) -> usize {
        self.theta_min.len()
    }

    pub fn theta_min(&self) -> &DVector<f64> {
        &self.theta_min
    }

    pub fn theta_max(&self) -> &DVector<f64> {
        &self.theta_max
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Smallest signed distance from any component to its bounds; negative
    /// when some component lies outside `Ω`.
    pub fn margin(&self, theta: &DVector<f64>) -> f64 {
        let mut worst = f64::INFINITY;
        for i in 0..theta.len() {
            worst = worst
                .min(theta[i] - self.theta_min[i])
                .min(self.theta_max[i] - theta[i]);
        }
        worst
    }

    fn check_domain(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Config(format!(
                "parameter has length {}, bounds have length {}",
                theta.len(),
                self.dim()
            )));
        }
        for i in 0..theta.len() {
            if theta[i] < self.theta_min[i] - PROJECTION_DOMAIN_SLACK
                || theta[i] > self.theta_max[i] + PROJECTION_DOMAIN_SLACK
            {
                return Err(Error::ParameterOutOfBounds {
                    index: i,
                    value: theta[i],
                    lo: self.theta_min[i],
                    hi: self.theta_max[i],
                });
            }
        }
        Ok(())
    }
}

/// Componentwise projection of an update direction `y` at parameter
/// `theta ∈ Ω`.
///
/// Inside the boundary layer the component is attenuated linearly, reaching
/// zero on the boundary when the update points outward; elsewhere `y`
/// passes through unchanged.
pub fn proj(theta: &DVector<f64>, y: &DVector<f64>, bounds: &ProjectionBounds) -> Result<DVector<f64>> {
    bounds.check_domain(theta)?;
    if y.len() != theta.len() {
        return Err(Error::Config(format!(
            "direction has length {}, parameter has length {}",
            y.len(),
            theta.len()
        )));
    }
    let nu = bounds.nu();
    let mut out = y.clone();
    for i in 0..theta.len() {
        let hi = bounds.theta_max()[i];
        let lo = bounds.theta_min()[i];
        if theta[i] > hi - nu && y[i] > 0.0 {
            out[i] = ((hi - theta[i]) / nu) * y[i];
        } else if theta[i] < lo + nu && y[i] < 0.0 {
            out[i] = ((theta[i] - lo) / nu) * y[i];
        }
    }
    Ok(out)
}

/// Columnwise matrix lift of [`proj`], with the same bounds applied to
/// every column.
pub fn proj_m(
    theta: &DMatrix<f64>,
    y: &DMatrix<f64>,
    bounds: &ProjectionBounds,
) -> Result<DMatrix<f64>> {
    if theta.shape() != y.shape() {
        return Err(Error::Config(format!(
            "parameter is {:?}, direction is {:?}",
            theta.shape(),
            y.shape()
        )));
    }
    let mut out = DMatrix::zeros(theta.nrows(), theta.ncols());
    for j in 0..theta.ncols() {
        let col = proj(
            &DVector::from(theta.column(j)),
            &DVector::from(y.column(j)),
            bounds,
        )?;
        out.set_column(j, &col);
    }
    Ok(out)
}

/// Regressor `σ(x, xr, c) = [σ_p(x); u_n(x, xr, c)]`.
pub fn regressor(
    x: &DVector<f64>,
    xr: &DVector<f64>,
    c: &DVector<f64>,
    nominal: &NominalController,
    basis: &VectorField,
) -> DVector<f64> {
    let sp = basis(x);
    let un = nominal.law(x, xr, c);
    let mut out = DVector::zeros(sp.len() + un.len());
    out.rows_mut(0, sp.len()).copy_from(&sp);
    out.rows_mut(sp.len(), un.len()).copy_from(&un);
    out
}

/// Adaptive control law `u = −Ŵᵀσ`.
pub fn control(w_hat: &DMatrix<f64>, sigma: &DVector<f64>) -> DVector<f64> {
    -(w_hat.transpose() * sigma)
}

/// One evaluation of the barrier and the induced gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEvaluation {
    /// Barrier value `h = k1 ε² − V(e)`.
    pub h: f64,
    /// Lyapunov value `V(e)`.
    pub v: f64,
    /// Active performance bound.
    pub eps: f64,
    /// State-dependent update gain `γ (h + V)/h²`.
    pub effective_rate: f64,
}

/// Evaluates `h(t, e) = k1 ε² − V(e)`; `h ≤ 0` is the breach event and
/// halts the caller.
pub fn barrier(
    t: f64,
    e: &DVector<f64>,
    eps: f64,
    cert: &Certificate,
    gamma: f64,
) -> Result<BarrierEvaluation> {
    let v = cert.v(e);
    let h = cert.k1() * eps * eps - v;
    if h <= 0.0 {
        return Err(Error::BarrierBreach { t, h });
    }
    Ok(BarrierEvaluation {
        h,
        v,
        eps,
        effective_rate: gamma * (h + v) / (h * h),
    })
}

/// Weight-estimate derivative
/// `Ŵ̇ = γ Proj_m(Ŵ, ((h + V)/h²) σ ∇Vᵀ(e) D)`.
#[allow(clippy::too_many_arguments)]
pub fn update_rhs(
    w_hat: &DMatrix<f64>,
    sigma: &DVector<f64>,
    e: &DVector<f64>,
    t: f64,
    eps: f64,
    cert: &Certificate,
    gamma: f64,
    input_map: &DMatrix<f64>,
    bounds: &ProjectionBounds,
) -> Result<DMatrix<f64>> {
    let be = barrier(t, e, eps, cert, gamma)?;
    let weight = (be.h + be.v) / (be.h * be.h);
    // σ (∇Vᵀ D) is the (s+m) x m outer product driving every column.
    let row = cert.grad(e).transpose() * input_map;
    let drive = sigma * row * weight;
    Ok(gamma * proj_m(w_hat, &drive, bounds)?)
}

/// Closed-form update for quadratic certificates `V(e) = eᵀPe`:
/// `Ŵ̇ = 2γ Proj_m(Ŵ, σ (k1 ε² eᵀPD) / (k1 ε² − eᵀPe)²)`.
///
/// Algebraically identical to [`update_rhs`] in the quadratic case; kept
/// as an independent route for cross-checking.
#[allow(clippy::too_many_arguments)]
pub fn reduced_update_rhs(
    w_hat: &DMatrix<f64>,
    sigma: &DVector<f64>,
    e: &DVector<f64>,
    t: f64,
    eps: f64,
    p: &DMatrix<f64>,
    k1: f64,
    gamma: f64,
    input_map: &DMatrix<f64>,
    bounds: &ProjectionBounds,
) -> Result<DMatrix<f64>> {
    let v = (e.transpose() * p * e)[0];
    let h = k1 * eps * eps - v;
    if h <= 0.0 {
        return Err(Error::BarrierBreach { t, h });
    }
    let row = e.transpose() * p * input_map;
    let drive = sigma * row * (k1 * eps * eps / (h * h));
    Ok(2.0 * gamma * proj_m(w_hat, &drive, bounds)?)
}

/// Ground-truth matched weights `W(t) = [Λ⁻¹ W_pᵀ(t), −Λ⁻¹]ᵀ`
/// (simulation-only; requires the plant's true effectiveness and weights).
pub fn matched_weights(t: f64, plant: &PlantModel) -> DMatrix<f64> {
    let m = plant.input_dim();
    let s = plant.uncertainty().basis_dim();
    let lambda = plant.control_effectiveness();
    let wp = plant.uncertainty().true_weights(t);
    let mut w = DMatrix::zeros(s + m, m);
    // Top block: (Λ⁻¹ W_pᵀ)ᵀ = W_p Λ⁻¹; Λ is diagonal.
    for j in 0..m {
        let inv = 1.0 / lambda[(j, j)];
        for i in 0..s {
            w[(i, j)] = wp[(i, j)] * inv;
        }
        w[(s + j, j)] = -inv;
    }
    w
}

/// Energy diagnostic
/// `Ψ = V/h + (1/2γ) tr[Λ W̃ᵀ W̃]` with `W̃ = Ŵ − W(t)`.
///
/// Uses ground truth, so it is available to the simulator only.
#[allow(clippy::too_many_arguments)]
pub fn energy_diagnostic(
    e: &DVector<f64>,
    w_hat: &DMatrix<f64>,
    t: f64,
    plant: &PlantModel,
    cert: &Certificate,
    gamma: f64,
    eps: f64,
) -> Result<f64> {
    let be = barrier(t, e, eps, cert, gamma)?;
    let w_tilde = w_hat - matched_weights(t, plant);
    let trace = (plant.control_effectiveness() * w_tilde.transpose() * &w_tilde).trace();
    Ok(be.v / be.h + trace / (2.0 * gamma))
}

/// Adaptation configuration and weight estimate for one run.
#[derive(Clone)]
pub struct AdaptiveState {
    w_hat: DMatrix<f64>,
    gamma: f64,
    bounds: ProjectionBounds,
    barrier_k1: f64,
}

impl AdaptiveState {
    /// Validates that every column of the initial estimate lies in `Ω`.
    pub fn new(
        w_hat: DMatrix<f64>,
        gamma: f64,
        bounds: ProjectionBounds,
        barrier_k1: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Config(format!(
                "adaptation rate must be positive, got {gamma}"
            )));
        }
        if !(barrier_k1 > 0.0) {
            return Err(Error::Config(format!(
                "barrier constant must be positive, got {barrier_k1}"
            )));
        }
        if w_hat.nrows() != bounds.dim() {
            return Err(Error::Config(format!(
                "weight estimate has {} rows, bounds have length {}",
                w_hat.nrows(),
                bounds.dim()
            )));
        }
        for j in 0..w_hat.ncols() {
            bounds.check_domain(&DVector::from(w_hat.column(j)))?;
        }
        Ok(Self {
            w_hat,
            gamma,
            bounds,
            barrier_k1,
        })
    }

    pub fn w_hat(&self) -> &DMatrix<f64> {
        &self.w_hat
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn bounds(&self) -> &ProjectionBounds {
        &self.bounds
    }

    pub fn barrier_k1(&self) -> f64 {
        self.barrier_k1
    }
}
