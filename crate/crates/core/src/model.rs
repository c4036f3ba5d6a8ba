//! Uncertain plant, uncertainty parameterization, and nonlinear reference
//! model, together with their right-hand-side evaluations.
//!
//! The plant has the form `xdot = F(x) + D Λ u + D δ(t, x)` with known
//! drift `F` and input map `D`, unknown diagonal control effectiveness `Λ`,
//! and a matched uncertainty `δ(t, x) = W_p(t)ᵀ σ_p(x)` with known basis
//! `σ_p` and unknown time-varying weights `W_p`. The ground-truth `Λ` and
//! `W_p` are simulation-only data: the controller never reads them.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// State-dependent vector field, `x -> v`.
pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
/// Time-dependent weight matrix trajectory, `t -> W(t)`.
pub type WeightTrajectory = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
/// Bounded command signal, `t -> c(t)`.
pub type CommandSignal = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;
/// Reference vector field, `(xr, c) -> v`.
pub type ReferenceField = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Matched uncertainty `δ(t, x) = W_p(t)ᵀ σ_p(x)`.
///
/// The basis is known to the controller; the weight trajectory is ground
/// truth owned by the simulator.
#[derive(Clone)]
pub struct Uncertainty {
    basis: VectorField,
    true_weights: WeightTrajectory,
    basis_dim: usize,
}

impl Uncertainty {
    /// Builds an uncertainty from a basis of declared length `basis_dim`
    /// and a weight trajectory producing `basis_dim x m` matrices.
    pub fn new(
        basis: VectorField,
        basis_dim: usize,
        true_weights: WeightTrajectory,
    ) -> Result<Self> {
        let w0 = true_weights(0.0);
        if w0.nrows() != basis_dim {
            return Err(Error::Config(format!(
                "weight trajectory has {} rows, expected basis length {}",
                w0.nrows(),
                basis_dim
            )));
        }
        Ok(Self {
            basis,
            true_weights,
            basis_dim,
        })
    }

    /// Zero uncertainty over the given basis (`W_p ≡ 0`, input dim `m`).
    pub fn zero(basis: VectorField, basis_dim: usize, m: usize) -> Result<Self> {
        let weights: WeightTrajectory = Arc::new(move |_t| DMatrix::zeros(basis_dim, m));
        Self::new(basis, basis_dim, weights)
    }

    /// Basis length `s`.
    pub fn basis_dim(&self) -> usize {
        self.basis_dim
    }

    /// Evaluates the known basis `σ_p(x)`.
    pub fn basis(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.basis)(x)
    }

    /// Shared handle to the basis closure (the controller-visible part).
    pub fn basis_fn(&self) -> VectorField {
        Arc::clone(&self.basis)
    }

    /// Ground-truth weights `W_p(t)` (simulation-only).
    pub fn true_weights(&self, t: f64) -> DMatrix<f64> {
        (self.true_weights)(t)
    }
}

/// Uncertain plant `xdot = F(x) + D Λ u + D δ(t, x)`.
#[derive(Clone)]
pub struct PlantModel {
    drift: VectorField,
    input_map: DMatrix<f64>,
    control_effectiveness: DMatrix<f64>,
    uncertainty: Uncertainty,
}

impl PlantModel {
    /// Validates and assembles a plant.
    ///
    /// Requires `F(0) = 0`, a diagonal positive control effectiveness, and
    /// dimensions consistent between the input map, the effectiveness, and
    /// the uncertainty.
    pub fn new(
        drift: VectorField,
        input_map: DMatrix<f64>,
        control_effectiveness: DMatrix<f64>,
        uncertainty: Uncertainty,
    ) -> Result<Self> {
        let n = input_map.nrows();
        let m = input_map.ncols();
        if control_effectiveness.nrows() != m || control_effectiveness.ncols() != m {
            return Err(Error::Config(format!(
                "control effectiveness is {}x{}, expected {m}x{m}",
                control_effectiveness.nrows(),
                control_effectiveness.ncols()
            )));
        }
        for i in 0..m {
            for j in 0..m {
                let v = control_effectiveness[(i, j)];
                if i == j && v <= 0.0 {
                    return Err(Error::Config(format!(
                        "control effectiveness diagonal entry {i} = {v} must be positive"
                    )));
                }
                if i != j && v != 0.0 {
                    return Err(Error::Config(
                        "control effectiveness must be diagonal".into(),
                    ));
                }
            }
        }
        let f0 = drift(&DVector::zeros(n));
        if f0.len() != n {
            return Err(Error::Config(format!(
                "drift output has length {}, expected state dimension {n}",
                f0.len()
            )));
        }
        if f0.norm() > 1e-12 {
            return Err(Error::Config(format!(
                "drift must vanish at the origin, got |F(0)| = {}",
                f0.norm()
            )));
        }
        let w0 = uncertainty.true_weights(0.0);
        if w0.ncols() != m {
            return Err(Error::Config(format!(
                "uncertainty weights have {} columns, expected input dimension {m}",
                w0.ncols()
            )));
        }
        let s0 = uncertainty.basis(&DVector::zeros(n));
        if s0.len() != uncertainty.basis_dim() {
            return Err(Error::Config(format!(
                "basis output has length {}, expected declared length {}",
                s0.len(),
                uncertainty.basis_dim()
            )));
        }
        Ok(Self {
            drift,
            input_map,
            control_effectiveness,
            uncertainty,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.input_map.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.input_map.ncols()
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }

    /// The known input map `D`.
    pub fn input_map(&self) -> &DMatrix<f64> {
        &self.input_map
    }

    /// Ground-truth control effectiveness `Λ` (simulation-only).
    pub fn control_effectiveness(&self) -> &DMatrix<f64> {
        &self.control_effectiveness
    }

    pub fn uncertainty(&self) -> &Uncertainty {
        &self.uncertainty
    }
}

/// Nonlinear reference model `xr_dot = F_r(xr, c(t))`.
#[derive(Clone)]
pub struct ReferenceModel {
    drift: ReferenceField,
    command: CommandSignal,
}

impl ReferenceModel {
    pub fn new(drift: ReferenceField, command: CommandSignal) -> Self {
        Self { drift, command }
    }

    /// Command signal `c(t)`.
    pub fn command(&self, t: f64) -> DVector<f64> {
        (self.command)(t)
    }

    pub fn drift(&self, xr: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
        (self.drift)(xr, c)
    }
}

/// Plant right-hand side `F(x) + D Λ u + D W_p(t)ᵀ σ_p(x)`.
pub fn plant_rhs(
    t: f64,
    x: &DVector<f64>,
    u: &DVector<f64>,
    plant: &PlantModel,
) -> Result<DVector<f64>> {
    let n = plant.state_dim();
    let m = plant.input_dim();
    if x.len() != n {
        return Err(Error::Config(format!(
            "state has length {}, expected {n}",
            x.len()
        )));
    }
    if u.len() != m {
        return Err(Error::Config(format!(
            "input has length {}, expected {m}",
            u.len()
        )));
    }
    let delta = uncertainty_eval(t, x, plant.uncertainty());
    Ok(plant.drift(x)
        + plant.input_map() * (plant.control_effectiveness() * u)
        + plant.input_map() * delta)
}

/// Evaluates the matched uncertainty `W_p(t)ᵀ σ_p(x)`.
pub fn uncertainty_eval(t: f64, x: &DVector<f64>, unc: &Uncertainty) -> DVector<f64> {
    unc.true_weights(t).transpose() * unc.basis(x)
}

/// Reference right-hand side `F_r(xr, c(t))`.
pub fn reference_rhs(t: f64, xr: &DVector<f64>, reference: &ReferenceModel) -> DVector<f64> {
    let c = reference.command(t);
    reference.drift(xr, &c)
}

/// Basis used by the Van der Pol study: `σ_p(x) = (x₁, x₁x₂, x₁x₂²)`.
pub fn vdp_basis() -> VectorField {
    Arc::new(|x: &DVector<f64>| {
        DVector::from_vec(vec![x[0], x[0] * x[1], x[0] * x[1] * x[1]])
    })
}

/// The Van der Pol study plant with configurable control effectiveness and
/// an on/off switch for the uncertainty.
///
/// Drift `F(x) = (x₂, −x₁ − x₁x₂ + x₂²)`, input map `D = (0, 1)ᵀ`, and,
/// when enabled, weights `W_p(t) = (0.3 sin 0.1t, 0.3 cos 0.3t, 1)ᵀ` over
/// [`vdp_basis`].
pub fn vdp_plant(lambda: f64, uncertainty_on: bool) -> Result<PlantModel> {
    let drift: VectorField = Arc::new(|x: &DVector<f64>| {
        DVector::from_vec(vec![x[1], -x[0] - x[0] * x[1] + x[1] * x[1]])
    });
    let d = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let lam = DMatrix::from_element(1, 1, lambda);
    let uncertainty = if uncertainty_on {
        let weights: WeightTrajectory = Arc::new(|t: f64| {
            DMatrix::from_column_slice(
                3,
                1,
                &[0.3 * (0.1 * t).sin(), 0.3 * (0.3 * t).cos(), 1.0],
            )
        });
        Uncertainty::new(vdp_basis(), 3, weights)?
    } else {
        Uncertainty::zero(vdp_basis(), 3, 1)?
    };
    PlantModel::new(drift, d, lam, uncertainty)
}

/// The forced Van der Pol reference model with damping `mu` and command
/// `c(t) = 1.2 sin t`.
pub fn vdp_reference(mu: f64) -> ReferenceModel {
    let drift: ReferenceField = Arc::new(move |xr: &DVector<f64>, c: &DVector<f64>| {
        DVector::from_vec(vec![
            xr[1],
            -xr[0] + mu * xr[1] * (1.0 - xr[0] * xr[0]) + c[0],
        ])
    });
    let command: CommandSignal =
        Arc::new(|t: f64| DVector::from_element(1, 1.2 * t.sin()));
    ReferenceModel::new(drift, command)
}

/// The complete Van der Pol study pair: plant with `Λ = 0.75` and active
/// uncertainty, reference with `μ = 1`.
pub fn vdp_example() -> (PlantModel, ReferenceModel) {
    let plant = vdp_plant(0.75, true).expect("built-in plant is valid");
    (plant, vdp_reference(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn plant_rhs_vanishes_at_origin() {
        let (plant, _) = vdp_example();
        let rhs = plant_rhs(
            0.0,
            &DVector::zeros(2),
            &DVector::zeros(1),
            &plant,
        )
        .unwrap();
        assert_eq!(rhs, DVector::zeros(2));
    }

    #[test]
    fn plant_rhs_at_unit_x1() {
        // F(1,0) = (0, -1) and the uncertainty vanishes at t = 0, x2 = 0.
        let (plant, _) = vdp_example();
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let rhs = plant_rhs(0.0, &x, &DVector::zeros(1), &plant).unwrap();
        assert!(close(rhs[0], 0.0, 1e-15));
        assert!(close(rhs[1], -1.0, 1e-15));
    }

    #[test]
    fn plant_rhs_with_active_uncertainty() {
        // F(1,1) = (1, -1); delta(0,(1,1)) = 0.3 + 1.0 = 1.3.
        let (plant, _) = vdp_example();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let rhs = plant_rhs(0.0, &x, &DVector::zeros(1), &plant).unwrap();
        assert!(close(rhs[0], 1.0, 1e-15));
        assert!(close(rhs[1], 0.3, 1e-15));
    }

    #[test]
    fn uncertainty_vanishes_where_basis_does() {
        let (plant, _) = vdp_example();
        let d = uncertainty_eval(17.3, &DVector::zeros(2), plant.uncertainty());
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn uncertainty_at_two_two() {
        // W_p(0) = (0, 0.3, 1); sigma_p(2,2) = (2, 4, 8) -> 0.3*4 + 8 = 9.2.
        let (plant, _) = vdp_example();
        let x = DVector::from_vec(vec![2.0, 2.0]);
        let d = uncertainty_eval(0.0, &x, plant.uncertainty());
        assert!(close(d[0], 9.2, 1e-12));
    }

    #[test]
    fn uncertainty_sine_peak() {
        // 0.1 t = pi/2 makes the first weight 0.3; sigma_p(1,0) = (1,0,0).
        let (plant, _) = vdp_example();
        let t = std::f64::consts::PI / 0.2;
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let d = uncertainty_eval(t, &x, plant.uncertainty());
        assert!(close(d[0], 0.3, 1e-12));
    }

    #[test]
    fn reference_equilibrium() {
        let r = vdp_reference(1.0);
        let rhs = reference_rhs(0.0, &DVector::zeros(2), &r);
        assert_eq!(rhs, DVector::zeros(2));
    }

    #[test]
    fn reference_at_two_two() {
        // c(0) = 0; -2 + 2(1-4) = -8.
        let r = vdp_reference(1.0);
        let xr = DVector::from_vec(vec![2.0, 2.0]);
        let rhs = reference_rhs(0.0, &xr, &r);
        assert!(close(rhs[0], 2.0, 1e-15));
        assert!(close(rhs[1], -8.0, 1e-15));
    }

    #[test]
    fn reference_forced_at_quarter_period() {
        let r = vdp_reference(1.0);
        let rhs = reference_rhs(std::f64::consts::FRAC_PI_2, &DVector::zeros(2), &r);
        assert!(close(rhs[0], 0.0, 1e-15));
        assert!(close(rhs[1], 1.2, 1e-12));
    }

    #[test]
    fn vdp_example_parameters() {
        let (plant, reference) = vdp_example();
        assert_eq!(plant.control_effectiveness()[(0, 0)], 0.75);
        assert_eq!(reference.command(0.0)[0], 0.0);
        let basis = plant.uncertainty().basis(&DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(basis, DVector::from_vec(vec![1.0, 2.0, 4.0]));
    }

    #[test]
    fn control_enters_linearly_through_input_map() {
        let (plant, _) = vdp_example();
        let x = DVector::from_vec(vec![0.7, -1.3]);
        let u = DVector::from_element(1, 2.5);
        let with_u = plant_rhs(1.0, &x, &u, &plant).unwrap();
        let without = plant_rhs(1.0, &x, &DVector::zeros(1), &plant).unwrap();
        let expected = plant.input_map() * (plant.control_effectiveness() * &u);
        assert!((with_u - without - expected).norm() <= 1e-12);
    }

    #[test]
    fn first_component_ignores_input() {
        // D has a zero first row, so component 1 is x2 exactly.
        let (plant, _) = vdp_example();
        let x = DVector::from_vec(vec![-2.0, 3.5]);
        for u in [-10.0, 0.0, 4.2] {
            let rhs = plant_rhs(2.0, &x, &DVector::from_element(1, u), &plant).unwrap();
            assert_eq!(rhs[0], x[1]);
        }
    }

    #[test]
    fn uncertainty_bounded_by_weight_magnitudes() {
        let (plant, _) = vdp_example();
        for k in 0..200 {
            let t = 0.31 * k as f64;
            let x = DVector::from_vec(vec![(k as f64 * 0.7).sin() * 3.0, (k as f64).cos() * 3.0]);
            let s = plant.uncertainty().basis(&x);
            let bound = 0.3 * s[0].abs() + 0.3 * s[1].abs() + s[2].abs();
            let d = uncertainty_eval(t, &x, plant.uncertainty());
            assert!(d[0].abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let (plant, _) = vdp_example();
        let bad = plant_rhs(0.0, &DVector::zeros(3), &DVector::zeros(1), &plant);
        assert!(matches!(bad, Err(Error::Config(_))));
    }

    #[test]
    fn nonpositive_effectiveness_rejected() {
        assert!(vdp_plant(0.0, true).is_err());
        assert!(vdp_plant(-1.0, false).is_err());
    }
}
