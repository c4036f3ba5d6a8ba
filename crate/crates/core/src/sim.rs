//! Closed-loop integration of the plant / reference / weight-estimate
//! system, with event detection, trajectory logging, and sweep and
//! comparison experiment drivers.
//!
//! The augmented state is laid out as `[x (n); xr (n); Ŵ column-major
//! ((s+m)·m)]`. Integration is classical fixed-step RK4: the barrier gain
//! is smooth away from `h = 0` and runs halt at a breach, so a fixed step
//! plus the step-halving convergence check keeps runs deterministic.

use nalgebra::{DMatrix, DVector};

use crate::adapt::{
    barrier, control, energy_diagnostic, regressor, update_rhs, AdaptiveState, ProjectionBounds,
};
use crate::certify::NominalController;
use crate::error::{Error, Result};
use crate::model::{plant_rhs, reference_rhs, PlantModel, ReferenceModel};
use crate::safety::{in_safe_set, performance_bound_at, BoundMode, PerformanceBound};

/// Which control law drives the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    /// `u = u_n`; the weight-estimate block stays frozen at zero.
    NominalOnly,
    /// `u = −Ŵᵀσ` with the barrier-weighted update law.
    Adaptive,
}

/// Complete configuration of one simulation run.
#[derive(Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub x0: DVector<f64>,
    pub xr0: DVector<f64>,
    pub gamma: f64,
    pub bound: PerformanceBound,
    pub controller_mode: ControllerMode,
    pub w_hat0: DMatrix<f64>,
    pub projection: ProjectionBounds,
    pub log_stride: usize,
}

/// The models closed by the loop.
#[derive(Clone)]
pub struct ClosedLoopSystem {
    pub plant: PlantModel,
    pub reference: ReferenceModel,
    pub nominal: NominalController,
}

/// Terminal status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Horizon reached with `h > 0` throughout and no safe-set exit.
    Completed,
    /// `h(t, e) ≤ 0`: the simulation halts and records the event.
    BarrierBreach,
    /// Reference state left the safe set (time-varying bound undefined).
    ReferenceEscape,
    /// Horizon reached but the plant state left the safe set at some time.
    SafeSetExit,
    /// A non-finite value appeared during integration.
    NumericalBlowup,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Completed => "completed",
            Verdict::BarrierBreach => "barrier_breach",
            Verdict::ReferenceEscape => "reference_escape",
            Verdict::SafeSetExit => "safe_set_exit",
            Verdict::NumericalBlowup => "numerical_blowup",
        }
    }
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: DVector<f64>,
    pub xr: DVector<f64>,
    pub e: DVector<f64>,
    pub e_norm: f64,
    pub v: f64,
    pub h: f64,
    pub eps: f64,
    pub u: DVector<f64>,
    pub u_n: DVector<f64>,
    /// Weight estimate flattened column-major.
    pub w_hat: DVector<f64>,
    /// Energy diagnostic; NaN where the barrier is not positive.
    pub psi: f64,
    /// Update gain `γ(h+V)/h²`; NaN where the barrier is not positive.
    pub effective_rate: f64,
    /// Safe-set margin `c − xᵀPx`.
    pub safe_margin: f64,
}

/// Extremes tracked at every internal step (not just logged samples).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub min_h: f64,
    pub sup_e_norm: f64,
    pub sup_u_abs: f64,
    pub sup_eff_rate: f64,
    pub min_safe_margin: f64,
    pub max_psi: f64,
    /// Minimum over steps of the projection-bound margin of Ŵ;
    /// negative means some entry left `Ω`.
    pub min_w_margin: f64,
    pub steps_completed: usize,
}

/// Full log of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub samples: Vec<Sample>,
    pub verdict: Verdict,
    /// Time of the halting event (breach, escape, blowup), if any.
    pub event_time: Option<f64>,
    /// First time the plant state was outside the safe set, if ever.
    pub first_safe_set_exit: Option<f64>,
    pub stats: RunStats,
}

/// Flat per-run summary used by sweeps and comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub verdict: Verdict,
    pub event_time: Option<f64>,
    pub first_safe_set_exit: Option<f64>,
    pub min_h: f64,
    pub sup_e_norm: f64,
    pub sup_u_abs: f64,
    pub sup_eff_rate: f64,
    pub min_safe_margin: f64,
    pub max_psi: f64,
    pub min_w_margin: f64,
    pub steps_completed: usize,
}

impl TrajectoryLog {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            verdict: self.verdict,
            event_time: self.event_time,
            first_safe_set_exit: self.first_safe_set_exit,
            min_h: self.stats.min_h,
            sup_e_norm: self.stats.sup_e_norm,
            sup_u_abs: self.stats.sup_u_abs,
            sup_eff_rate: self.stats.sup_eff_rate,
            min_safe_margin: self.stats.min_safe_margin,
            max_psi: self.stats.max_psi,
            min_w_margin: self.stats.min_w_margin,
            steps_completed: self.stats.steps_completed,
        }
    }
}

/// Classical 4th-order Runge-Kutta step.
///
/// Errors with the offending time if the right-hand side produces a
/// non-finite derivative.
pub fn rk4_step<F>(rhs: &F, t: f64, y: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {dt}")));
    }
    let finite = |v: &DVector<f64>, time: f64| -> Result<()> {
        if v.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::NumericalBlowup { t: time })
        }
    };
    let k1 = rhs(t, y)?;
    finite(&k1, t)?;
    let k2 = rhs(t + dt / 2.0, &(y + &k1 * (dt / 2.0)))?;
    finite(&k2, t + dt / 2.0)?;
    let k3 = rhs(t + dt / 2.0, &(y + &k2 * (dt / 2.0)))?;
    finite(&k3, t + dt / 2.0)?;
    let k4 = rhs(t + dt, &(y + &k3 * dt))?;
    finite(&k4, t + dt)?;
    Ok(y + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0))
}

fn split_aug<'a>(
    aug: &'a DVector<f64>,
    n: usize,
    rows: usize,
    cols: usize,
) -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
    let x = DVector::from(aug.rows(0, n));
    let xr = DVector::from(aug.rows(n, n));
    let w = DMatrix::from_column_slice(rows, cols, &aug.as_slice()[2 * n..2 * n + rows * cols]);
    (x, xr, w)
}

fn stack_aug(
    dx: &DVector<f64>,
    dxr: &DVector<f64>,
    dw: &DMatrix<f64>,
) -> DVector<f64> {
    let n = dx.len();
    let k = dw.nrows() * dw.ncols();
    let mut out = DVector::zeros(2 * n + k);
    out.rows_mut(0, n).copy_from(dx);
    out.rows_mut(n, n).copy_from(dxr);
    out.rows_mut(2 * n, k)
        .copy_from_slice(dw.as_slice());
    out
}

/// Closed-loop derivative of the augmented state `[x; xr; vec(Ŵ)]`.
///
/// In adaptive mode the control is `u = −Ŵᵀσ` (the nominal input enters
/// through the regressor) and the weight block follows the update law; in
/// nominal-only mode `u = u_n` and the weight block is frozen. `eps` is
/// the performance bound held fixed across the step's substages.
pub fn closed_loop_rhs(
    t: f64,
    aug: &DVector<f64>,
    eps: f64,
    cfg: &SimConfig,
    sys: &ClosedLoopSystem,
) -> Result<DVector<f64>> {
    let n = sys.plant.state_dim();
    let m = sys.plant.input_dim();
    let s = sys.plant.uncertainty().basis_dim();
    let (x, xr, w_hat) = split_aug(aug, n, s + m, m);
    let c = sys.reference.command(t);
    let basis = sys.plant.uncertainty().basis_fn();
    let (u, dw) = match cfg.controller_mode {
        ControllerMode::NominalOnly => (sys.nominal.law(&x, &xr, &c), DMatrix::zeros(s + m, m)),
        ControllerMode::Adaptive => {
            let e = &x - &xr;
            let sigma = regressor(&x, &xr, &c, &sys.nominal, &basis);
            let u = control(&w_hat, &sigma);
            let dw = update_rhs(
                &w_hat,
                &sigma,
                &e,
                t,
                eps,
                sys.nominal.certificate(),
                cfg.gamma,
                sys.plant.input_map(),
                &cfg.projection,
            )?;
            (u, dw)
        }
    };
    let dx = plant_rhs(t, &x, &u, &sys.plant)?;
    let dxr = reference_rhs(t, &xr, &sys.reference);
    Ok(stack_aug(&dx, &dxr, &dw))
}

fn validate_config(cfg: &SimConfig, sys: &ClosedLoopSystem) -> Result<()> {
    let n = sys.plant.state_dim();
    let m = sys.plant.input_dim();
    let s = sys.plant.uncertainty().basis_dim();
    if !(cfg.dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {}", cfg.dt)));
    }
    if !(cfg.horizon > 0.0) {
        return Err(Error::Config(format!(
            "horizon must be positive, got {}",
            cfg.horizon
        )));
    }
    if cfg.log_stride == 0 {
        return Err(Error::Config("log stride must be at least 1".into()));
    }
    if !(cfg.gamma > 0.0) {
        return Err(Error::Config(format!(
            "adaptation rate must be positive, got {}",
            cfg.gamma
        )));
    }
    if cfg.x0.len() != n || cfg.xr0.len() != n {
        return Err(Error::Config(format!(
            "initial states have lengths {} and {}, expected {n}",
            cfg.x0.len(),
            cfg.xr0.len()
        )));
    }
    if cfg.bound.safe_set().dim() != n {
        return Err(Error::Config(format!(
            "safe set dimension {} does not match state dimension {n}",
            cfg.bound.safe_set().dim()
        )));
    }
    if cfg.w_hat0.nrows() != s + m || cfg.w_hat0.ncols() != m {
        return Err(Error::Config(format!(
            "initial weight estimate is {:?}, expected ({}, {m})",
            cfg.w_hat0.shape(),
            s + m
        )));
    }
    let r0 = reference_rhs(0.0, &cfg.xr0, &sys.reference);
    if r0.len() != n {
        return Err(Error::Config(format!(
            "reference field output has length {}, expected {n}",
            r0.len()
        )));
    }
    Ok(())
}

struct StatTracker {
    stats: RunStats,
}

impl StatTracker {
    fn new() -> Self {
        Self {
            stats: RunStats {
                min_h: f64::INFINITY,
                sup_e_norm: 0.0,
                sup_u_abs: 0.0,
                sup_eff_rate: 0.0,
                min_safe_margin: f64::INFINITY,
                max_psi: f64::NEG_INFINITY,
                min_w_margin: f64::INFINITY,
                steps_completed: 0,
            },
        }
    }

    fn update(&mut self, sample: &Sample, w_margin: f64) {
        let s = &mut self.stats;
        if sample.h.is_finite() {
            s.min_h = s.min_h.min(sample.h);
        }
        s.sup_e_norm = s.sup_e_norm.max(sample.e_norm);
        s.sup_u_abs = s.sup_u_abs.max(sample.u.amax());
        if sample.effective_rate.is_finite() {
            s.sup_eff_rate = s.sup_eff_rate.max(sample.effective_rate);
        }
        s.min_safe_margin = s.min_safe_margin.min(sample.safe_margin);
        if sample.psi.is_finite() {
            s.max_psi = s.max_psi.max(sample.psi);
        }
        s.min_w_margin = s.min_w_margin.min(w_margin);
    }
}

/// Integrates the closed loop over `[0, horizon]`.
///
/// Returns `Err` only when the configuration or the initial containment
/// check is invalid; runtime events (barrier breach, reference escape,
/// numerical blowup, safe-set exit) terminate or annotate the run and are
/// reported through the log's verdict.
pub fn run(cfg: &SimConfig, sys: &ClosedLoopSystem) -> Result<TrajectoryLog> {
    validate_config(cfg, sys)?;
    let n = sys.plant.state_dim();
    let m = sys.plant.input_dim();
    let s = sys.plant.uncertainty().basis_dim();
    let cert = sys.nominal.certificate();
    let basis = sys.plant.uncertainty().basis_fn();

    let adaptive = cfg.controller_mode == ControllerMode::Adaptive;
    if adaptive {
        // Initial containment: V(e0) < k1 eps(0)^2, with column bounds on Ŵ0.
        AdaptiveState::new(
            cfg.w_hat0.clone(),
            cfg.gamma,
            cfg.projection.clone(),
            cert.k1(),
        )
        .map_err(|e| Error::Setup(format!("invalid adaptation setup: {e}")))?;
        let eps0 = performance_bound_at(0.0, &cfg.xr0, &cfg.bound)
            .map_err(|e| Error::Setup(format!("performance bound undefined at t = 0: {e}")))?;
        let e0 = &cfg.x0 - &cfg.xr0;
        let v0 = cert.v(&e0);
        if v0 >= cert.k1() * eps0 * eps0 {
            return Err(Error::Setup(format!(
                "initial error outside the performance set: V(e0) = {v0} >= k1 eps(0)^2 = {}",
                cert.k1() * eps0 * eps0
            )));
        }
    }

    let steps = (cfg.horizon / cfg.dt).round() as usize;
    if steps == 0 {
        return Err(Error::Config(
            "horizon shorter than one step; nothing to integrate".into(),
        ));
    }

    let w0 = if adaptive {
        cfg.w_hat0.clone()
    } else {
        DMatrix::zeros(s + m, m)
    };
    let mut aug = stack_aug(&cfg.x0, &cfg.xr0, &w0);

    let mut samples: Vec<Sample> = Vec::with_capacity(steps / cfg.log_stride + 2);
    let mut tracker = StatTracker::new();
    let mut verdict: Option<Verdict> = None;
    let mut event_time: Option<f64> = None;
    let mut first_exit: Option<f64> = None;

    let mut k = 0usize;
    loop {
        let t = k as f64 * cfg.dt;
        let (x, xr, w_hat) = split_aug(&aug, n, s + m, m);
        let e = &x - &xr;

        let eps = match performance_bound_at(t, &xr, &cfg.bound) {
            Ok(v) => v,
            Err(Error::ReferenceEscape { .. }) => {
                verdict = Some(Verdict::ReferenceEscape);
                event_time = Some(t);
                f64::NAN
            }
            Err(other) => return Err(other),
        };

        let v = cert.v(&e);
        let h = if eps.is_finite() {
            cert.k1() * eps * eps - v
        } else {
            f64::NAN
        };
        let (inside, margin) = in_safe_set(&x, cfg.bound.safe_set());
        if !inside && first_exit.is_none() {
            first_exit = Some(t);
        }
        if verdict.is_none() && adaptive && h <= 0.0 {
            verdict = Some(Verdict::BarrierBreach);
            event_time = Some(t);
        }

        let c = sys.reference.command(t);
        let u_n = sys.nominal.law(&x, &xr, &c);
        let u = if adaptive {
            let sigma = regressor(&x, &xr, &c, &sys.nominal, &basis);
            control(&w_hat, &sigma)
        } else {
            u_n.clone()
        };
        let (psi, eff_rate) = if h > 0.0 {
            let be = barrier(t, &e, eps, cert, cfg.gamma).expect("h > 0 checked");
            let psi = energy_diagnostic(&e, &w_hat, t, &sys.plant, cert, cfg.gamma, eps)
                .expect("h > 0 checked");
            (psi, be.effective_rate)
        } else {
            (f64::NAN, f64::NAN)
        };

        let mut w_margin = f64::INFINITY;
        for j in 0..m {
            w_margin = w_margin.min(cfg.projection.margin(&DVector::from(w_hat.column(j))));
        }

        let sample = Sample {
            t,
            x,
            xr,
            e: e.clone(),
            e_norm: e.norm(),
            v,
            h,
            eps,
            u,
            u_n,
            w_hat: DVector::from_column_slice(w_hat.as_slice()),
            psi,
            effective_rate: eff_rate,
            safe_margin: margin,
        };
        tracker.update(&sample, w_margin);
        tracker.stats.steps_completed = k;

        let halting = verdict.is_some();
        if k % cfg.log_stride == 0 || halting {
            samples.push(sample);
        }
        if halting || k == steps {
            break;
        }

        let rhs = |tt: f64, y: &DVector<f64>| closed_loop_rhs(tt, y, eps, cfg, sys);
        match rk4_step(&rhs, t, &aug, cfg.dt) {
            Ok(next) => aug = next,
            Err(Error::BarrierBreach { t: tb, .. }) => {
                verdict = Some(Verdict::BarrierBreach);
                event_time = Some(tb);
                break;
            }
            Err(Error::NumericalBlowup { t: tb }) => {
                verdict = Some(Verdict::NumericalBlowup);
                event_time = Some(tb);
                break;
            }
            Err(other) => return Err(other),
        }
        k += 1;
    }

    let verdict = verdict.unwrap_or(if first_exit.is_some() {
        Verdict::SafeSetExit
    } else {
        Verdict::Completed
    });
    Ok(TrajectoryLog {
        samples,
        verdict,
        event_time,
        first_safe_set_exit: first_exit,
        stats: tracker.stats,
    })
}

/// Result of one sweep entry; setup failures are recorded without
/// aborting the remaining entries.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub gamma: f64,
    pub outcome: Result<RunSummary>,
}

/// Runs the base configuration once per adaptation rate, in input order.
pub fn sweep(base: &SimConfig, sys: &ClosedLoopSystem, gammas: &[f64]) -> Result<Vec<SweepEntry>> {
    if gammas.is_empty() {
        return Err(Error::Config("gamma sweep needs at least one value".into()));
    }
    Ok(gammas
        .iter()
        .map(|&gamma| {
            let mut cfg = base.clone();
            cfg.gamma = gamma;
            SweepEntry {
                gamma,
                outcome: run(&cfg, sys).map(|log| log.summary()),
            }
        })
        .collect())
}

/// Sweep variant returning the full logs, for trajectory export.
pub fn sweep_logs(
    base: &SimConfig,
    sys: &ClosedLoopSystem,
    gammas: &[f64],
) -> Result<Vec<(f64, Result<TrajectoryLog>)>> {
    if gammas.is_empty() {
        return Err(Error::Config("gamma sweep needs at least one value".into()));
    }
    Ok(gammas
        .iter()
        .map(|&gamma| {
            let mut cfg = base.clone();
            cfg.gamma = gamma;
            (gamma, run(&cfg, sys))
        })
        .collect())
}

/// Side-by-side report of two runs that differ only in their performance
/// bound.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub first: RunSummary,
    pub second: RunSummary,
    /// `first.sup_e_norm − second.sup_e_norm`.
    pub tracking_delta: f64,
    /// `first.sup_u_abs − second.sup_u_abs`.
    pub control_delta: f64,
    /// `first.sup_eff_rate − second.sup_eff_rate`.
    pub rate_delta: f64,
    /// True when either run did not complete; claims are then absent.
    pub incomplete: bool,
    /// Strict-ordering claims, present only when both runs completed:
    /// (first tracks tighter, first uses larger control, second has the
    /// lower effective rate).
    pub claims: Option<(bool, bool, bool)>,
}

/// Runs two configurations that must be identical except for the bound
/// and reports the tracking / control / effective-rate orderings.
pub fn compare_modes(
    cfg_first: &SimConfig,
    cfg_second: &SimConfig,
    sys: &ClosedLoopSystem,
) -> Result<ComparisonReport> {
    let same = cfg_first.dt == cfg_second.dt
        && cfg_first.horizon == cfg_second.horizon
        && cfg_first.x0 == cfg_second.x0
        && cfg_first.xr0 == cfg_second.xr0
        && cfg_first.gamma == cfg_second.gamma
        && cfg_first.controller_mode == cfg_second.controller_mode
        && cfg_first.w_hat0 == cfg_second.w_hat0
        && cfg_first.projection == cfg_second.projection
        && cfg_first.log_stride == cfg_second.log_stride;
    if !same {
        return Err(Error::Config(
            "comparison configs must be identical except for the performance bound".into(),
        ));
    }
    let first = run(cfg_first, sys)?.summary();
    let second = run(cfg_second, sys)?.summary();
    let incomplete = first.verdict != Verdict::Completed || second.verdict != Verdict::Completed;
    let claims = if incomplete {
        None
    } else {
        Some((
            first.sup_e_norm < second.sup_e_norm,
            first.sup_u_abs > second.sup_u_abs,
            second.sup_eff_rate < first.sup_eff_rate,
        ))
    };
    Ok(ComparisonReport {
        tracking_delta: first.sup_e_norm - second.sup_e_norm,
        control_delta: first.sup_u_abs - second.sup_u_abs,
        rate_delta: first.sup_eff_rate - second.sup_eff_rate,
        first,
        second,
        incomplete,
        claims,
    })
}

/// Helper for `BoundMode` access on a config.
pub fn bound_mode(cfg: &SimConfig) -> BoundMode {
    cfg.bound.mode()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::vdp_nominal;
    use crate::model::{vdp_plant, vdp_reference};
    use crate::safety::LevelSet;
    use nalgebra::DMatrix;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rk4_fixed_point() {
        let rhs = |_t: f64, _y: &DVector<f64>| Ok(DVector::zeros(2));
        let y = DVector::from_vec(vec![1.0, -2.0]);
        let next = rk4_step(&rhs, 0.0, &y, 0.1).unwrap();
        assert_eq!(next, y);
    }

    #[test]
    fn rk4_matches_exponential_to_fifth_order() {
        let rhs = |_t: f64, y: &DVector<f64>| Ok(-y.clone());
        let y = DVector::from_element(1, 1.0);
        let next = rk4_step(&rhs, 0.0, &y, 0.1).unwrap();
        assert!(close(next[0], 0.9048375, 1e-9));
        assert!(close(next[0], (-0.1f64).exp(), 1e-7));
    }

    #[test]
    fn rk4_order_four_convergence() {
        let rhs = |_t: f64, y: &DVector<f64>| Ok(-y.clone());
        let integrate = |dt: f64| {
            let mut y = DVector::from_element(1, 1.0);
            let steps = (1.0 / dt).round() as usize;
            for k in 0..steps {
                y = rk4_step(&rhs, k as f64 * dt, &y, dt).unwrap();
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let ratio = integrate(0.01) / integrate(0.005);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rk4_reports_blowup_time() {
        let rhs = |t: f64, _y: &DVector<f64>| {
            Ok(DVector::from_element(1, if t > 0.0 { f64::NAN } else { 1.0 }))
        };
        let out = rk4_step(&rhs, 0.0, &DVector::zeros(1), 0.2);
        assert!(matches!(out, Err(Error::NumericalBlowup { .. })));
    }

    fn study_system(lambda: f64, uncertainty: bool) -> ClosedLoopSystem {
        let plant = vdp_plant(lambda, uncertainty).unwrap();
        let reference = vdp_reference(1.0);
        let (nominal, _) = vdp_nominal(3.0, 3.0, 1.0, &DMatrix::identity(2, 2)).unwrap();
        ClosedLoopSystem {
            plant,
            reference,
            nominal,
        }
    }

    fn study_config(mode: ControllerMode, level_scale: f64) -> SimConfig {
        let sys = study_system(0.75, true);
        let p = {
            let data = crate::certify::solve_lyapunov(
                &crate::certify::vdp_error_matrix(3.0, 3.0),
                &DMatrix::identity(2, 2),
            )
            .unwrap();
            data.p().clone()
        };
        let safe = LevelSet::new(p.clone(), 3.2 * level_scale).unwrap();
        let refs = LevelSet::new(p, 2.8 * level_scale).unwrap();
        let _ = &sys;
        SimConfig {
            dt: 1e-3,
            horizon: 2.0,
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
    fn nominal_error_block_stays_zero_without_uncertainty() {
        // With delta = 0 and unit effectiveness, e = 0 is invariant.
        let sys = study_system(1.0, false);
        let cfg = study_config(ControllerMode::NominalOnly, 3.0);
        let log = run(&cfg, &sys).unwrap();
        assert_eq!(log.verdict, Verdict::Completed);
        assert!(log.stats.sup_e_norm <= 1e-10, "sup {}", log.stats.sup_e_norm);
    }

    #[test]
    fn adaptive_zero_error_has_zero_update_drive() {
        let sys = study_system(0.75, true);
        let cfg = study_config(ControllerMode::Adaptive, 3.0);
        let aug = stack_aug(&cfg.x0, &cfg.xr0, &cfg.w_hat0);
        let d = closed_loop_rhs(0.0, &aug, 1.3, &cfg, &sys).unwrap();
        // Weight block (indices 4..8) is zero because grad V(0) = 0.
        for i in 4..8 {
            assert_eq!(d[i], 0.0);
        }
    }

    #[test]
    fn perfect_weights_reduce_error_field_to_nominal() {
        // With W-hat = W(t), the e-block of the derivative equals A_e e.
        let sys = study_system(0.75, true);
        let mut cfg = study_config(ControllerMode::Adaptive, 3.0);
        let x = DVector::from_vec(vec![2.3, 1.9]);
        let xr = DVector::from_vec(vec![2.0, 2.0]);
        cfg.x0 = x.clone();
        cfg.xr0 = xr.clone();
        let t = 0.7;
        let w = crate::adapt::matched_weights(t, &sys.plant);
        let aug = stack_aug(&x, &xr, &w);
        let d = closed_loop_rhs(t, &aug, 1.3, &cfg, &sys).unwrap();
        let e = &x - &xr;
        let ae = crate::certify::vdp_error_matrix(3.0, 3.0);
        let expected = &ae * &e;
        let de = DVector::from_vec(vec![d[0] - d[2], d[1] - d[3]]);
        assert!((de - expected).norm() <= 1e-12);
    }

    #[test]
    fn run_is_deterministic() {
        let sys = study_system(0.75, true);
        let cfg = study_config(ControllerMode::Adaptive, 3.0);
        let a = run(&cfg, &sys).unwrap();
        let b = run(&cfg, &sys).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_times_follow_stride() {
        let sys = study_system(0.75, true);
        let cfg = study_config(ControllerMode::Adaptive, 3.0);
        let log = run(&cfg, &sys).unwrap();
        assert_eq!(log.verdict, Verdict::Completed);
        for (i, s) in log.samples.iter().enumerate() {
            assert!(close(s.t, i as f64 * cfg.dt * cfg.log_stride as f64, 1e-12));
        }
        let last = log.samples.last().unwrap();
        assert!(close(last.t, cfg.horizon, 1e-9));
    }

    #[test]
    fn setup_rejects_error_outside_performance_set() {
        let sys = study_system(0.75, true);
        let mut cfg = study_config(ControllerMode::Adaptive, 3.0);
        cfg.x0 = DVector::from_vec(vec![4.5, 2.0]);
        let out = run(&cfg, &sys);
        assert!(matches!(out, Err(Error::Setup(_))));
    }

    #[test]
    fn sweep_preserves_input_order_and_matches_run() {
        let sys = study_system(0.75, true);
        let cfg = study_config(ControllerMode::Adaptive, 3.0);
        let entries = sweep(&cfg, &sys, &[0.5, 1.0]).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].gamma, 0.5);
        assert_eq!(entries[1].gamma, 1.0);
        let direct = run(&cfg, &sys).unwrap().summary();
        assert_eq!(entries[1].outcome.as_ref().unwrap(), &direct);
    }

    #[test]
    fn sweep_requires_values() {
        let sys = study_system(0.75, true);
        let cfg = study_config(ControllerMode::Adaptive, 3.0);
        assert!(sweep(&cfg, &sys, &[]).is_err());
    }

    #[test]
    fn identical_configs_compare_with_zero_deltas() {
        let sys = study_system(0.75, true);
        let cfg = study_config(ControllerMode::Adaptive, 3.0);
        let report = compare_modes(&cfg, &cfg, &sys).unwrap();
        assert!(!report.incomplete);
        assert_eq!(report.tracking_delta, 0.0);
        assert_eq!(report.control_delta, 0.0);
        assert_eq!(report.rate_delta, 0.0);
    }

    #[test]
    fn compare_rejects_mismatched_configs() {
        let sys = study_system(0.75, true);
        let a = study_config(ControllerMode::Adaptive, 3.0);
        let mut b = a.clone();
        b.gamma = 2.0;
        assert!(compare_modes(&a, &b, &sys).is_err());
    }
}
