//! Experiment configuration: JSON schema, strict validation, and
//! construction of the simulation objects.
//!
//! Configs drive the built-in Van der Pol study family: the plant,
//! reference, and nominal controller are assembled from the gains and
//! switches below, and the safe/reference sets are level sets of the
//! solved Lyapunov matrix `P`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use safemrac::adapt::ProjectionBounds;
use safemrac::certify::vdp_nominal;
use safemrac::model::{vdp_plant, vdp_reference};
use safemrac::safety::{dist_between_level_sets, BoundMode, LevelSet, PerformanceBound};
use safemrac::sim::{ClosedLoopSystem, ControllerMode, SimConfig};

use crate::CliError;

fn d_dt() -> f64 {
    1e-3
}
fn d_horizon() -> f64 {
    30.0
}
fn d_gamma() -> f64 {
    1.0
}
fn d_controller_mode() -> String {
    "adaptive".into()
}
fn d_r_matrix() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
}
fn d_l() -> f64 {
    3.0
}
fn d_mu() -> f64 {
    1.0
}
fn d_uncertainty() -> bool {
    true
}
fn d_lambda() -> f64 {
    0.75
}
fn d_proj_limit() -> f64 {
    10.0
}
fn d_proj_nu() -> f64 {
    0.1
}
fn d_log_stride() -> usize {
    10
}
fn d_output_dir() -> String {
    "out".into()
}

/// Constant performance bound: a literal value or `"derived"`, meaning the
/// gap between the reference set and the safe-set boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsBarSpec {
    Value(f64),
    Mode(String),
}

/// One experiment, loadable from JSON. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub xr0: Vec<f64>,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    /// `"adaptive"` or `"nominal_only"`.
    #[serde(default = "d_controller_mode")]
    pub controller_mode: String,
    /// `"constant"` or `"time_varying"`.
    pub bound_mode: String,
    /// Required in constant mode, rejected in time-varying mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_bar: Option<EpsBarSpec>,
    pub ss_level: f64,
    pub sr_level: f64,
    #[serde(default = "d_r_matrix")]
    pub r_matrix: Vec<Vec<f64>>,
    #[serde(default = "d_l")]
    pub l1: f64,
    #[serde(default = "d_l")]
    pub l2: f64,
    #[serde(default = "d_mu")]
    pub mu: f64,
    #[serde(default = "d_uncertainty")]
    pub uncertainty: bool,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_hat0: Option<Vec<f64>>,
    #[serde(default = "d_proj_limit")]
    pub proj_limit: f64,
    #[serde(default = "d_proj_nu")]
    pub proj_nu: f64,
    #[serde(default = "d_log_stride")]
    pub log_stride: usize,
    #[serde(default = "d_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub figures: Vec<String>,
}

/// Geometry actually used by a built experiment, recorded in summaries so
/// figure scripts can draw the level curves.
#[derive(Debug, Clone)]
pub struct GeometryInfo {
    pub p: DMatrix<f64>,
    pub ss_level: f64,
    pub sr_level: f64,
    pub eps_bar: Option<f64>,
    pub bound_mode: BoundMode,
}

/// A config compiled into runnable simulation objects.
pub struct BuiltExperiment {
    pub sim: SimConfig,
    pub sys: ClosedLoopSystem,
    pub geometry: GeometryInfo,
}

/// Loads and validates a config file.
pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn positive(value: f64, key: &str) -> Result<(), CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "`{key}` must be a positive finite number, got {value}"
        )))
    }
}

/// Field-level validation with the offending key named in every message.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.name.is_empty() {
        return Err(CliError::Config("`name` must not be empty".into()));
    }
    positive(cfg.dt, "dt")?;
    positive(cfg.horizon, "horizon")?;
    positive(cfg.gamma, "gamma")?;
    positive(cfg.ss_level, "ss_level")?;
    positive(cfg.sr_level, "sr_level")?;
    positive(cfg.l1, "l1")?;
    positive(cfg.l2, "l2")?;
    positive(cfg.lambda, "lambda")?;
    positive(cfg.proj_limit, "proj_limit")?;
    positive(cfg.proj_nu, "proj_nu")?;
    if cfg.sr_level >= cfg.ss_level {
        return Err(CliError::Config(format!(
            "`sr_level` = {} must be below `ss_level` = {}",
            cfg.sr_level, cfg.ss_level
        )));
    }
    if cfg.x0.len() != 2 {
        return Err(CliError::Config(format!(
            "`x0` must have 2 entries, got {}",
            cfg.x0.len()
        )));
    }
    if cfg.xr0.len() != 2 {
        return Err(CliError::Config(format!(
            "`xr0` must have 2 entries, got {}",
            cfg.xr0.len()
        )));
    }
    if cfg.r_matrix.len() != 2 || cfg.r_matrix.iter().any(|row| row.len() != 2) {
        return Err(CliError::Config("`r_matrix` must be 2x2".into()));
    }
    match cfg.controller_mode.as_str() {
        "adaptive" | "nominal_only" => {}
        other => {
            return Err(CliError::Config(format!(
                "`controller_mode` must be \"adaptive\" or \"nominal_only\", got \"{other}\""
            )))
        }
    }
    match cfg.bound_mode.as_str() {
        "constant" => {
            match &cfg.eps_bar {
                None => {
                    return Err(CliError::Config(
                        "`eps_bar` is required in constant mode (a number or \"derived\")".into(),
                    ))
                }
                Some(EpsBarSpec::Value(v)) => positive(*v, "eps_bar")?,
                Some(EpsBarSpec::Mode(m)) if m == "derived" => {}
                Some(EpsBarSpec::Mode(m)) => {
                    return Err(CliError::Config(format!(
                        "`eps_bar` must be a number or \"derived\", got \"{m}\""
                    )))
                }
            };
        }
        "time_varying" => {
            if cfg.eps_bar.is_some() {
                return Err(CliError::Config(
                    "`eps_bar` is only meaningful in constant mode".into(),
                ));
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "`bound_mode` must be \"constant\" or \"time_varying\", got \"{other}\""
            )))
        }
    }
    if let Some(w) = &cfg.w_hat0 {
        if w.len() != 4 {
            return Err(CliError::Config(format!(
                "`w_hat0` must have 4 entries, got {}",
                w.len()
            )));
        }
    }
    if cfg.log_stride == 0 {
        return Err(CliError::Config("`log_stride` must be at least 1".into()));
    }
    if cfg.figures.iter().any(|f| !crate::figures::is_known(f)) {
        let bad = cfg
            .figures
            .iter()
            .find(|f| !crate::figures::is_known(f))
            .unwrap();
        return Err(CliError::Config(format!(
            "`figures` contains unknown id \"{bad}\"; valid ids: {}",
            crate::figures::KNOWN_IDS.join(", ")
        )));
    }
    Ok(())
}

/// Assembles the plant, reference, nominal controller, sets, and the
/// simulation configuration.
pub fn build(cfg: &ExperimentConfig) -> Result<BuiltExperiment, CliError> {
    validate(cfg)?;
    let r = DMatrix::from_fn(2, 2, |i, j| cfg.r_matrix[i][j]);
    let (nominal, data) = vdp_nominal(cfg.l1, cfg.l2, cfg.mu, &r)
        .map_err(|e| CliError::Config(format!("nominal controller: {e}")))?;
    let p = data.p().clone();
    let safe_set = LevelSet::new(p.clone(), cfg.ss_level)
        .map_err(|e| CliError::Config(format!("`ss_level`: {e}")))?;
    let ref_set = LevelSet::new(p.clone(), cfg.sr_level)
        .map_err(|e| CliError::Config(format!("`sr_level`: {e}")))?;

    let (bound, eps_used) = match cfg.bound_mode.as_str() {
        "constant" => {
            let eps = match cfg.eps_bar.as_ref().expect("validated") {
                EpsBarSpec::Value(v) => *v,
                EpsBarSpec::Mode(_) => dist_between_level_sets(&ref_set, &safe_set)
                    .map_err(|e| CliError::Config(format!("`eps_bar` = \"derived\": {e}")))?,
            };
            let b = PerformanceBound::constant(eps, safe_set, Some(ref_set))
                .map_err(|e| CliError::Config(format!("`eps_bar`: {e}")))?;
            (b, Some(eps))
        }
        _ => (
            PerformanceBound::time_varying(safe_set, Some(ref_set)),
            None,
        ),
    };

    let plant = vdp_plant(cfg.lambda, cfg.uncertainty)
        .map_err(|e| CliError::Config(format!("`lambda`: {e}")))?;
    let reference = vdp_reference(cfg.mu);
    let projection = ProjectionBounds::symmetric(4, cfg.proj_limit, cfg.proj_nu)
        .map_err(|e| CliError::Config(format!("`proj_limit`/`proj_nu`: {e}")))?;
    let w_hat0 = match &cfg.w_hat0 {
        Some(w) => DMatrix::from_column_slice(4, 1, w),
        None => DMatrix::zeros(4, 1),
    };
    let controller_mode = if cfg.controller_mode == "adaptive" {
        ControllerMode::Adaptive
    } else {
        ControllerMode::NominalOnly
    };
    let geometry = GeometryInfo {
        p,
        ss_level: cfg.ss_level,
        sr_level: cfg.sr_level,
        eps_bar: eps_used,
        bound_mode: bound.mode(),
    };
    Ok(BuiltExperiment {
        sim: SimConfig {
            dt: cfg.dt,
            horizon: cfg.horizon,
            x0: DVector::from_vec(cfg.x0.clone()),
            xr0: DVector::from_vec(cfg.xr0.clone()),
            gamma: cfg.gamma,
            bound,
            controller_mode,
            w_hat0,
            projection,
            log_stride: cfg.log_stride,
        },
        sys: ClosedLoopSystem {
            plant,
            reference,
            nominal,
        },
        geometry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "name": "t",
            "x0": [2.0, 2.0],
            "xr0": [2.0, 2.0],
            "bound_mode": "constant",
            "eps_bar": 1.3,
            "ss_level": 24.0,
            "sr_level": 8.0
        })
    }

    #[test]
    fn minimal_config_builds() {
        let cfg: ExperimentConfig = serde_json::from_value(minimal_json()).unwrap();
        validate(&cfg).unwrap();
        let built = build(&cfg).unwrap();
        assert_eq!(built.geometry.eps_bar, Some(1.3));
        assert_eq!(built.sim.dt, 1e-3);
    }

    #[test]
    fn negative_gamma_names_key() {
        let mut v = minimal_json();
        v["gamma"] = serde_json::json!(-1.0);
        let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        let err = validate(&cfg).unwrap_err().to_string();
        assert!(err.contains("gamma"), "message: {err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let mut v = minimal_json();
        v["gama"] = serde_json::json!(1.0);
        let out: Result<ExperimentConfig, _> = serde_json::from_value(v);
        let err = out.unwrap_err().to_string();
        assert!(err.contains("gama"), "message: {err}");
    }

    #[test]
    fn derived_eps_bar_uses_level_gap() {
        let mut v = minimal_json();
        v["eps_bar"] = serde_json::json!("derived");
        let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        let built = build(&cfg).unwrap();
        let eps = built.geometry.eps_bar.unwrap();
        assert!((eps - 1.8717).abs() < 1e-3, "eps {eps}");
    }

    #[test]
    fn eps_bar_rejected_in_time_varying_mode() {
        let mut v = minimal_json();
        v["bound_mode"] = serde_json::json!("time_varying");
        let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        let err = validate(&cfg).unwrap_err().to_string();
        assert!(err.contains("eps_bar"), "message: {err}");
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg: ExperimentConfig = serde_json::from_value(minimal_json()).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
