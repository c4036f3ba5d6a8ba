//! Experiment orchestration: run the simulations described by configs and
//! write trajectory CSVs, summary JSON, and figure scripts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;

use safemrac::safety::BoundMode;
use safemrac::sim::{compare_modes, run, sweep_logs, TrajectoryLog};

use crate::config::{build, ExperimentConfig, GeometryInfo};
use crate::output::{
    exit_code_for, geometry_json, run_summary_json, write_json, write_trajectory_csv,
};
use crate::{figures, CliError};

/// Environment variable overriding every config's output directory.
pub const OUT_DIR_ENV: &str = "SAFEMRAC_OUT";

/// Outcome of one CLI action: the process exit code plus the summary
/// written to disk.
pub struct Outcome {
    pub exit: u8,
    pub summary_path: PathBuf,
    pub summary: Value,
}

pub fn resolve_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var(OUT_DIR_ENV) {
        Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(&cfg.output_dir),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create output dir {}: {e}", dir.display())))
}

fn map_sim_err(e: safemrac::Error) -> CliError {
    match e {
        safemrac::Error::Setup(msg) => CliError::Config(format!("setup: {msg}")),
        other => CliError::Config(other.to_string()),
    }
}

/// Figures supported for each summary kind; inapplicable requests from a
/// shared config are skipped with a note instead of failing the run.
fn supported_for_kind(kind: &str) -> &'static [&'static str] {
    match kind {
        "run" => &["phase", "geometry"],
        "sweep" => &["phase", "h-sweep", "geometry"],
        "compare" => &["tracking", "control", "geometry"],
        _ => &[],
    }
}

fn emit_config_figures(
    cfg: &ExperimentConfig,
    summary: &Value,
    kind: &str,
    out_dir: &Path,
) -> Result<(), CliError> {
    for id in &cfg.figures {
        if supported_for_kind(kind).contains(&id.as_str()) {
            let path = figures::emit(summary, id, out_dir)?;
            eprintln!("wrote {}", path.display());
        } else {
            eprintln!("note: figure \"{id}\" does not apply to a {kind} summary; skipped");
        }
    }
    Ok(())
}

fn bound_label(mode: BoundMode) -> &'static str {
    match mode {
        BoundMode::Constant => "constant",
        BoundMode::TimeVarying => "time_varying",
    }
}

fn base_summary(cfg: &ExperimentConfig, kind: &str, geometry: &GeometryInfo) -> Value {
    serde_json::json!({
        "kind": kind,
        "name": cfg.name,
        "gamma": cfg.gamma,
        "dt": cfg.dt,
        "horizon": cfg.horizon,
        "controller_mode": cfg.controller_mode,
        "bound_mode": cfg.bound_mode,
        "geometry": geometry_json(geometry),
    })
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

/// `run <config>`: one simulation, one CSV, one summary, figure scripts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let out_dir = resolve_out_dir(cfg);
    ensure_dir(&out_dir)?;
    let built = build(cfg)?;
    let started = Instant::now();
    let log = run(&built.sim, &built.sys).map_err(map_sim_err)?;
    let elapsed = started.elapsed().as_secs_f64();

    let csv_name = format!("{}_trajectory.csv", cfg.name);
    write_trajectory_csv(&out_dir.join(&csv_name), &log)?;

    let mut summary = base_summary(cfg, "run", &built.geometry);
    merge(&mut summary, run_summary_json(&log.summary(), &csv_name));
    merge(&mut summary, serde_json::json!({ "elapsed_seconds": elapsed }));
    let summary_path = out_dir.join(format!("{}_summary.json", cfg.name));
    write_json(&summary_path, &summary)?;
    emit_config_figures(cfg, &summary, "run", &out_dir)?;

    Ok(Outcome {
        exit: exit_code_for(log.verdict, log.first_safe_set_exit),
        summary_path,
        summary,
    })
}

fn gamma_tag(gamma: f64) -> String {
    format!("{gamma}").replace('.', "p")
}

/// `sweep <config> --gammas ...`: one run per rate, plus a sweep summary.
pub fn sweep_experiment(cfg: &ExperimentConfig, gammas: &[f64]) -> Result<Outcome, CliError> {
    if gammas.is_empty() {
        return Err(CliError::Config(
            "`--gammas` needs at least one positive value".into(),
        ));
    }
    if let Some(bad) = gammas.iter().find(|g| !(**g > 0.0)) {
        return Err(CliError::Config(format!(
            "`--gammas` values must be positive, got {bad}"
        )));
    }
    let out_dir = resolve_out_dir(cfg);
    ensure_dir(&out_dir)?;
    let built = build(cfg)?;
    let started = Instant::now();
    let results = sweep_logs(&built.sim, &built.sys, gammas).map_err(map_sim_err)?;
    let elapsed = started.elapsed().as_secs_f64();

    let mut entries = Vec::new();
    let mut worst_exit = 0u8;
    for (gamma, outcome) in &results {
        match outcome {
            Ok(log) => {
                let csv_name = format!("{}_gamma{}_trajectory.csv", cfg.name, gamma_tag(*gamma));
                write_trajectory_csv(&out_dir.join(&csv_name), log)?;
                let mut entry = serde_json::json!({ "gamma": gamma });
                merge(&mut entry, run_summary_json(&log.summary(), &csv_name));
                entries.push(entry);
                worst_exit =
                    worst_exit.max(exit_code_for(log.verdict, log.first_safe_set_exit));
            }
            Err(e) => {
                entries.push(serde_json::json!({ "gamma": gamma, "error": e.to_string() }));
                worst_exit = worst_exit.max(1);
            }
        }
    }

    let mut summary = base_summary(cfg, "sweep", &built.geometry);
    merge(
        &mut summary,
        serde_json::json!({
            "gammas": gammas,
            "entries": entries,
            "elapsed_seconds": elapsed,
        }),
    );
    let summary_path = out_dir.join(format!("{}_sweep_summary.json", cfg.name));
    write_json(&summary_path, &summary)?;
    emit_config_figures(cfg, &summary, "sweep", &out_dir)?;

    Ok(Outcome {
        exit: worst_exit,
        summary_path,
        summary,
    })
}

/// Fields that must agree for a comparison to be meaningful; the bound
/// mode, eps choice, name, figure list, and output dir may differ.
fn check_comparable(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<(), CliError> {
    let same = a.dt == b.dt
        && a.horizon == b.horizon
        && a.x0 == b.x0
        && a.xr0 == b.xr0
        && a.gamma == b.gamma
        && a.controller_mode == b.controller_mode
        && a.ss_level == b.ss_level
        && a.sr_level == b.sr_level
        && a.r_matrix == b.r_matrix
        && a.l1 == b.l1
        && a.l2 == b.l2
        && a.mu == b.mu
        && a.uncertainty == b.uncertainty
        && a.lambda == b.lambda
        && a.w_hat0 == b.w_hat0
        && a.proj_limit == b.proj_limit
        && a.proj_nu == b.proj_nu
        && a.log_stride == b.log_stride;
    if same {
        Ok(())
    } else {
        Err(CliError::Config(
            "comparison configs must be identical except for `bound_mode`/`eps_bar` \
             (and `name`, `figures`, `output_dir`)"
                .into(),
        ))
    }
}

/// `compare <config_a> <config_b>`: two runs differing only in the bound.
pub fn compare_experiment(
    cfg_a: &ExperimentConfig,
    cfg_b: &ExperimentConfig,
) -> Result<Outcome, CliError> {
    check_comparable(cfg_a, cfg_b)?;
    let out_dir = resolve_out_dir(cfg_a);
    ensure_dir(&out_dir)?;
    let built_a = build(cfg_a)?;
    let built_b = build(cfg_b)?;
    let name = format!("{}_vs_{}", cfg_a.name, cfg_b.name);

    let started = Instant::now();
    let report =
        compare_modes(&built_a.sim, &built_b.sim, &built_a.sys).map_err(map_sim_err)?;
    let elapsed = started.elapsed().as_secs_f64();

    // Re-run for the full logs; runs are deterministic so the summaries
    // match the report.
    let log_a = run(&built_a.sim, &built_a.sys).map_err(map_sim_err)?;
    let log_b = run(&built_b.sim, &built_b.sys).map_err(map_sim_err)?;
    let csv_a = format!("{name}_first_trajectory.csv");
    let csv_b = format!("{name}_second_trajectory.csv");
    write_trajectory_csv(&out_dir.join(&csv_a), &log_a)?;
    write_trajectory_csv(&out_dir.join(&csv_b), &log_b)?;

    let side = |cfg: &ExperimentConfig,
                built: &crate::config::BuiltExperiment,
                log: &TrajectoryLog,
                csv: &str| {
        let mut v = serde_json::json!({
            "label": bound_label(built.geometry.bound_mode),
            "config_name": cfg.name,
            "eps_bar": built.geometry.eps_bar,
        });
        merge(&mut v, run_summary_json(&log.summary(), csv));
        v
    };

    let claims = match report.claims {
        Some((tighter, larger, lower)) => serde_json::json!({
            "first_tracks_tighter": tighter,
            "first_control_larger": larger,
            "second_rate_lower": lower,
        }),
        None => Value::Null,
    };
    let summary = serde_json::json!({
        "kind": "compare",
        "name": name,
        "gamma": cfg_a.gamma,
        "dt": cfg_a.dt,
        "horizon": cfg_a.horizon,
        "geometry": geometry_json(&built_a.geometry),
        "first": side(cfg_a, &built_a, &log_a, &csv_a),
        "second": side(cfg_b, &built_b, &log_b, &csv_b),
        "tracking_delta": report.tracking_delta,
        "control_delta": report.control_delta,
        "rate_delta": report.rate_delta,
        "incomplete": report.incomplete,
        "claims": claims,
        "elapsed_seconds": elapsed,
    });
    let summary_path = out_dir.join(format!("{name}_compare_summary.json"));
    write_json(&summary_path, &summary)?;
    emit_config_figures(cfg_a, &summary, "compare", &out_dir)?;

    let exit = exit_code_for(log_a.verdict, log_a.first_safe_set_exit)
        .max(exit_code_for(log_b.verdict, log_b.first_safe_set_exit));
    Ok(Outcome {
        exit,
        summary_path,
        summary,
    })
}

/// `figures <summary> --figure <id>`: re-emit a figure from a stored
/// summary (its data CSVs must still sit next to it).
pub fn figures_from_summary(summary_path: &Path, figure: &str) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(summary_path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", summary_path.display())))?;
    let summary: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", summary_path.display())))?;
    let out_dir = summary_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    figures::emit(&summary, figure, &out_dir)
}
