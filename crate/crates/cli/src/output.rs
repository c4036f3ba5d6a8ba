//! Trajectory CSV serialization and summary JSON.
//!
//! CSV columns, in order:
//! `t,x1,x2,xr1,xr2,e1,e2,e_norm,V,h,eps,u,u_n,psi,eff_rate,safe_margin,W_hat_1..W_hat_k`.
//! Values carry 17 significant digits so parsing a file reproduces the
//! in-memory doubles exactly; the header row is mandatory and the file is
//! newline-terminated.

use std::io::Write;
use std::path::Path;

use safemrac::sim::{RunSummary, TrajectoryLog, Verdict};

use crate::config::GeometryInfo;
use crate::CliError;

/// Formats one double with 17 significant digits (round-trip exact).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn vector_cols(prefix: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=dim).map(|i| format!("{prefix}{i}")).collect()
    }
}

/// Header for a log with state dimension `n`, input dimension `m`, and
/// `k` flattened weight entries.
pub fn csv_header(n: usize, m: usize, k: usize) -> String {
    let mut cols: Vec<String> = vec!["t".into()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=n).map(|i| format!("xr{i}")));
    cols.extend((1..=n).map(|i| format!("e{i}")));
    cols.push("e_norm".into());
    cols.push("V".into());
    cols.push("h".into());
    cols.push("eps".into());
    cols.extend(vector_cols("u", m));
    cols.extend(vector_cols("u_n", m));
    cols.push("psi".into());
    cols.push("eff_rate".into());
    cols.push("safe_margin".into());
    cols.extend((1..=k).map(|i| format!("W_hat_{i}")));
    cols.join(",")
}

/// Writes the trajectory CSV for a completed or halted run.
pub fn write_trajectory_csv(path: &Path, log: &TrajectoryLog) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    let io_err = |e: std::io::Error| CliError::Io(format!("write {}: {e}", path.display()));
    let (n, m, k) = match log.samples.first() {
        Some(s) => (s.x.len(), s.u.len(), s.w_hat.len()),
        None => (2, 1, 4),
    };
    writeln!(out, "{}", csv_header(n, m, k)).map_err(io_err)?;
    for s in &log.samples {
        let mut fields: Vec<String> = Vec::with_capacity(1 + 3 * n + 2 * m + 6 + k);
        fields.push(fmt_f64(s.t));
        fields.extend(s.x.iter().map(|v| fmt_f64(*v)));
        fields.extend(s.xr.iter().map(|v| fmt_f64(*v)));
        fields.extend(s.e.iter().map(|v| fmt_f64(*v)));
        fields.push(fmt_f64(s.e_norm));
        fields.push(fmt_f64(s.v));
        fields.push(fmt_f64(s.h));
        fields.push(fmt_f64(s.eps));
        fields.extend(s.u.iter().map(|v| fmt_f64(*v)));
        fields.extend(s.u_n.iter().map(|v| fmt_f64(*v)));
        fields.push(fmt_f64(s.psi));
        fields.push(fmt_f64(s.effective_rate));
        fields.push(fmt_f64(s.safe_margin));
        fields.extend(s.w_hat.iter().map(|v| fmt_f64(*v)));
        writeln!(out, "{}", fields.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Parses a trajectory CSV back into its header and numeric rows.
pub fn read_trajectory_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Io(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let row = row.map_err(|e| {
            CliError::Io(format!("{} line {}: {e}", path.display(), idx + 2))
        })?;
        if row.len() != header.len() {
            return Err(CliError::Io(format!(
                "{} line {}: {} fields, expected {}",
                path.display(),
                idx + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn opt_json(v: Option<f64>) -> serde_json::Value {
    match v {
        Some(x) => serde_json::json!(x),
        None => serde_json::Value::Null,
    }
}

/// Geometry block shared by all summary kinds.
pub fn geometry_json(geometry: &GeometryInfo) -> serde_json::Value {
    let p: Vec<Vec<f64>> = (0..geometry.p.nrows())
        .map(|i| (0..geometry.p.ncols()).map(|j| geometry.p[(i, j)]).collect())
        .collect();
    serde_json::json!({
        "p": p,
        "ss_level": geometry.ss_level,
        "sr_level": geometry.sr_level,
        "eps_bar": opt_json(geometry.eps_bar),
        "bound_mode": match geometry.bound_mode {
            safemrac::safety::BoundMode::Constant => "constant",
            safemrac::safety::BoundMode::TimeVarying => "time_varying",
        },
    })
}

/// Summary block for one run.
pub fn run_summary_json(summary: &RunSummary, trajectory_csv: &str) -> serde_json::Value {
    serde_json::json!({
        "verdict": summary.verdict.as_str(),
        "event_time": opt_json(summary.event_time),
        "first_safe_set_exit": opt_json(summary.first_safe_set_exit),
        "min_h": summary.min_h,
        "sup_e_norm": summary.sup_e_norm,
        "sup_u_abs": summary.sup_u_abs,
        "sup_eff_rate": summary.sup_eff_rate,
        "min_safe_margin": summary.min_safe_margin,
        "max_psi": summary.max_psi,
        "min_w_margin": summary.min_w_margin,
        "steps_completed": summary.steps_completed,
        "trajectory_csv": trajectory_csv,
    })
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Process exit code for a finished run: 0 completed, 2 safety event,
/// 3 numerical blowup without a prior safety event.
pub fn exit_code_for(verdict: Verdict, first_exit: Option<f64>) -> u8 {
    match verdict {
        Verdict::Completed => 0,
        Verdict::BarrierBreach | Verdict::ReferenceEscape | Verdict::SafeSetExit => 2,
        Verdict::NumericalBlowup => {
            if first_exit.is_some() {
                2
            } else {
                3
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips_bit_exactly() {
        for v in [
            0.1,
            -3.0035e-7,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.0e222,
            -0.0,
            f64::MIN_POSITIVE,
        ] {
            let back: f64 = fmt_f64(v).parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "value {v}");
        }
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn header_matches_contract() {
        assert_eq!(
            csv_header(2, 1, 4),
            "t,x1,x2,xr1,xr2,e1,e2,e_norm,V,h,eps,u,u_n,psi,eff_rate,safe_margin,\
             W_hat_1,W_hat_2,W_hat_3,W_hat_4"
        );
    }

    #[test]
    fn exit_codes_follow_contract() {
        assert_eq!(exit_code_for(Verdict::Completed, None), 0);
        assert_eq!(exit_code_for(Verdict::SafeSetExit, Some(0.1)), 2);
        assert_eq!(exit_code_for(Verdict::BarrierBreach, None), 2);
        assert_eq!(exit_code_for(Verdict::ReferenceEscape, None), 2);
        assert_eq!(exit_code_for(Verdict::NumericalBlowup, None), 3);
        assert_eq!(exit_code_for(Verdict::NumericalBlowup, Some(0.2)), 2);
    }
}
