//! Gnuplot script emission from run, sweep, and comparison summaries.
//!
//! Each figure is a standalone `.gp` script next to the data CSVs it
//! references, so `gnuplot <name>_<figure>.gp` renders an SVG without any
//! further inputs. Scripts assume the built-in study layout (planar state,
//! scalar input); the emitter checks the CSV headers before referencing
//! columns.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde_json::Value;

use crate::output::read_trajectory_csv;
use crate::CliError;

/// Figure identifiers accepted by configs and the `figures` verb.
pub const KNOWN_IDS: [&str; 5] = ["phase", "h-sweep", "tracking", "control", "geometry"];

pub fn is_known(id: &str) -> bool {
    KNOWN_IDS.contains(&id)
}

fn unknown_figure(id: &str) -> CliError {
    CliError::Config(format!(
        "unknown figure id \"{id}\"; valid ids: {}",
        KNOWN_IDS.join(", ")
    ))
}

/// Column positions in the study CSV layout (1-based, for gnuplot).
mod col {
    pub const T: usize = 1;
    pub const X1: usize = 2;
    pub const X2: usize = 3;
    pub const XR1: usize = 4;
    pub const H: usize = 10;
    pub const U: usize = 12;
    pub const EFF: usize = 15;
}

const EXPECTED_PREFIX: [&str; 16] = [
    "t", "x1", "x2", "xr1", "xr2", "e1", "e2", "e_norm", "V", "h", "eps", "u", "u_n", "psi",
    "eff_rate", "safe_margin",
];

fn check_columns(csv: &Path) -> Result<(), CliError> {
    let (header, _) = read_trajectory_csv(csv)?;
    for (i, want) in EXPECTED_PREFIX.iter().enumerate() {
        if header.get(i).map(String::as_str) != Some(*want) {
            return Err(CliError::Config(format!(
                "{}: column {} is {:?}, expected \"{want}\"",
                csv.display(),
                i + 1,
                header.get(i)
            )));
        }
    }
    Ok(())
}

fn field_str<'a>(v: &'a Value, key: &str) -> Result<&'a str, CliError> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::Config(format!("summary is missing string field `{key}`")))
}

fn field_f64(v: &Value, key: &str) -> Result<f64, CliError> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::Config(format!("summary is missing numeric field `{key}`")))
}

fn geometry_matrix(summary: &Value) -> Result<(DMatrix<f64>, f64, f64, Option<f64>), CliError> {
    let g = summary
        .get("geometry")
        .ok_or_else(|| CliError::Config("summary has no `geometry` block".into()))?;
    let rows = g
        .get("p")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::Config("geometry block has no `p` matrix".into()))?;
    let mut p = DMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            p[(i, j)] = rows
                .get(i)
                .and_then(|r| r.get(j))
                .and_then(Value::as_f64)
                .ok_or_else(|| CliError::Config("geometry `p` must be 2x2 numeric".into()))?;
        }
    }
    Ok((
        p,
        field_f64(g, "ss_level")?,
        field_f64(g, "sr_level")?,
        g.get("eps_bar").and_then(Value::as_f64),
    ))
}

/// Parametric gnuplot expressions `(x(t), y(t))` for the level curve
/// `xᵀPx = c`, via `y = √c P^{-1/2} (cos t, sin t)`.
fn ellipse_terms(p: &DMatrix<f64>, level: f64) -> (String, String) {
    let eig = p.clone().symmetric_eigen();
    let mut d = DMatrix::zeros(2, 2);
    for i in 0..2 {
        d[(i, i)] = 1.0 / eig.eigenvalues[i].sqrt();
    }
    let m = &eig.eigenvectors * d * eig.eigenvectors.transpose() * level.sqrt();
    (
        format!("({:.12e}*cos(t) + {:.12e}*sin(t))", m[(0, 0)], m[(0, 1)]),
        format!("({:.12e}*cos(t) + {:.12e}*sin(t))", m[(1, 0)], m[(1, 1)]),
    )
}

fn lerp_color(i: usize, k: usize) -> String {
    let f = if k <= 1 { 1.0 } else { i as f64 / (k - 1) as f64 };
    let r = (255.0 * f).round() as u8;
    let b = 255 - r;
    format!("#{r:02X}00{b:02X}")
}

fn script_prelude(title: &str, output_svg: &str) -> String {
    format!(
        "set terminal svg size 900,640 background 'white'\n\
         set output '{output_svg}'\n\
         set datafile separator ','\n\
         set title '{title}'\n\
         set grid\n"
    )
}

fn write_script(out_dir: &Path, file: &str, body: &str) -> Result<PathBuf, CliError> {
    let path = out_dir.join(file);
    std::fs::write(&path, body)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Trajectories referenced by a summary: `(csv, label)` pairs.
fn trajectories(summary: &Value, out_dir: &Path) -> Result<Vec<(String, String)>, CliError> {
    match field_str(summary, "kind")? {
        "run" => {
            let csv = field_str(summary, "trajectory_csv")?.to_string();
            check_columns(&out_dir.join(&csv))?;
            Ok(vec![(csv, "trajectory".into())])
        }
        "sweep" => {
            let entries = summary
                .get("entries")
                .and_then(Value::as_array)
                .ok_or_else(|| CliError::Config("sweep summary has no `entries`".into()))?;
            let mut out = Vec::new();
            for e in entries {
                if e.get("error").is_some() {
                    continue;
                }
                let csv = field_str(e, "trajectory_csv")?.to_string();
                check_columns(&out_dir.join(&csv))?;
                let gamma = field_f64(e, "gamma")?;
                out.push((csv, format!("gamma = {gamma}")));
            }
            if out.is_empty() {
                return Err(CliError::Config(
                    "sweep summary has no completed entries to plot".into(),
                ));
            }
            Ok(out)
        }
        other => Err(CliError::Config(format!(
            "figure needs a run or sweep summary, got kind \"{other}\""
        ))),
    }
}

fn compare_pair(summary: &Value, out_dir: &Path) -> Result<[(String, String); 2], CliError> {
    if field_str(summary, "kind")? != "compare" {
        return Err(CliError::Config(
            "figure needs a compare summary (produced by the `compare` verb)".into(),
        ));
    }
    let mut pair = Vec::new();
    for key in ["first", "second"] {
        let block = summary
            .get(key)
            .ok_or_else(|| CliError::Config(format!("compare summary has no `{key}` block")))?;
        let csv = field_str(block, "trajectory_csv")?.to_string();
        check_columns(&out_dir.join(&csv))?;
        let label = field_str(block, "label")?.to_string();
        pair.push((csv, label));
    }
    Ok([pair.remove(0), pair.remove(0)])
}

fn emit_phase(summary: &Value, out_dir: &Path) -> Result<PathBuf, CliError> {
    let name = field_str(summary, "name")?;
    let (p, ss, sr, _) = geometry_matrix(summary)?;
    let traces = trajectories(summary, out_dir)?;
    let (ss_x, ss_y) = ellipse_terms(&p, ss);
    let (sr_x, sr_y) = ellipse_terms(&p, sr);
    let mut s = script_prelude("State phase portrait", &format!("{name}_phase.svg"));
    s += "set xlabel 'x1'\nset ylabel 'x2'\nset parametric\nset trange [0:2*pi]\nset size ratio -1\n";
    let mut parts: Vec<String> = Vec::new();
    let k = traces.len();
    for (i, (csv, label)) in traces.iter().enumerate() {
        parts.push(format!(
            "'{csv}' skip 1 using {}:{} with lines lc rgb '{}' title '{label}'",
            col::X1,
            col::X2,
            lerp_color(i, k)
        ));
    }
    parts.push(format!(
        "'{}' skip 1 using {}:{} with lines lc rgb '#888888' title 'reference'",
        traces[0].0,
        col::XR1,
        col::XR1 + 1
    ));
    parts.push(format!(
        "{ss_x}, {ss_y} with lines lc rgb 'black' dashtype 2 title 'safe set'"
    ));
    parts.push(format!(
        "{sr_x}, {sr_y} with lines lc rgb 'black' dashtype 3 title 'reference set'"
    ));
    s += &format!("plot \\\n  {}\n", parts.join(", \\\n  "));
    write_script(out_dir, &format!("{name}_phase.gp"), &s)
}

fn emit_h_sweep(summary: &Value, out_dir: &Path) -> Result<PathBuf, CliError> {
    if field_str(summary, "kind")? != "sweep" {
        return Err(CliError::Config(
            "figure \"h-sweep\" needs a sweep summary".into(),
        ));
    }
    let name = field_str(summary, "name")?;
    let traces = trajectories(summary, out_dir)?;
    let mut s = script_prelude(
        "Barrier h(t) per adaptation rate",
        &format!("{name}_h_sweep.svg"),
    );
    s += "set xlabel 't [s]'\nset ylabel 'h'\nset key top right\n";
    let k = traces.len();
    let parts: Vec<String> = traces
        .iter()
        .enumerate()
        .map(|(i, (csv, label))| {
            format!(
                "'{csv}' skip 1 using {}:{} with lines lc rgb '{}' title '{label}'",
                col::T,
                col::H,
                lerp_color(i, k)
            )
        })
        .collect();
    s += &format!("plot \\\n  {}\n", parts.join(", \\\n  "));
    write_script(out_dir, &format!("{name}_h_sweep.gp"), &s)
}

fn emit_tracking(summary: &Value, out_dir: &Path) -> Result<PathBuf, CliError> {
    let name = field_str(summary, "name")?;
    let [(csv_a, label_a), (csv_b, label_b)] = compare_pair(summary, out_dir)?;
    let mut s = script_prelude("Tracking comparison", &format!("{name}_tracking.svg"));
    s += "set multiplot layout 2,1\nset xlabel 't [s]'\n";
    s += &format!(
        "set ylabel 'x1'\nplot \\\n  '{csv_a}' skip 1 using {t}:{x} with lines lc rgb '#CC0000' title 'x1 ({label_a})', \\\n  '{csv_b}' skip 1 using {t}:{x} with lines lc rgb '#0000CC' title 'x1 ({label_b})', \\\n  '{csv_a}' skip 1 using {t}:{r} with lines lc rgb '#555555' dashtype 2 title 'xr1'\n",
        t = col::T,
        x = col::X1,
        r = col::XR1,
    );
    s += &format!(
        "set ylabel 'x2'\nplot \\\n  '{csv_a}' skip 1 using {t}:{x} with lines lc rgb '#CC0000' title 'x2 ({label_a})', \\\n  '{csv_b}' skip 1 using {t}:{x} with lines lc rgb '#0000CC' title 'x2 ({label_b})', \\\n  '{csv_a}' skip 1 using {t}:{r} with lines lc rgb '#555555' dashtype 2 title 'xr2'\n",
        t = col::T,
        x = col::X2,
        r = col::XR1 + 1,
    );
    s += "unset multiplot\n";
    write_script(out_dir, &format!("{name}_tracking.gp"), &s)
}

fn emit_control(summary: &Value, out_dir: &Path) -> Result<PathBuf, CliError> {
    let name = field_str(summary, "name")?;
    let [(csv_a, label_a), (csv_b, label_b)] = compare_pair(summary, out_dir)?;
    let mut s = script_prelude(
        "Control signal and effective adaptation rate",
        &format!("{name}_control.svg"),
    );
    s += "set multiplot layout 2,1\nset xlabel 't [s]'\n";
    s += &format!(
        "set ylabel 'u'\nplot \\\n  '{csv_a}' skip 1 using {t}:{u} with lines lc rgb '#CC0000' title 'u ({label_a})', \\\n  '{csv_b}' skip 1 using {t}:{u} with lines lc rgb '#0000CC' title 'u ({label_b})'\n",
        t = col::T,
        u = col::U,
    );
    s += &format!(
        "set ylabel 'effective rate'\nplot \\\n  '{csv_a}' skip 1 using {t}:{e} with lines lc rgb '#CC0000' title 'rate ({label_a})', \\\n  '{csv_b}' skip 1 using {t}:{e} with lines lc rgb '#0000CC' title 'rate ({label_b})'\n",
        t = col::T,
        e = col::EFF,
    );
    s += "unset multiplot\n";
    write_script(out_dir, &format!("{name}_control.gp"), &s)
}

fn emit_geometry(summary: &Value, out_dir: &Path) -> Result<PathBuf, CliError> {
    let name = field_str(summary, "name")?;
    let (p, ss, sr, eps_bar) = geometry_matrix(summary)?;
    let (ss_x, ss_y) = ellipse_terms(&p, ss);
    let (sr_x, sr_y) = ellipse_terms(&p, sr);
    let mut s = script_prelude(
        "Safe set, reference set, and performance bound",
        &format!("{name}_geometry.svg"),
    );
    s += "set xlabel 'x1'\nset ylabel 'x2'\nset parametric\nset trange [0:2*pi]\nset size ratio -1\n";
    let mut parts = vec![
        format!("{ss_x}, {ss_y} with lines lc rgb 'black' dashtype 2 title 'safe set'"),
        format!("{sr_x}, {sr_y} with lines lc rgb 'black' dashtype 3 title 'reference set'"),
    ];
    if let Some(eps) = eps_bar {
        // Ball of radius eps-bar around the reference-set point nearest to
        // the safe-set boundary (along the top eigenvector of P).
        let eig = p.clone().symmetric_eigen();
        let top = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
        let lam = eig.eigenvalues[top];
        let cx = (sr / lam).sqrt() * eig.eigenvectors[(0, top)];
        let cy = (sr / lam).sqrt() * eig.eigenvectors[(1, top)];
        parts.push(format!(
            "({cx:.6e} + {eps:.6e}*cos(t)), ({cy:.6e} + {eps:.6e}*sin(t)) with lines lc rgb '#CC0000' title 'bound'",
        ));
    }
    s += &format!("plot \\\n  {}\n", parts.join(", \\\n  "));
    write_script(out_dir, &format!("{name}_geometry.gp"), &s)
}

/// Emits the requested figure script beside the summary's data files.
pub fn emit(summary: &Value, figure: &str, out_dir: &Path) -> Result<PathBuf, CliError> {
    match figure {
        "phase" => emit_phase(summary, out_dir),
        "h-sweep" => emit_h_sweep(summary, out_dir),
        "tracking" => emit_tracking(summary, out_dir),
        "control" => emit_control(summary, out_dir),
        "geometry" => emit_geometry(summary, out_dir),
        other => Err(unknown_figure(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_ids_are_stable() {
        assert!(is_known("phase"));
        assert!(is_known("h-sweep"));
        assert!(!is_known("h_sweep"));
    }

    #[test]
    fn unknown_id_lists_valid_ones() {
        let err = emit(&serde_json::json!({}), "nope", Path::new("."))
            .unwrap_err()
            .to_string();
        for id in KNOWN_IDS {
            assert!(err.contains(id), "{err}");
        }
    }

    #[test]
    fn color_ramp_endpoints() {
        assert_eq!(lerp_color(0, 4), "#0000FF");
        assert_eq!(lerp_color(3, 4), "#FF0000");
    }
}
