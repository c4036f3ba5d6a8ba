//! `safemrac`: run, sweep, and compare safety-critical adaptive control
//! experiments from JSON configs.
//!
//! Exit codes: 0 run completed, 1 configuration or usage error, 2 safety
//! event (barrier breach, reference escape, or safe-set exit), 3 numerical
//! blowup.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use safemrac_cli::config::load_config;
use safemrac_cli::experiment::{
    compare_experiment, figures_from_summary, run_experiment, sweep_experiment,
};
use safemrac_cli::verify::run_self_checks;

#[derive(Parser)]
#[command(
    name = "safemrac",
    version,
    about = "Safety-critical model reference adaptive control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its artifacts.
    Run { config: PathBuf },
    /// Run the config once per adaptation rate.
    Sweep {
        config: PathBuf,
        /// Comma-separated positive adaptation rates, e.g. 0.05,0.2,1,5
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
    },
    /// Run two configs that differ only in their performance bound and
    /// report tracking / control / effective-rate orderings.
    Compare {
        config_a: PathBuf,
        config_b: PathBuf,
    },
    /// Run the built-in certificate and geometry self-checks.
    Verify,
    /// Emit a figure script from a stored summary JSON.
    Figures {
        summary: PathBuf,
        #[arg(long)]
        figure: String,
    },
}

fn print_run_line(summary: &serde_json::Value) {
    let verdict = summary
        .get("verdict")
        .and_then(|v| v.as_str())
        .unwrap_or("-");
    let name = summary.get("name").and_then(|v| v.as_str()).unwrap_or("-");
    println!("{name}: {verdict}");
    for key in [
        "min_h",
        "sup_e_norm",
        "sup_u_abs",
        "sup_eff_rate",
        "min_safe_margin",
    ] {
        if let Some(v) = summary.get(key).and_then(|v| v.as_f64()) {
            println!("  {key} = {v:.6}");
        }
    }
    for key in ["event_time", "first_safe_set_exit"] {
        if let Some(v) = summary.get(key).and_then(|v| v.as_f64()) {
            println!("  {key} = {v:.6}");
        }
    }
}

fn dispatch(command: Command) -> Result<u8, safemrac_cli::CliError> {
    match command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let outcome = run_experiment(&cfg)?;
            print_run_line(&outcome.summary);
            println!("summary: {}", outcome.summary_path.display());
            Ok(outcome.exit)
        }
        Command::Sweep { config, gammas } => {
            let cfg = load_config(&config)?;
            let outcome = sweep_experiment(&cfg, &gammas)?;
            if let Some(entries) = outcome.summary.get("entries").and_then(|v| v.as_array()) {
                for e in entries {
                    let gamma = e.get("gamma").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
                    match e.get("error") {
                        Some(err) => println!("gamma {gamma}: error: {err}"),
                        None => {
                            let verdict =
                                e.get("verdict").and_then(|v| v.as_str()).unwrap_or("-");
                            let min_h =
                                e.get("min_h").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
                            println!("gamma {gamma}: {verdict}, min_h = {min_h:.6}");
                        }
                    }
                }
            }
            println!("summary: {}", outcome.summary_path.display());
            Ok(outcome.exit)
        }
        Command::Compare { config_a, config_b } => {
            let a = load_config(&config_a)?;
            let b = load_config(&config_b)?;
            let outcome = compare_experiment(&a, &b)?;
            for key in ["first", "second"] {
                if let Some(side) = outcome.summary.get(key) {
                    let label = side.get("label").and_then(|v| v.as_str()).unwrap_or(key);
                    let verdict = side.get("verdict").and_then(|v| v.as_str()).unwrap_or("-");
                    let sup_e = side
                        .get("sup_e_norm")
                        .and_then(|v| v.as_f64())
                        .unwrap_or(f64::NAN);
                    let sup_u = side
                        .get("sup_u_abs")
                        .and_then(|v| v.as_f64())
                        .unwrap_or(f64::NAN);
                    let rate = side
                        .get("sup_eff_rate")
                        .and_then(|v| v.as_f64())
                        .unwrap_or(f64::NAN);
                    println!(
                        "{label}: {verdict}, sup|e| = {sup_e:.6}, sup|u| = {sup_u:.4}, \
                         sup rate = {rate:.4}"
                    );
                }
            }
            println!("claims: {}", outcome.summary["claims"]);
            println!("summary: {}", outcome.summary_path.display());
            Ok(outcome.exit)
        }
        Command::Verify => Ok(if run_self_checks() { 0 } else { 1 }),
        Command::Figures { summary, figure } => {
            let path = figures_from_summary(&summary, &figure)?;
            println!("wrote {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
