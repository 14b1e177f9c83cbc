//! Command-line interface: `run` executes a configuration and writes the
//! density files, `bath` and `lowrank` report on the bath discretization
//! and its compression, `diff` compares two density files, and `verify`
//! runs the built-in self-checks.  Worker count resolves from the
//! CALSIM_WORKERS environment variable, then the flag, then the
//! configuration.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::output::{diff_density, read_density};
use crate::pool::resolve_workers;
use crate::runner::{self, RunError};

#[derive(Parser)]
#[command(
    name = "calsim",
    version,
    about = "Reduced-density simulator: frozen-Gaussian trajectories over a \
             low-rank harmonic bath"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration end to end and write <label>.csv and
    /// <label>.meta into the output directory.
    Run {
        /// Configuration file (INI).
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory from the configuration.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads (CALSIM_WORKERS overrides this; default is the
        /// configuration, then the machine).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Report the discretized bath modes and the induced potential shift.
    Bath {
        /// Configuration file (INI).
        #[arg(long)]
        config: PathBuf,
    },
    /// Report the kernel compression error at the requested ranks.
    Lowrank {
        /// Configuration file (INI).
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated ranks to evaluate, e.g. 5,10,20,40.
        #[arg(long, required = true, value_delimiter = ',')]
        ranks: Vec<usize>,
    },
    /// Compare two density files on the same grid.
    Diff {
        /// First density file (the reference).
        a: PathBuf,
        /// Second density file.
        b: PathBuf,
    },
    /// Run the built-in self-checks.
    Verify,
}

/// Entry point shared by the binary and the tests: parse, dispatch, and
/// map every failure to its exit code (2 configuration, 3 numeric or
/// runtime, 4 memory).
pub fn entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders --help/--version through the same path
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, RunError> {
    match cli.command {
        Command::Run {
            config,
            output,
            workers,
        } => run_command(&config, output.as_deref(), workers),
        Command::Bath { config } => {
            let config = runner::load_config(&config)?;
            print!("{}", runner::bath_report(&config)?);
            Ok(0)
        }
        Command::Lowrank { config, ranks } => {
            let config = runner::load_config(&config)?;
            print!("{}", runner::lowrank_report(&config, &ranks)?);
            Ok(0)
        }
        Command::Diff { a, b } => {
            let file_a = read_density(&a)?;
            let file_b = read_density(&b)?;
            let report = diff_density(&file_a, &file_b)?;
            println!("l2 = {:.16e}", report.l2);
            println!("max_abs = {:.16e}", report.max_abs);
            let relative = if report.reference_l2 > 0.0 {
                report.l2 / report.reference_l2
            } else {
                f64::NAN
            };
            println!("relative_l2 = {relative:.16e}");
            Ok(0)
        }
        Command::Verify => {
            let (text, ok) = runner::verify_report();
            print!("{text}");
            Ok(if ok { 0 } else { 3 })
        }
    }
}

fn run_command(
    config_path: &Path,
    output: Option<&Path>,
    workers_flag: Option<usize>,
) -> Result<i32, RunError> {
    let config = runner::load_config(config_path)?;
    let env_workers = std::env::var("CALSIM_WORKERS").ok();
    let workers = resolve_workers(workers_flag, env_workers.as_deref(), config.execution.workers)
        .map_err(RunError::Setup)?;

    let started = std::time::Instant::now();
    let artifacts = runner::execute(&config, workers, output)?;
    for warning in &artifacts.warnings {
        eprintln!("warning: {warning}");
    }
    println!("run {}", artifacts.run_id);
    println!("  trajectories = {}", artifacts.trajectories);
    println!("  integral = {:.12}", artifacts.integral);
    println!("  min |det Z| = {:.3e}", artifacts.min_abs_det_z);
    println!("  density -> {}", artifacts.density_path.display());
    println!("  metadata -> {}", artifacts.meta_path.display());
    println!(
        "  wall time = {:.1}s on {workers} worker(s)",
        started.elapsed().as_secs_f64()
    );
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_ini(dir: &str) -> String {
        format!(
            r#"
[system]
dimension = 1
epsilon = 0.0625

[potential]
kind = harmonic

[initial]
kind = harmonic_ground

[bath]
modes = 0
omega_max = 0
omega_c = 0
beta = 0
xi = 0

[grid]
p_min = -1
p_max = 1
dp = 0.5
q_min = -1
q_max = 1
dq = 0.5
x_min = -1.5
x_max = 1.5
dx = 0.125

[time]
t_final = 0.1
dt = 0.01

[dyson]
nbar = 0
rank = 0

[output]
directory = {dir}
label = tiny
"#
        )
    }

    #[test]
    fn verify_succeeds() {
        assert_eq!(entry(["calsim", "verify"]), 0);
    }

    #[test]
    fn usage_errors_return_the_config_code() {
        assert_eq!(entry(["calsim", "no-such-command"]), 2);
        assert_eq!(entry(["calsim", "run"]), 2); // missing --config
        assert_eq!(entry(["calsim", "--help"]), 0);
    }

    #[test]
    fn missing_or_invalid_configs_are_config_errors() {
        assert_eq!(
            entry(["calsim", "run", "--config", "/no/such/file.ini"]),
            2
        );
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.ini");
        std::fs::write(&bad, "[system]\ndimension = 7\n").unwrap();
        assert_eq!(
            entry(["calsim", "run", "--config", bad.to_str().unwrap()]),
            2
        );
    }

    #[test]
    fn run_bath_lowrank_diff_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let ini_path = dir.path().join("tiny.ini");
        std::fs::write(&ini_path, tiny_ini(out.to_str().unwrap())).unwrap();
        let ini = ini_path.to_str().unwrap();

        assert_eq!(entry(["calsim", "run", "--config", ini, "--workers", "1"]), 0);
        let density = out.join("tiny.csv");
        assert!(density.exists());
        assert!(out.join("tiny.meta").exists());

        let density_str = density.to_str().unwrap();
        assert_eq!(entry(["calsim", "diff", density_str, density_str]), 0);
        assert_eq!(entry(["calsim", "bath", "--config", ini]), 0);

        // lowrank on a switched-off bath still reports (and exits 0)
        assert_eq!(
            entry(["calsim", "lowrank", "--config", ini, "--ranks", "1,2"]),
            0
        );

        // diff against a different grid is a runtime failure
        let other_ini = dir.path().join("other.ini");
        std::fs::write(
            &other_ini,
            tiny_ini(out.to_str().unwrap())
                .replace("label = tiny", "label = other")
                .replace("dx = 0.125", "dx = 0.25"),
        )
        .unwrap();
        assert_eq!(
            entry(["calsim", "run", "--config", other_ini.to_str().unwrap()]),
            0
        );
        let other = out.join("other.csv");
        assert_eq!(
            entry(["calsim", "diff", density_str, other.to_str().unwrap()]),
            3
        );
    }
}
