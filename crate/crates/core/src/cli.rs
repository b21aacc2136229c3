//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiment::{points_csv, run_experiment, sampled_points, sweep, SweepAxis};
use crate::schwarz::progress_line;
use crate::verify::run_checks;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "deepddm", version, about = "Schwarz domain decomposition with PINN subdomain solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every seed of a configuration.
    Run {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the run.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment per grid or per epoch budget.
    Sweep {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        axis: AxisArgs,
        /// Output directory for the sweep.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write every sampled point of the first seed as CSV.
    DumpPoints {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Path of the CSV file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in derivative and partition-of-unity checks.
    Verify,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct AxisArgs {
    /// Comma-separated grids, e.g. `1x1,2x2,4x4`.
    #[arg(long, value_delimiter = ',', value_parser = parse_grid)]
    grids: Option<Vec<(usize, usize)>>,
    /// Comma-separated epochs per training, e.g. `2500,5000`.
    #[arg(long, value_delimiter = ',')]
    epochs: Option<Vec<usize>>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NXxNY, got `{s}`"))?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}"));
    Ok((n(a)?, n(b)?))
}

/// Failure of one stage of a command.
struct Failure {
    stage: &'static str,
    error: Error,
}

fn at<T>(stage: &'static str, r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|error| Failure { stage, error })
}

fn load(path: &Path) -> std::result::Result<RunConfig, Failure> {
    at("loading config", RunConfig::load(path))
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn execute(command: Command, out: &mut dyn Write) -> std::result::Result<bool, Failure> {
    let mut say = |line: String| {
        // Progress output is best effort.
        let _ = writeln!(out, "{line}");
    };
    match command {
        Command::Run { config, out: dir } => {
            let cfg = load(&config)?;
            let result = at(
                "running experiment",
                run_experiment(&cfg, Some(&dir), |seed, m| say(format!("seed {seed}  {}", progress_line(m)))),
            )?;
            if let Some(last) = result.median.last() {
                say(format!("median final mse {:e}", last.global_mse));
            }
            Ok(true)
        }
        Command::Sweep { config, axis, out: dir } => {
            let cfg = load(&config)?;
            let axis = match (axis.grids, axis.epochs) {
                (Some(g), _) => SweepAxis::Grids(g),
                (None, Some(e)) => SweepAxis::EpochsPerTraining(e),
                (None, None) => unreachable!("clap enforces one axis"),
            };
            let cells = at(
                "running sweep",
                sweep(&cfg, &axis, Some(&dir), |label, seed, m| {
                    say(format!("{label} seed {seed}  {}", progress_line(m)))
                }),
            )?;
            for c in &cells {
                if let Some(last) = c.result.median.last() {
                    say(format!("{}  median final mse {:e}", c.label, last.global_mse));
                }
            }
            Ok(true)
        }
        Command::DumpPoints { config, out: file } => {
            let cfg = load(&config)?;
            let rows = at("sampling points", sampled_points(&cfg))?;
            let text = at("formatting points", points_csv(&rows))?;
            at("writing points", write_out(&file, &text))?;
            say(format!("wrote {} points to {}", rows.len(), file.display()));
            Ok(true)
        }
        Command::Verify => {
            let checks = run_checks();
            for c in &checks {
                say(format!(
                    "{}  {}  ({})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                ));
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            let _ = writeln!(err, "error: some checks failed");
            EXIT_RUNTIME
        }
        Err(Failure { stage, error }) => {
            let _ = writeln!(err, "error while {stage}: {error}");
            match error {
                Error::Config { .. } => EXIT_CONFIG,
                Error::Io { .. } if stage == "loading config" => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            }
        }
    }
}
