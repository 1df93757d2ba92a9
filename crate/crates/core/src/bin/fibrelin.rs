use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fibrelin::cli::{self, Mode, Tolerances};
use fibrelin::sim::{InputSignal, Trajectory, DEFAULT_DT, DEFAULT_T_END};
use fibrelin::system::{parse_system, SystemDef};
use fibrelin::{Error, Result};

#[derive(Parser)]
#[command(
    name = "fibrelin",
    version,
    about = "Normal forms, horizontal lifts and zero dynamics of SISO affine systems"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative degree, normal form, connection and zero dynamics.
    Analyze {
        file: PathBuf,
        /// Operating point, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
        /// Print the JSON report instead of text.
        #[arg(long)]
        json: bool,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one of the fields and write the trajectory as CSV.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value = "full")]
        mode: Mode,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        /// Constant or expression in `t`; `v` for the lifted and linear modes.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        input: String,
        #[arg(long, default_value_t = DEFAULT_T_END)]
        t_end: f64,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded property suites; JSON summary on stdout.
    Verify {
        file: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = cli::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Horizontally lift a base curve given as CSV.
    Lift {
        file: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<SystemDef> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_system(&text)
}

fn write_trajectory(traj: &Trajectory, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => traj.save_csv(p),
        None => traj.write_csv(std::io::stdout().lock()),
    }
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn run(args: Args) -> Result<u8> {
    let tol = Tolerances::from_env()?;
    match args.command {
        Command::Analyze { file, point, json: as_json, out } => {
            let report = cli::analyze(&load(&file)?, point.as_deref(), &tol)?;
            if let Some(p) = out {
                std::fs::write(p, json(&report) + "\n")?;
            }
            if as_json {
                emit(&format!("{}\n", json(&report)));
            } else {
                emit(&report.to_string());
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Simulate { file, mode, x0, input, t_end, dt, out } => {
            let signal = InputSignal::parse(&input)?;
            let (traj, summary) = cli::simulate(&load(&file)?, mode, &x0, &signal, t_end, dt, &tol)?;
            write_trajectory(&traj, out.as_deref())?;
            eprintln!("{summary}");
            Ok(0)
        }
        Command::Verify { file, trials, seed, tol: override_tol } => {
            let tol = match override_tol {
                Some(t) if t > 0.0 => tol.with_zero(t),
                Some(t) => return Err(Error::Precondition(format!("--tol must be positive, got {t}"))),
                None => tol,
            };
            let report = cli::verify(&load(&file)?, trials, seed, &tol)?;
            emit(&format!("{}\n", json(&report)));
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Lift { file, curve, x0, out } => {
            let base = Trajectory::load_csv(&curve)?;
            let traj = cli::lift(&load(&file)?, &base, &x0, &tol)?;
            write_trajectory(&traj, out.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{}", json(&cli::error_json(&e)));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
