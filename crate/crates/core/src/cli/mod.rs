//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed check or aborted run, 2 bad input,
//! 10 blow-up detected.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::scenario::RadiusSpec;

pub use commands::{load_trajectory, output_root, scan, scan_lambdas, RunSummary, ScanRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BLOWUP: i32 = 10;

/// Environment variable that overrides the output root directory.
pub const OUT_ENV: &str = "VIRIALLAB_OUT";

#[derive(Parser, Debug)]
#[command(name = "viriallab", version, about = "Localized virial experiments for the focusing quintic NLS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Certify the cutoff profile and its derived constants.
    WeightCheck {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// JSON profile (s1, tail_coeffs, z2, z3) to check instead of the built-in one.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump s, ζ, ζ', ζ'', ζ''' samples on [-3, 3] as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Run a scenario and write series, snapshots and a summary.
    Simulate {
        scenario: PathBuf,
        /// Output directory; defaults to $VIRIALLAB_OUT/<name> or runs/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Virial identity and inequality report over a simulated trajectory.
    VirialReport {
        dir: PathBuf,
        /// Localisation radius, a positive number or "auto".
        #[arg(long = "R", visible_alias = "r", allow_hyphen_values = true)]
        r: Option<String>,
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
    },
    /// Run scaled solitons λQ over a λ range and tabulate the verdicts.
    BlowupScan {
        #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
        lambda_min: f64,
        #[arg(long, default_value_t = 1.2, allow_hyphen_values = true)]
        lambda_max: f64,
        #[arg(long, default_value_t = 7)]
        steps: usize,
        /// Base scenario with scaled_soliton initial data; defaults to the free line.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a standing-wave profile.
    GroundState {
        #[arg(long, value_enum, default_value_t = GsModel::Free)]
        model: GsModel,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 3)]
        edges: usize,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        omega: f64,
        #[arg(long, default_value_t = 1e-10, allow_hyphen_values = true)]
        tol: f64,
        /// Half width of the line, or edge length on graphs.
        #[arg(long, default_value_t = 16.0)]
        length: f64,
        /// Line nodes, or nodes per edge on graphs.
        #[arg(long, default_value_t = 2048)]
        n: usize,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GsModel {
    Free,
    InversePower,
    Delta,
    GraphKirchhoff,
    GraphDelta,
    GraphDeltaPrime,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence(_) | Error::Solve(_) | Error::NonFinite(_) => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::WeightCheck { samples, profile, out, dump } => {
            commands::weight_check(samples, profile.as_deref(), out.as_deref(), dump.as_deref())
        }
        Command::Simulate { scenario, out } => commands::simulate(&scenario, out.as_deref()),
        Command::VirialReport { dir, r, tol } => match r.map(|s| s.parse::<RadiusSpec>()).transpose() {
            Ok(r) => commands::virial_report(&dir, r, tol),
            Err(e) => Err(e),
        },
        Command::BlowupScan { lambda_min, lambda_max, steps, scenario, out } => {
            commands::blowup_scan(lambda_min, lambda_max, steps, scenario.as_deref(), out.as_deref())
        }
        Command::GroundState { model, gamma, mu, edges, omega, tol, length, n, max_iter, out } => {
            commands::ground_state(commands::GsArgs { model, gamma, mu, edges, omega, tol, length, n, max_iter }, out.as_deref())
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
