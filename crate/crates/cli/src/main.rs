//! `cbflow`: build CB surfaces, run flows and loops, verify recorded series,
//! sweep the cylinder radius.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use cbflow::oracle::Oracle;
use clap::{Args, Parser, Subcommand};

/// Bad input: flags, configuration or files.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailed,
    SolverFailed,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::CheckFailed => 1,
            Outcome::SolverFailed => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "cbflow", version, about = "Ricci flow of cylinder-with-bulb surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory. Defaults to a fresh run-<secs>-<scenario> directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct CbArgs {
    /// Cylinder radius r_c.
    #[arg(long)]
    pub rc: Option<f64>,
    /// Cylinder length l_c (default 1/(8 r_c)).
    #[arg(long)]
    pub lc: Option<f64>,
    /// Grid spacing in s.
    #[arg(long)]
    pub h: Option<f64>,
    /// Frame spacing in t.
    #[arg(long)]
    pub cadence: Option<f64>,
    /// Seed for sampled checks.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a CB surface and check its properties.
    Build {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cb: CbArgs,
    },
    /// Evolve a CB surface or run a refinement study against a closed form.
    Flow {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cb: CbArgs,
        /// Closed-form flow to compare against (cigar or sphere).
        #[arg(long)]
        oracle: Option<Oracle>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        /// Number of grid halvings in an oracle study.
        #[arg(long, default_value_t = 1)]
        refine: usize,
        /// Initial profile file instead of a fresh CB surface.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Smallest accepted observed order in an oracle study.
        #[arg(long, default_value_t = 1.8)]
        min_order: f64,
        /// Largest accepted max-norm error at the coarsest level.
        #[arg(long, default_value_t = 1e-3)]
        max_error: f64,
    },
    /// Run the flow with a curve-shortening loop and check the area law.
    Csf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cb: CbArgs,
        /// Use the round sphere instead of a CB surface.
        #[arg(long)]
        sphere: bool,
        #[arg(long, default_value_t = 2.5)]
        t_end: f64,
    },
    /// Evaluate checks on a recorded series.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cb: CbArgs,
        /// Checkpoint written by `csf`, `flow` or `report --checkpoint`.
        #[arg(long)]
        series: PathBuf,
        /// Comma-separated subset of checks.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
    },
    /// Run the full scenario for several radii.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated radii.
        #[arg(long = "rc", value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        /// Shared cylinder length (default 1/(8 min r_c)).
        #[arg(long)]
        lc: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Parallel runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the full scenario for one radius and write every report.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cb: CbArgs,
        #[arg(long)]
        horizon: Option<f64>,
        /// Also write the full series as a checkpoint.
        #[arg(long)]
        checkpoint: bool,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use cbflow::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() || cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Hypotheses(_) | E::ConditionNeverMet(_) => 1,
                E::NewtonDivergence { .. }
                | E::Overflow(_)
                | E::StepUnderflow { .. }
                | E::Noose(_)
                | E::RootFinder(_)
                | E::NonFinite(_) => 3,
                _ => 2,
            };
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build { common, cb } => commands::build(&common, &cb),
        Command::Flow { common, cb, oracle, t_end, refine, profile, min_order, max_error } => match oracle {
            Some(o) => commands::oracle_study(&common, &cb, o, t_end, refine, min_order, max_error),
            None => commands::flow(&common, &cb, t_end, profile.as_deref()),
        },
        Command::Csf { common, cb, sphere, t_end } => commands::csf(&common, &cb, sphere, t_end),
        Command::Verify { common, cb, series, checks } => commands::verify(&common, &cb, &series, checks),
        Command::Sweep { common, radii, lc, h, horizon, jobs } => {
            commands::sweep(&common, &radii, lc, h, horizon, jobs)
        }
        Command::Report { common, cb, horizon, checkpoint } => commands::report(&common, &cb, horizon, checkpoint),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
