//! Command line front end: load a problem configuration, run one of the
//! solver experiments, print a summary, and leave CSV + manifest files in the
//! output directory.
//!
//! Exit codes: 0 on success, 2 for configuration or validation problems,
//! 3 when the solver fails or a runtime check does not hold.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pxlap::config::ProblemConfig;
use pxlap::harness::{
    run_barrier_experiment, run_comparison, run_experiment, run_monotone_experiment, run_sweep,
    validate_config, validation_lines, Reference, RunOptions, SweepAxis,
};
use pxlap::step::SolverOptions;
use pxlap::Error;

#[derive(Parser)]
#[command(
    name = "pxlap",
    version,
    about = "Implicit Euler solver for singular parabolic p(x)-Laplacian problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Problem configuration (JSON).
    #[arg(short, long)]
    config: PathBuf,

    /// Directory the CSV files and manifest are written to.
    #[arg(short, long, default_value = "out")]
    out_dir: PathBuf,

    /// Regularization level n.
    #[arg(short, long, default_value_t = 1)]
    n: u32,

    /// Number of implicit Euler steps over the horizon.
    #[arg(short = 'M', long, default_value_t = 16)]
    time_steps: usize,

    /// Max-norm residual target for the per-step Newton solve.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,

    /// Newton iteration cap per step.
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
}

impl CommonArgs {
    fn run_options(&self, reference: Option<Reference>) -> RunOptions {
        RunOptions {
            n: self.n,
            num_steps: self.time_steps,
            solver: SolverOptions {
                tol: self.tol,
                max_iter: self.max_iter,
            },
            reference,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    /// Regularization level n.
    N,
    /// Number of time steps.
    Steps,
    /// Cells per axis.
    Cells,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> SweepAxis {
        match a {
            AxisArg::N => SweepAxis::Regularization,
            AxisArg::Steps => SweepAxis::TimeSteps,
            AxisArg::Cells => SweepAxis::Resolution,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ReferenceArg {
    /// exp(-pi^2 t) times the initial sine mode (1-d heat check).
    HeatSine,
}

impl From<ReferenceArg> for Reference {
    fn from(r: ReferenceArg) -> Reference {
        match r {
            ReferenceArg::HeatSine => Reference::HeatSine,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration against the structural hypotheses without solving.
    Validate {
        /// Problem configuration (JSON).
        #[arg(short, long)]
        config: PathBuf,
    },
    /// March the regularized problem; write snapshots, bound ledger, manifest.
    Run {
        #[command(flatten)]
        common: CommonArgs,

        /// Score the run against a closed-form reference.
        #[arg(long, value_enum)]
        reference: Option<ReferenceArg>,
    },
    /// Repeat the march along one discretization axis and track differences.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,

        /// Which parameter the sweep varies.
        #[arg(long, value_enum)]
        axis: AxisArg,

        /// Strictly increasing values for the axis, e.g. --values 1,2,4,8.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,

        /// Score each run against a closed-form reference.
        #[arg(long, value_enum)]
        reference: Option<ReferenceArg>,
    },
    /// Climb the monotone iteration ladder and audit its ordering.
    Monotone {
        #[command(flatten)]
        common: CommonArgs,

        /// Also build the two-pass supersolution and check it dominates.
        #[arg(long)]
        two_pass: bool,
    },
    /// March the problem and verify the constant-barrier bound per step.
    Barrier {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// March two configurations and check the first stays below the second.
    Compare {
        #[command(flatten)]
        common: CommonArgs,

        /// Configuration of the dominating problem (JSON).
        #[arg(long)]
        other: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = ProblemConfig::from_file(&config)?;
            let report = validate_config(&cfg)?;
            for line in validation_lines(&report) {
                println!("{line}");
            }
            if !report.acceptable() {
                return Err(Error::Validation(
                    "one or more structural inequalities do not hold".into(),
                ));
            }
            Ok(true)
        }
        Command::Run { common, reference } => {
            let cfg = ProblemConfig::from_file(&common.config)?;
            let opts = common.run_options(reference.map(Reference::from));
            let summary = run_experiment(&cfg, &common.out_dir, &opts)?;
            for line in summary.lines() {
                println!("{line}");
            }
            Ok(summary.checks_pass())
        }
        Command::Sweep {
            common,
            axis,
            values,
            reference,
        } => {
            let cfg = ProblemConfig::from_file(&common.config)?;
            let opts = common.run_options(reference.map(Reference::from));
            let summary = run_sweep(&cfg, &common.out_dir, axis.into(), &values, &opts)?;
            for line in summary.lines() {
                println!("{line}");
            }
            Ok(summary.all_ok)
        }
        Command::Monotone { common, two_pass } => {
            let cfg = ProblemConfig::from_file(&common.config)?;
            let opts = common.run_options(None);
            let summary = run_monotone_experiment(&cfg, &common.out_dir, &opts, two_pass)?;
            for line in summary.lines() {
                println!("{line}");
            }
            Ok(summary.checks_pass())
        }
        Command::Barrier { common } => {
            let cfg = ProblemConfig::from_file(&common.config)?;
            let opts = common.run_options(None);
            let summary = run_barrier_experiment(&cfg, &common.out_dir, &opts)?;
            for line in summary.lines() {
                println!("{line}");
            }
            Ok(summary.report.pass)
        }
        Command::Compare { common, other } => {
            let lower = ProblemConfig::from_file(&common.config)?;
            let upper = ProblemConfig::from_file(&other)?;
            let opts = common.run_options(None);
            let summary = run_comparison(&lower, &upper, &common.out_dir, &opts)?;
            for line in summary.lines() {
                println!("{line}");
            }
            Ok(summary.report.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("runtime checks failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
