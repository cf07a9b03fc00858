//! `pram` — anonymize categorical microdata, account for the privacy it
//! buys, and verify the accounting by brute force.
//!
//! Exit codes: 0 on success, 1 on validation failure (arguments, files,
//! infeasible parameters), 2 on verification failure (an oracle check or a
//! k-anonymity check that does not pass).

mod anonymize;
mod emit;
mod inputs;
mod oracle_cmd;
mod reconstruct_cmd;
mod reports;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\nformats: schema=1 matrix=1 report=1 manifest=1"
);

/// Validation failures exit with 1, verification failures with 2.
pub enum CliError {
    Validation(anyhow::Error),
    Verification(String),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(error: E) -> Self {
        CliError::Validation(error.into())
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "pram", version, long_version = LONG_VERSION)]
#[command(about = "Microdata anonymization by post-randomization, with exact privacy accounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Randomize a CSV table, resolving the retention probability from
    /// --rho, --k, --eps, or --k with --eps.
    Anonymize(AnonymizeArgs),
    /// Compute guarantees from transition matrices.
    Report {
        #[command(subcommand)]
        what: ReportCommand,
    },
    /// Solve retention probabilities from guarantee targets.
    Params {
        #[command(subcommand)]
        what: ParamsCommand,
    },
    /// Check properties of a released table.
    Check {
        #[command(subcommand)]
        what: CheckCommand,
    },
    /// Brute-force verification of the closed-form guarantees.
    Oracle {
        #[command(subcommand)]
        what: OracleCommand,
    },
    /// Cross-tabulate a table and reconstruct original aggregates.
    Reconstruct {
        #[command(subcommand)]
        what: ReconstructCommand,
    },
    /// Seeded experiments on synthetic data.
    Experiment {
        #[command(subcommand)]
        what: ExperimentCommand,
    },
}

#[derive(Args)]
pub struct AnonymizeArgs {
    /// Schema file (attribute:/value: lines).
    #[arg(long)]
    pub schema: PathBuf,
    /// Input CSV; header must match the schema attribute names in order.
    #[arg(long)]
    pub input: PathBuf,
    /// Where to write the released CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// Retention probability for every attribute.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Anonymity target; solved to a retention probability.
    #[arg(long)]
    pub k: Option<f64>,
    /// Privacy budget target; solved to a retention probability.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Master seed; drawn at random and reported when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Manifest path (default: the output path plus ".manifest").
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also write the key=value report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Anonymity level of a mechanism on a given record count.
    K {
        /// Transition matrix per attribute: a file or rrp(SIZE,RHO).
        #[arg(long, required = true)]
        matrix: Vec<String>,
        #[arg(long)]
        records: u64,
    },
    /// Differential-privacy budget of a mechanism.
    Eps {
        /// Transition matrix per attribute: a file or rrp(SIZE,RHO).
        #[arg(long, required = true)]
        matrix: Vec<String>,
    },
}

#[derive(Subcommand)]
enum ParamsCommand {
    /// Retention probability achieving an anonymity target.
    KToRho {
        #[arg(long)]
        k: f64,
        #[arg(long)]
        records: u64,
        /// Comma-separated attribute domain sizes, e.g. 2,5,10.
        #[arg(long, value_delimiter = ',')]
        domains: Vec<usize>,
    },
    /// Retention probability achieving a privacy budget.
    EpsToRho {
        #[arg(long)]
        eps: f64,
        #[arg(long, value_delimiter = ',')]
        domains: Vec<usize>,
    },
    /// Retention probability satisfying both targets at once.
    Combine {
        #[arg(long)]
        k: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        records: u64,
        #[arg(long, value_delimiter = ',')]
        domains: Vec<usize>,
    },
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Does every value tuple occur at least k times?
    KAnonymity {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: u64,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exact adversary posterior for one record pair under point-mass
    /// knowledge of a private table.
    Estimate {
        #[arg(long)]
        schema: PathBuf,
        /// The private table the adversary knows.
        #[arg(long)]
        private: PathBuf,
        /// The released table.
        #[arg(long)]
        released: PathBuf,
        /// Transition matrix per attribute: a file or rrp(SIZE,RHO).
        #[arg(long, required = true)]
        matrix: Vec<String>,
        /// Private record index r.
        #[arg(long)]
        source_record: usize,
        /// Released record index r'.
        #[arg(long)]
        target_record: usize,
        /// Brute-force record limit (overrides PRAM_BRUTE_FORCE_LIMIT).
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Search the worst-case estimation probability and compare its
    /// reciprocal with the closed-form k.
    VerifyK {
        #[arg(long, required = true)]
        matrix: Vec<String>,
        #[arg(long)]
        records: usize,
        /// Randomized non-worst-case configurations to try.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Exhaustive differential-privacy ratio check against the closed-form
    /// budget.
    VerifyEps {
        #[arg(long, required = true)]
        matrix: Vec<String>,
        #[arg(long)]
        records: usize,
    },
    /// Randomized audit of the 1/k bound over knowledge distributions,
    /// released tables, and record pairs.
    Audit {
        #[arg(long, required = true)]
        matrix: Vec<String>,
        #[arg(long)]
        records: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        limit: Option<usize>,
    },
}

#[derive(Subcommand)]
enum ReconstructCommand {
    /// Cross-tabulate selected attributes of a randomized CSV and invert
    /// the transition matrices to estimate the original counts.
    Crosstab {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated attribute names to tabulate.
        #[arg(long, value_delimiter = ',', required = true)]
        attrs: Vec<String>,
        /// Transition matrix per selected attribute, in --attrs order.
        #[arg(long, required = true)]
        matrix: Vec<String>,
        /// Zero out negative estimates (totals are not renormalized).
        #[arg(long)]
        clip: bool,
        /// Output CSV path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Sweep record count, attribute count, or the anonymity target on
    /// synthetic data and measure reconstruction error.
    Trend(reconstruct_cmd::TrendArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.kind() == ErrorKind::DisplayHelp || e.kind() == ErrorKind::DisplayVersion => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let _ = e.print();
            std::process::exit(1);
        }
    };

    let result = match cli.command {
        Command::Anonymize(args) => anonymize::run(args),
        Command::Report { what } => match what {
            ReportCommand::K { matrix, records } => reports::report_k(&matrix, records),
            ReportCommand::Eps { matrix } => reports::report_eps(&matrix),
        },
        Command::Params { what } => match what {
            ParamsCommand::KToRho {
                k,
                records,
                domains,
            } => reports::params_k_to_rho(k, records, &domains),
            ParamsCommand::EpsToRho { eps, domains } => reports::params_eps_to_rho(eps, &domains),
            ParamsCommand::Combine {
                k,
                eps,
                records,
                domains,
            } => reports::params_combine(k, eps, records, &domains),
        },
        Command::Check { what } => match what {
            CheckCommand::KAnonymity { schema, input, k } => {
                reports::check_k_anonymity(&schema, &input, k)
            }
        },
        Command::Oracle { what } => match what {
            OracleCommand::Estimate {
                schema,
                private,
                released,
                matrix,
                source_record,
                target_record,
                limit,
            } => oracle_cmd::estimate(
                &schema,
                &private,
                &released,
                &matrix,
                source_record,
                target_record,
                limit,
            ),
            OracleCommand::VerifyK {
                matrix,
                records,
                trials,
                seed,
                limit,
            } => oracle_cmd::verify_k(&matrix, records, trials, seed, limit),
            OracleCommand::VerifyEps { matrix, records } => {
                oracle_cmd::verify_eps(&matrix, records)
            }
            OracleCommand::Audit {
                matrix,
                records,
                trials,
                seed,
                limit,
            } => oracle_cmd::audit(&matrix, records, trials, seed, limit),
        },
        Command::Reconstruct { what } => match what {
            ReconstructCommand::Crosstab {
                schema,
                input,
                attrs,
                matrix,
                clip,
                out,
            } => reconstruct_cmd::crosstab(&schema, &input, &attrs, &matrix, clip, out.as_deref()),
        },
        Command::Experiment { what } => match what {
            ExperimentCommand::Trend(args) => reconstruct_cmd::trend(args),
        },
    };

    match result {
        Ok(()) => {}
        Err(CliError::Validation(e)) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
        Err(CliError::Verification(message)) => {
            eprintln!("verification failed: {message}");
            std::process::exit(2);
        }
    }
}
