//! Experiment runner for pathwise stochastic-calculus diagnostics.
//!
//! Each subcommand consumes one or more scenario JSON documents and writes
//! `<out>/<scenario_id>/{trace.csv, report.json}`. Exit codes: 0 when every
//! scenario passes, 2 when a verdict stalled or failed, 1 on input errors.

mod runner;

use clap::{Args, Parser, Subcommand};
use runner::Subcommand as Cmd;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "follmer-kit",
    version,
    about = "Pathwise Ito calculus diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON document(s); each runs independently.
    #[arg(long, required = true, num_args = 1..)]
    config: Vec<PathBuf>,

    /// Output directory; each scenario writes to `<out>/<scenario_id>/`.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Override the scenario's partition-level cap.
    #[arg(long)]
    nmax: Option<usize>,

    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Quadratic covariation traces, limit estimates, and jump checks.
    Qv(RunArgs),
    /// 2-variation sup over levels with a growth flag.
    TwoVar(RunArgs),
    /// Stieltjes integral, dominated bound, and IF-vs-Stieltjes residuals.
    Integrate(RunArgs),
    /// Term-by-term Ito formula verification.
    ItoCheck(RunArgs),
    /// Integration-by-parts identity residuals.
    IbpCheck(RunArgs),
    /// Oscillation control, jump exhaustion, Condition (C), left approximation.
    PartitionDiag(RunArgs),
    /// Weighted discrete sums against the Stieltjes integral of the QV path.
    Lemma2gCheck(RunArgs),
}

fn main() {
    // argument errors are input errors (exit 1); clap's default would exit 2,
    // which is reserved for stalled/failed verdicts
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            std::process::exit(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            std::process::exit(0);
        }
    };
    let (cmd, args) = match &cli.command {
        Command::Qv(a) => (Cmd::Qv, a),
        Command::TwoVar(a) => (Cmd::TwoVar, a),
        Command::Integrate(a) => (Cmd::Integrate, a),
        Command::ItoCheck(a) => (Cmd::ItoCheck, a),
        Command::IbpCheck(a) => (Cmd::IbpCheck, a),
        Command::PartitionDiag(a) => (Cmd::PartitionDiag, a),
        Command::Lemma2gCheck(a) => (Cmd::Lemma2gCheck, a),
    };
    let code = runner::run_batch(cmd, &args.config, &args.out, args.nmax, args.seed);
    std::process::exit(code);
}
