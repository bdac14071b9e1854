//! `corona-lab`: batch experiment driver for the coarse-geometry lab.
//!
//! Every subcommand reads one JSON config, runs the named experiment, and
//! writes `summary.json` plus CSV tables into the output directory. Exit
//! codes: 0 when all asserted checks pass, 1 on a check failure (with a
//! witness dump on stderr), 2 on usage or schema errors.

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "corona-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for summary.json and CSV tables.
    #[arg(long, default_value = "corona-out")]
    out: PathBuf,
    /// Worker threads (falls back to CORONA_LAB_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sampled space and validate its metric.
    BuildSpace(RunArgs),
    /// Build a cone, probe distances, and check the lower-bound inequality.
    ConeDistance(RunArgs),
    /// Measure scale constants and classify a function.
    ClassifyFunction(RunArgs),
    /// Run the smoothing pipeline and verify the variation bound.
    SmoothVerify(RunArgs),
    /// Verify the two coarse-map conditions for a named map.
    CheckMap(RunArgs),
    /// Sample a positive-determinant matrix path, optionally as a cone map.
    Homotopy(RunArgs),
    /// Witness the coarse equivalence of the sphere cone with the plane.
    EquivalenceRn(RunArgs),
    /// Verify the slice/product operator bounds on a sphere cone.
    TensorCheck(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::BuildSpace(a)
            | Command::ConeDistance(a)
            | Command::ClassifyFunction(a)
            | Command::SmoothVerify(a)
            | Command::CheckMap(a)
            | Command::Homotopy(a)
            | Command::EquivalenceRn(a)
            | Command::TensorCheck(a) => a,
        }
    }

    fn expected_kind(&self) -> &'static str {
        match self {
            Command::BuildSpace(_) => "build-space",
            Command::ConeDistance(_) => "cone-distance",
            Command::ClassifyFunction(_) => "classify-function",
            Command::SmoothVerify(_) => "smooth-verify",
            Command::CheckMap(_) => "check-map",
            Command::Homotopy(_) => "homotopy",
            Command::EquivalenceRn(_) => "equivalence-rn",
            Command::TensorCheck(_) => "tensor-check",
        }
    }
}

fn kind_name(kind: &config::ExperimentKind) -> &'static str {
    use config::ExperimentKind::*;
    match kind {
        BuildSpace { .. } => "build-space",
        ConeDistance { .. } => "cone-distance",
        ClassifyFunction { .. } => "classify-function",
        SmoothVerify { .. } => "smooth-verify",
        CheckMap { .. } => "check-map",
        Homotopy { .. } => "homotopy",
        EquivalenceRn { .. } => "equivalence-rn",
        TensorCheck { .. } => "tensor-check",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args();

    let threads = args.threads.or_else(|| {
        std::env::var("CORONA_LAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let (config, hash) = match config::load(&args.config) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("corona-lab: {e:#}");
            return ExitCode::from(2);
        }
    };
    let name = kind_name(&config.experiment);
    if name != cli.command.expected_kind() {
        eprintln!(
            "corona-lab: config declares experiment '{name}' but the subcommand is '{}'",
            cli.command.expected_kind()
        );
        return ExitCode::from(2);
    }

    match experiments::run(&config.experiment, config.seed) {
        Ok(report) => {
            if let Err(e) = output::write_report(&args.out, name, &hash, &report) {
                eprintln!("corona-lab: cannot write reports: {e:#}");
                return ExitCode::from(2);
            }
            if report.pass {
                println!("{name}: PASS (reports in {})", args.out.display());
                ExitCode::SUCCESS
            } else {
                println!("{name}: FAIL (reports in {})", args.out.display());
                for w in &report.witnesses {
                    eprintln!("witness: {w}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            // invalid parameter combinations surface as usage errors
            eprintln!("corona-lab: {e:#}");
            ExitCode::from(2)
        }
    }
}
