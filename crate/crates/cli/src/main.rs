use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use klspec_cli::{execute, Invocation, Kind};

#[derive(Parser, Debug)]
#[command(name = "klspec", version, about = "Run a klspec scenario and write CSV plus summary.json")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario file (JSON, schema klspec/scenario/v1)
    #[arg(long)]
    input: PathBuf,
    /// Output directory; created if missing
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative quadrature tolerance, overriding the scenario
    #[arg(long)]
    tol: Option<f64>,
    /// Reserved; echoed into the summary
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split off the atom at a target mass
    Decompose(RunArgs),
    /// Total mass of a measure, optionally up to given limits
    #[command(alias = "totalMass")]
    TotalMass(RunArgs),
    /// Field-strength constant from the equal-time sum rule
    Etcr(RunArgs),
    /// Read a measure against the singularity hypothesis
    Classify(RunArgs),
    /// Position-space kernel and smeared pairings
    #[command(alias = "kernelEval")]
    KernelEval(RunArgs),
    /// Scaling-degree sweep
    #[command(alias = "scalingSweep")]
    ScalingSweep(RunArgs),
    /// Charge from the asymptotic field functional
    #[command(alias = "gaussCharge")]
    GaussCharge(RunArgs),
    /// Vacuum variance of the scaled field average
    #[command(alias = "gaussVariance")]
    GaussVariance(RunArgs),
    /// Euler-Lagrange residual of the composite model
    #[command(alias = "compositeResidual")]
    CompositeResidual(RunArgs),
    /// Free-field check for a composite satisfying C = F(A)
    Prop61(RunArgs),
}

impl Command {
    fn split(self) -> (Kind, RunArgs) {
        match self {
            Command::Decompose(a) => (Kind::Decompose, a),
            Command::TotalMass(a) => (Kind::TotalMass, a),
            Command::Etcr(a) => (Kind::Etcr, a),
            Command::Classify(a) => (Kind::Classify, a),
            Command::KernelEval(a) => (Kind::KernelEval, a),
            Command::ScalingSweep(a) => (Kind::ScalingSweep, a),
            Command::GaussCharge(a) => (Kind::GaussCharge, a),
            Command::GaussVariance(a) => (Kind::GaussVariance, a),
            Command::CompositeResidual(a) => (Kind::CompositeResidual, a),
            Command::Prop61(a) => (Kind::Prop61, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (kind, args) = cli.command.split();
    let inv = Invocation {
        input: args.input,
        out: args.out,
        tol: args.tol,
        seed: args.seed,
    };
    match execute(kind, &inv) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("klspec {kind}: {} error: {e}", e.label());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
