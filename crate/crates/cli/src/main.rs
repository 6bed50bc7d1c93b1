use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use env_logger::Env;

mod bench;
mod run;

use run::{Method, ModelArgs};

#[derive(Parser, Debug)]
#[command(name = "ttmc", version, about = "Tensor-train steady-state solvers for Kronecker-structured Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one model and write a JSON report.
    Solve(SolveArgs),
    /// Sweep over subsystem counts or capacities and write a CSV table.
    Bench(BenchArgs),
    /// Check the generator and compare a solver against the dense oracle.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "multigrid-amen")]
    pub method: Method,
    /// Cycle (multigrid) or sweep (AMEn) limit.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Stop once the residual is this many orders below that of the uniform distribution.
    #[arg(long, default_value_t = 2.0)]
    pub tol_orders: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Wall-clock budget per solve.
    #[arg(long, default_value_t = 3600.0)]
    pub budget_seconds: f64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the solution tensor in TTF1 format.
    #[arg(long)]
    save_solution: Option<PathBuf>,
    /// Compare with the dense stationary vector (at most 10^4 states).
    #[arg(long)]
    check_oracle: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Model kind.
    #[arg(long)]
    model: String,
    /// Subsystem counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    d: Vec<usize>,
    /// Capacities, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    cap: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "amen,multigrid,multigrid-amen")]
    methods: Vec<Method>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    tol_orders: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3600.0)]
    budget_seconds: f64,
    /// CSV path; the table goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Largest accepted max-norm error against the oracle.
    #[arg(long, default_value_t = 1e-4)]
    max_error: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(Env::new().filter_or("TTMC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => run::cmd_solve(&a.model, &a.solver, a.out.as_deref(), a.save_solution.as_deref(), a.check_oracle),
        Command::Bench(a) => {
            let solver = SolverArgs {
                method: Method::Amen,
                max_iter: a.max_iter,
                tol_orders: a.tol_orders,
                seed: a.seed,
                budget_seconds: a.budget_seconds,
            };
            bench::cmd_bench(&a.model, &a.d, &a.cap, &a.methods, &solver, a.out.as_deref())
        }
        Command::Validate(a) => run::cmd_validate(&a.model, &a.solver, a.max_error, a.out.as_deref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
