use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use ttmc_core::amen::{amen_stationary, AmenConfig};
use ttmc_core::models::ValidationReport;
use ttmc_core::multigrid::{multigrid_solve, CoarseSolver, MGConfig};
use ttmc_core::numkit::dense_stationary;
use ttmc_core::tt::io;
use ttmc_core::models::DENSE_STATE_LIMIT;
use ttmc_core::{build_model, KroneckerModel, ModelKind, ModelSpec, SolveReport, TTTensor};

use crate::SolverArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Amen,
    Multigrid,
    MultigridAmen,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Amen => "amen",
            Method::Multigrid => "multigrid",
            Method::MultigridAmen => "multigrid-amen",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model kind (overflow, overflowsim, overflowpersim, kanbanalt2, directedmetab, divergingmetab).
    #[arg(long, conflicts_with = "spec_file")]
    pub model: Option<String>,
    /// Model spec JSON file.
    #[arg(long)]
    pub spec_file: Option<PathBuf>,
    /// Number of subsystems (overrides the spec file).
    #[arg(long)]
    pub d: Option<usize>,
    /// Capacity per subsystem (overrides the spec file).
    #[arg(long)]
    pub cap: Option<usize>,
}

impl ModelArgs {
    pub fn spec(&self) -> Result<ModelSpec> {
        let mut spec = match (&self.model, &self.spec_file) {
            (Some(kind), None) => {
                let kind: ModelKind = kind.parse()?;
                let (Some(d), Some(cap)) = (self.d, self.cap) else {
                    bail!("--model needs --d and --cap");
                };
                ModelSpec::new(kind, d, cap)
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ModelSpec::from_json(&text)?
            }
            _ => bail!("exactly one of --model or --spec-file is required"),
        };
        if let Some(d) = self.d {
            spec.d = d;
        }
        if let Some(cap) = self.cap {
            spec.cap = cap;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub method: Method,
    pub tol_orders: f64,
    pub max_iter: Option<usize>,
    pub seed: u64,
    pub budget_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub model: ModelSpec,
    pub config: RunConfig,
    pub report: SolveReport,
    /// SHA-256 of the TTF1 encoding of the solution.
    pub solution_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_max_error: Option<f64>,
}

pub fn checksum(x: &TTTensor) -> String {
    hex::encode(Sha256::digest(io::to_bytes(x)))
}

/// Runs the chosen method; the budget becomes a solver deadline.
pub fn solve_model(model: &KroneckerModel, args: &SolverArgs) -> Result<(TTTensor, SolveReport)> {
    ensure!(args.tol_orders > 0.0, "--tol-orders must be positive");
    ensure!(args.budget_seconds > 0.0, "--budget-seconds must be positive");
    let deadline = Instant::now().checked_add(Duration::from_secs_f64(args.budget_seconds));
    let out = match args.method {
        Method::Amen => {
            let mut cfg = AmenConfig { seed: args.seed, deadline, ..AmenConfig::default() };
            if let Some(n) = args.max_iter {
                cfg.max_sweeps = n;
            }
            amen_stationary(&model.to_operator()?, args.tol_orders, &cfg)?
        }
        Method::Multigrid | Method::MultigridAmen => {
            let coarse = if args.method == Method::Multigrid { CoarseSolver::Direct } else { CoarseSolver::Amen };
            let mut cfg = MGConfig { tol_orders: args.tol_orders, seed: args.seed, deadline, ..MGConfig::with_coarse(coarse) };
            if let Some(n) = args.max_iter {
                cfg.max_cycles = n;
            }
            multigrid_solve(model, &cfg)?
        }
    };
    Ok(out)
}

fn oracle_error(model: &KroneckerModel, x: &TTTensor) -> Result<f64> {
    ensure!(
        model.states() <= DENSE_STATE_LIMIT,
        "{} states exceed the dense oracle limit of {DENSE_STATE_LIMIT}",
        model.states()
    );
    let exact = dense_stationary(&model.assemble_dense()?)?;
    let approx = x.to_dense()?;
    Ok(exact.iter().zip(&approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn write_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Returns whether the solve converged.
pub fn cmd_solve(
    model_args: &ModelArgs,
    args: &SolverArgs,
    out: Option<&Path>,
    save_solution: Option<&Path>,
    check_oracle: bool,
) -> Result<bool> {
    let spec = model_args.spec()?;
    let model = build_model(&spec)?;
    if check_oracle {
        ensure!(model.states() <= DENSE_STATE_LIMIT, "--check-oracle needs at most {DENSE_STATE_LIMIT} states");
    }
    let (x, report) = solve_model(&model, args)?;
    let oracle_max_error = if check_oracle { Some(oracle_error(&model, &x)?) } else { None };
    if let Some(path) = save_solution {
        io::save(&x, path).with_context(|| format!("writing {}", path.display()))?;
    }
    let converged = report.status.is_converged();
    let record = RunRecord {
        model: spec,
        config: RunConfig {
            method: args.method,
            tol_orders: args.tol_orders,
            max_iter: args.max_iter,
            seed: args.seed,
            budget_seconds: args.budget_seconds,
        },
        report,
        solution_sha256: checksum(&x),
        oracle_max_error,
    };
    write_json(&record, out)?;
    Ok(converged)
}

#[derive(Debug, Serialize)]
struct ValidateRecord {
    model: ModelSpec,
    method: Method,
    generator: ValidationReport,
    converged: bool,
    oracle_max_error: f64,
    max_error: f64,
    /// Solution checksum is unchanged by a TTF1 save/load round trip.
    roundtrip_identical: bool,
    passed: bool,
}

pub fn cmd_validate(model_args: &ModelArgs, args: &SolverArgs, max_error: f64, out: Option<&Path>) -> Result<bool> {
    let spec = model_args.spec()?;
    let model = build_model(&spec)?;
    ensure!(
        model.states() <= DENSE_STATE_LIMIT,
        "{} states exceed the validation limit of {DENSE_STATE_LIMIT}",
        model.states()
    );
    let generator = model.validate()?;
    let (x, report) = solve_model(&model, args)?;
    let oracle = oracle_error(&model, &x).unwrap_or(f64::INFINITY);
    let back = io::from_bytes(&io::to_bytes(&x))?;
    let roundtrip_identical = checksum(&back) == checksum(&x);
    let converged = report.status.is_converged();
    let passed = generator.passed() && converged && oracle <= max_error && roundtrip_identical;
    let record = ValidateRecord {
        model: spec,
        method: args.method,
        generator,
        converged,
        oracle_max_error: oracle,
        max_error,
        roundtrip_identical,
        passed,
    };
    write_json(&record, out)?;
    Ok(passed)
}
