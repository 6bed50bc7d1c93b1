use std::io::Write;
use std::path::Path;
use std::{fs, io};

use anyhow::{Context, Result};
use log::{info, warn};
use serde::Serialize;
use ttmc_core::{build_model, ModelKind, ModelSpec, SolveStatus};

use crate::run::{solve_model, Method};
use crate::SolverArgs;

/// One table row; unreached accuracy shows as `---` in the time, iteration and rank columns.
#[derive(Debug, Serialize)]
struct Row {
    model: String,
    d: usize,
    cap: usize,
    method: &'static str,
    time: String,
    iter: String,
    rank: String,
    status: String,
}

const MISSING: &str = "---";

/// Returns whether every run converged.
pub fn cmd_bench(
    kind: &str,
    ds: &[usize],
    caps: &[usize],
    methods: &[Method],
    base: &SolverArgs,
    out: Option<&Path>,
) -> Result<bool> {
    let kind: ModelKind = kind.parse()?;
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut table = csv::Writer::from_writer(sink);
    let mut all = true;
    for &d in ds {
        for &cap in caps {
            for &method in methods {
                let spec = ModelSpec::new(kind, d, cap);
                let args = SolverArgs { method, ..base.clone() };
                let row = match spec.validate().map_err(anyhow::Error::from).and_then(|_| {
                    let model = build_model(&spec)?;
                    solve_model(&model, &args)
                }) {
                    Ok((_, report)) => {
                        let ok = report.status == SolveStatus::Converged;
                        all &= ok;
                        let cell = |s: String| if ok { s } else { MISSING.to_string() };
                        Row {
                            model: kind.to_string(),
                            d,
                            cap,
                            method: method.name(),
                            time: cell(format!("{:.3}", report.wall_seconds)),
                            iter: cell(report.iterations.to_string()),
                            rank: cell(report.max_rank().to_string()),
                            status: serde_json::to_value(report.status)?.as_str().unwrap_or("unknown").to_string(),
                        }
                    }
                    Err(e) => {
                        warn!("{kind} d={d} cap={cap} {}: {e:#}", method.name());
                        all = false;
                        Row {
                            model: kind.to_string(),
                            d,
                            cap,
                            method: method.name(),
                            time: MISSING.into(),
                            iter: MISSING.into(),
                            rank: MISSING.into(),
                            status: "error".into(),
                        }
                    }
                };
                info!("{row:?}");
                table.serialize(&row)?;
                table.flush()?;
            }
        }
    }
    Ok(all)
}
