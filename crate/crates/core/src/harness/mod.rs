//! Experiment orchestration behind the `cl-lab` binary.
//!
//! Sweeps evaluate the closed forms on the exact scenario geometry and, when
//! runs are requested, the Monte Carlo simulator on realized ground truths.
//! Every grid point reuses the master seed, so neighbouring points share
//! random numbers and their differences are less noisy than their levels.

pub mod config;
pub mod output;
pub mod scenario;
pub mod validate;

pub use config::{ConfigFile, ExperimentKind, ExperimentSpec, PValues, SigmaValues};
pub use output::{OrderRow, RowRegime, SweepRow, SweepSummary};
pub use scenario::{Scenario, ScenarioKind};

use crate::ordering::{brute_force_optimal_order, Objective, OrderSearch, OrderingError};
use crate::sim::{monte_carlo, RunConfig, SimError};
use crate::task::TaskError;
use crate::theory::{expected_metrics, Regime, SystemParams, TheoryError};
use log::{info, warn};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    BadInput(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
}

impl HarnessError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io(format!("{}: {e}", path.display()))
    }

    /// Process exit status: 1 validation failure, 2 bad input, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 1,
            HarnessError::Io(_) => 3,
            _ => 2,
        }
    }
}

/// One row per `(sigma, p)` point, `sigma` outermost, in the order given by the spec.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>, HarnessError> {
    let geometry = spec.scenario.geometry(spec.tasks)?;
    let mut rows = Vec::with_capacity(spec.sigmas.len() * spec.ps.len());
    for &sigma in &spec.sigmas {
        for &p in &spec.ps {
            let mut row = SweepRow {
                p,
                sigma,
                scenario: spec.scenario.name().to_string(),
                regime: RowRegime::Skipped,
                theory_f: None,
                theory_g: None,
                sim_f: None,
                sim_f_se: None,
                sim_g: None,
                sim_g_se: None,
                runs: 0,
            };
            let params = match SystemParams::new(spec.n, p, sigma, spec.tasks) {
                Ok(params) => params,
                Err(TheoryError::NearSquare { n, p }) => {
                    warn!("skipping p = {p}: no closed form within 1 of n = {n}");
                    rows.push(row);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            row.regime = match params.regime() {
                Regime::Over => RowRegime::Over,
                Regime::Under => RowRegime::Under,
            };
            spec.scenario.check_dimension(spec.tasks, p)?;
            let theory = expected_metrics(&geometry, &params)?;
            row.theory_f = theory.forgetting;
            row.theory_g = Some(theory.generalization);
            if spec.runs > 0 {
                let ensemble = spec.scenario.build(spec.tasks, p, spec.n, sigma)?;
                let config = RunConfig::new(spec.runs, spec.master_seed).with_parallelism(spec.workers);
                let report = monte_carlo(&ensemble, &config)?;
                row.sim_f = report.forgetting;
                row.sim_f_se = report.forgetting.map(|_| report.stderr_forgetting);
                row.sim_g = Some(report.generalization);
                row.sim_g_se = Some(report.stderr_generalization);
                row.runs = report.run_count;
                info!(
                    "p = {p}, sigma = {sigma}: G theory {:.6} sim {:.6} +- {:.6}",
                    theory.generalization, report.generalization, report.stderr_generalization
                );
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Ranking rows of an exhaustive order search at every `p` (first `sigma` only).
pub fn run_order_search(spec: &ExperimentSpec) -> Result<Vec<OrderRow>, HarnessError> {
    let geometry = spec.scenario.geometry(spec.tasks)?;
    let sigma = spec.sigmas[0];
    let special = spec.scenario.special_task();
    let mut rows = Vec::new();
    for &p in &spec.ps {
        let params = match SystemParams::new(spec.n, p, sigma, spec.tasks) {
            Ok(params) => params,
            Err(TheoryError::NearSquare { n, p }) => {
                warn!("skipping p = {p}: no closed form within 1 of n = {n}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let search = brute_force_optimal_order(&geometry, &params, spec.objective)?;
        let i_star = match special {
            Some(task) => {
                let forgetting = if spec.objective == Objective::Forgetting {
                    search.clone()
                } else {
                    brute_force_optimal_order(&geometry, &params, Objective::Forgetting)?
                };
                special_position(&forgetting, task)
            }
            None => None,
        };
        if search.truncated {
            warn!("p = {p}: ranking truncated to {} entries", search.ranking.len());
        }
        for (k, entry) in search.ranking.iter().enumerate() {
            rows.push(OrderRow {
                p,
                rank: k + 1,
                order: entry.order().iter().map(|t| t + 1).collect(),
                forgetting: entry.score.forgetting,
                generalization: entry.score.generalization,
                delta_vs_best: search.delta_vs_best(entry),
                i_star,
            });
        }
    }
    Ok(rows)
}

/// Earliest 1-based position of `task` among the minimizers.
pub fn special_position(search: &OrderSearch, task: usize) -> Option<usize> {
    search
        .minimizers
        .iter()
        .filter_map(|m| m.order().iter().position(|&k| k == task))
        .min()
        .map(|k| k + 1)
}

pub enum ExperimentOutput {
    Sweep {
        rows: Vec<SweepRow>,
        summary: SweepSummary,
    },
    Orders(Vec<OrderRow>),
    Validation(validate::ValidationReport),
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput, HarnessError> {
    match spec.kind {
        ExperimentKind::Theory | ExperimentKind::Simulate | ExperimentKind::SweepP => {
            let rows = run_sweep(spec)?;
            let summary = SweepSummary::of(
                spec.kind.as_str(),
                spec.scenario.name(),
                &rows,
                spec.runs,
                spec.master_seed,
            );
            Ok(ExperimentOutput::Sweep { rows, summary })
        }
        ExperimentKind::OrderSearch => Ok(ExperimentOutput::Orders(run_order_search(spec)?)),
        ExperimentKind::Validate => Ok(ExperimentOutput::Validation(validate::run_suite(spec.master_seed))),
    }
}

/// Write an experiment's CSV to `out` (stdout when `None`) and its summary next to it.
pub fn write_output(output: &ExperimentOutput, out: Option<&Path>) -> Result<(), HarnessError> {
    let sink: Box<dyn std::io::Write> = match out {
        Some(path) => Box::new(std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?),
        None => Box::new(std::io::stdout().lock()),
    };
    match output {
        ExperimentOutput::Sweep { rows, summary } => {
            output::write_sweep_csv(rows, sink)?;
            let json = serde_json::to_string_pretty(summary).expect("summary serializes");
            match out {
                Some(path) => {
                    let summary_path = path.with_extension("summary.json");
                    std::fs::write(&summary_path, json + "\n").map_err(|e| HarnessError::io(&summary_path, e))?;
                }
                None => eprintln!("{json}"),
            }
        }
        ExperimentOutput::Orders(rows) => output::write_order_csv(rows, sink)?,
        ExperimentOutput::Validation(report) => {
            use std::io::Write;
            let mut sink = sink;
            for line in report.lines() {
                writeln!(sink, "{line}").map_err(|e| HarnessError::Io(e.to_string()))?;
            }
        }
    }
    Ok(())
}
