//! The five workflows behind the subcommands.
//!
//! Each returns the exit [`Status`] plus human-readable summary lines and
//! writes its artefacts under the configured output directories.

use std::fs;
use std::path::Path;
use std::time::Instant;

use disclosure_core::equilibrium::{lloyd_solve, stationarity_residual};
use disclosure_core::kernels::unit_grid;
use disclosure_core::montecarlo::{simulate, SimulationReport};
use disclosure_core::{Equilibrium, KernelValues};
use serde::{Deserialize, Serialize};

use crate::checks::{run_checks, CheckOptions, CheckSuite};
use crate::config::{GameSection, RunConfig};
use crate::error::{CliError, Status};
use crate::output::{sig12, write_json, Table, SCHEMA_VERSION};

/// Standard errors allowed between the simulated and analytic planner loss.
pub const SIMULATION_GATE: f64 = 3.0;

/// Preferences with a loss column in `curves.csv`.
pub const CURVE_THETAS: [f64; 3] = [0.25, 0.5, 0.75];

pub const CURVE_POINTS: usize = 1001;

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub lines: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: String,
    pub command: String,
    pub config: RunConfig,
    pub equilibrium: Equilibrium,
    pub stationarity_residual: f64,
    pub wall_time_seconds: f64,
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let resolved = cfg.resolve()?;
    let start = Instant::now();
    let eq = lloyd_solve(&resolved.spec, &resolved.solver)?;
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let stationarity = stationarity_residual(&resolved.spec, &eq.weights);
    let status = if eq.converged {
        Status::Success
    } else {
        Status::NonConvergence
    };
    let path = cfg.output.report_path("solve.json");
    let mut lines = equilibrium_lines(&eq);
    lines.push(format!("stationarity residual {stationarity:.3e}"));
    lines.push(format!("wall time {wall_time_seconds:.3} s"));
    lines.push(format!("report written to {}", path.display()));
    let report = SolveReport {
        schema: SCHEMA_VERSION.into(),
        command: "solve".into(),
        config: cfg.clone(),
        equilibrium: eq,
        stationarity_residual: stationarity,
        wall_time_seconds,
    };
    write_json(&path, &report, cfg.output.pretty)?;
    Ok(Outcome { status, lines })
}

fn equilibrium_lines(eq: &Equilibrium) -> Vec<String> {
    vec![
        format!("weights     {}", join(&eq.weights)),
        format!("thresholds  {}", join(&eq.thresholds)),
        format!("planner loss {:.10}", eq.planner_loss),
        format!(
            "residuals   c1 {:.3e}  c2 {:.3e}  ({} iterations, {})",
            eq.residual_c1,
            eq.residual_c2,
            eq.iterations,
            if eq.converged {
                "converged"
            } else {
                "NOT converged"
            }
        ),
    ]
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.8}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn curves(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.resolve()?.spec;
    let mut header = vec!["w".to_string(), "H".into(), "G".into()];
    header.extend(CURVE_THETAS.iter().map(|t| format!("L_{t}")));
    let mut table = Table::new(header);
    let mut argmin = [(f64::INFINITY, 0.0); CURVE_THETAS.len()];
    for w in unit_grid(CURVE_POINTS) {
        let k = KernelValues::at(&spec, w);
        let mut row = vec![sig12(w), sig12(k.h), sig12(k.g)];
        for (j, &t) in CURVE_THETAS.iter().enumerate() {
            let l = k.loss(t);
            if l < argmin[j].0 {
                argmin[j] = (l, w);
            }
            row.push(sig12(l));
        }
        table.push(row);
    }
    let path = cfg.output.plot_path("curves.csv");
    table.write(&path)?;
    let mut lines: Vec<String> = CURVE_THETAS
        .iter()
        .zip(&argmin)
        .map(|(t, (l, w))| format!("θ = {t}: min L = {l:.8} at w = {w}"))
        .collect();
    lines.push(format!(
        "{} rows written to {}",
        table.len(),
        path.display()
    ));
    Ok(Outcome {
        status: Status::Success,
        lines,
    })
}

#[derive(Debug, Serialize)]
pub struct SimulateReport<'a> {
    pub schema: &'a str,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub weights: &'a [f64],
    pub thresholds: &'a [f64],
    pub planner_loss: f64,
    pub simulation: &'a SimulationReport,
    pub gate: Gate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gate {
    pub z_score: f64,
    pub limit: f64,
    pub passed: bool,
}

/// Reads the equilibrium from a `solve.json` written for the same game.
pub fn load_equilibrium(path: &Path, game: &GameSection) -> Result<Equilibrium, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let report: SolveReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if &report.config.game != game {
        return Err(CliError::Config(format!(
            "{} was solved for a different game",
            path.display()
        )));
    }
    Ok(report.equilibrium)
}

pub fn simulate_cmd(cfg: &RunConfig, equilibrium: Option<&Path>) -> Result<Outcome, CliError> {
    let resolved = cfg.resolve()?;
    let spec = resolved.spec;
    let eq = match equilibrium {
        Some(path) => load_equilibrium(path, &cfg.game)?,
        None => lloyd_solve(&spec, &resolved.solver)?,
    };
    if !eq.converged {
        return Ok(Outcome {
            status: Status::NonConvergence,
            lines: equilibrium_lines(&eq),
        });
    }
    let wqd = eq.wqd()?;
    let mppd = eq.mppd()?;
    let sim = simulate(
        &spec,
        &wqd,
        &mppd,
        cfg.simulation.rounds,
        cfg.simulation.seed,
    )?;
    let z = sim.empirical_loss.z_score(eq.planner_loss);
    let gate = Gate {
        z_score: z,
        limit: SIMULATION_GATE,
        passed: z.abs() <= SIMULATION_GATE,
    };
    let path = cfg.output.report_path("simulate.json");
    let report = SimulateReport {
        schema: SCHEMA_VERSION,
        command: "simulate",
        config: cfg,
        weights: &eq.weights,
        thresholds: &eq.thresholds,
        planner_loss: eq.planner_loss,
        simulation: &sim,
        gate,
    };
    write_json(&path, &report, cfg.output.pretty)?;

    let mut lines = vec![
        format!(
            "empirical loss {:.8} ± {:.2e} over {} rounds",
            sim.empirical_loss.mean, sim.empirical_loss.std_err, sim.n_rounds
        ),
        format!("analytic planner loss {:.8}, z = {z:.3}", eq.planner_loss),
    ];
    for s in &sim.undisclosed_conditional_means {
        lines.push(format!(
            "message {} source {} forwarded: unseen mean {:.5} (prior {}, z = {:.2}){}",
            s.message,
            s.disclosed.index(),
            s.estimate.mean,
            s.prior_mean,
            s.estimate.z_score(s.prior_mean),
            if s.flagged { " [few samples]" } else { "" }
        ));
    }
    lines.push(format!("report written to {}", path.display()));
    Ok(Outcome {
        status: if gate.passed {
            Status::Success
        } else {
            Status::GateFailure
        },
        lines,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub planner_loss: f64,
    pub residual_c1: f64,
    pub residual_c2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

pub fn sweep_rows(cfg: &RunConfig, n_list: &[usize]) -> Result<Vec<SweepRow>, CliError> {
    let resolved = cfg.resolve()?;
    n_list
        .iter()
        .map(|&n| {
            let spec = resolved.spec.with_n(n).map_err(|_| {
                CliError::Config(format!("sweep: message counts must be >= 1 (got {n})"))
            })?;
            Ok(match lloyd_solve(&spec, &resolved.solver) {
                Ok(eq) => SweepRow {
                    n,
                    planner_loss: eq.planner_loss,
                    residual_c1: eq.residual_c1,
                    residual_c2: eq.residual_c2,
                    iterations: eq.iterations,
                    converged: eq.converged,
                    error: None,
                },
                Err(e) => SweepRow {
                    n,
                    planner_loss: f64::NAN,
                    residual_c1: f64::NAN,
                    residual_c2: f64::NAN,
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                },
            })
        })
        .collect()
}

/// Whether the loss never increases with the number of messages.
pub fn sweep_is_monotone(rows: &[SweepRow]) -> bool {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.n);
    sorted
        .windows(2)
        .all(|p| p[0].n == p[1].n || p[1].planner_loss <= p[0].planner_loss)
}

pub fn sweep(cfg: &RunConfig, n_list: &[usize]) -> Result<Outcome, CliError> {
    let rows = sweep_rows(cfg, n_list)?;
    let mut table = Table::new([
        "n",
        "planner_loss",
        "residual_c1",
        "residual_c2",
        "iterations",
        "converged",
        "error",
    ]);
    let mut lines = Vec::new();
    for r in &rows {
        table.push(vec![
            r.n.to_string(),
            sig12(r.planner_loss),
            sig12(r.residual_c1),
            sig12(r.residual_c2),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
        lines.push(match &r.error {
            None => format!(
                "n = {}: planner loss {:.10}{}",
                r.n,
                r.planner_loss,
                if r.converged { "" } else { " (NOT converged)" }
            ),
            Some(e) => format!("n = {}: failed: {e}", r.n),
        });
    }
    let path = cfg.output.plot_path("sweep.csv");
    table.write(&path)?;
    lines.push(format!("table written to {}", path.display()));

    let status = if rows.iter().any(|r| !r.converged) {
        Status::NonConvergence
    } else if !sweep_is_monotone(&rows) {
        lines.push("planner loss increased with the number of messages".into());
        Status::GateFailure
    } else {
        Status::Success
    };
    Ok(Outcome { status, lines })
}

#[derive(Debug, Serialize)]
struct CheckReport<'a> {
    schema: &'a str,
    command: &'a str,
    config: &'a RunConfig,
    passed: bool,
    #[serde(flatten)]
    suite: &'a CheckSuite,
}

pub fn check(cfg: &RunConfig, options: CheckOptions) -> Result<Outcome, CliError> {
    let resolved = cfg.resolve()?;
    let suite = run_checks(&resolved.spec, &resolved.solver, options);
    let passed = suite.passed();
    let path = cfg.output.report_path("check.json");
    write_json(
        &path,
        &CheckReport {
            schema: SCHEMA_VERSION,
            command: "check",
            config: cfg,
            passed,
            suite: &suite,
        },
        cfg.output.pretty,
    )?;
    let mut lines: Vec<String> = suite
        .warnings
        .iter()
        .map(|w| format!("warning: {w}"))
        .collect();
    for c in &suite.checks {
        let verdict = match (c.skipped, c.passed) {
            (true, _) => "SKIP",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        lines.push(if c.skipped {
            format!("{verdict} {}: {}", c.name, c.detail)
        } else {
            format!(
                "{verdict} {}: observed {:.3e}, expected {} ({})",
                c.name, c.observed, c.expected, c.detail
            )
        });
    }
    lines.push(format!("report written to {}", path.display()));
    Ok(Outcome {
        status: if passed {
            Status::Success
        } else {
            Status::GateFailure
        },
        lines,
    })
}
