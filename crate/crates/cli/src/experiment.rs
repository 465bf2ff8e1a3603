//! The sweep over budget fractions, forecast regimes and policies.

use std::fs;
use std::time::Duration;

use log::{info, warn};
use rayon::prelude::*;

use ration_core::afg::{self, ThresholdPlan};
use ration_core::forecast::{ingest_csv, synth_household, Fidelity, ForecastSpec, Granularity};
use ration_core::milp::{
    build_dfm, build_obm, decode_actuation, default_recharge, plan_from_solution, solve_dfm_grid, solve_external,
    solve_knapsack_bb, MilpConstants, MilpError,
};
use ration_core::model::{compute_budget, daily_average, Budget, DemandSeries, LoadSet, Tariff};
use ration_core::sim::{simulate_baseline, simulate_schedule, simulate_thresholds, SimResult};

use crate::config::{BackendKind, DataSource, ExperimentConfig, Policy, Regime};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    /// Setpoints could not be computed; the reason is kept for the log.
    Unsolved(String),
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Unsolved(_) => "unsolved",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Setpoints {
    Thresholds(ThresholdPlan),
    Schedule(Vec<Vec<bool>>),
    None,
}

/// One (fraction, regime, policy) outcome.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub fraction: f64,
    pub regime: Regime,
    pub policy: Policy,
    pub status: CellStatus,
    pub sim: Option<SimResult>,
    /// `(psf - baseline psf) * 100`.
    pub improvement_pp: Option<f64>,
    /// Objective reported by the setpoint solver, if any.
    pub solver_objective: Option<f64>,
    pub backend: &'static str,
    pub setpoints: Setpoints,
}

#[derive(Debug, Clone)]
pub struct Results {
    pub loads: LoadSet,
    pub truth: DemandSeries,
    pub fractions: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub policies: Vec<Policy>,
    /// Baseline run per fraction.
    pub baseline: Vec<SimResult>,
    /// Fraction-major, then regime, then policy, in config order.
    pub cells: Vec<CellResult>,
    pub write_traces: bool,
}

impl Results {
    pub fn cell(&self, fraction: usize, regime: Regime, policy: Policy) -> Option<&CellResult> {
        let f = self.fractions[fraction];
        self.cells
            .iter()
            .find(|c| c.fraction.to_bits() == f.to_bits() && c.regime == regime && c.policy == policy)
    }
}

/// True demand over the configured horizon.
pub fn load_truth(cfg: &ExperimentConfig) -> Result<DemandSeries, CliError> {
    let loads = cfg.load_set()?;
    let data = match &cfg.data_source {
        DataSource::Synthetic { seed, days } => {
            synth_household(*seed, &loads, cfg.grid(*days)?, &cfg.profiles()).map_err(|e| CliError::Data(e.to_string()))?
        }
        DataSource::Csv { path, data_days } => {
            let days = match data_days {
                Some(d) => *d,
                None => {
                    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                    let rows = text.lines().skip(1).filter(|l| !l.trim().is_empty()).count();
                    let spd = cfg.grid(1)?.steps_per_day();
                    if rows % spd != 0 {
                        return Err(CliError::Data(format!(
                            "{}: {rows} rows is not a whole number of {spd}-step days",
                            path.display()
                        )));
                    }
                    rows / spd
                }
            };
            ingest_csv(path, &loads, cfg.grid(days)?).map_err(|e| CliError::Data(e.to_string()))?
        }
    };
    data.window(cfg.day_offset, cfg.horizon_days).map_err(|e| CliError::Data(e.to_string()))
}

fn spec_of(regime: Regime, seed: u64) -> ForecastSpec {
    let fidelity = if regime.is_perfect() { Fidelity::Perfect } else { Fidelity::ImperfectShuffled(seed) };
    let granularity = if regime.is_detailed() { Granularity::Detailed } else { Granularity::Limited };
    ForecastSpec::new(fidelity, granularity)
}

/// Everything a cell needs besides its own coordinates.
struct Shared<'a> {
    cfg: &'a ExperimentConfig,
    loads: &'a LoadSet,
    tariff: Tariff,
    truth: &'a DemandSeries,
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Results, CliError> {
    cfg.validate()?;
    let loads = cfg.load_set()?;
    let tariff = cfg.tariff()?;
    let truth = load_truth(cfg)?;
    let shared = Shared { cfg, loads: &loads, tariff, truth: &truth };

    let mut budgets = Vec::new();
    let mut baseline = Vec::new();
    for &f in &cfg.budget_fractions {
        let b = compute_budget(&truth, &tariff, f).map_err(run_err)?;
        baseline.push(simulate_baseline(&truth, &loads, &tariff, &b).map_err(run_err)?);
        budgets.push(b);
    }

    let mut jobs = Vec::new();
    for fi in 0..cfg.budget_fractions.len() {
        for &regime in &cfg.forecast_regimes {
            for &policy in &cfg.policies {
                jobs.push((fi, regime, policy));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.max_parallel.unwrap_or(0))
        .build()
        .map_err(run_err)?;
    let cells: Result<Vec<CellResult>, CliError> = pool.install(|| {
        jobs.par_iter()
            .map(|&(fi, regime, policy)| {
                let mut cell = run_cell(&shared, cfg.budget_fractions[fi], &budgets[fi], regime, policy)?;
                cell.improvement_pp = cell.sim.as_ref().map(|s| (s.psf - baseline[fi].psf) * 100.0);
                Ok(cell)
            })
            .collect()
    });

    Ok(Results {
        fractions: cfg.budget_fractions.clone(),
        regimes: cfg.forecast_regimes.clone(),
        policies: cfg.policies.clone(),
        baseline,
        cells: cells?,
        write_traces: cfg.write_traces,
        loads,
        truth,
    })
}

fn run_cell(
    sh: &Shared,
    fraction: f64,
    budget: &Budget,
    regime: Regime,
    policy: Policy,
) -> Result<CellResult, CliError> {
    let forecast = spec_of(regime, sh.cfg.shuffle_seed).apply(sh.truth);
    let mut cell = CellResult {
        fraction,
        regime,
        policy,
        status: CellStatus::Ok,
        sim: None,
        improvement_pp: None,
        solver_objective: None,
        backend: "",
        setpoints: Setpoints::None,
    };
    let (loads, tariff, truth) = (sh.loads, &sh.tariff, sh.truth);
    match policy {
        Policy::BSL => {
            cell.sim = Some(simulate_baseline(truth, loads, tariff, budget).map_err(run_err)?);
        }
        Policy::AFG => {
            let (enable, plan) = afg::plan(&daily_average(&forecast), loads, tariff, budget).map_err(run_err)?;
            cell.solver_objective = Some(enable.objective(loads));
            cell.backend = "greedy";
            cell.sim = Some(simulate_thresholds(&plan, truth, loads, tariff, budget).map_err(run_err)?);
            cell.setpoints = Setpoints::Thresholds(plan);
        }
        Policy::OBM => {
            let model = build_obm(&forecast, loads, tariff, budget).map_err(run_err)?;
            let sol = solve_knapsack_bb(&model).map_err(run_err)?;
            cell.backend = "branch_and_bound";
            if !sol.is_usable() {
                cell.status = CellStatus::Unsolved(format!("{:?}", sol.status));
            } else {
                let schedule = decode_actuation(&sol, loads.len(), truth.grid().total_steps());
                cell.solver_objective = Some(sol.objective);
                cell.sim = Some(simulate_schedule(&schedule, truth, loads, tariff, budget).map_err(run_err)?);
                cell.setpoints = Setpoints::Schedule(schedule);
            }
        }
        Policy::DFM => match solve_dfm(sh, &forecast, budget) {
            Ok((plan, objective, backend)) => {
                cell.backend = backend;
                cell.solver_objective = Some(objective);
                cell.sim = Some(simulate_thresholds(&plan, truth, loads, tariff, budget).map_err(run_err)?);
                cell.setpoints = Setpoints::Thresholds(plan);
            }
            Err((reason, backend)) => {
                warn!("DFM at {fraction} / {}: {reason}", regime.label());
                cell.backend = backend;
                cell.status = CellStatus::Unsolved(reason);
            }
        },
    }
    Ok(cell)
}

/// DFM setpoints from the configured backend; errors carry the backend tried.
fn solve_dfm(
    sh: &Shared,
    forecast: &DemandSeries,
    budget: &Budget,
) -> Result<(ThresholdPlan, f64, &'static str), (String, &'static str)> {
    let b = &sh.cfg.dfm_backend;
    let constants = sh.cfg.dfm_constants.apply(MilpConstants::for_instance(forecast, &sh.tariff, budget));
    let grid = || {
        solve_dfm_grid(forecast, sh.loads, &sh.tariff, budget, &constants, b.grid_resolution, b.max_candidates)
            .map(|(plan, sol)| (plan, sol.objective, "grid"))
            .map_err(|e| (e.to_string(), "grid"))
    };
    if b.kind == BackendKind::Grid {
        return grid();
    }
    let template = b.command.as_deref().unwrap_or_default();
    let days = forecast.grid().num_days();
    let recharge = default_recharge(budget, days, constants.budget_delta);
    let model = build_dfm(forecast, sh.loads, &sh.tariff, budget, &constants, recharge)
        .map_err(|e| (e.to_string(), "external"))?;
    match solve_external(&model, template, Duration::from_secs(b.timeout_secs)) {
        Ok(sol) if sol.is_usable() => plan_from_solution(&sol, sh.loads.len(), days, recharge)
            .map(|plan| (plan, sol.objective, "external"))
            .map_err(|e| (e.to_string(), "external")),
        Ok(sol) => Err((sol.message.unwrap_or_else(|| format!("{:?}", sol.status)), "external")),
        Err(MilpError::SolverNotFound(cmd)) => {
            warn!("solver {cmd} not found; using the grid search");
            grid()
        }
        Err(e) => Err((e.to_string(), "external")),
    }
}

/// Logs a one-line digest per fraction.
pub fn log_digest(results: &Results) {
    for (fi, f) in results.fractions.iter().enumerate() {
        info!(
            "fraction {f}: baseline psf {:.4}, {} disconnection days",
            results.baseline[fi].psf, results.baseline[fi].disconnection_days
        );
    }
}
