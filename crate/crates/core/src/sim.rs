//! Discrete-time wallet simulator.
//!
//! The real wallet starts at `Z` and pays for every served step. Once its
//! balance is `<= 0` at the start of a step the household is disconnected for
//! the rest of the horizon. A step that starts with a positive balance is
//! served in full even if it overdraws the wallet.
//!
//! Threshold plans additionally run a virtual wallet that receives `X_d` at
//! the start of each day. A load may run during a step only if the virtual
//! balance after paying for that step stays at or above the load's threshold;
//! when enabled loads conflict, the load with the highest threshold is
//! switched off first.

use thiserror::Error;

use crate::afg::ThresholdPlan;
use crate::model::{demand_indicator, psf, Budget, DemandSeries, LoadSet, ModelError, Tariff, TimeGrid};

/// Relative slack on threshold comparisons, covering rounding in the
/// running balance only.
pub const ENABLE_RTOL: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("plan does not match demand: {0}")]
    PlanShapeMismatch(String),
    #[error("schedule does not match demand: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub actuation: Vec<Vec<bool>>,
    /// Real balance at the start of each step.
    pub real_balance: Vec<f64>,
    /// Virtual balance at the start of each step (threshold plans only).
    pub virtual_balance: Option<Vec<f64>>,
    pub final_real_balance: f64,
    pub sf: Vec<Option<f64>>,
    pub psf: f64,
    pub total_spend: f64,
    pub disconnection_days: usize,
    /// First step that started with a non-positive real balance; equals the
    /// number of steps if the wallet ran dry during the last step.
    pub first_disconnect_step: Option<usize>,
}

impl SimResult {
    pub fn served_steps(&self, k: usize, steps: std::ops::Range<usize>) -> usize {
        self.actuation[k][steps].iter().filter(|&&a| a).count()
    }
}

/// Number of days whose every step starts with a non-positive real balance.
pub fn count_disconnection_days(real_balance: &[f64], grid: &TimeGrid) -> usize {
    (0..grid.num_days())
        .filter(|&d| real_balance[grid.day_steps(d)].iter().all(|&z| z <= 0.0))
        .count()
}

struct Wallet {
    balance: f64,
    spend: f64,
    trace: Vec<f64>,
    disconnected_at: Option<usize>,
}

impl Wallet {
    fn new(budget: &Budget, steps: usize) -> Self {
        Self {
            balance: budget.initial_balance(),
            spend: 0.0,
            trace: Vec::with_capacity(steps),
            disconnected_at: None,
        }
    }

    /// Records the step-start balance; `true` if supply is still on.
    fn open_step(&mut self, t: usize) -> bool {
        self.trace.push(self.balance);
        if self.disconnected_at.is_none() && self.balance <= 0.0 {
            self.disconnected_at = Some(t);
        }
        self.disconnected_at.is_none()
    }

    fn pay(&mut self, cost: f64) {
        self.balance -= cost;
        self.spend += cost;
    }

    fn finish(
        self,
        actuation: Vec<Vec<bool>>,
        virtual_balance: Option<Vec<f64>>,
        truth: &DemandSeries,
        loads: &LoadSet,
    ) -> Result<SimResult, SimError> {
        let steps = truth.grid().total_steps();
        let report = psf(&actuation, &demand_indicator(truth), loads)?;
        let first_disconnect_step = self
            .disconnected_at
            .or_else(|| (self.balance <= 0.0 && steps > 0).then_some(steps));
        Ok(SimResult {
            disconnection_days: count_disconnection_days(&self.trace, truth.grid()),
            actuation,
            real_balance: self.trace,
            virtual_balance,
            final_real_balance: self.balance,
            sf: report.sf,
            psf: report.psf,
            total_spend: self.spend,
            first_disconnect_step,
        })
    }
}

/// Runs a threshold plan (AFG or DFM setpoints) against true demand.
pub fn simulate_thresholds(
    plan: &ThresholdPlan,
    truth: &DemandSeries,
    loads: &LoadSet,
    tariff: &Tariff,
    budget: &Budget,
) -> Result<SimResult, SimError> {
    truth.check_loads(loads)?;
    let grid = truth.grid();
    if plan.num_loads() != loads.len()
        || plan.num_days() != grid.num_days()
        || plan.thresholds.iter().any(|r| r.len() != grid.num_days())
    {
        return Err(SimError::PlanShapeMismatch(format!(
            "plan covers {} loads x {} days, demand {} loads x {} days",
            plan.num_loads(),
            plan.num_days(),
            loads.len(),
            grid.num_days()
        )));
    }
    let k_count = loads.len();
    let steps = grid.total_steps();
    let cost_per_watt = tariff.alpha() * grid.step_hours();

    let mut wallet = Wallet::new(budget, steps);
    let mut actuation = vec![vec![false; steps]; k_count];
    let mut virtual_trace = Vec::with_capacity(steps);
    let mut virtual_balance = 0.0;
    let mut latched = vec![false; k_count];
    let mut on = vec![false; k_count];

    for t in 0..steps {
        let day = grid.day_of(t);
        if t % grid.steps_per_day() == 0 {
            virtual_balance = if plan.carry_over {
                virtual_balance + plan.recharges[day]
            } else {
                plan.recharges[day]
            };
            latched.fill(false);
        }
        virtual_trace.push(virtual_balance);
        if !wallet.open_step(t) {
            continue;
        }

        for k in 0..k_count {
            on[k] = !latched[k];
        }
        let tol = ENABLE_RTOL * virtual_balance.abs().max(1.0);
        loop {
            let cost: f64 = (0..k_count)
                .filter(|&k| on[k])
                .map(|k| truth.power(k, t))
                .sum::<f64>()
                * cost_per_watt;
            let after = virtual_balance - cost;
            let worst = (0..k_count)
                .filter(|&k| on[k] && after < plan.thresholds[k][day] - tol)
                .map(|k| plan.thresholds[k][day])
                .fold(f64::NEG_INFINITY, f64::max);
            if worst == f64::NEG_INFINITY {
                break;
            }
            for k in 0..k_count {
                if on[k] && plan.thresholds[k][day] >= worst {
                    on[k] = false;
                }
            }
        }
        if plan.latching {
            for k in 0..k_count {
                latched[k] |= !on[k];
            }
        }

        let mut watts = 0.0;
        for k in 0..k_count {
            let p = truth.power(k, t);
            if on[k] && p > 0.0 {
                actuation[k][t] = true;
                watts += p;
            }
        }
        let cost = watts * cost_per_watt;
        virtual_balance -= cost;
        wallet.pay(cost);
    }
    wallet.finish(actuation, Some(virtual_trace), truth, loads)
}

/// Runs a fixed on/off schedule; a step is served only where there is demand
/// and the wallet is still connected.
pub fn simulate_schedule(
    schedule: &[Vec<bool>],
    truth: &DemandSeries,
    loads: &LoadSet,
    tariff: &Tariff,
    budget: &Budget,
) -> Result<SimResult, SimError> {
    truth.check_loads(loads)?;
    let steps = truth.grid().total_steps();
    if schedule.len() != loads.len() || schedule.iter().any(|r| r.len() != steps) {
        return Err(SimError::ShapeMismatch(format!(
            "schedule is {} rows, expected {} x {steps}",
            schedule.len(),
            loads.len()
        )));
    }
    run_fixed(truth, loads, tariff, budget, |k, t| schedule[k][t])
}

/// Unrationed use: serve all demand until the wallet runs dry.
pub fn simulate_baseline(
    truth: &DemandSeries,
    loads: &LoadSet,
    tariff: &Tariff,
    budget: &Budget,
) -> Result<SimResult, SimError> {
    truth.check_loads(loads)?;
    run_fixed(truth, loads, tariff, budget, |_, _| true)
}

fn run_fixed(
    truth: &DemandSeries,
    loads: &LoadSet,
    tariff: &Tariff,
    budget: &Budget,
    wanted: impl Fn(usize, usize) -> bool,
) -> Result<SimResult, SimError> {
    let steps = truth.grid().total_steps();
    let cost_per_watt = tariff.alpha() * truth.grid().step_hours();
    let mut wallet = Wallet::new(budget, steps);
    let mut actuation = vec![vec![false; steps]; loads.len()];
    for t in 0..steps {
        if !wallet.open_step(t) {
            continue;
        }
        let mut watts = 0.0;
        for (k, row) in actuation.iter_mut().enumerate() {
            let p = truth.power(k, t);
            if p > 0.0 && wanted(k, t) {
                row[t] = true;
                watts += p;
            }
        }
        wallet.pay(watts * cost_per_watt);
    }
    wallet.finish(actuation, None, truth, loads)
}
