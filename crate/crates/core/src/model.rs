//! Domain types shared by every policy, plus budget and service-factor metrics.
//!
//! Matrices are dense `Vec<Vec<f64>>` indexed `[load][step]` or `[load][day]`;
//! household instances are small (tens of loads, a few thousand steps).

use std::collections::HashSet;
use std::ops::Range;

use thiserror::Error;

/// Hours in a day; the grid and the daily averages are defined against it.
pub const HOURS_PER_DAY: f64 = 24.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("load set must contain at least one load")]
    EmptyLoadSet,
    #[error("priority factor of load `{name}` must be positive and finite, got {gamma}")]
    InvalidGamma { name: String, gamma: f64 },
    #[error("duplicate load name `{0}`")]
    DuplicateLoad(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("electricity rate must be positive and finite, got {0}")]
    InvalidTariff(f64),
    #[error("initial balance must be non-negative and finite, got {0}")]
    InvalidBudget(f64),
    #[error("budget fraction must lie in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("power for load {load} at step {step} must be finite and >= 0, got {value}")]
    InvalidPower { load: usize, step: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("load {load} actuated at step {step} without demand")]
    ActuationWithoutDemand { load: usize, step: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub name: String,
    pub gamma: f64,
}

impl Load {
    pub fn new(name: impl Into<String>, gamma: f64) -> Self {
        Self {
            name: name.into(),
            gamma,
        }
    }
}

/// Ordered set of loads with their priority factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSet {
    loads: Vec<Load>,
}

impl LoadSet {
    pub fn new(loads: Vec<Load>) -> Result<Self, ModelError> {
        if loads.is_empty() {
            return Err(ModelError::EmptyLoadSet);
        }
        let mut seen = HashSet::new();
        for load in &loads {
            if !(load.gamma.is_finite() && load.gamma > 0.0) {
                return Err(ModelError::InvalidGamma {
                    name: load.name.clone(),
                    gamma: load.gamma,
                });
            }
            if !seen.insert(load.name.as_str()) {
                return Err(ModelError::DuplicateLoad(load.name.clone()));
            }
        }
        Ok(Self { loads })
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Load> {
        self.loads.iter()
    }

    pub fn get(&self, k: usize) -> &Load {
        &self.loads[k]
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.loads[k].gamma
    }

    pub fn gamma_sum(&self) -> f64 {
        self.loads.iter().map(|l| l.gamma).sum()
    }

    pub fn names(&self) -> Vec<&str> {
        self.loads.iter().map(|l| l.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.loads.iter().position(|l| l.name == name)
    }
}

/// Uniform time grid covering a whole number of days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    step_hours: f64,
    steps_per_day: usize,
    num_days: usize,
}

impl TimeGrid {
    pub fn new(step_hours: f64, steps_per_day: usize, num_days: usize) -> Result<Self, ModelError> {
        if !(step_hours.is_finite() && step_hours > 0.0) {
            return Err(ModelError::InvalidGrid(format!(
                "step length must be positive, got {step_hours} h"
            )));
        }
        if steps_per_day == 0 || num_days == 0 {
            return Err(ModelError::InvalidGrid(
                "steps per day and number of days must be positive".into(),
            ));
        }
        if (step_hours * steps_per_day as f64 - HOURS_PER_DAY).abs() > 1e-12 {
            return Err(ModelError::InvalidGrid(format!(
                "{steps_per_day} steps of {step_hours} h do not cover 24 h"
            )));
        }
        Ok(Self {
            step_hours,
            steps_per_day,
            num_days,
        })
    }

    /// Grid with `step_minutes`-long steps; the step length must divide a day.
    pub fn from_step_minutes(step_minutes: u32, num_days: usize) -> Result<Self, ModelError> {
        if step_minutes == 0 || 1440 % step_minutes != 0 {
            return Err(ModelError::InvalidGrid(format!(
                "step of {step_minutes} min does not divide 1440 min"
            )));
        }
        let steps_per_day = (1440 / step_minutes) as usize;
        Self::new(
            HOURS_PER_DAY / steps_per_day as f64,
            steps_per_day,
            num_days,
        )
    }

    pub fn step_hours(&self) -> f64 {
        self.step_hours
    }

    pub fn steps_per_day(&self) -> usize {
        self.steps_per_day
    }

    pub fn num_days(&self) -> usize {
        self.num_days
    }

    pub fn total_steps(&self) -> usize {
        self.steps_per_day * self.num_days
    }

    pub fn day_of(&self, step: usize) -> usize {
        step / self.steps_per_day
    }

    pub fn day_steps(&self, day: usize) -> Range<usize> {
        day * self.steps_per_day..(day + 1) * self.steps_per_day
    }

    pub fn with_days(&self, num_days: usize) -> Result<Self, ModelError> {
        Self::new(self.step_hours, self.steps_per_day, num_days)
    }
}

/// Flat electricity rate in $/Wh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tariff {
    alpha: f64,
}

impl Tariff {
    pub fn new(alpha: f64) -> Result<Self, ModelError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ModelError::InvalidTariff(alpha));
        }
        Ok(Self { alpha })
    }

    /// Rate in $/Wh.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Initial real wallet balance in $.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    initial_balance: f64,
}

impl Budget {
    pub fn new(initial_balance: f64) -> Result<Self, ModelError> {
        if !(initial_balance.is_finite() && initial_balance >= 0.0) {
            return Err(ModelError::InvalidBudget(initial_balance));
        }
        Ok(Self { initial_balance })
    }

    pub fn initial_balance(&self) -> f64 {
        self.initial_balance
    }
}

fn check_matrix(power: &[Vec<f64>], cols: usize, what: &str) -> Result<(), ModelError> {
    for (k, row) in power.iter().enumerate() {
        if row.len() != cols {
            return Err(ModelError::ShapeMismatch(format!(
                "{what} row {k} has {} entries, expected {cols}",
                row.len()
            )));
        }
        if let Some((t, &value)) = row
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(ModelError::InvalidPower {
                load: k,
                step: t,
                value,
            });
        }
    }
    Ok(())
}

/// Per-load power demand in W on a uniform grid, `power[k][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries {
    grid: TimeGrid,
    power: Vec<Vec<f64>>,
}

impl DemandSeries {
    pub fn new(grid: TimeGrid, power: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        check_matrix(&power, grid.total_steps(), "demand")?;
        Ok(Self { grid, power })
    }

    /// All-zero demand for `num_loads` loads.
    pub fn zeros(grid: TimeGrid, num_loads: usize) -> Self {
        Self {
            grid,
            power: vec![vec![0.0; grid.total_steps()]; num_loads],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn num_loads(&self) -> usize {
        self.power.len()
    }

    pub fn power(&self, k: usize, t: usize) -> f64 {
        self.power[k][t]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.power[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.power
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.power
    }

    /// Errors unless there is exactly one row per load.
    pub fn check_loads(&self, loads: &LoadSet) -> Result<(), ModelError> {
        if self.num_loads() != loads.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "demand has {} loads, load set has {}",
                self.num_loads(),
                loads.len()
            )));
        }
        Ok(())
    }

    /// Sub-series covering days `first_day..first_day + num_days`.
    pub fn window(&self, first_day: usize, num_days: usize) -> Result<Self, ModelError> {
        if first_day + num_days > self.grid.num_days() {
            return Err(ModelError::ShapeMismatch(format!(
                "window of {num_days} days at offset {first_day} exceeds {} days of data",
                self.grid.num_days()
            )));
        }
        let grid = self.grid.with_days(num_days)?;
        let spd = self.grid.steps_per_day();
        let range = first_day * spd..(first_day + num_days) * spd;
        let power = self.power.iter().map(|r| r[range.clone()].to_vec()).collect();
        Ok(Self { grid, power })
    }

    /// Cost in $ of serving every demanded step.
    pub fn total_cost(&self, tariff: &Tariff) -> f64 {
        let energy: f64 = self.power.iter().flatten().sum::<f64>() * self.grid.step_hours();
        tariff.alpha() * energy
    }
}

/// Daily average power per load in W, `power[k][d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyAverageDemand {
    power: Vec<Vec<f64>>,
}

impl DailyAverageDemand {
    pub fn new(power: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let cols = power.first().map_or(0, Vec::len);
        check_matrix(&power, cols, "daily average")?;
        Ok(Self { power })
    }

    pub fn num_loads(&self) -> usize {
        self.power.len()
    }

    pub fn num_days(&self) -> usize {
        self.power.first().map_or(0, Vec::len)
    }

    pub fn power(&self, k: usize, d: usize) -> f64 {
        self.power[k][d]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.power
    }
}

/// Initial balance that covers `fraction` of the cost of all demand.
pub fn compute_budget(
    demand: &DemandSeries,
    tariff: &Tariff,
    fraction: f64,
) -> Result<Budget, ModelError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ModelError::InvalidFraction(fraction));
    }
    Budget::new(fraction * demand.total_cost(tariff))
}

/// `true` exactly where power is strictly positive.
pub fn demand_indicator(demand: &DemandSeries) -> Vec<Vec<bool>> {
    demand
        .rows()
        .iter()
        .map(|row| row.iter().map(|&p| p > 0.0).collect())
        .collect()
}

/// Daily energy of each load spread evenly over 24 h.
pub fn daily_average(demand: &DemandSeries) -> DailyAverageDemand {
    let grid = demand.grid();
    let power = demand
        .rows()
        .iter()
        .map(|row| {
            (0..grid.num_days())
                .map(|d| {
                    let energy: f64 = row[grid.day_steps(d)].iter().sum::<f64>() * grid.step_hours();
                    energy / HOURS_PER_DAY
                })
                .collect()
        })
        .collect();
    DailyAverageDemand { power }
}

/// Service factors and their priority-weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfReport {
    /// Served over demanded steps; `None` for loads never demanded.
    pub sf: Vec<Option<f64>>,
    pub psf: f64,
}

impl PsfReport {
    /// Loads left out of the weighted sum because they had no demand.
    pub fn excluded(&self) -> Vec<usize> {
        self.sf
            .iter()
            .enumerate()
            .filter_map(|(k, sf)| sf.is_none().then_some(k))
            .collect()
    }
}

pub fn psf(
    actuation: &[Vec<bool>],
    indicator: &[Vec<bool>],
    loads: &LoadSet,
) -> Result<PsfReport, ModelError> {
    if actuation.len() != loads.len() || indicator.len() != loads.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} actuation rows and {} indicator rows for {} loads",
            actuation.len(),
            indicator.len(),
            loads.len()
        )));
    }
    let mut sf = Vec::with_capacity(loads.len());
    let mut total = 0.0;
    for (k, (a_row, d_row)) in actuation.iter().zip(indicator).enumerate() {
        if a_row.len() != d_row.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "load {k}: {} actuation steps vs {} demand steps",
                a_row.len(),
                d_row.len()
            )));
        }
        let mut served = 0usize;
        let mut demanded = 0usize;
        for (t, (&a, &d)) in a_row.iter().zip(d_row).enumerate() {
            if a && !d {
                return Err(ModelError::ActuationWithoutDemand { load: k, step: t });
            }
            served += a as usize;
            demanded += d as usize;
        }
        if demanded == 0 {
            sf.push(None);
        } else {
            let value = served as f64 / demanded as f64;
            total += loads.gamma(k) * value;
            sf.push(Some(value));
        }
    }
    Ok(PsfReport { sf, psf: total })
}
