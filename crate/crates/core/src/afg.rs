//! Average-forecast greedy policy.
//!
//! Enable durations `s[k][d]` (hours per load per day) maximise
//! `sum_k gamma_k * sum_d s[k][d] / sum_d s_max[k][d]` subject to
//! `sum alpha * avg[k][d] * s[k][d] < Z` and `s <= s_max`. This is a fractional
//! knapsack, so sorting items by benefit per dollar and filling greedily is
//! optimal. The durations are then turned into daily virtual-wallet recharges
//! and per-load thresholds that a meter can enforce without any forecast.

use std::cmp::Ordering;
use std::io::Write;

use crate::model::{Budget, DailyAverageDemand, LoadSet, ModelError, Tariff, HOURS_PER_DAY};

/// Margin above the day's recharge for loads that must stay off all day.
pub const DISABLE_EPS: f64 = 1e-4;

/// Relative margin that turns the strict budget inequality into `<= Z(1 - delta)`.
pub const DEFAULT_BUDGET_DELTA: f64 = 1e-9;

/// Label of the per-day recharge rows in the setpoint CSV.
pub const RECHARGE_LABEL: &str = "__recharge__";

#[derive(Debug, Clone, PartialEq)]
pub struct EnablePlan {
    /// Hours each load is enabled on each day.
    pub durations: Vec<Vec<f64>>,
    pub max_durations: Vec<Vec<f64>>,
    /// The item that received the leftover budget, if the budget ran out.
    pub marginal: Option<(usize, usize)>,
}

impl EnablePlan {
    pub fn num_days(&self) -> usize {
        self.durations.first().map_or(0, Vec::len)
    }

    /// Cost in $ of running every load for its planned duration.
    pub fn cost(&self, avg: &DailyAverageDemand, tariff: &Tariff) -> f64 {
        self.durations
            .iter()
            .enumerate()
            .flat_map(|(k, row)| row.iter().enumerate().map(move |(d, &s)| (k, d, s)))
            .map(|(k, d, s)| tariff.alpha() * avg.power(k, d) * s)
            .sum()
    }

    /// Objective value of the plan (its priority service factor under the
    /// average-demand model).
    pub fn objective(&self, loads: &LoadSet) -> f64 {
        self.durations
            .iter()
            .zip(&self.max_durations)
            .enumerate()
            .filter_map(|(k, (s, smax))| {
                let total: f64 = smax.iter().sum();
                (total > 0.0).then(|| loads.gamma(k) * s.iter().sum::<f64>() / total)
            })
            .sum()
    }
}

/// Virtual-wallet setpoints: `thresholds[k][d]` and `recharges[d]` in $.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPlan {
    pub thresholds: Vec<Vec<f64>>,
    pub recharges: Vec<f64>,
    /// Once disabled within a day a load stays off until the next day.
    pub latching: bool,
    /// Unspent virtual balance carries into the next day; otherwise the
    /// virtual wallet restarts from the day's recharge.
    pub carry_over: bool,
}

impl ThresholdPlan {
    pub fn num_loads(&self) -> usize {
        self.thresholds.len()
    }

    pub fn num_days(&self) -> usize {
        self.recharges.len()
    }

    /// Setpoint CSV: `day,load,dollars` rows, one per load and one
    /// `__recharge__` row per day (days are 1-based).
    pub fn write_csv<W: Write>(&self, loads: &LoadSet, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["day", "load", "dollars"])?;
        for (d, recharge) in self.recharges.iter().enumerate() {
            let day = (d + 1).to_string();
            for (k, load) in loads.iter().enumerate() {
                w.write_record([
                    day.as_str(),
                    load.name.as_str(),
                    &self.thresholds[k][d].to_string(),
                ])?;
            }
            w.write_record([day.as_str(), RECHARGE_LABEL, &recharge.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Zero hours for days without demand, the whole day otherwise.
pub fn max_durations(avg: &DailyAverageDemand) -> Vec<Vec<f64>> {
    avg.rows()
        .iter()
        .map(|row| {
            row.iter()
                .map(|&p| if p == 0.0 { 0.0 } else { HOURS_PER_DAY })
                .collect()
        })
        .collect()
}

struct Item {
    load: usize,
    day: usize,
    ratio: f64,
    weight: f64,
    max_hours: f64,
}

/// Greedy solution with the default budget margin.
pub fn solve_greedy(
    avg: &DailyAverageDemand,
    loads: &LoadSet,
    tariff: &Tariff,
    budget: &Budget,
) -> Result<EnablePlan, ModelError> {
    solve_greedy_with_delta(avg, loads, tariff, budget, DEFAULT_BUDGET_DELTA)
}

/// Items are ranked by benefit per dollar-hour; ties go to the higher
/// priority factor, then the earlier day, then the earlier load. Items are
/// enabled for their full duration while that fits within `Z(1 - delta)`; the
/// first item that does not fit gets the leftover balance and the rest get 0.
pub fn solve_greedy_with_delta(
    avg: &DailyAverageDemand,
    loads: &LoadSet,
    tariff: &Tariff,
    budget: &Budget,
    delta: f64,
) -> Result<EnablePlan, ModelError> {
    if avg.num_loads() != loads.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "averages for {} loads, load set has {}",
            avg.num_loads(),
            loads.len()
        )));
    }
    let smax = max_durations(avg);
    let days = avg.num_days();
    let mut durations = vec![vec![0.0; days]; loads.len()];

    let mut items = Vec::new();
    for (k, row) in smax.iter().enumerate() {
        let hours: f64 = row.iter().sum();
        if hours == 0.0 {
            continue;
        }
        let benefit = loads.gamma(k) / hours;
        for (d, &max_hours) in row.iter().enumerate() {
            let weight = tariff.alpha() * avg.power(k, d);
            debug_assert_eq!(weight == 0.0, max_hours == 0.0);
            if max_hours == 0.0 {
                continue;
            }
            items.push(Item {
                load: k,
                day: d,
                ratio: benefit / weight,
                weight,
                max_hours,
            });
        }
    }
    items.sort_by(|a, b| {
        b.ratio
            .partial_cmp(&a.ratio)
            .unwrap_or(Ordering::Equal)
            .then_with(|| {
                loads
                    .gamma(b.load)
                    .partial_cmp(&loads.gamma(a.load))
                    .unwrap_or(Ordering::Equal)
            })
            .then(a.day.cmp(&b.day))
            .then(a.load.cmp(&b.load))
    });

    let capacity = budget.initial_balance() * (1.0 - delta);
    let mut spent = 0.0;
    let mut marginal = None;
    for item in &items {
        let full_cost = item.weight * item.max_hours;
        if spent + full_cost <= capacity {
            durations[item.load][item.day] = item.max_hours;
            spent += full_cost;
        } else {
            let hours = ((capacity - spent) / item.weight).clamp(0.0, item.max_hours);
            durations[item.load][item.day] = hours;
            marginal = Some((item.load, item.day));
            break;
        }
    }
    Ok(EnablePlan {
        durations,
        max_durations: smax,
        marginal,
    })
}

/// Recharge needed each day to run the plan: `X_d = sum_k alpha * s[k][d] * avg[k][d]`.
pub fn compute_recharges(plan: &EnablePlan, avg: &DailyAverageDemand, tariff: &Tariff) -> Vec<f64> {
    (0..plan.num_days())
        .map(|d| {
            plan.durations
                .iter()
                .enumerate()
                .map(|(k, s)| tariff.alpha() * s[d] * avg.power(k, d))
                .sum()
        })
        .collect()
}

/// Thresholds per load and day: disabled loads sit `DISABLE_EPS` above the
/// recharge, fully enabled loads at zero, and the marginal load where the
/// balance will be after all enabled loads ran for its duration.
pub fn compute_thresholds(
    plan: &EnablePlan,
    recharges: &[f64],
    avg: &DailyAverageDemand,
    tariff: &Tariff,
) -> ThresholdPlan {
    let loads = plan.durations.len();
    let mut thresholds = vec![vec![0.0; plan.num_days()]; loads];
    for (d, &recharge) in recharges.iter().enumerate() {
        let enabled_power: f64 = (0..loads)
            .filter(|&n| plan.durations[n][d] > 0.0)
            .map(|n| avg.power(n, d))
            .sum();
        for k in 0..loads {
            let s = plan.durations[k][d];
            thresholds[k][d] = if s == 0.0 {
                recharge + DISABLE_EPS
            } else if s == plan.max_durations[k][d] {
                0.0
            } else {
                recharge - tariff.alpha() * s * enabled_power
            };
        }
    }
    ThresholdPlan {
        thresholds,
        recharges: recharges.to_vec(),
        latching: true,
        carry_over: false,
    }
}

/// Greedy plan plus its setpoints.
pub fn plan(
    avg: &DailyAverageDemand,
    loads: &LoadSet,
    tariff: &Tariff,
    budget: &Budget,
) -> Result<(EnablePlan, ThresholdPlan), ModelError> {
    let enable = solve_greedy(avg, loads, tariff, budget)?;
    let recharges = compute_recharges(&enable, avg, tariff);
    let thresholds = compute_thresholds(&enable, &recharges, avg, tariff);
    Ok((enable, thresholds))
}
