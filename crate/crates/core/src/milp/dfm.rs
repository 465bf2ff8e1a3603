use std::collections::BTreeMap;

use super::{actuation_name, MilpError, MilpModel, Sense, Solution, SolveStatus};
use crate::afg::{ThresholdPlan, DEFAULT_BUDGET_DELTA};
use crate::model::{Budget, DemandSeries, LoadSet, Tariff};
use crate::sim::simulate_thresholds;

/// Big-M constants of the threshold model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpConstants {
    pub eps: f64,
    /// Negative big-M, at most `-Z`.
    pub m: f64,
    /// Positive big-M, at least `Z`.
    pub big_m: f64,
    pub budget_delta: f64,
}

impl MilpConstants {
    /// `eps = 1e-6`, `m = -M`, `M = Z + alpha * dT * sum_k max_t P_k,t`.
    pub fn for_instance(demand: &DemandSeries, tariff: &Tariff, budget: &Budget) -> Self {
        let peak: f64 = demand
            .rows()
            .iter()
            .map(|row| row.iter().copied().fold(0.0, f64::max))
            .sum();
        let range = budget.initial_balance() + tariff.alpha() * demand.grid().step_hours() * peak;
        Self { eps: 1e-6, m: -range, big_m: range, budget_delta: DEFAULT_BUDGET_DELTA }
    }

    pub fn validate(&self, budget: &Budget) -> Result<(), MilpError> {
        let z = budget.initial_balance();
        if !(self.eps > 0.0) {
            return Err(MilpError::InfeasibleConstants(format!("eps = {} must be positive", self.eps)));
        }
        if !(self.m <= -z) {
            return Err(MilpError::InfeasibleConstants(format!("m = {} must be <= -Z = {}", self.m, -z)));
        }
        if !(self.big_m >= z) {
            return Err(MilpError::InfeasibleConstants(format!("M = {} must be >= Z = {}", self.big_m, z)));
        }
        if !(0.0..1.0).contains(&self.budget_delta) {
            return Err(MilpError::InfeasibleConstants(format!(
                "budget delta {} outside [0, 1)",
                self.budget_delta
            )));
        }
        Ok(())
    }
}

/// Daily virtual recharge `Z(1 - delta) / |D|`.
pub fn default_recharge(budget: &Budget, num_days: usize, delta: f64) -> f64 {
    if num_days == 0 {
        return 0.0;
    }
    budget.initial_balance() * (1.0 - delta) / num_days as f64
}

/// Builds the threshold MILP over the forecast `demand`.
///
/// Besides `z_1..z_T` the model carries `z_{T+1}` and `uz_k_{T+1}` so that
/// the look-ahead enable on the last step is governed by the same wallet
/// constraints. Thresholds are bounded to `[0, M]`; `z_t` and `x_t` are free.
pub fn build_dfm(
    demand: &DemandSeries,
    loads: &LoadSet,
    tariff: &Tariff,
    budget: &Budget,
    constants: &MilpConstants,
    recharge_per_day: f64,
) -> Result<MilpModel, MilpError> {
    demand.check_loads(loads)?;
    constants.validate(budget)?;
    let grid = demand.grid();
    let n_k = loads.len();
    let n_t = grid.total_steps();
    let n_d = grid.num_days();
    let z0 = budget.initial_balance();
    let (eps, m, big_m) = (constants.eps, constants.m, constants.big_m);
    let cost_per_watt = tariff.alpha() * grid.step_hours();
    let inf = f64::INFINITY;

    let mut model = MilpModel::new();
    let mut z = Vec::with_capacity(n_t + 1);
    for t in 0..=n_t {
        z.push(model.add_continuous(format!("z_{}", t + 1), -inf, inf, format!("z_{{{}}}", t + 1))?);
    }
    let mut x = Vec::with_capacity(n_t);
    for t in 0..n_t {
        x.push(model.add_continuous(format!("x_{}", t + 1), -inf, inf, format!("x_{{{}}}", t + 1))?);
    }
    let mut thr = vec![Vec::with_capacity(n_d); n_k];
    for (k, row) in thr.iter_mut().enumerate() {
        for d in 0..n_d {
            row.push(model.add_continuous(
                format!("thr_{}_{}", k + 1, d + 1),
                0.0,
                big_m,
                format!("x_{{{},{}}}", k + 1, d + 1),
            )?);
        }
    }
    let mut uz = vec![Vec::with_capacity(n_t + 1); n_k];
    for (k, row) in uz.iter_mut().enumerate() {
        for t in 0..=n_t {
            row.push(model.add_binary(format!("uz_{}_{}", k + 1, t + 1), format!("u^z_{{{},{}}}", k + 1, t + 1))?);
        }
    }
    let mut ux = vec![Vec::with_capacity(n_t); n_k];
    for (k, row) in ux.iter_mut().enumerate() {
        for t in 0..n_t {
            row.push(model.add_binary(format!("ux_{}_{}", k + 1, t + 1), format!("u^x_{{{},{}}}", k + 1, t + 1))?);
        }
    }
    let mut a = vec![Vec::with_capacity(n_t); n_k];
    for (k, row) in a.iter_mut().enumerate() {
        for t in 0..n_t {
            row.push(model.add_binary(actuation_name(k, t), format!("a_{{{},{}}}", k + 1, t + 1))?);
        }
    }

    let demanded = |k: usize, t: usize| demand.power(k, t) > 0.0;
    // Spend of step t - 1 moved to the left-hand side of a balance update.
    let spend_terms = |t: usize| -> Vec<(usize, f64)> {
        if t == 0 {
            return Vec::new();
        }
        (0..n_k)
            .filter(|&k| demanded(k, t - 1))
            .map(|k| (a[k][t - 1], cost_per_watt * demand.power(k, t - 1)))
            .collect()
    };

    for t in 0..=n_t {
        let label = t + 1;
        let mut terms = vec![(z[t], 1.0)];
        if t > 0 {
            terms.push((z[t - 1], -1.0));
        }
        terms.extend(spend_terms(t));
        let rhs = if t == 0 { z0 } else { 0.0 };
        model.add_constraint(format!("real_balance_{label}"), terms, Sense::Eq, rhs)?;
        for k in 0..n_k {
            let kl = k + 1;
            // m * uz <= -z
            model.add_constraint(
                format!("real_enable_upper_{kl}_{label}"),
                vec![(uz[k][t], m), (z[t], 1.0)],
                Sense::Le,
                0.0,
            )?;
            // (M + eps)(1 - uz) >= eps - z
            model.add_constraint(
                format!("real_enable_lower_{kl}_{label}"),
                vec![(z[t], 1.0), (uz[k][t], -(big_m + eps))],
                Sense::Ge,
                -big_m,
            )?;
        }
    }

    for t in 0..n_t {
        let label = t + 1;
        let day = grid.day_of(t);
        let mut terms = vec![(x[t], 1.0)];
        if t > 0 {
            terms.push((x[t - 1], -1.0));
        }
        terms.extend(spend_terms(t));
        let rhs = if t % grid.steps_per_day() == 0 { recharge_per_day } else { 0.0 };
        model.add_constraint(format!("virtual_balance_{label}"), terms, Sense::Eq, rhs)?;

        for k in 0..n_k {
            let kl = k + 1;
            // x_t - thr + eps <= (M + eps) ux
            model.add_constraint(
                format!("virtual_enable_upper_{kl}_{label}"),
                vec![(x[t], 1.0), (thr[k][day], -1.0), (ux[k][t], -(big_m + eps))],
                Sense::Le,
                -eps,
            )?;
            // x_t - thr >= m (1 - ux)
            model.add_constraint(
                format!("virtual_enable_lower_{kl}_{label}"),
                vec![(x[t], 1.0), (thr[k][day], -1.0), (ux[k][t], m)],
                Sense::Ge,
                m,
            )?;

            let d = demanded(k, t);
            let mut gate = vec![(a[k][t], 1.0)];
            if d {
                gate.push((ux[k][t], -1.0));
            }
            model.add_constraint(format!("act_demand_{kl}_{label}"), gate, Sense::Le, 0.0)?;
            model.add_constraint(
                format!("act_real_now_{kl}_{label}"),
                vec![(a[k][t], 1.0), (uz[k][t], -1.0)],
                Sense::Le,
                0.0,
            )?;
            model.add_constraint(
                format!("act_real_next_{kl}_{label}"),
                vec![(a[k][t], 1.0), (uz[k][t + 1], -1.0)],
                Sense::Le,
                0.0,
            )?;
            let mut all = vec![(uz[k][t], 1.0), (uz[k][t + 1], 1.0), (a[k][t], -1.0)];
            if d {
                all.push((ux[k][t], 1.0));
            }
            model.add_constraint(format!("act_all_enabled_{kl}_{label}"), all, Sense::Le, 2.0)?;
        }
    }

    for k in 0..n_k {
        let count = (0..n_t).filter(|&t| demanded(k, t)).count();
        if count == 0 {
            continue;
        }
        let w = loads.gamma(k) / count as f64;
        for t in (0..n_t).filter(|&t| demanded(k, t)) {
            model.add_objective(a[k][t], w);
        }
    }
    Ok(model)
}

/// Threshold plan read from `thr_k_d` values of a DFM solution.
pub fn plan_from_solution(
    solution: &Solution,
    num_loads: usize,
    num_days: usize,
    recharge_per_day: f64,
) -> Result<ThresholdPlan, MilpError> {
    let mut thresholds = vec![vec![0.0; num_days]; num_loads];
    for (k, row) in thresholds.iter_mut().enumerate() {
        for (d, v) in row.iter_mut().enumerate() {
            let name = format!("thr_{}_{}", k + 1, d + 1);
            *v = solution.value(&name).ok_or(MilpError::MissingVariable(name))?;
        }
    }
    Ok(ThresholdPlan {
        thresholds,
        recharges: vec![recharge_per_day; num_days],
        latching: false,
        carry_over: true,
    })
}

/// Exhaustive search over per-(load, day) threshold candidates, each plan
/// scored by simulating it against `demand`.
///
/// Candidates are `0`, `X_d * i / resolution` for `i = 1..=resolution`, and
/// `X_d + eps`; a load with no demand on a day keeps the single candidate
/// `0`. Ties keep the first plan in enumeration order. This is a search over
/// a grid, not an exact solve of the MILP.
pub fn solve_dfm_grid(
    demand: &DemandSeries,
    loads: &LoadSet,
    tariff: &Tariff,
    budget: &Budget,
    constants: &MilpConstants,
    resolution: usize,
    max_candidates: u64,
) -> Result<(ThresholdPlan, Solution), MilpError> {
    demand.check_loads(loads)?;
    constants.validate(budget)?;
    let grid = demand.grid();
    let (n_k, n_d) = (loads.len(), grid.num_days());
    let recharge = default_recharge(budget, n_d, constants.budget_delta);

    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(n_k * n_d);
    for k in 0..n_k {
        for d in 0..n_d {
            let active = grid.day_steps(d).any(|t| demand.power(k, t) > 0.0);
            let mut c = vec![0.0];
            if active {
                for i in 1..=resolution {
                    c.push(recharge * i as f64 / resolution as f64);
                }
                c.push(recharge + constants.eps);
                c.dedup_by(|a, b| a.to_bits() == b.to_bits());
            }
            candidates.push(c);
        }
    }
    let total: u128 = candidates.iter().map(|c| c.len() as u128).product();
    if total > max_candidates as u128 {
        return Err(MilpError::InstanceTooLarge { candidates: total, cap: max_candidates });
    }

    let mut plan = ThresholdPlan {
        thresholds: vec![vec![0.0; n_d]; n_k],
        recharges: vec![recharge; n_d],
        latching: false,
        carry_over: true,
    };
    let mut digits = vec![0usize; candidates.len()];
    let mut best: Option<(f64, Vec<usize>, Vec<Vec<bool>>)> = None;
    loop {
        for (j, &i) in digits.iter().enumerate() {
            plan.thresholds[j / n_d.max(1)][j % n_d.max(1)] = candidates[j][i];
        }
        let result = simulate_thresholds(&plan, demand, loads, tariff, budget)?;
        if best.as_ref().map_or(true, |(psf, _, _)| result.psf > *psf) {
            best = Some((result.psf, digits.clone(), result.actuation));
        }
        // Mixed-radix increment, last item fastest.
        let mut j = digits.len();
        loop {
            if j == 0 {
                break;
            }
            j -= 1;
            digits[j] += 1;
            if digits[j] < candidates[j].len() {
                break;
            }
            digits[j] = 0;
        }
        if digits.iter().all(|&i| i == 0) {
            break;
        }
    }

    let (psf, best_digits, actuation) = best.expect("at least one candidate plan");
    for (j, &i) in best_digits.iter().enumerate() {
        plan.thresholds[j / n_d.max(1)][j % n_d.max(1)] = candidates[j][i];
    }
    let mut values = BTreeMap::new();
    for k in 0..n_k {
        for d in 0..n_d {
            values.insert(format!("thr_{}_{}", k + 1, d + 1), plan.thresholds[k][d]);
        }
        for (t, &on) in actuation[k].iter().enumerate() {
            values.insert(actuation_name(k, t), if on { 1.0 } else { 0.0 });
        }
    }
    let solution = Solution {
        values,
        objective: psf,
        status: SolveStatus::Feasible,
        message: Some(format!("grid search over {total} threshold plans")),
    };
    Ok((plan, solution))
}
