use super::{actuation_name, MilpError, MilpModel, Sense};
use crate::afg::DEFAULT_BUDGET_DELTA;
use crate::model::{Budget, DemandSeries, LoadSet, Tariff};

/// Schedule benchmark: choose `a_k_t` over demanded steps to maximise PSF
/// subject to `sum(a * alpha * P * dT) <= Z(1 - delta)`.
///
/// Steps without demand get no variable. A model with no demand has no
/// variables and no constraints.
pub fn build_obm(
    demand: &DemandSeries,
    loads: &LoadSet,
    tariff: &Tariff,
    budget: &Budget,
) -> Result<MilpModel, MilpError> {
    demand.check_loads(loads)?;
    let grid = demand.grid();
    let cost_per_watt = tariff.alpha() * grid.step_hours();
    let mut model = MilpModel::new();
    let mut budget_terms = Vec::new();
    for k in 0..loads.len() {
        let demanded: Vec<usize> = (0..grid.total_steps()).filter(|&t| demand.power(k, t) > 0.0).collect();
        if demanded.is_empty() {
            continue;
        }
        let weight = loads.gamma(k) / demanded.len() as f64;
        for t in demanded {
            let i = model.add_binary(actuation_name(k, t), format!("a_{{{},{}}}", k + 1, t + 1))?;
            model.add_objective(i, weight);
            budget_terms.push((i, cost_per_watt * demand.power(k, t)));
        }
    }
    if !budget_terms.is_empty() {
        let cap = budget.initial_balance() * (1.0 - DEFAULT_BUDGET_DELTA);
        model.add_constraint("budget", budget_terms, Sense::Le, cap)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Load, TimeGrid};

    fn one_load(power: Vec<f64>) -> (DemandSeries, LoadSet) {
        let grid = TimeGrid::new(24.0 / power.len() as f64, power.len(), 1).unwrap();
        (
            DemandSeries::new(grid, vec![power]).unwrap(),
            LoadSet::new(vec![Load::new("l", 1.0)]).unwrap(),
        )
    }

    #[test]
    fn shape_of_model() {
        let (demand, loads) = one_load(vec![100.0, 0.0, 50.0, 0.0]);
        let m = build_obm(&demand, &loads, &Tariff::new(0.001).unwrap(), &Budget::new(1.0).unwrap()).unwrap();
        assert_eq!(m.num_variables(), 2);
        assert_eq!(m.num_binaries(), 2);
        assert_eq!(m.var_index("a_1_1"), Some(0));
        assert_eq!(m.var_index("a_1_3"), Some(1));
        assert_eq!(m.var_index("a_1_2"), None);
        let c = &m.constraints()[0];
        assert_eq!(c.sense, Sense::Le);
        // 6 h steps: 100 W * 6 h * 0.001 $/Wh = 0.6 $.
        assert!((c.terms[0].1 - 0.6).abs() < 1e-12);
        assert!((c.terms[1].1 - 0.3).abs() < 1e-12);
        assert!(c.rhs < 1.0 && c.rhs > 1.0 - 1e-8);
        assert_eq!(m.objective(), &[(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn empty_demand_gives_empty_model() {
        let (demand, loads) = one_load(vec![0.0; 4]);
        let m = build_obm(&demand, &loads, &Tariff::new(0.001).unwrap(), &Budget::new(1.0).unwrap()).unwrap();
        assert_eq!(m.num_variables(), 0);
        assert!(m.constraints().is_empty());
    }
}
