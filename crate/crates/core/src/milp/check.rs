use super::{MilpError, MilpModel, Sense, Solution, VarKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Constraint name, or `bound:<var>` / `integrality:<var>`.
    pub constraint: String,
    /// Amount by which the condition is missed.
    pub residual: f64,
}

/// Evaluates every constraint, bound and integrality requirement of `model`
/// at `solution` and returns those missed by more than `tol`.
pub fn check_feasibility(model: &MilpModel, solution: &Solution, tol: f64) -> Result<Vec<Violation>, MilpError> {
    let values = model.values_of(solution)?;
    let mut out = Vec::new();
    for c in model.constraints() {
        let lhs = c.lhs(&values);
        let residual = match c.sense {
            Sense::Le => lhs - c.rhs,
            Sense::Ge => c.rhs - lhs,
            Sense::Eq => (lhs - c.rhs).abs(),
        };
        if residual > tol || residual.is_nan() {
            out.push(Violation { constraint: c.name.clone(), residual });
        }
    }
    for (v, &x) in model.variables().iter().zip(&values) {
        let residual = (v.lower - x).max(x - v.upper);
        if residual > tol || x.is_nan() {
            out.push(Violation { constraint: format!("bound:{}", v.name), residual });
        }
        if v.kind == VarKind::Binary {
            let residual = (x - x.round()).abs();
            if residual > tol {
                out.push(Violation { constraint: format!("integrality:{}", v.name), residual });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::SolveStatus;

    #[test]
    fn reports_each_kind() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a", "a").unwrap();
        let y = m.add_continuous("y", 0.0, 2.0, "y").unwrap();
        m.add_constraint("sum", vec![(a, 1.0), (y, 1.0)], Sense::Le, 2.0).unwrap();
        m.add_constraint("eq", vec![(y, 1.0)], Sense::Eq, 1.5).unwrap();
        let sol = |a: f64, y: f64| Solution {
            values: [("a".to_string(), a), ("y".to_string(), y)].into(),
            objective: 0.0,
            status: SolveStatus::Feasible,
            message: None,
        };
        assert!(check_feasibility(&m, &sol(0.0, 1.5), 1e-9).unwrap().is_empty());
        let v = check_feasibility(&m, &sol(0.6, 3.0), 1e-9).unwrap();
        let names: Vec<&str> = v.iter().map(|v| v.constraint.as_str()).collect();
        assert_eq!(names, ["sum", "eq", "integrality:a", "bound:y"]);
        assert!((v[0].residual - 1.6).abs() < 1e-12);

        let missing = Solution { values: [("a".to_string(), 0.0)].into(), ..sol(0.0, 0.0) };
        assert!(matches!(check_feasibility(&m, &missing, 1e-9), Err(MilpError::MissingVariable(n)) if n == "y"));
    }
}
