//! Solver-agnostic MILP models for the detailed-forecast threshold problem
//! (DFM) and the schedule benchmark (OBM), with desk-scale backends, an LP
//! file writer, an external-solver bridge and a feasibility checker.
//!
//! Variable names are 1-based: `z_t`, `x_t`, `thr_k_d`, `uz_k_t`, `ux_k_t`,
//! `a_k_t`.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use thiserror::Error;

use crate::model::ModelError;
use crate::sim::SimError;

mod check;
mod dfm;
mod external;
mod knapsack;
mod lp;
mod obm;

pub use check::{check_feasibility, Violation};
pub use dfm::{build_dfm, default_recharge, plan_from_solution, solve_dfm_grid, MilpConstants};
pub use external::solve_external;
pub use knapsack::{solve_knapsack_bb, NODE_LIMIT};
pub use lp::{to_lp_string, write_lp};
pub use obm::build_obm;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("infeasible constants: {0}")]
    InfeasibleConstants(String),
    #[error("model is not a 0/1 knapsack: {0}")]
    StructureMismatch(String),
    #[error("{candidates} threshold candidates exceed the cap of {cap}")]
    InstanceTooLarge { candidates: u128, cap: u64 },
    #[error("duplicate variable {0}")]
    DuplicateVariable(String),
    #[error("constraint {0} references an undeclared variable or has no terms")]
    BadConstraint(String),
    #[error("solution has no value for {0}")]
    MissingVariable(String),
    #[error("solver executable not found: {0}")]
    SolverNotFound(String),
    #[error("solution file line {line}: cannot parse {text:?}")]
    SolutionParseError { line: usize, text: String },
    #[error("solver exceeded {0:?}")]
    Timeout(Duration),
    #[error("solver command template is empty or lacks {{lp}}/{{sol}}")]
    BadTemplate,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    /// Mathematical symbol, e.g. `u^z_{1,3}`.
    pub symbol: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// `(variable index, coefficient)`.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * values[i]).sum()
    }
}

/// A maximisation problem over continuous and binary variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(usize, f64)>,
    index: HashMap<String, usize>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        symbol: impl Into<String>,
    ) -> Result<usize, MilpError> {
        self.add_variable(Variable {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
            symbol: symbol.into(),
        })
    }

    pub fn add_binary(&mut self, name: impl Into<String>, symbol: impl Into<String>) -> Result<usize, MilpError> {
        self.add_variable(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
            symbol: symbol.into(),
        })
    }

    fn add_variable(&mut self, var: Variable) -> Result<usize, MilpError> {
        if self.index.contains_key(&var.name) {
            return Err(MilpError::DuplicateVariable(var.name));
        }
        let i = self.variables.len();
        self.index.insert(var.name.clone(), i);
        self.variables.push(var);
        Ok(i)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<(), MilpError> {
        let name = name.into();
        if terms.is_empty() || terms.iter().any(|&(i, _)| i >= self.variables.len()) {
            return Err(MilpError::BadConstraint(name));
        }
        self.constraints.push(Constraint { name, terms, sense, rhs });
        Ok(())
    }

    /// Adds `coef` to the objective coefficient of variable `i`.
    pub fn add_objective(&mut self, i: usize, coef: f64) {
        assert!(i < self.variables.len(), "objective term on undeclared variable");
        self.objective.push((i, coef));
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(usize, f64)] {
        &self.objective
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn evaluate_objective(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(i, c)| c * values[i]).sum()
    }

    /// Values in declaration order; fails on the first missing name.
    pub fn values_of(&self, solution: &Solution) -> Result<Vec<f64>, MilpError> {
        self.variables
            .iter()
            .map(|v| {
                solution
                    .values
                    .get(&v.name)
                    .copied()
                    .ok_or_else(|| MilpError::MissingVariable(v.name.clone()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: BTreeMap<String, f64>,
    pub objective: f64,
    pub status: SolveStatus,
    /// Solver output or a note from the backend.
    pub message: Option<String>,
}

impl Solution {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn is_usable(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Feasible)
    }

    fn failed(status: SolveStatus, message: String) -> Self {
        Self {
            values: BTreeMap::new(),
            objective: f64::NAN,
            status,
            message: Some(message),
        }
    }
}

pub fn actuation_name(k: usize, t: usize) -> String {
    format!("a_{}_{}", k + 1, t + 1)
}

/// Reads `a_k_t` values (> 0.5 means on); absent names count as off.
pub fn decode_actuation(solution: &Solution, num_loads: usize, steps: usize) -> Vec<Vec<bool>> {
    (0..num_loads)
        .map(|k| {
            (0..steps)
                .map(|t| solution.value(&actuation_name(k, t)).is_some_and(|v| v > 0.5))
                .collect()
        })
        .collect()
}
