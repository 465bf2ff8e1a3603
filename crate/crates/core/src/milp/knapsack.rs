use std::collections::BTreeMap;

use log::warn;

use super::{MilpError, MilpModel, Sense, Solution, SolveStatus, VarKind};

/// Search nodes explored before giving up on proving optimality.
pub const NODE_LIMIT: u64 = 50_000_000;

/// Items sharing value and weight, branched on as a count.
struct Class {
    value: f64,
    weight: f64,
    members: Vec<usize>,
}

/// Exact depth-first branch-and-bound for a single-constraint 0/1 knapsack
/// (the shape produced by [`super::build_obm`]).
///
/// Identical items are grouped so that symmetric subsets are explored once.
/// The bound is the fractional relaxation over the remaining classes sorted
/// by value/weight. If [`NODE_LIMIT`] is hit the incumbent is returned with
/// status `Feasible`.
pub fn solve_knapsack_bb(model: &MilpModel) -> Result<Solution, MilpError> {
    let n = model.num_variables();
    if let Some(v) = model.variables().iter().find(|v| v.kind != VarKind::Binary) {
        return Err(MilpError::StructureMismatch(format!("{} is not binary", v.name)));
    }
    let mut value = vec![0.0; n];
    for &(i, c) in model.objective() {
        value[i] += c;
    }
    if let Some(i) = value.iter().position(|&v| v < 0.0 || !v.is_finite()) {
        return Err(MilpError::StructureMismatch(format!(
            "objective coefficient of {} is {}",
            model.variables()[i].name,
            value[i]
        )));
    }
    let (weight, capacity) = match model.constraints() {
        [] => (vec![0.0; n], f64::INFINITY),
        [c] => {
            if c.sense != Sense::Le {
                return Err(MilpError::StructureMismatch(format!("{} is not a <= constraint", c.name)));
            }
            let mut w = vec![0.0; n];
            for &(i, a) in &c.terms {
                w[i] += a;
            }
            if let Some(i) = w.iter().position(|&a| a < 0.0 || !a.is_finite()) {
                return Err(MilpError::StructureMismatch(format!(
                    "weight of {} is {}",
                    model.variables()[i].name,
                    w[i]
                )));
            }
            (w, c.rhs)
        }
        _ => {
            return Err(MilpError::StructureMismatch(format!(
                "{} constraints, expected one",
                model.constraints().len()
            )))
        }
    };
    if capacity < 0.0 {
        return Ok(Solution::failed(SolveStatus::Infeasible, "negative capacity".into()));
    }

    let mut chosen = vec![false; n];
    let mut classes = group(&value, &weight, capacity, &mut chosen);
    classes.sort_by(|a, b| {
        let ra = a.value / a.weight;
        let rb = b.value / b.weight;
        rb.total_cmp(&ra)
            .then(b.value.total_cmp(&a.value))
            .then(a.members[0].cmp(&b.members[0]))
    });
    let mut search = Search::new(&classes);
    let proven = search.run(capacity);
    for (class, &count) in classes.iter().zip(&search.best_counts) {
        for &i in &class.members[..count] {
            chosen[i] = true;
        }
    }
    if !proven {
        warn!("knapsack search stopped after {NODE_LIMIT} nodes; returning incumbent");
    }

    let values: BTreeMap<String, f64> = model
        .variables()
        .iter()
        .zip(&chosen)
        .map(|(v, &c)| (v.name.clone(), if c { 1.0 } else { 0.0 }))
        .collect();
    let x: Vec<f64> = chosen.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    Ok(Solution {
        values,
        objective: model.evaluate_objective(&x),
        status: if proven { SolveStatus::Optimal } else { SolveStatus::Feasible },
        message: None,
    })
}

/// Weightless items are taken outright, items heavier than the capacity and
/// worthless items are dropped; the rest are grouped.
fn group(value: &[f64], weight: &[f64], capacity: f64, chosen: &mut [bool]) -> Vec<Class> {
    let mut classes: Vec<Class> = Vec::new();
    let mut by_key: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for i in 0..value.len() {
        if weight[i] == 0.0 {
            chosen[i] = true;
            continue;
        }
        if weight[i] > capacity || value[i] == 0.0 {
            continue;
        }
        let key = (value[i].to_bits(), weight[i].to_bits());
        match by_key.get(&key) {
            Some(&c) => classes[c].members.push(i),
            None => {
                by_key.insert(key, classes.len());
                classes.push(Class { value: value[i], weight: weight[i], members: vec![i] });
            }
        }
    }
    classes
}

struct Frame {
    class: usize,
    capacity: f64,
    value: f64,
    /// Count to try next; `None` once exhausted.
    next: Option<usize>,
}

struct Search<'a> {
    classes: &'a [Class],
    counts: Vec<usize>,
    best_counts: Vec<usize>,
    best_value: f64,
    nodes: u64,
}

impl<'a> Search<'a> {
    fn new(classes: &'a [Class]) -> Self {
        Self {
            classes,
            counts: vec![0; classes.len()],
            best_counts: vec![0; classes.len()],
            best_value: 0.0,
            nodes: 0,
        }
    }

    fn max_count(&self, class: usize, capacity: f64) -> usize {
        let c = &self.classes[class];
        let fit = (capacity / c.weight).floor();
        let mut n = if fit >= c.members.len() as f64 { c.members.len() } else { fit.max(0.0) as usize };
        // Guard against floor() rounding up past the capacity.
        while n > 0 && n as f64 * c.weight > capacity {
            n -= 1;
        }
        n
    }

    fn bound(&self, from: usize, mut capacity: f64, mut value: f64) -> f64 {
        for c in &self.classes[from..] {
            let total = c.weight * c.members.len() as f64;
            if total <= capacity {
                capacity -= total;
                value += c.value * c.members.len() as f64;
            } else {
                return value + c.value * (capacity / c.weight);
            }
        }
        value
    }

    /// Returns `false` if the node limit stopped the search early.
    fn run(&mut self, capacity: f64) -> bool {
        let k = self.classes.len();
        if k == 0 {
            return true;
        }
        let first = self.max_count(0, capacity);
        let mut stack = vec![Frame { class: 0, capacity, value: 0.0, next: Some(first) }];
        while let Some(frame) = stack.last_mut() {
            let Some(count) = frame.next else {
                stack.pop();
                continue;
            };
            frame.next = count.checked_sub(1);
            let class = frame.class;
            let c = &self.classes[class];
            let capacity = frame.capacity - count as f64 * c.weight;
            let value = frame.value + count as f64 * c.value;
            self.counts[class] = count;

            self.nodes += 1;
            if self.nodes > NODE_LIMIT {
                return false;
            }
            if class + 1 == k {
                if value > self.best_value {
                    self.best_value = value;
                    self.best_counts.copy_from_slice(&self.counts);
                }
                continue;
            }
            // Fewer copies of the best-ratio class only lower the bound, so
            // the remaining counts of this frame can be skipped as well.
            if self.bound(class + 1, capacity, value) <= self.best_value {
                stack.last_mut().unwrap().next = None;
                continue;
            }
            let next = self.max_count(class + 1, capacity);
            for later in &mut self.counts[class + 1..] {
                *later = 0;
            }
            stack.push(Frame { class: class + 1, capacity, value, next: Some(next) });
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::build_obm;
    use crate::model::{Budget, DemandSeries, Load, LoadSet, Tariff, TimeGrid};
    use proptest::prelude::*;

    fn knapsack(items: &[(f64, f64)], capacity: f64) -> MilpModel {
        let mut m = MilpModel::new();
        let mut terms = Vec::new();
        for (j, &(v, w)) in items.iter().enumerate() {
            let i = m.add_binary(format!("y{j}"), format!("y_{j}")).unwrap();
            m.add_objective(i, v);
            terms.push((i, w));
        }
        if !items.is_empty() {
            m.add_constraint("cap", terms, Sense::Le, capacity).unwrap();
        }
        m
    }

    fn brute_force(items: &[(f64, f64)], capacity: f64) -> f64 {
        let mut best = 0.0;
        for mask in 0u32..(1 << items.len()) {
            let (mut v, mut w) = (0.0, 0.0);
            for (j, &(vj, wj)) in items.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    v += vj;
                    w += wj;
                }
            }
            if w <= capacity && v > best {
                best = v;
            }
        }
        best
    }

    #[test]
    fn small_example() {
        let m = knapsack(&[(6.0, 4.0), (5.0, 3.0), (4.0, 2.0)], 5.0);
        let s = solve_knapsack_bb(&m).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, 9.0);
        assert_eq!(s.value("y0"), Some(0.0));
        assert_eq!(s.value("y1"), Some(1.0));
        assert_eq!(s.value("y2"), Some(1.0));
    }

    #[test]
    fn capacity_extremes() {
        let items = [(6.0, 4.0), (5.0, 3.0), (4.0, 2.0)];
        let s = solve_knapsack_bb(&knapsack(&items, 0.0)).unwrap();
        assert_eq!(s.objective, 0.0);
        assert!(s.values.values().all(|&v| v == 0.0));
        let s = solve_knapsack_bb(&knapsack(&items, 9.0)).unwrap();
        assert_eq!(s.objective, 15.0);
        assert!(s.values.values().all(|&v| v == 1.0));
        let s = solve_knapsack_bb(&knapsack(&[], 1.0)).unwrap();
        assert_eq!((s.objective, s.status), (0.0, SolveStatus::Optimal));
    }

    #[test]
    fn identical_items_are_counted() {
        let items = vec![(1.0, 1.0); 30];
        let s = solve_knapsack_bb(&knapsack(&items, 17.5)).unwrap();
        assert_eq!(s.objective, 17.0);
        assert_eq!(s.status, SolveStatus::Optimal);
    }

    #[test]
    fn structure_is_checked() {
        let mut m = knapsack(&[(1.0, 1.0)], 1.0);
        m.add_continuous("z", 0.0, 1.0, "z").unwrap();
        assert!(matches!(solve_knapsack_bb(&m), Err(MilpError::StructureMismatch(_))));
        let mut m = knapsack(&[(1.0, 1.0)], 1.0);
        m.add_constraint("other", vec![(0, 1.0)], Sense::Le, 1.0).unwrap();
        assert!(matches!(solve_knapsack_bb(&m), Err(MilpError::StructureMismatch(_))));
        let m = knapsack(&[(1.0, -1.0)], 1.0);
        assert!(matches!(solve_knapsack_bb(&m), Err(MilpError::StructureMismatch(_))));
        let m = knapsack(&[(-1.0, 1.0)], 1.0);
        assert!(matches!(solve_knapsack_bb(&m), Err(MilpError::StructureMismatch(_))));
    }

    #[test]
    fn obm_single_load_example() {
        // 3 hourly demanded steps of 1 $ each, Z = 2 $: the strict budget
        // admits one step only.
        let grid = TimeGrid::new(8.0, 3, 1).unwrap();
        let demand = DemandSeries::new(grid, vec![vec![125.0; 3]]).unwrap();
        let loads = LoadSet::new(vec![Load::new("l", 1.0)]).unwrap();
        let m = build_obm(&demand, &loads, &Tariff::new(0.001).unwrap(), &Budget::new(2.0).unwrap()).unwrap();
        let s = solve_knapsack_bb(&m).unwrap();
        assert!((s.objective - 1.0 / 3.0).abs() < 1e-12);
        let m = build_obm(&demand, &loads, &Tariff::new(0.001).unwrap(), &Budget::new(10.0).unwrap()).unwrap();
        assert!((solve_knapsack_bb(&m).unwrap().objective - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_enumeration(
            items in prop::collection::vec((0u32..40, 1u32..30), 0..14),
            cap in 0u32..200,
        ) {
            let items: Vec<(f64, f64)> = items.iter().map(|&(v, w)| (v as f64, w as f64)).collect();
            let s = solve_knapsack_bb(&knapsack(&items, cap as f64)).unwrap();
            prop_assert_eq!(s.objective, brute_force(&items, cap as f64));
            let used: f64 = items.iter().enumerate()
                .filter(|(j, _)| s.value(&format!("y{j}")) == Some(1.0))
                .map(|(_, &(_, w))| w).sum();
            prop_assert!(used <= cap as f64);
        }
    }
}
