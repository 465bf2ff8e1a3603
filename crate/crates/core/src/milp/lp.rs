use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{MilpError, MilpModel, Sense, VarKind};

/// Soft line width; long expressions continue on indented lines.
const LINE_WIDTH: usize = 100;

fn number(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn push_expression(out: &mut String, head: &str, model: &MilpModel, terms: &[(usize, f64)], tail: &str) {
    let mut line = head.to_string();
    for &(i, c) in terms {
        let sign = if c.is_sign_negative() { '-' } else { '+' };
        let term = format!(" {sign} {} {}", number(c.abs()), model.variables()[i].name);
        if line.len() + term.len() > LINE_WIDTH && line.len() > head.len() {
            out.push_str(&line);
            out.push('\n');
            line = "   ".to_string();
        }
        line.push_str(&term);
    }
    line.push_str(tail);
    out.push_str(&line);
    out.push('\n');
}

/// Renders `model` in CPLEX LP format. Every continuous variable is listed
/// under `Bounds` and every binary under `Binary`.
pub fn to_lp_string(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("Maximize\n");
    push_expression(&mut out, " obj:", model, model.objective(), "");
    out.push_str("Subject To\n");
    for c in model.constraints() {
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        push_expression(&mut out, &format!(" {}:", c.name), model, &c.terms, &format!(" {op} {}", number(c.rhs)));
    }
    out.push_str("Bounds\n");
    for v in model.variables().iter().filter(|v| v.kind == VarKind::Continuous) {
        let _ = writeln!(out, " {} <= {} <= {}", number(v.lower), v.name, number(v.upper));
    }
    out.push_str("Binary\n");
    for v in model.variables().iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}

pub fn write_lp(model: &MilpModel, path: &Path) -> Result<(), MilpError> {
    fs::write(path, to_lp_string(model))?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod parse {
    //! Minimal reader for the subset written above, used to check round trips.

    use std::collections::BTreeMap;

    #[derive(Debug, Default)]
    pub struct ParsedLp {
        pub objective: BTreeMap<String, f64>,
        /// `(name, terms, sense, rhs)`.
        pub constraints: Vec<(String, BTreeMap<String, f64>, String, f64)>,
        pub bounds: BTreeMap<String, (f64, f64)>,
        pub binaries: Vec<String>,
        pub sections: Vec<String>,
    }

    fn num(s: &str) -> f64 {
        match s {
            "+inf" | "inf" => f64::INFINITY,
            "-inf" => f64::NEG_INFINITY,
            _ => s.parse().unwrap_or_else(|_| panic!("bad number {s}")),
        }
    }

    fn terms(tokens: &[&str]) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for chunk in tokens.chunks(3) {
            let sign = if chunk[0] == "-" { -1.0 } else { 1.0 };
            *out.entry(chunk[2].to_string()).or_insert(0.0) += sign * num(chunk[1]);
        }
        out
    }

    pub fn parse(text: &str) -> ParsedLp {
        let mut lp = ParsedLp::default();
        let mut statements: Vec<(String, String)> = Vec::new();
        let mut section = String::new();
        for line in text.lines() {
            if !line.starts_with(' ') {
                section = line.trim().to_string();
                lp.sections.push(section.clone());
            } else if line.starts_with("   ") {
                statements.last_mut().unwrap().1.push_str(line);
            } else {
                statements.push((section.clone(), line.to_string()));
            }
        }
        for (section, stmt) in statements {
            let tokens: Vec<&str> = stmt.split_whitespace().collect();
            match section.as_str() {
                "Maximize" => lp.objective = terms(&tokens[1..]),
                "Subject To" => {
                    let n = tokens.len();
                    lp.constraints.push((
                        tokens[0].trim_end_matches(':').to_string(),
                        terms(&tokens[1..n - 2]),
                        tokens[n - 2].to_string(),
                        num(tokens[n - 1]),
                    ));
                }
                "Bounds" => {
                    lp.bounds.insert(tokens[2].to_string(), (num(tokens[0]), num(tokens[4])));
                }
                "Binary" => lp.binaries.push(tokens[0].to_string()),
                other => panic!("statement in section {other}"),
            }
        }
        lp
    }
}

#[cfg(test)]
mod tests {
    use super::parse::parse;
    use super::*;
    use crate::milp::{build_dfm, build_obm, MilpConstants};
    use crate::model::{Budget, DemandSeries, Load, LoadSet, Tariff, TimeGrid};

    fn instance() -> (DemandSeries, LoadSet, Tariff, Budget) {
        let grid = TimeGrid::new(6.0, 4, 1).unwrap();
        let demand = DemandSeries::new(grid, vec![vec![100.0, 0.0, 250.0, 80.0], vec![40.0; 4]]).unwrap();
        let loads = LoadSet::new(vec![Load::new("a", 0.6), Load::new("b", 0.4)]).unwrap();
        (demand, loads, Tariff::new(0.001).unwrap(), Budget::new(1.0).unwrap())
    }

    #[test]
    fn dfm_round_trip() {
        let (demand, loads, tariff, budget) = instance();
        let c = MilpConstants::for_instance(&demand, &tariff, &budget);
        let model = build_dfm(&demand, &loads, &tariff, &budget, &c, 1.0).unwrap();
        let text = to_lp_string(&model);
        let lp = parse(&text);
        assert_eq!(lp.sections, ["Maximize", "Subject To", "Bounds", "Binary", "End"]);
        assert_eq!(text.matches("Maximize").count(), 1);
        assert_eq!(lp.constraints.len(), model.constraints().len());
        assert_eq!(lp.bounds.len() + lp.binaries.len(), model.num_variables());
        for (parsed, c) in lp.constraints.iter().zip(model.constraints()) {
            assert_eq!(parsed.0, c.name);
            assert_eq!(parsed.3, c.rhs);
            for &(i, coef) in &c.terms {
                assert_eq!(parsed.1[&model.variables()[i].name], coef);
            }
        }
        assert_eq!(lp.bounds["z_1"], (f64::NEG_INFINITY, f64::INFINITY));
        assert_eq!(lp.bounds["thr_1_1"], (0.0, c.big_m));
        assert_eq!(lp.objective["a_1_1"], 0.6 / 3.0);
        assert!(text.lines().all(|l| l.len() <= LINE_WIDTH + 40));
        assert_eq!(text, to_lp_string(&model));
    }

    #[test]
    fn obm_variable_names_are_listed() {
        let (demand, loads, tariff, budget) = instance();
        let model = build_obm(&demand, &loads, &tariff, &budget).unwrap();
        let lp = parse(&to_lp_string(&model));
        assert_eq!(lp.binaries.len(), 7);
        assert!(lp.bounds.is_empty());
        assert_eq!(lp.constraints.len(), 1);
        assert_eq!(lp.constraints[0].1.len(), 7);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lp");
        write_lp(&model, &path).unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap(), to_lp_string(&model));
    }

    #[test]
    fn long_rows_wrap() {
        let grid = TimeGrid::new(1.0, 24, 1).unwrap();
        let demand = DemandSeries::new(grid, vec![vec![123.456; 24]]).unwrap();
        let loads = LoadSet::new(vec![Load::new("a", 1.0)]).unwrap();
        let model = build_obm(&demand, &loads, &Tariff::new(0.001).unwrap(), &Budget::new(1.0).unwrap()).unwrap();
        let text = to_lp_string(&model);
        assert!(text.lines().any(|l| l.starts_with("   ")));
        assert_eq!(parse(&text).constraints[0].1.len(), 24);
    }
}
