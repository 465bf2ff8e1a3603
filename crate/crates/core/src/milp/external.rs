use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::ErrorKind;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use log::warn;

use super::{write_lp, MilpError, MilpModel, Solution, SolveStatus};

const POLL: Duration = Duration::from_millis(5);

/// Runs an external MILP solver on `model`.
///
/// `template` is split on whitespace; `{lp}` and `{sol}` inside any token
/// are replaced by the LP input path and the solution output path. No shell
/// is involved. The solver writes `name value` lines; `#` starts a comment,
/// and a `# status <optimal|feasible|infeasible>` line sets the status.
/// Unknown names are ignored with a warning and missing ones read as 0.
pub fn solve_external(model: &MilpModel, template: &str, timeout: Duration) -> Result<Solution, MilpError> {
    if template.split_whitespace().next().is_none() || !template.contains("{lp}") || !template.contains("{sol}") {
        return Err(MilpError::BadTemplate);
    }
    let dir = tempfile::tempdir()?;
    let lp_path = dir.path().join("model.lp");
    let sol_path = dir.path().join("model.sol");
    write_lp(model, &lp_path)?;
    let args: Vec<String> = template
        .split_whitespace()
        .map(|tok| {
            tok.replace("{lp}", &lp_path.to_string_lossy())
                .replace("{sol}", &sol_path.to_string_lossy())
        })
        .collect();

    let stdout_path = dir.path().join("stdout.txt");
    let stderr_path = dir.path().join("stderr.txt");
    let mut child = match Command::new(&args[0])
        .args(&args[1..])
        .stdin(Stdio::null())
        .stdout(File::create(&stdout_path)?)
        .stderr(File::create(&stderr_path)?)
        .spawn()
    {
        Ok(child) => child,
        Err(e) if e.kind() == ErrorKind::NotFound => return Err(MilpError::SolverNotFound(args[0].clone())),
        Err(e) => return Err(e.into()),
    };
    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() > timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(MilpError::Timeout(timeout));
        }
        thread::sleep(POLL);
    };
    if !status.success() {
        let mut output = fs::read_to_string(&stderr_path).unwrap_or_default();
        output.push_str(&fs::read_to_string(&stdout_path).unwrap_or_default());
        return Ok(Solution::failed(SolveStatus::Error, format!("solver exited with {status}: {}", output.trim())));
    }
    read_solution(model, &sol_path)
}

fn read_solution(model: &MilpModel, path: &Path) -> Result<Solution, MilpError> {
    let text = fs::read_to_string(path)?;
    let mut status = SolveStatus::Optimal;
    let mut parsed: BTreeMap<String, f64> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let words: Vec<&str> = comment.split_whitespace().collect();
            if let ["status", s] = words.as_slice() {
                status = match s.to_ascii_lowercase().as_str() {
                    "optimal" => SolveStatus::Optimal,
                    "feasible" => SolveStatus::Feasible,
                    "infeasible" => SolveStatus::Infeasible,
                    _ => SolveStatus::Error,
                };
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let bad = || MilpError::SolutionParseError { line: n + 1, text: raw.to_string() };
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let value: f64 = value.parse().map_err(|_| bad())?;
        if model.var_index(name).is_none() {
            warn!("solution names unknown variable {name}; ignored");
            continue;
        }
        parsed.insert(name.to_string(), value);
    }
    if !matches!(status, SolveStatus::Optimal | SolveStatus::Feasible) {
        return Ok(Solution::failed(status, format!("solver reported {status:?}")));
    }
    let mut values = Vec::with_capacity(model.num_variables());
    let mut missing = 0;
    for v in model.variables() {
        values.push(parsed.get(&v.name).copied().unwrap_or_else(|| {
            missing += 1;
            0.0
        }));
    }
    if missing > 0 {
        warn!("solution omits {missing} variables; read as 0");
    }
    Ok(Solution {
        objective: model.evaluate_objective(&values),
        values: model.variables().iter().map(|v| v.name.clone()).zip(values).collect(),
        status,
        message: None,
    })
}
