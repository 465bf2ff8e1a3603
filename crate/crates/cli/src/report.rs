//! CSV outputs of a sweep.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use ration_core::sim::SimResult;

use crate::config::{Policy, Regime};
use crate::experiment::{CellResult, Results, Setpoints};
use crate::CliError;

const TABLE_POLICIES: [Policy; 3] = [Policy::AFG, Policy::DFM, Policy::OBM];

/// `x` rounded to three significant figures, without exponent.
pub fn sig3(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    // Round via scientific notation first so 9.996 becomes 10.0, not 10.00.
    let rounded: f64 = format!("{x:.2e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    let decimals = (2 - rounded.abs().log10().floor() as i32).max(0) as usize;
    format!("{rounded:.decimals$}")
}

fn percent_label(fraction: f64) -> String {
    let s = sig3(fraction * 100.0);
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
    format!("{s}%")
}

fn opt(x: Option<impl ToString>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn cell_stem(c: &CellResult) -> String {
    format!("f{}_{}_{}", c.fraction, c.regime.label(), c.policy.label())
}

/// Writes every report file under `dir` and returns the files written.
pub fn emit_outputs(results: &Results, dir: &Path) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = vec![
        write_summary(results, &dir.join("summary.csv"))?,
        write_table2(results, &dir.join("table2.csv"))?,
        write_table3(results, &dir.join("table3.csv"))?,
    ];
    written.extend(write_plotdata(results, dir)?);
    if results.write_traces {
        fs::create_dir_all(dir.join("traces"))?;
        fs::create_dir_all(dir.join("setpoints"))?;
        for c in &results.cells {
            if let Some(sim) = &c.sim {
                let name = format!("traces/{}.csv", cell_stem(c));
                write_trace(sim, results, &dir.join(&name))?;
                written.push(name);
            }
            let name = format!("setpoints/{}.csv", cell_stem(c));
            match &c.setpoints {
                Setpoints::Thresholds(plan) => {
                    plan.write_csv(&results.loads, BufWriter::new(File::create(dir.join(&name))?))?;
                    written.push(name);
                }
                Setpoints::Schedule(s) => {
                    write_schedule(s, results, &dir.join(&name))?;
                    written.push(name);
                }
                Setpoints::None => {}
            }
        }
    }
    Ok(written)
}

fn write_summary(r: &Results, path: &Path) -> Result<String, CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = [
        "fraction",
        "regime",
        "policy",
        "status",
        "psf",
        "improvement_pp",
        "spend",
        "final_balance",
        "disconnection_days",
        "first_disconnect_step",
        "solver_objective",
        "backend",
    ]
    .map(String::from)
    .to_vec();
    header.extend(r.loads.iter().map(|l| format!("sf_{}", l.name)));
    w.write_record(&header)?;
    for c in &r.cells {
        let sim = c.sim.as_ref();
        let mut row = vec![
            c.fraction.to_string(),
            c.regime.label().into(),
            c.policy.label().into(),
            c.status.label().into(),
            opt(sim.map(|s| s.psf)),
            opt(c.improvement_pp),
            opt(sim.map(|s| s.total_spend)),
            opt(sim.map(|s| s.final_real_balance)),
            opt(sim.map(|s| s.disconnection_days)),
            opt(sim.and_then(|s| s.first_disconnect_step)),
            opt(c.solver_objective),
            c.backend.into(),
        ];
        for k in 0..r.loads.len() {
            row.push(opt(sim.and_then(|s| s.sf[k])));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok("summary.csv".into())
}

fn improvement(r: &Results, fi: usize, regime: Regime, policy: Policy) -> String {
    opt(r.cell(fi, regime, policy).and_then(|c| c.improvement_pp).map(sig3))
}

fn psf_with_pp(r: &Results, fi: usize, regime: Regime, policy: Policy) -> [String; 2] {
    let c = r.cell(fi, regime, policy);
    [
        opt(c.and_then(|c| c.sim.as_ref()).map(|s| sig3(s.psf * 100.0))),
        opt(c.and_then(|c| c.improvement_pp).map(sig3)),
    ]
}

/// Improvement over baseline under perfect forecasts, one row per balance.
fn write_table2(r: &Results, path: &Path) -> Result<String, CliError> {
    let regimes = [Regime::PerfectDetailed, Regime::PerfectLimited];
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["balance".to_string()];
    for g in regimes {
        header.extend(TABLE_POLICIES.iter().map(|p| format!("{}_{}", g.label(), p.label())));
    }
    w.write_record(&header)?;
    for (fi, &f) in r.fractions.iter().enumerate() {
        let mut row = vec![percent_label(f)];
        for g in regimes {
            row.extend(TABLE_POLICIES.iter().map(|&p| improvement(r, fi, g, p)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok("table2.csv".into())
}

/// PSF in percent and improvement under imperfect forecasts, with the
/// baseline PSF and its disconnection days.
fn write_table3(r: &Results, path: &Path) -> Result<String, CliError> {
    let regimes = [Regime::ImperfectDetailed, Regime::ImperfectLimited];
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["balance".to_string()];
    for g in regimes {
        for p in TABLE_POLICIES {
            header.push(format!("{}_{}_psf", g.label(), p.label()));
            header.push(format!("{}_{}_pp", g.label(), p.label()));
        }
    }
    header.push("BSL_psf".into());
    header.push("BSL_days".into());
    w.write_record(&header)?;
    for (fi, &f) in r.fractions.iter().enumerate() {
        let mut row = vec![percent_label(f)];
        for g in regimes {
            for p in TABLE_POLICIES {
                row.extend(psf_with_pp(r, fi, g, p));
            }
        }
        row.push(sig3(r.baseline[fi].psf * 100.0));
        row.push(r.baseline[fi].disconnection_days.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok("table3.csv".into())
}

/// Long-format bar-chart series: improvement for perfect forecasts, PSF in
/// percent for imperfect ones.
fn write_plotdata(r: &Results, dir: &Path) -> Result<[String; 2], CliError> {
    let mut perfect = csv::Writer::from_path(dir.join("plotdata_perfect.csv"))?;
    let mut imperfect = csv::Writer::from_path(dir.join("plotdata_imperfect.csv"))?;
    perfect.write_record(["balance", "regime", "policy", "improvement_pp"])?;
    imperfect.write_record(["balance", "regime", "policy", "psf_percent"])?;
    for c in &r.cells {
        let balance = percent_label(c.fraction);
        if c.regime.is_perfect() {
            if c.policy != Policy::BSL {
                perfect.write_record([&balance, c.regime.label(), c.policy.label(), &opt(c.improvement_pp)])?;
            }
        } else {
            let psf = opt(c.sim.as_ref().map(|s| s.psf * 100.0));
            imperfect.write_record([&balance, c.regime.label(), c.policy.label(), &psf])?;
        }
    }
    perfect.flush()?;
    imperfect.flush()?;
    Ok(["plotdata_perfect.csv".into(), "plotdata_imperfect.csv".into()])
}

fn write_trace(sim: &SimResult, r: &Results, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string(), "z".into(), "x".into()];
    header.extend(r.loads.iter().map(|l| format!("a_{}", l.name)));
    w.write_record(&header)?;
    for t in 0..sim.real_balance.len() {
        let mut row = vec![
            t.to_string(),
            sim.real_balance[t].to_string(),
            opt(sim.virtual_balance.as_ref().map(|x| x[t])),
        ];
        row.extend(sim.actuation.iter().map(|a| u8::from(a[t]).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_schedule(schedule: &[Vec<bool>], r: &Results, path: &Path) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    let names: Vec<&str> = r.loads.names();
    writeln!(out, "t,{}", names.join(","))?;
    for t in 0..schedule.first().map_or(0, Vec::len) {
        let row: Vec<&str> = schedule.iter().map(|a| if a[t] { "1" } else { "0" }).collect();
        writeln!(out, "{t},{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}
