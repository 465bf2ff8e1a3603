//! Drives the `ration` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ration(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ration")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, data_source: serde_json::Value, extra: serde_json::Value) -> String {
    let mut cfg = serde_json::json!({
        "data_source": data_source,
        "loads": [
            {"name": "refrigerator", "gamma": 0.48},
            {"name": "air_compressor", "gamma": 0.24},
            {"name": "microwave", "gamma": 0.16},
            {"name": "washing_machine", "gamma": 0.12}
        ],
        "alpha": 0.00016,
        "step_minutes": 60,
        "horizon_days": 2,
        "budget_fractions": [0.8],
        "forecast_regimes": ["perfect_detailed", "imperfect_detailed"],
        "policies": ["AFG", "OBM", "BSL"],
        "output_dir": dir.join("out"),
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn synth_then_run_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("house.csv");
    let out = ration(&["synth", "--seed", "4", "--days", "3", "--step-minutes", "60", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("timestamp,refrigerator,air_compressor,microwave,washing_machine"));
    assert_eq!(text.lines().count(), 1 + 3 * 24);

    // Relative data paths resolve against the config's directory.
    let cfg = write_config(
        dir.path(),
        serde_json::json!({"kind": "csv", "path": "house.csv"}),
        serde_json::json!({"day_offset": 1}),
    );
    assert!(ration(&["validate", "--config", &cfg]).status.success());
    let alt = dir.path().join("alt");
    let out = ration(&["run", "--config", &cfg, "--out", alt.to_str().unwrap(), "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary = fs::read_to_string(alt.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3);
    assert!(summary.lines().next().unwrap().ends_with("sf_microwave,sf_washing_machine"));
    let table2 = fs::read_to_string(alt.join("table2.csv")).unwrap();
    assert!(table2.starts_with(
        "balance,perfect_detailed_AFG,perfect_detailed_DFM,perfect_detailed_OBM,perfect_limited_AFG"
    ));
    assert!(table2.lines().nth(1).unwrap().starts_with("80%,"));
    for f in ["table3.csv", "plotdata_perfect.csv", "plotdata_imperfect.csv"] {
        assert!(alt.join(f).is_file(), "{f}");
    }
    assert!(alt.join("traces/f0.8_perfect_detailed_AFG.csv").is_file());
    assert!(alt.join("setpoints/f0.8_perfect_detailed_OBM.csv").is_file());
    assert!(!dir.path().join("out").exists(), "--out overrides output_dir");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let synthetic = serde_json::json!({"kind": "synthetic", "seed": 1, "days": 2});

    let bad = write_config(dir.path(), synthetic.clone(), serde_json::json!({"budget_fractions": [1.5]}));
    let out = ration(&["validate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget fraction"));

    // Synthetic data needs a profile for every load.
    assert_eq!(ration(&["run", "--config", &bad]).status.code(), Some(2));
    let no_profiles = write_config(dir.path(), synthetic, serde_json::json!({}));
    assert_eq!(ration(&["validate", "--config", &no_profiles]).status.code(), Some(2));

    let missing = write_config(dir.path(), serde_json::json!({"kind": "csv", "path": "absent.csv"}), serde_json::json!({}));
    assert_eq!(ration(&["run", "--config", &missing]).status.code(), Some(3));

    fs::write(dir.path().join("short.csv"), "timestamp,refrigerator\n2000-01-01T00:00:00,1\n").unwrap();
    let short = write_config(dir.path(), serde_json::json!({"kind": "csv", "path": "short.csv"}), serde_json::json!({}));
    assert_eq!(ration(&["run", "--config", &short]).status.code(), Some(3));

    assert_eq!(ration(&["validate", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn external_solver_flag_without_solver_falls_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        serde_json::json!({"kind": "synthetic", "seed": 2, "days": 2}),
        serde_json::json!({
            "loads": [
                {"name": "a", "gamma": 0.7, "profile": {"rated_power_w": 200, "on_probability": 1, "mean_on_hours": 3}},
                {"name": "b", "gamma": 0.3, "profile": {"rated_power_w": 900, "on_probability": 0.5, "mean_on_hours": 1}}
            ],
            "policies": ["DFM", "BSL"],
            "write_traces": false
        }),
    );
    let out = ration(&["run", "--config", &cfg, "--solver-cmd", "/nonexistent/solver {lp} {sol}"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    let dfm: Vec<&str> = summary.lines().filter(|l| l.contains(",DFM,")).collect();
    assert_eq!(dfm.len(), 2);
    assert!(dfm.iter().all(|l| l.contains(",ok,") && l.contains(",grid,")), "{summary}");
    assert!(!dir.path().join("out/traces").exists());
}
