//! JSON experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ration_core::forecast::LoadProfile;
use ration_core::milp::MilpConstants;
use ration_core::model::{Load, LoadSet, Tariff, TimeGrid};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data_source: DataSource,
    pub loads: Vec<LoadConfig>,
    /// Tariff in $/Wh.
    pub alpha: f64,
    pub step_minutes: u32,
    pub horizon_days: usize,
    /// First day of the horizon within the data.
    #[serde(default)]
    pub day_offset: usize,
    pub budget_fractions: Vec<f64>,
    pub forecast_regimes: Vec<Regime>,
    #[serde(default)]
    pub shuffle_seed: u64,
    pub policies: Vec<Policy>,
    #[serde(default)]
    pub dfm_backend: DfmBackend,
    #[serde(default)]
    pub dfm_constants: ConstantsOverride,
    pub output_dir: PathBuf,
    /// Worker threads for the sweep; bounds concurrent external solves.
    #[serde(default)]
    pub max_parallel: Option<usize>,
    #[serde(default = "yes")]
    pub write_traces: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// `timestamp,<load>...` file; relative paths resolve against the
    /// config file's directory. `data_days` defaults to the row count.
    Csv {
        path: PathBuf,
        #[serde(default)]
        data_days: Option<usize>,
    },
    /// Generated from the per-load profiles.
    Synthetic { seed: u64, days: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub name: String,
    pub gamma: f64,
    #[serde(default)]
    pub profile: Option<ProfileConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub rated_power_w: f64,
    pub on_probability: f64,
    pub mean_on_hours: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    PerfectDetailed,
    PerfectLimited,
    ImperfectDetailed,
    ImperfectLimited,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::PerfectDetailed => "perfect_detailed",
            Regime::PerfectLimited => "perfect_limited",
            Regime::ImperfectDetailed => "imperfect_detailed",
            Regime::ImperfectLimited => "imperfect_limited",
        }
    }

    pub fn is_perfect(self) -> bool {
        matches!(self, Regime::PerfectDetailed | Regime::PerfectLimited)
    }

    pub fn is_detailed(self) -> bool {
        matches!(self, Regime::PerfectDetailed | Regime::ImperfectDetailed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    #[serde(alias = "afg")]
    AFG,
    #[serde(alias = "dfm")]
    DFM,
    #[serde(alias = "obm")]
    OBM,
    #[serde(alias = "bsl")]
    BSL,
}

impl Policy {
    pub fn label(self) -> &'static str {
        match self {
            Policy::AFG => "AFG",
            Policy::DFM => "DFM",
            Policy::OBM => "OBM",
            Policy::BSL => "BSL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Grid,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfmBackend {
    #[serde(default)]
    pub kind: BackendKind,
    /// Template with `{lp}` and `{sol}` placeholders (external only).
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Grid points per (load, day) in `(0, X_d]`; also used as fallback.
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
    #[serde(default = "default_cap")]
    pub max_candidates: u64,
}

fn default_timeout() -> u64 {
    600
}

fn default_resolution() -> usize {
    2
}

fn default_cap() -> u64 {
    1_000_000
}

impl Default for DfmBackend {
    fn default() -> Self {
        Self {
            kind: BackendKind::Grid,
            command: None,
            timeout_secs: default_timeout(),
            grid_resolution: default_resolution(),
            max_candidates: default_cap(),
        }
    }
}

/// Any field left out keeps the value derived from the instance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsOverride {
    pub eps: Option<f64>,
    pub m: Option<f64>,
    pub big_m: Option<f64>,
    pub budget_delta: Option<f64>,
}

impl ConstantsOverride {
    pub fn apply(&self, mut c: MilpConstants) -> MilpConstants {
        c.eps = self.eps.unwrap_or(c.eps);
        c.m = self.m.unwrap_or(c.m);
        c.big_m = self.big_m.unwrap_or(c.big_m);
        c.budget_delta = self.budget_delta.unwrap_or(c.budget_delta);
        c
    }
}

impl ExperimentConfig {
    /// Parses and validates `path`; relative data paths are resolved here.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let DataSource::Csv { path: data, .. } = &mut cfg.data_source {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.load_set()?;
        self.tariff()?;
        self.grid(self.horizon_days)?;
        if self.horizon_days == 0 {
            return bad("horizon_days must be positive".into());
        }
        if self.budget_fractions.is_empty() {
            return bad("budget_fractions is empty".into());
        }
        if let Some(f) = self.budget_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return bad(format!("budget fraction {f} outside [0, 1]"));
        }
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        if self.forecast_regimes.is_empty() {
            return bad("at least one forecast regime is required".into());
        }
        if self.max_parallel == Some(0) {
            return bad("max_parallel must be positive".into());
        }
        let b = &self.dfm_backend;
        if b.grid_resolution == 0 {
            return bad("grid_resolution must be positive".into());
        }
        if b.kind == BackendKind::External {
            match &b.command {
                Some(c) if c.contains("{lp}") && c.contains("{sol}") => {}
                _ => return bad("external DFM backend needs a command with {lp} and {sol}".into()),
            }
        }
        if let Some(eps) = self.dfm_constants.eps {
            if !(eps > 0.0) {
                return bad(format!("eps = {eps} must be positive"));
            }
        }
        match &self.data_source {
            DataSource::Synthetic { days, .. } => {
                if self.day_offset + self.horizon_days > *days {
                    return bad(format!(
                        "horizon of {} days at offset {} exceeds {days} synthetic days",
                        self.horizon_days, self.day_offset
                    ));
                }
                if let Some(l) = self.loads.iter().find(|l| l.profile.is_none()) {
                    return bad(format!("synthetic data needs a profile for load {}", l.name));
                }
            }
            DataSource::Csv { data_days: Some(days), .. } if self.day_offset + self.horizon_days > *days => {
                return bad(format!(
                    "horizon of {} days at offset {} exceeds {days} data days",
                    self.horizon_days, self.day_offset
                ));
            }
            DataSource::Csv { .. } => {}
        }
        Ok(())
    }

    pub fn load_set(&self) -> Result<LoadSet, CliError> {
        LoadSet::new(self.loads.iter().map(|l| Load::new(l.name.clone(), l.gamma)).collect())
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn tariff(&self) -> Result<Tariff, CliError> {
        Tariff::new(self.alpha).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn grid(&self, days: usize) -> Result<TimeGrid, CliError> {
        TimeGrid::from_step_minutes(self.step_minutes, days).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn profiles(&self) -> Vec<LoadProfile> {
        self.loads
            .iter()
            .filter_map(|l| l.profile)
            .map(|p| LoadProfile::new(p.rated_power_w, p.on_probability, p.mean_on_hours))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "data_source": {"kind": "synthetic", "seed": 1, "days": 7},
            "loads": [
                {"name": "a", "gamma": 0.6, "profile": {"rated_power_w": 100, "on_probability": 1, "mean_on_hours": 4}},
                {"name": "b", "gamma": 0.4, "profile": {"rated_power_w": 900, "on_probability": 0.3, "mean_on_hours": 1}}
            ],
            "alpha": 0.00016,
            "step_minutes": 60,
            "horizon_days": 7,
            "budget_fractions": [0.7, 0.8, 0.9],
            "forecast_regimes": ["perfect_detailed", "imperfect_limited"],
            "policies": ["AFG", "dfm", "OBM", "BSL"],
            "output_dir": "out"
        })
    }

    fn parse(v: serde_json::Value) -> Result<ExperimentConfig, CliError> {
        let cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = parse(base()).unwrap();
        assert_eq!(cfg.policies[1], Policy::DFM);
        assert_eq!(cfg.dfm_backend, DfmBackend::default());
        assert_eq!(cfg.day_offset, 0);
        assert!(cfg.write_traces);
        assert_eq!(cfg.profiles().len(), 2);
    }

    #[test]
    fn rejects_bad_fields() {
        let cases: Vec<(&str, serde_json::Value)> = vec![
            ("budget_fractions", serde_json::json!([0.5, 1.2])),
            ("budget_fractions", serde_json::json!([])),
            ("policies", serde_json::json!([])),
            ("step_minutes", serde_json::json!(7)),
            ("horizon_days", serde_json::json!(8)),
            ("alpha", serde_json::json!(-1.0)),
            ("dfm_backend", serde_json::json!({"kind": "external"})),
            ("dfm_backend", serde_json::json!({"kind": "external", "command": "solve {lp}"})),
            ("typo_field", serde_json::json!(1)),
        ];
        for (field, value) in cases {
            let mut v = base();
            v[field] = value.clone();
            assert!(matches!(parse(v), Err(CliError::Config(_))), "{field} = {value}");
        }
        let mut v = base();
        v["loads"][1]["profile"] = serde_json::Value::Null;
        assert!(parse(v).is_err());
    }

    #[test]
    fn constants_override_keeps_unset_fields() {
        let c = MilpConstants { eps: 1e-6, m: -5.0, big_m: 5.0, budget_delta: 1e-9 };
        let o = ConstantsOverride { big_m: Some(9.0), ..Default::default() };
        assert_eq!(o.apply(c), MilpConstants { big_m: 9.0, ..c });
    }
}
