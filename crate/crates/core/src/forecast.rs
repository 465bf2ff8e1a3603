//! Load data ingestion, synthetic households, and forecast regimes.
//!
//! A forecast is always an ordinary [`DemandSeries`]: the limited regime is a
//! series that is constant within each day, and the imperfect regime is the
//! true series with its days permuted.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use thiserror::Error;

use crate::model::{daily_average, DemandSeries, LoadSet, ModelError, TimeGrid};
use crate::rng::{permutation, SplitMix64};

pub const TIMESTAMP_COLUMN: &str = "timestamp";

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: missing column `{column}`")]
    MissingColumn { line: u64, column: String },
    #[error("expected {expected} data rows, found {found} (line {line})")]
    RowCountMismatch {
        expected: usize,
        found: usize,
        line: u64,
    },
    #[error("line {line}: negative power {value} in column `{column}`")]
    NegativePower {
        line: u64,
        column: String,
        value: f64,
    },
    #[error("line {line}: cannot parse `{text}` in column `{column}`")]
    UnparseableNumber {
        line: u64,
        column: String,
        text: String,
    },
    #[error("{0} profiles given for {1} loads")]
    ProfileMismatch(usize, usize),
    #[error("invalid profile for load `{0}`")]
    InvalidProfile(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fidelity {
    Perfect,
    /// Days of the true series in a seeded random order.
    ImperfectShuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    /// Per-step, per-load power.
    Detailed,
    /// Daily average power per load, held for the whole day.
    Limited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ForecastSpec {
    pub fidelity: Fidelity,
    pub granularity: Granularity,
}

impl ForecastSpec {
    pub fn new(fidelity: Fidelity, granularity: Granularity) -> Self {
        Self {
            fidelity,
            granularity,
        }
    }

    /// The forecast view of `truth` under this regime.
    pub fn apply(&self, truth: &DemandSeries) -> DemandSeries {
        let ordered = match self.fidelity {
            Fidelity::Perfect => truth.clone(),
            Fidelity::ImperfectShuffled(seed) => shuffle_days(truth, seed),
        };
        match self.granularity {
            Granularity::Detailed => ordered,
            Granularity::Limited => to_limited(&ordered),
        }
    }
}

fn base_time() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2000, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid constant date")
}

/// Reads a `timestamp,<load1>,...` file whose row count must equal the
/// number of grid steps. Columns are matched to loads by name.
pub fn ingest_csv(
    path: impl AsRef<Path>,
    loads: &LoadSet,
    grid: TimeGrid,
) -> Result<DemandSeries, ForecastError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ForecastError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let column_of = |name: &str| headers.iter().position(|h| h == name);
    if column_of(TIMESTAMP_COLUMN).is_none() {
        return Err(ForecastError::MissingColumn {
            line: 1,
            column: TIMESTAMP_COLUMN.into(),
        });
    }
    let mut columns = Vec::with_capacity(loads.len());
    for load in loads.iter() {
        match column_of(&load.name) {
            Some(c) => columns.push(c),
            None => {
                return Err(ForecastError::MissingColumn {
                    line: 1,
                    column: load.name.clone(),
                })
            }
        }
    }
    let expected = grid.total_steps();
    let mut power = vec![Vec::with_capacity(expected); loads.len()];
    let mut rows = 0usize;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        rows += 1;
        if rows > expected {
            return Err(ForecastError::RowCountMismatch {
                expected,
                found: rows,
                line,
            });
        }
        for (k, &c) in columns.iter().enumerate() {
            let column = || loads.get(k).name.clone();
            let text = record.get(c).ok_or_else(|| ForecastError::MissingColumn {
                line,
                column: column(),
            })?;
            let value: f64 = match text.parse() {
                Ok(v) if f64::is_finite(v) => v,
                _ => {
                    return Err(ForecastError::UnparseableNumber {
                        line,
                        column: column(),
                        text: text.into(),
                    })
                }
            };
            if value < 0.0 {
                return Err(ForecastError::NegativePower {
                    line,
                    column: column(),
                    value,
                });
            }
            power[k].push(value);
        }
    }
    if rows != expected {
        return Err(ForecastError::RowCountMismatch {
            expected,
            found: rows,
            line: rows as u64 + 1,
        });
    }
    Ok(DemandSeries::new(grid, power)?)
}

/// Writes `demand` in the format read by [`ingest_csv`]; timestamps start at
/// 2000-01-01T00:00:00.
pub fn write_csv(
    demand: &DemandSeries,
    loads: &LoadSet,
    path: impl AsRef<Path>,
) -> Result<(), ForecastError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| ForecastError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv_to(demand, loads, file)
}

/// Reorders day blocks so that output day `i` is input day `perm[i]`.
pub fn permute_days(demand: &DemandSeries, perm: &[usize]) -> DemandSeries {
    let grid = *demand.grid();
    assert_eq!(perm.len(), grid.num_days(), "permutation length");
    let power = demand
        .rows()
        .iter()
        .map(|row| {
            perm.iter()
                .flat_map(|&src| row[grid.day_steps(src)].iter().copied())
                .collect()
        })
        .collect();
    DemandSeries::new(grid, power).expect("permuting days keeps a valid series")
}

/// The day order used by [`shuffle_days`] for `seed`.
pub fn shuffle_permutation(num_days: usize, seed: u64) -> Vec<usize> {
    permutation(num_days, seed)
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Seeded Fisher–Yates shuffle of whole days (splitmix64 driven).
pub fn shuffle_days(demand: &DemandSeries, seed: u64) -> DemandSeries {
    permute_days(demand, &shuffle_permutation(demand.grid().num_days(), seed))
}

/// Replaces every step of each day by that day's average power.
pub fn to_limited(demand: &DemandSeries) -> DemandSeries {
    let grid = *demand.grid();
    let avg = daily_average(demand);
    let power = avg
        .rows()
        .iter()
        .map(|days| {
            days.iter()
                .flat_map(|&p| std::iter::repeat(p).take(grid.steps_per_day()))
                .collect()
        })
        .collect();
    DemandSeries::new(grid, power).expect("averages of a valid series are valid")
}

/// Rectangular on/off usage pattern for one synthetic load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadProfile {
    /// Draw in W while on.
    pub rated_power_w: f64,
    /// Probability that the load is used on a given day.
    pub on_probability: f64,
    /// Mean on-time in hours on days the load is used.
    pub mean_on_hours: f64,
}

impl LoadProfile {
    pub fn new(rated_power_w: f64, on_probability: f64, mean_on_hours: f64) -> Self {
        Self {
            rated_power_w,
            on_probability,
            mean_on_hours,
        }
    }

    fn is_valid(&self) -> bool {
        self.rated_power_w.is_finite()
            && self.rated_power_w >= 0.0
            && (0.0..=1.0).contains(&self.on_probability)
            && (0.0..=24.0).contains(&self.mean_on_hours)
    }
}

/// Four-load household: refrigerator, air compressor, microwave and washing
/// machine, in priority order.
pub fn default_household() -> (LoadSet, Vec<LoadProfile>) {
    use crate::model::Load;
    let loads = LoadSet::new(vec![
        Load::new("refrigerator", 0.48),
        Load::new("air_compressor", 0.24),
        Load::new("microwave", 0.16),
        Load::new("washing_machine", 0.12),
    ])
    .expect("valid constant load set");
    let profiles = vec![
        LoadProfile::new(150.0, 1.0, 14.0),
        LoadProfile::new(1500.0, 0.6, 3.0),
        LoadProfile::new(1100.0, 0.7, 0.5),
        LoadProfile::new(500.0, 0.35, 1.5),
    ];
    (loads, profiles)
}

/// Deterministic synthetic demand: each day, each load is used with its
/// on-probability for one contiguous block at rated power. Block length is
/// uniform on `[h - w, h + w]` with `w = min(h/2, 24 - h)`, rounded to whole
/// steps; the start is uniform over the day.
pub fn synth_household(
    seed: u64,
    loads: &LoadSet,
    grid: TimeGrid,
    profiles: &[LoadProfile],
) -> Result<DemandSeries, ForecastError> {
    if profiles.len() != loads.len() {
        return Err(ForecastError::ProfileMismatch(profiles.len(), loads.len()));
    }
    if let Some(k) = profiles.iter().position(|p| !p.is_valid()) {
        return Err(ForecastError::InvalidProfile(loads.get(k).name.clone()));
    }
    let spd = grid.steps_per_day();
    let mut rng = SplitMix64::new(seed);
    let mut power = vec![vec![0.0; grid.total_steps()]; loads.len()];
    for d in 0..grid.num_days() {
        for (k, profile) in profiles.iter().enumerate() {
            let on = rng.next_f64() < profile.on_probability;
            let u_len = rng.next_f64();
            let u_start = rng.next_f64();
            if !on || profile.mean_on_hours <= 0.0 || profile.rated_power_w <= 0.0 {
                continue;
            }
            let h = profile.mean_on_hours;
            let half_width = (h / 2.0).min(24.0 - h);
            let hours = h - half_width + 2.0 * half_width * u_len;
            let steps = ((hours / grid.step_hours()).round() as usize).clamp(1, spd);
            let start = (u_start * (spd - steps + 1) as f64) as usize;
            let first = d * spd + start.min(spd - steps);
            power[k][first..first + steps]
                .iter_mut()
                .for_each(|p| *p = profile.rated_power_w);
        }
    }
    Ok(DemandSeries::new(grid, power)?)
}

/// Same format as [`write_csv`], to any writer.
pub fn write_csv_to<W: Write>(
    demand: &DemandSeries,
    loads: &LoadSet,
    out: W,
) -> Result<(), ForecastError> {
    demand.check_loads(loads)?;
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec![TIMESTAMP_COLUMN.to_string()];
    header.extend(loads.iter().map(|l| l.name.clone()));
    writer.write_record(&header)?;
    let step_seconds = (demand.grid().step_hours() * 3600.0).round() as i64;
    for t in 0..demand.grid().total_steps() {
        let stamp = base_time() + Duration::seconds(step_seconds * t as i64);
        let mut row = vec![stamp.format("%Y-%m-%dT%H:%M:%S").to_string()];
        row.extend((0..demand.num_loads()).map(|k| demand.power(k, t).to_string()));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|source| ForecastError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Load, Tariff};
    use proptest::prelude::*;

    fn loads(n: usize) -> LoadSet {
        LoadSet::new((0..n).map(|k| Load::new(format!("l{k}"), 1.0)).collect()).unwrap()
    }

    fn day_checksums(d: &DemandSeries) -> Vec<Vec<u64>> {
        let g = d.grid();
        let mut sums: Vec<Vec<u64>> = (0..g.num_days())
            .map(|day| {
                (0..d.num_loads())
                    .flat_map(|k| d.row(k)[g.day_steps(day)].iter().map(|p| p.to_bits()))
                    .collect()
            })
            .collect();
        sums.sort();
        sums
    }

    #[test]
    fn ingest_shape_and_round_trip() {
        let (ls, profiles) = default_household();
        let grid = TimeGrid::from_step_minutes(15, 30).unwrap();
        let d = synth_household(3, &ls, grid, &profiles).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("house.csv");
        write_csv(&d, &ls, &path).unwrap();
        let back = ingest_csv(&path, &ls, grid).unwrap();
        assert_eq!(back.num_loads(), 4);
        assert_eq!(back.grid().total_steps(), 2880);
        assert_eq!(back, d);
    }

    fn write(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
        let path = dir.path().join("f.csv");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn ingest_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let ls = loads(2);
        let grid = TimeGrid::new(8.0, 3, 1).unwrap();

        let p = write(&dir, "timestamp,l0,l1\na,1,2\nb,-5,2\nc,1,2\n");
        match ingest_csv(&p, &ls, grid) {
            Err(ForecastError::NegativePower { line, value, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(value, -5.0);
            }
            other => panic!("unexpected {other:?}"),
        }

        let p = write(&dir, "timestamp,l0\na,1\nb,1\nc,1\n");
        assert!(matches!(
            ingest_csv(&p, &ls, grid),
            Err(ForecastError::MissingColumn { column, .. }) if column == "l1"
        ));

        let p = write(&dir, "timestamp,l0,l1\na,1,2\nb,x,2\nc,1,2\n");
        assert!(matches!(
            ingest_csv(&p, &ls, grid),
            Err(ForecastError::UnparseableNumber { line: 3, .. })
        ));

        let p = write(&dir, "timestamp,l0,l1\na,1,2\nb,1,2\n");
        assert!(matches!(
            ingest_csv(&p, &ls, grid),
            Err(ForecastError::RowCountMismatch {
                expected: 3,
                found: 2,
                ..
            })
        ));

        let p = write(&dir, "timestamp,l0,l1\na,1,2\nb,1,2\nc,1,2\nd,1,2\n");
        assert!(matches!(
            ingest_csv(&p, &ls, grid),
            Err(ForecastError::RowCountMismatch { found: 4, line: 5, .. })
        ));

        let p = write(&dir, "time,l0,l1\na,1,2\nb,1,2\nc,1,2\n");
        assert!(matches!(
            ingest_csv(&p, &ls, grid),
            Err(ForecastError::MissingColumn { .. })
        ));
    }

    #[test]
    fn ingest_matches_columns_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "timestamp,l1,extra,l0\na,1,9,2\nb,3,9,4\nc,5,9,6\n");
        let d = ingest_csv(&p, &loads(2), TimeGrid::new(8.0, 3, 1).unwrap()).unwrap();
        assert_eq!(d.row(0), &[2.0, 4.0, 6.0]);
        assert_eq!(d.row(1), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn shuffle_single_day_is_identity() {
        let grid = TimeGrid::from_step_minutes(60, 1).unwrap();
        let d = DemandSeries::new(grid, vec![(0..24).map(f64::from).collect()]).unwrap();
        for seed in [0, 1, 42, u64::MAX] {
            assert_eq!(shuffle_days(&d, seed), d);
        }
    }

    #[test]
    fn limited_examples() {
        let g = TimeGrid::new(12.0, 2, 1).unwrap();
        let d = DemandSeries::new(g, vec![vec![0.0, 400.0]]).unwrap();
        assert_eq!(to_limited(&d).row(0), &[200.0, 200.0]);
        let c = DemandSeries::new(g, vec![vec![70.0, 70.0]]).unwrap();
        assert_eq!(to_limited(&c), c);
    }

    #[test]
    fn forecast_spec_views() {
        let (ls, profiles) = default_household();
        let grid = TimeGrid::from_step_minutes(60, 6).unwrap();
        let truth = synth_household(11, &ls, grid, &profiles).unwrap();
        let perfect = ForecastSpec::new(Fidelity::Perfect, Granularity::Detailed);
        assert_eq!(perfect.apply(&truth), truth);
        let shuffled = ForecastSpec::new(Fidelity::ImperfectShuffled(5), Granularity::Detailed);
        assert_eq!(shuffled.apply(&truth), shuffle_days(&truth, 5));
        let lim = ForecastSpec::new(Fidelity::ImperfectShuffled(5), Granularity::Limited);
        assert_eq!(lim.apply(&truth), to_limited(&shuffle_days(&truth, 5)));
    }

    #[test]
    fn synth_zero_probability_and_determinism() {
        let ls = loads(2);
        let grid = TimeGrid::from_step_minutes(30, 20).unwrap();
        let profiles = [LoadProfile::new(100.0, 0.0, 5.0), LoadProfile::new(50.0, 0.8, 2.0)];
        let a = synth_household(9, &ls, grid, &profiles).unwrap();
        assert!(a.row(0).iter().all(|&p| p == 0.0));
        assert!(a.row(1).iter().any(|&p| p == 50.0));
        assert!(a.row(1).iter().all(|&p| p == 0.0 || p == 50.0));
        assert_eq!(a, synth_household(9, &ls, grid, &profiles).unwrap());
        assert_ne!(a, synth_household(10, &ls, grid, &profiles).unwrap());
        assert!(synth_household(9, &ls, grid, &profiles[..1]).is_err());
    }

    #[test]
    fn synth_mean_on_time() {
        let ls = loads(3);
        let grid = TimeGrid::from_step_minutes(15, 1000).unwrap();
        let hours = [2.0, 9.5, 20.0];
        let profiles: Vec<_> = hours.iter().map(|&h| LoadProfile::new(10.0, 1.0, h)).collect();
        let d = synth_household(2024, &ls, grid, &profiles).unwrap();
        for (k, &h) in hours.iter().enumerate() {
            let on_steps = d.row(k).iter().filter(|&&p| p > 0.0).count();
            let mean = on_steps as f64 * grid.step_hours() / 1000.0;
            assert!((mean - h).abs() <= 0.1 * h, "load {k}: mean {mean} vs {h}");
        }
    }

    fn series() -> impl Strategy<Value = DemandSeries> {
        (1usize..3, 1usize..8).prop_flat_map(|(n, days)| {
            let grid = TimeGrid::from_step_minutes(240, days).unwrap();
            prop::collection::vec(
                prop::collection::vec(prop_oneof![Just(0.0), 0.0..2000.0f64], grid.total_steps()),
                n,
            )
            .prop_map(move |p| DemandSeries::new(grid, p).unwrap())
        })
    }

    proptest! {
        #[test]
        fn shuffle_preserves_day_multiset(d in series(), seed in any::<u64>()) {
            let s = shuffle_days(&d, seed);
            prop_assert_eq!(day_checksums(&s), day_checksums(&d));
            prop_assert_eq!(&s, &shuffle_days(&d, seed));
            let perm = shuffle_permutation(d.grid().num_days(), seed);
            prop_assert_eq!(permute_days(&s, &inverse_permutation(&perm)), d);
        }

        #[test]
        fn limited_conserves_cost_and_is_idempotent(d in series()) {
            let t = Tariff::new(0.00016).unwrap();
            let l = to_limited(&d);
            let (a, b) = (d.total_cost(&t), l.total_cost(&t));
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
            let ll = to_limited(&l);
            for (r1, r2) in l.rows().iter().zip(ll.rows()) {
                for (x, y) in r1.iter().zip(r2) {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                }
            }
        }
    }
}
