//! Series ingestion, synthetic tides and result files.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::LagoonConfig;
use crate::milp::{build_milp, export_lp, format_number};
use crate::schedule::{Mode, Objective, Schedule, SolverResult};
use crate::series::{PriceSeries, SeriesError, TideSeries, Timestamp};
use crate::sim::SimulatedTrajectory;
use crate::storage::{summarize, StorageProfile, Totals};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: timestamp is {got} s after the previous row, expected {expected} s")]
    Spacing {
        line: u64,
        expected: f64,
        got: String,
    },
    #[error("{kind} series needs at least {min} rows, got {got}")]
    TooFewRows {
        kind: SeriesKind,
        min: usize,
        got: usize,
    },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("{0}")]
    Invalid(String),
    #[error("schedule document: {0}")]
    Document(String),
}

impl IoError {
    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Tide,
    Price,
}

impl std::fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SeriesKind::Tide => "tide",
            SeriesKind::Price => "price",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedSeries {
    Tide(TideSeries),
    Price(PriceSeries),
}

/// Reads a `timestamp,value` table whose rows are `dt_s` apart.
pub fn read_series_csv(
    reader: impl Read,
    kind: SeriesKind,
    dt_s: f64,
) -> Result<LoadedSeries, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| IoError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    let names: Vec<&str> = header.iter().collect();
    if names != ["timestamp", "value"] {
        return Err(IoError::Malformed {
            line: 1,
            message: format!(
                "expected header `timestamp,value`, got `{}`",
                names.join(",")
            ),
        });
    }

    let mut t0 = None;
    let mut prev: Option<Timestamp> = None;
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| IoError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| IoError::Malformed { line, message };
        if record.len() != 2 {
            return Err(bad(format!("expected 2 fields, got {}", record.len())));
        }
        let ts: Timestamp = record[0]
            .parse()
            .map_err(|e: crate::series::TimestampParseError| bad(e.to_string()))?;
        let value: f64 = record[1]
            .parse()
            .map_err(|_| bad(format!("value {:?} is not a number", &record[1])))?;
        if !value.is_finite() {
            return Err(bad(format!("value {value} is not finite")));
        }
        if let Some(p) = prev {
            let gap = p.seconds_until(ts);
            if gap.is_none_or(|g| (g as f64 - dt_s).abs() > 1e-9) {
                let got = gap.map_or_else(|| "incomparable".to_string(), |g| g.to_string());
                return Err(IoError::Spacing {
                    line,
                    expected: dt_s,
                    got,
                });
            }
        }
        t0.get_or_insert(ts);
        prev = Some(ts);
        values.push(value);
    }

    let min = match kind {
        SeriesKind::Tide => 2,
        SeriesKind::Price => 1,
    };
    if values.len() < min {
        return Err(IoError::TooFewRows {
            kind,
            min,
            got: values.len(),
        });
    }
    let t0 = t0.unwrap_or_default();
    Ok(match kind {
        SeriesKind::Tide => LoadedSeries::Tide(TideSeries::new(t0, dt_s, values)?),
        SeriesKind::Price => LoadedSeries::Price(PriceSeries::new(t0, dt_s, values)?),
    })
}

pub fn load_series_csv(path: &Path, kind: SeriesKind, dt_s: f64) -> Result<LoadedSeries, IoError> {
    let file = fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    read_series_csv(file, kind, dt_s).map_err(|e| match e {
        IoError::Malformed { line, message } => IoError::Malformed {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn load_tide_csv(path: &Path, dt_s: f64) -> Result<TideSeries, IoError> {
    match load_series_csv(path, SeriesKind::Tide, dt_s)? {
        LoadedSeries::Tide(t) => Ok(t),
        LoadedSeries::Price(_) => unreachable!(),
    }
}

pub fn load_price_csv(path: &Path, dt_s: f64) -> Result<PriceSeries, IoError> {
    match load_series_csv(path, SeriesKind::Price, dt_s)? {
        LoadedSeries::Price(p) => Ok(p),
        LoadedSeries::Tide(_) => unreachable!(),
    }
}

/// Writes a `timestamp,value` table readable by [`read_series_csv`].
pub fn series_csv(t0: Timestamp, dt_s: f64, values: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestamp", "value"])
        .expect("in-memory write");
    for (k, &v) in values.iter().enumerate() {
        w.write_record([t0.offset(k as f64 * dt_s).to_string(), format_number(v)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Sinusoidal tide with `steps + 1` levels.
pub fn synth_tide(
    mean_m: f64,
    amplitude_m: f64,
    period_s: f64,
    phase_rad: f64,
    t0: Timestamp,
    dt_s: f64,
    steps: usize,
) -> Result<TideSeries, IoError> {
    if !(amplitude_m >= 0.0 && amplitude_m.is_finite()) {
        return Err(IoError::Invalid(format!(
            "tide amplitude must be non-negative, got {amplitude_m}"
        )));
    }
    if !(period_s > 0.0 && period_s.is_finite()) {
        return Err(IoError::Invalid(format!(
            "tide period must be positive, got {period_s}"
        )));
    }
    if !(mean_m.is_finite() && phase_rad.is_finite()) {
        return Err(IoError::Invalid(
            "tide mean and phase must be finite".into(),
        ));
    }
    let levels = (0..=steps)
        .map(|k| mean_m + amplitude_m * (TAU * k as f64 * dt_s / period_s + phase_rad).sin())
        .collect();
    Ok(TideSeries::new(t0, dt_s, levels)?)
}

/// One row of the schedule document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub timestamp: Timestamp,
    pub mode: Mode,
    pub z_out_m: f64,
    pub z_in_start_m: f64,
    pub z_in_end_m: f64,
    pub head_m: f64,
    pub q_total_m3s: f64,
    pub q_sluice_m3s: f64,
    pub q_turbine_fill_m3s: f64,
    pub q_turbine_gen_m3s: f64,
    pub power_mw: f64,
    pub energy_mwh: f64,
    pub price: f64,
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub level_resolution_m: f64,
    pub grid_points: usize,
    pub states_expanded: u64,
    pub grid_objective: f64,
}

/// Self-contained schedule file: the inputs needed to re-check it plus
/// per-step rows and totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub objective: Objective,
    pub objective_value: f64,
    pub totals: Totals,
    pub solver: Option<SolverSummary>,
    pub config: LagoonConfig,
    pub tide: TideSeries,
    pub prices: PriceSeries,
    pub steps: Vec<StepRecord>,
}

impl ScheduleDocument {
    pub fn new(
        config: &LagoonConfig,
        tide: &TideSeries,
        prices: &PriceSeries,
        result: &SolverResult,
    ) -> Result<Self, IoError> {
        let s = &result.schedule;
        if s.steps() != tide.steps() || s.z_in_m.len() != tide.levels_m.len() {
            return Err(IoError::Document(format!(
                "schedule has {} steps, tide has {}",
                s.steps(),
                tide.steps()
            )));
        }
        let totals = summarize(s, prices, config).map_err(|e| IoError::Document(e.to_string()))?;
        let steps = (0..s.steps())
            .map(|t| StepRecord {
                step: t,
                timestamp: tide.timestamp(t),
                mode: s.modes[t],
                z_out_m: tide.level(t),
                z_in_start_m: s.z_in_m[t],
                z_in_end_m: s.z_in_m[t + 1],
                head_m: s.head_m[t],
                q_total_m3s: s.q_total_m3s[t],
                q_sluice_m3s: s.q_sluice_m3s[t],
                q_turbine_fill_m3s: s.q_turbine_fill_m3s[t],
                q_turbine_gen_m3s: s.q_turbine_gen_m3s[t],
                power_mw: s.power_mw[t],
                energy_mwh: s.energy_mwh[t],
                price: prices.price(t),
                revenue: s.revenue[t],
            })
            .collect();
        let st = &result.stats;
        let solver = (st.grid_points > 0).then_some(SolverSummary {
            level_resolution_m: st.level_resolution_m,
            grid_points: st.grid_points,
            states_expanded: st.states_expanded,
            grid_objective: st.grid_objective,
        });
        Ok(Self {
            objective: result.objective,
            objective_value: result.objective_value,
            totals,
            solver,
            config: config.clone(),
            tide: tide.clone(),
            prices: prices.clone(),
            steps,
        })
    }

    /// Rebuilds the schedule from the per-step rows.
    pub fn schedule(&self) -> Result<Schedule, IoError> {
        let rows = &self.steps;
        if rows.is_empty() {
            return Err(IoError::Document("no steps".into()));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(i, r)| r.step != *i) {
            return Err(IoError::Document(format!(
                "row {i} is labelled step {}",
                r.step
            )));
        }
        let mut s = Schedule::with_capacity(rows.len());
        s.z_in_m.push(rows[0].z_in_start_m);
        for r in rows {
            s.modes.push(r.mode);
            s.z_in_m.push(r.z_in_end_m);
            s.head_m.push(r.head_m);
            s.q_total_m3s.push(r.q_total_m3s);
            s.q_sluice_m3s.push(r.q_sluice_m3s);
            s.q_turbine_fill_m3s.push(r.q_turbine_fill_m3s);
            s.q_turbine_gen_m3s.push(r.q_turbine_gen_m3s);
            s.power_mw.push(r.power_mw);
            s.energy_mwh.push(r.energy_mwh);
            s.revenue.push(r.revenue);
        }
        Ok(s)
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.steps.iter().map(|r| r.mode).collect()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("document serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        serde_json::from_str(text).map_err(|e| IoError::Document(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Per-step plotting table. Numeric cells may be empty: the last row only
/// carries the closing levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub timestamps: Vec<Timestamp>,
    pub modes: Vec<Option<Mode>>,
    pub columns: Vec<(String, Vec<Option<f64>>)>,
}

impl SeriesTable {
    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn build(
        tide: &TideSeries,
        prices: &PriceSeries,
        schedule: &Schedule,
        sim: Option<&SimulatedTrajectory>,
        storage: Option<&StorageProfile>,
    ) -> Self {
        let n = schedule.steps();
        let levels = |v: &[f64]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
        let per_step = |v: &[f64]| v.iter().map(|&x| Some(x)).chain([None]).collect::<Vec<_>>();
        let mut columns = vec![
            ("z_out_m".to_string(), levels(&tide.levels_m)),
            ("z_in_m".to_string(), levels(&schedule.z_in_m)),
            ("head_m".to_string(), per_step(&schedule.head_m)),
            ("q_total_m3s".to_string(), per_step(&schedule.q_total_m3s)),
            ("q_sluice_m3s".to_string(), per_step(&schedule.q_sluice_m3s)),
            (
                "q_turbine_fill_m3s".to_string(),
                per_step(&schedule.q_turbine_fill_m3s),
            ),
            (
                "q_turbine_gen_m3s".to_string(),
                per_step(&schedule.q_turbine_gen_m3s),
            ),
            ("power_mw".to_string(), per_step(&schedule.power_mw)),
            ("energy_mwh".to_string(), per_step(&schedule.energy_mwh)),
            ("price".to_string(), per_step(&prices.prices)),
            ("revenue".to_string(), per_step(&schedule.revenue)),
        ];
        if let Some(sim) = sim {
            let s = &sim.schedule;
            columns.push(("sim_z_in_m".into(), levels(&s.z_in_m)));
            columns.push(("sim_head_m".into(), per_step(&s.head_m)));
            columns.push(("sim_power_mw".into(), per_step(&s.power_mw)));
            columns.push(("sim_energy_mwh".into(), per_step(&s.energy_mwh)));
        }
        if let Some(st) = storage {
            columns.push(("storage_head_m".into(), per_step(&st.head_m)));
            columns.push(("stored_energy_mwh".into(), per_step(&st.stored_energy_mwh)));
        }
        Self {
            timestamps: (0..=n).map(|k| tide.timestamp(k)).collect(),
            modes: schedule
                .modes
                .iter()
                .map(|&m| Some(m))
                .chain([None])
                .collect(),
            columns,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["timestamp".to_string(), "mode".to_string()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        w.write_record(&header).expect("in-memory write");
        for (k, ts) in self.timestamps.iter().enumerate() {
            let mut row = vec![
                ts.to_string(),
                self.modes[k].map(|m| m.to_string()).unwrap_or_default(),
            ];
            row.extend(
                self.columns
                    .iter()
                    .map(|(_, v)| v[k].map(format_number).unwrap_or_default()),
            );
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, IoError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| IoError::Malformed {
            line: 1,
            message: e.to_string(),
        })?;
        if header.len() < 2 || &header[0] != "timestamp" || &header[1] != "mode" {
            return Err(IoError::Malformed {
                line: 1,
                message: "expected `timestamp,mode,...` header".into(),
            });
        }
        let mut columns: Vec<(String, Vec<Option<f64>>)> = header
            .iter()
            .skip(2)
            .map(|n| (n.to_string(), Vec::new()))
            .collect();
        let mut timestamps = Vec::new();
        let mut modes = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| IoError::Malformed {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |message: String| IoError::Malformed { line, message };
            timestamps.push(
                record[0]
                    .parse()
                    .map_err(|e: crate::series::TimestampParseError| bad(e.to_string()))?,
            );
            modes.push(match &record[1] {
                "" => None,
                m => Some(
                    m.parse()
                        .map_err(|e: crate::schedule::ModeParseError| bad(e.to_string()))?,
                ),
            });
            for (j, (_, values)) in columns.iter_mut().enumerate() {
                values.push(match &record[j + 2] {
                    "" => None,
                    v => Some(
                        v.parse()
                            .map_err(|_| bad(format!("value {v:?} is not a number")))?,
                    ),
                });
            }
        }
        Ok(Self {
            timestamps,
            modes,
            columns,
        })
    }
}

/// `timestamp,z_out_m,storage_head_m,stored_energy_mwh` table, one row per step.
pub fn storage_csv(tide: &TideSeries, profile: &StorageProfile) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "timestamp",
        "z_out_m",
        "storage_head_m",
        "stored_energy_mwh",
    ])
    .expect("in-memory write");
    for (k, (h, e)) in profile
        .head_m
        .iter()
        .zip(&profile.stored_energy_mwh)
        .enumerate()
    {
        w.write_record([
            tide.timestamp(k).to_string(),
            format_number(tide.level(k)),
            format_number(*h),
            format_number(*e),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Files to write. `None` skips the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputTargets {
    pub schedule: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub lp: Option<PathBuf>,
}

impl OutputTargets {
    /// `schedule.json`, `series.csv` and, if asked, `model.lp` under `dir`.
    pub fn in_dir(dir: &Path, lp: bool) -> Self {
        Self {
            schedule: Some(dir.join("schedule.json")),
            series: Some(dir.join("series.csv")),
            lp: lp.then(|| dir.join("model.lp")),
        }
    }

    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [&self.schedule, &self.series, &self.lp]
            .into_iter()
            .flatten()
    }
}

/// Inputs the results were computed from.
#[derive(Debug, Clone, Copy)]
pub struct RunInputs<'a> {
    pub config: &'a LagoonConfig,
    pub tide: &'a TideSeries,
    pub prices: &'a PriceSeries,
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| IoError::io(path, e))
}

/// Writes every requested target and returns the paths written.
pub fn write_outputs(
    inputs: RunInputs<'_>,
    result: &SolverResult,
    sim: Option<&SimulatedTrajectory>,
    storage: Option<&StorageProfile>,
    targets: &OutputTargets,
) -> Result<Vec<PathBuf>, IoError> {
    let mut seen = BTreeSet::new();
    if let Some(dup) = targets.paths().find(|p| !seen.insert(*p)) {
        return Err(IoError::Invalid(format!(
            "output path {} requested twice",
            dup.display()
        )));
    }
    let mut written = Vec::new();
    if let Some(path) = &targets.schedule {
        let doc = ScheduleDocument::new(inputs.config, inputs.tide, inputs.prices, result)?;
        write_file(path, &doc.to_json())?;
        written.push(path.clone());
    }
    if let Some(path) = &targets.series {
        let table = SeriesTable::build(inputs.tide, inputs.prices, &result.schedule, sim, storage);
        write_file(path, &table.to_csv())?;
        written.push(path.clone());
    }
    if let Some(path) = &targets.lp {
        let model = build_milp(inputs.config, inputs.tide, inputs.prices, result.objective)
            .map_err(|e| IoError::Invalid(e.to_string()))?;
        let text = export_lp(&model).map_err(|e| IoError::Invalid(e.to_string()))?;
        write_file(path, &text)?;
        written.push(path.clone());
    }
    Ok(written)
}
