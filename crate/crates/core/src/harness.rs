//! Experiment grids: many seeded trials per cell, per-trial CSV rows and a
//! summary table laid out like the original experiment report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simkernel::{execute_trial, mix_seed, FailureMode, Pipeline, SimError, TrialConfig, TrialOutcome};

/// Env var capping the worker count.
pub const THREADS_ENV: &str = "AVSI_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("nothing to report: no results")]
    EmptyResults,
}

impl From<SimError> for HarnessError {
    fn from(e: SimError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    NoDilation,
    NoScrew,
    Full,
}

impl Variant {
    pub fn pipeline(self) -> Pipeline {
        match self {
            Variant::NoDilation => Pipeline { use_dilation: false, use_screw: true },
            Variant::NoScrew => Pipeline { use_dilation: true, use_screw: false },
            Variant::Full => Pipeline { use_dilation: true, use_screw: true },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::NoDilation => "no_dilation",
            Variant::NoScrew => "no_screw",
            Variant::Full => "full",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::NoDilation => "No Dilation",
            Variant::NoScrew => "Dilation Only (No Screw)",
            Variant::Full => "Dilation + Screw Motion",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        [Variant::NoDilation, Variant::NoScrew, Variant::Full].into_iter().find(|v| v.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub variant: Variant,
    pub angle_deg: f64,
    pub shunt_od_mm: f64,
}

/// The ten cells of the reference grid, in report order.
pub fn default_grid() -> Vec<CellSpec> {
    let cell = |variant, angle_deg, shunt_od_mm| CellSpec { variant, angle_deg, shunt_od_mm };
    let mut cells = Vec::new();
    for od in [8.0, 14.0] {
        cells.push(cell(Variant::NoDilation, 0.0, od));
    }
    for od in [8.0, 14.0] {
        cells.push(cell(Variant::NoScrew, 0.0, od));
    }
    for angle in [0.0, 15.0, 30.0] {
        for od in [8.0, 14.0] {
            cells.push(cell(Variant::Full, angle, od));
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub cells: Vec<CellSpec>,
    pub trials_per_cell: usize,
    pub master_seed: u64,
    /// Shared trial settings; each cell overrides pipeline, tilt, shunt and seed.
    pub base: TrialConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self { cells: default_grid(), trials_per_cell: 20, master_seed: 2024, base: TrialConfig::default() }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials_per_cell == 0 {
            return Err(HarnessError::Config("trials_per_cell must be >= 1".into()));
        }
        if self.cells.is_empty() {
            return Err(HarnessError::Config("experiment has no cells".into()));
        }
        for c in &self.cells {
            if !(c.angle_deg >= 0.0 && c.angle_deg.is_finite() && c.shunt_od_mm > 0.0 && c.shunt_od_mm.is_finite()) {
                return Err(HarnessError::Config(format!("invalid cell {c:?}")));
            }
            self.trial_config(c, 0).validate()?;
        }
        Ok(())
    }

    /// Trial `i` of a cell. Seeds depend only on the trial index, so the
    /// same trial index sees the same scene noise in every cell.
    pub fn trial_config(&self, cell: &CellSpec, trial_idx: usize) -> TrialConfig {
        let mut cfg = self.base.clone();
        cfg.pipeline = cell.variant.pipeline();
        cfg.scene.rim_tilt = cell.angle_deg;
        cfg.shunt_outer_diameter = cell.shunt_od_mm;
        cfg.seed = mix_seed(self.master_seed, trial_idx as u64);
        cfg
    }
}

/// One CSV row per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub variant: Variant,
    pub angle_deg: f64,
    pub shunt_od_mm: f64,
    pub trial_idx: usize,
    pub seed: u64,
    pub success: bool,
    pub failure_mode: FailureMode,
    pub time_s: f64,
    pub fit_center_err_mm: Option<f64>,
    pub grasp_rim_dist_mm: Option<f64>,
    pub capture_radius_mm: Option<f64>,
    pub margin_mm: Option<f64>,
}

impl TrialRow {
    fn new(cell: &CellSpec, trial_idx: usize, seed: u64, o: &TrialOutcome) -> Self {
        Self {
            variant: cell.variant,
            angle_deg: cell.angle_deg,
            shunt_od_mm: cell.shunt_od_mm,
            trial_idx,
            seed,
            success: o.success,
            failure_mode: o.failure_mode,
            time_s: o.time_s,
            fit_center_err_mm: o.diagnostics.fit_center_err_mm,
            grasp_rim_dist_mm: o.diagnostics.grasp_rim_dist_mm,
            capture_radius_mm: o.diagnostics.capture_radius_mm,
            margin_mm: o.diagnostics.margin_mm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub variant: Variant,
    pub angle_deg: f64,
    pub shunt_od_mm: f64,
    pub successes: usize,
    pub attempts: usize,
    pub success_rate: f64,
    pub avg_time_s: f64,
    pub failures_d: usize,
    pub failures_s: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub summaries: Vec<CellSummary>,
    pub rows: Vec<TrialRow>,
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|n| *n > 0)
}

/// Runs every cell; rows come back in (cell, trial) order regardless of
/// `workers`.
pub fn run_experiment(spec: &ExperimentSpec, workers: Option<usize>) -> Result<ExperimentResult, HarnessError> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..spec.cells.len()).flat_map(|c| (0..spec.trials_per_cell).map(move |t| (c, t))).collect();
    let run = || -> Result<Vec<TrialRow>, SimError> {
        jobs.par_iter()
            .map(|&(c, t)| {
                let cell = &spec.cells[c];
                let cfg = spec.trial_config(cell, t);
                execute_trial(&cfg).map(|o| TrialRow::new(cell, t, cfg.seed, &o))
            })
            .collect()
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(e.to_string()))?;
    let rows = pool.install(run)?;
    let summaries = summarize(&rows);
    Ok(ExperimentResult { summaries, rows })
}

/// Groups rows by cell in first-appearance order.
pub fn summarize(rows: &[TrialRow]) -> Vec<CellSummary> {
    let mut out: Vec<(CellSummary, f64)> = Vec::new();
    for r in rows {
        let pos = out.iter().position(|(s, _)| {
            s.variant == r.variant && s.angle_deg == r.angle_deg && s.shunt_od_mm == r.shunt_od_mm
        });
        let idx = pos.unwrap_or_else(|| {
            out.push((
                CellSummary {
                    variant: r.variant,
                    angle_deg: r.angle_deg,
                    shunt_od_mm: r.shunt_od_mm,
                    successes: 0,
                    attempts: 0,
                    success_rate: 0.0,
                    avg_time_s: 0.0,
                    failures_d: 0,
                    failures_s: 0,
                },
                0.0,
            ));
            out.len() - 1
        });
        let (s, total_time) = &mut out[idx];
        s.attempts += 1;
        *total_time += r.time_s;
        match r.failure_mode {
            FailureMode::None => s.successes += 1,
            FailureMode::D => s.failures_d += 1,
            FailureMode::S => s.failures_s += 1,
        }
    }
    out.into_iter()
        .map(|(mut s, total)| {
            s.success_rate = 100.0 * s.successes as f64 / s.attempts as f64;
            s.avg_time_s = total / s.attempts as f64;
            s
        })
        .collect()
}

pub fn rows_to_csv(rows: &[TrialRow]) -> Result<String, HarnessError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for r in rows {
        wtr.serialize(r)?;
    }
    let bytes = wtr.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_rows(path: &Path) -> Result<Vec<TrialRow>, HarnessError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows = rdr.deserialize().collect::<Result<Vec<TrialRow>, _>>()?;
    Ok(rows)
}

/// Plain-text table plus machine CSV of the summaries.
pub fn report(summaries: &[CellSummary]) -> Result<(String, String), HarnessError> {
    if summaries.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let header = [
        "Experiment",
        "Vessel angle (deg)",
        "Shunt OD (mm)",
        "Successes",
        "Attempts",
        "Success Rate (%)",
        "Avg trial time (s)",
        "(D)",
        "(S)",
    ];
    let body: Vec<[String; 9]> = summaries
        .iter()
        .map(|s| {
            [
                s.variant.label().to_string(),
                format!("{}", s.angle_deg),
                format!("{}", s.shunt_od_mm),
                s.successes.to_string(),
                s.attempts.to_string(),
                format!("{:.0}", s.success_rate),
                format!("{:.1}", s.avg_time_s),
                s.failures_d.to_string(),
                s.failures_s.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> =
        (0..9).map(|i| body.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0)).collect();
    let mut table = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join(" | ").trim_end());
    };
    line(header.to_vec(), &mut table);
    let _ = writeln!(table, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    for r in &body {
        line(r.iter().map(String::as_str).collect(), &mut table);
    }

    let mut wtr = csv::Writer::from_writer(Vec::new());
    for s in summaries {
        wtr.serialize(s)?;
    }
    let bytes = wtr.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok((table, String::from_utf8(bytes).expect("csv output is utf-8")))
}

/// Writes `trials.csv`, `summary.csv` and `report.txt` into `dir`.
pub fn write_outputs(dir: &Path, result: &ExperimentResult) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trials.csv"), rows_to_csv(&result.rows)?)?;
    let (table, csv) = report(&result.summaries)?;
    fs::write(dir.join("summary.csv"), csv)?;
    fs::write(dir.join("report.txt"), table)?;
    Ok(())
}
