//! Machine-readable reports. Every report embeds the resolved configuration
//! and seed; non-finite numbers serialise as `null`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use robsens::bootstrap::{CiResult, InflatedDelta};
use robsens::bounds::{BoundStatus, BoundsResult, SolverStats};
use robsens::dataset::Dataset;
use robsens::simultaneous::QuantileCurve;

use crate::config::{Format, GridPoint, RunConfig};
use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "robsens.report.v1";

#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub tool_version: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub data: Option<DataSummary>,
    pub timings: Timings,
    pub results: T,
}

#[derive(Debug, Serialize)]
pub struct DataSummary {
    pub n: usize,
    pub n1: usize,
    pub n0: usize,
    pub s_terms: Vec<String>,
    pub g_terms: Vec<String>,
}

impl DataSummary {
    pub fn of(d: &Dataset) -> Self {
        DataSummary { n: d.n(), n1: d.n1, n0: d.n0, s_terms: d.s_labels.clone(), g_terms: d.g_labels.clone() }
    }
}

/// Wall-clock timings in milliseconds.
#[derive(Debug, Serialize)]
pub struct Timings {
    pub total_ms: f64,
    pub phases: BTreeMap<String, f64>,
}

pub struct Clock {
    start: Instant,
    last: Instant,
    phases: BTreeMap<String, f64>,
}

impl Clock {
    pub fn start() -> Self {
        let now = Instant::now();
        Clock { start: now, last: now, phases: BTreeMap::new() }
    }

    pub fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        *self.phases.entry(phase.to_string()).or_default() += (now - self.last).as_secs_f64() * 1e3;
        self.last = now;
    }

    pub fn finish(self) -> Timings {
        Timings { total_ms: self.start.elapsed().as_secs_f64() * 1e3, phases: self.phases }
    }
}

#[derive(Debug, Serialize)]
pub struct BoundsRow {
    #[serde(flatten)]
    pub point: GridPoint,
    pub tau_min: f64,
    pub tau_max: f64,
    pub status: BoundStatus,
    pub stats: SolverStats,
    /// Whole model only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasible_cells: Option<usize>,
}

impl BoundsRow {
    pub fn new(point: GridPoint, b: &BoundsResult, infeasible_cells: Option<usize>) -> Self {
        BoundsRow {
            point,
            tau_min: b.tau_min,
            tau_max: b.tau_max,
            status: b.status,
            stats: b.stats.clone(),
            infeasible_cells,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Serialize)]
pub struct CiRow {
    #[serde(flatten)]
    pub point: GridPoint,
    pub point_bounds: Interval,
    pub point_status: BoundStatus,
    pub l_alpha: f64,
    pub u_alpha: f64,
    pub delta_inflated: InflatedDelta,
    pub lambda_effective: [f64; 2],
    pub infeasible_count: usize,
    pub replicates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sharper: Option<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws_file: Option<String>,
}

impl CiRow {
    pub fn new(point: GridPoint, ci: &CiResult, draws_file: Option<String>) -> Self {
        CiRow {
            point,
            point_bounds: Interval { lower: ci.point_bounds.tau_min, upper: ci.point_bounds.tau_max },
            point_status: ci.point_bounds.status,
            l_alpha: ci.l_alpha,
            u_alpha: ci.u_alpha,
            delta_inflated: ci.delta_inflated,
            lambda_effective: [ci.lambda_effective.0, ci.lambda_effective.1],
            infeasible_count: ci.infeasible_count,
            replicates: ci.draws_min.len(),
            sharper: ci.sharper.as_ref().map(|s| Interval { lower: s.l_alpha, upper: s.u_alpha }),
            draws_file,
        }
    }

    fn csv_record(&self) -> Vec<String> {
        let (d1, d0) = match self.delta_inflated {
            InflatedDelta::Separate { delta1, delta0 } => (delta1, delta0),
            InflatedDelta::Whole { delta } => (delta, delta),
        };
        let mut rec = point_fields(&self.point);
        rec.extend(
            [self.point_bounds.lower, self.point_bounds.upper, self.l_alpha, self.u_alpha, d1, d0]
                .map(|v| v.to_string()),
        );
        rec.push(self.infeasible_count.to_string());
        let (sl, su) = self
            .sharper
            .as_ref()
            .map_or((String::new(), String::new()), |s| (s.lower.to_string(), s.upper.to_string()));
        rec.extend([sl, su]);
        rec
    }
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub terms: Vec<String>,
    pub beta: Vec<f64>,
    pub loglik: f64,
    pub score_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub n: usize,
    pub n1: usize,
    pub n0: usize,
    pub true_effect: f64,
    pub data_file: Option<String>,
}

fn point_fields(p: &GridPoint) -> Vec<String> {
    [p.lambda1, p.lambda0, p.delta1, p.delta0].map(|v| v.to_string()).to_vec()
}

const POINT_HEADER: [&str; 4] = ["lambda1", "lambda0", "delta1", "delta0"];

/// Flat table form of a report's results.
pub trait CsvTable {
    fn header(&self) -> Vec<String>;
    fn records(&self) -> Vec<Vec<String>>;
}

fn header(extra: &[&str]) -> Vec<String> {
    POINT_HEADER.iter().chain(extra).map(|s| s.to_string()).collect()
}

impl CsvTable for Vec<BoundsRow> {
    fn header(&self) -> Vec<String> {
        header(&["tau_min", "tau_max", "status"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                let mut rec = point_fields(&r.point);
                rec.extend([r.tau_min.to_string(), r.tau_max.to_string(), status_name(r.status).to_string()]);
                rec
            })
            .collect()
    }
}

impl CsvTable for Vec<CiRow> {
    fn header(&self) -> Vec<String> {
        header(&[
            "tau_min",
            "tau_max",
            "l_alpha",
            "u_alpha",
            "delta1_inflated",
            "delta0_inflated",
            "infeasible_count",
            "sharper_l_alpha",
            "sharper_u_alpha",
        ])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter().map(CiRow::csv_record).collect()
    }
}

impl CsvTable for QuantileCurve {
    fn header(&self) -> Vec<String> {
        vec!["q".into(), "lambda_lower".into()]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.q_grid.iter().zip(&self.lower_bounds).map(|(q, l)| vec![q.to_string(), l.to_string()]).collect()
    }
}

impl CsvTable for FitSummary {
    fn header(&self) -> Vec<String> {
        vec!["term".into(), "beta".into()]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.terms.iter().zip(&self.beta).map(|(t, b)| vec![t.clone(), b.to_string()]).collect()
    }
}

fn status_name(s: BoundStatus) -> &'static str {
    match s {
        BoundStatus::Exact => "exact",
        BoundStatus::Relaxed => "relaxed",
        BoundStatus::Infeasible => "infeasible",
    }
}

pub fn write_table<W: std::io::Write>(t: &dyn CsvTable, w: W) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(t.header())?;
    for r in t.records() {
        wtr.write_record(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the report to `<out>/<command>.<ext>` or stdout.
pub fn emit<T: Serialize + CsvTable>(report: &Report<T>, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    match (format, out) {
        (Format::Json, None) => {
            serde_json::to_writer_pretty(std::io::stdout().lock(), report)?;
            println!();
        }
        (Format::Csv, None) => write_table(&report.results, std::io::stdout().lock())?,
        (Format::Json, Some(dir)) => {
            let f = std::fs::File::create(dir.join(format!("{}.json", report.command)))?;
            serde_json::to_writer_pretty(std::io::BufWriter::new(f), report)?;
        }
        (Format::Csv, Some(dir)) => {
            let f = std::fs::File::create(dir.join(format!("{}.csv", report.command)))?;
            write_table(&report.results, f)?;
        }
    }
    Ok(())
}
