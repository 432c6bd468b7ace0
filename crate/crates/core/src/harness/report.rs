//! CSV and JSON reports.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::risk::RiskReport;
use crate::Result;

/// CSV columns, in order.
pub const CSV_COLUMNS: [&str; 12] = [
    "experiment",
    "estimator",
    "n",
    "reps",
    "seed",
    "c_eta",
    "risk_mean",
    "risk_se",
    "oracle",
    "qmoment_q",
    "qmoment_value",
    "wall_ms",
];

/// A named numeric check with optional bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Check {
    /// Passes iff `lower < value < upper` for the bounds given.
    pub fn open(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = lower.is_none_or(|l| value > l) && upper.is_none_or(|u| value < u);
        Self { name: name.to_string(), value, lower, upper, passed }
    }

    /// Passes iff `lower ≤ value ≤ upper` for the bounds given.
    pub fn closed(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Self { name: name.to_string(), value, lower, upper, passed }
    }
}

/// Everything one experiment produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub experiment: String,
    pub version: String,
    pub reports: Vec<RiskReport>,
    pub checks: Vec<Check>,
    pub derived: BTreeMap<String, f64>,
    /// Echo of the configuration that produced the bundle.
    pub config: serde_json::Value,
}

impl ReportBundle {
    pub fn new(experiment: &str, config: serde_json::Value) -> Self {
        Self {
            experiment: experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            reports: Vec::new(),
            checks: Vec::new(),
            derived: BTreeMap::new(),
            config,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn report(&self, estimator: &str) -> Option<&RiskReport> {
        self.reports.iter().find(|r| r.estimator == estimator)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub experiment: String,
    pub estimator: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub c_eta: f64,
    pub risk_mean: f64,
    pub risk_se: f64,
    pub oracle: Option<f64>,
    pub qmoment_q: Option<f64>,
    pub qmoment_value: Option<f64>,
    pub wall_ms: u64,
}

impl From<&RiskReport> for CsvRow {
    fn from(r: &RiskReport) -> Self {
        Self {
            experiment: r.experiment.clone(),
            estimator: r.estimator.clone(),
            n: r.n,
            reps: r.reps,
            seed: r.seed,
            c_eta: r.c_eta,
            risk_mean: r.risk_mean,
            risk_se: r.risk_se,
            oracle: r.oracle,
            qmoment_q: r.qmoment_q,
            qmoment_value: r.qmoment_value,
            wall_ms: r.wall_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Write the CSV rows; the header is always present.
pub fn write_csv<W: Write>(bundle: &ReportBundle, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in &bundle.reports {
        out.serialize(CsvRow::from(r))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?)
}

pub fn write_json<W: Write>(bundle: &ReportBundle, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, bundle)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<ReportBundle> {
    Ok(serde_json::from_reader(r)?)
}

/// Render a bundle in memory.
pub fn render(bundle: &ReportBundle, format: Format) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(bundle, &mut buf)?,
        Format::Json => write_json(bundle, &mut buf)?,
    }
    Ok(buf)
}

pub fn emit_report(bundle: &ReportBundle, format: Format, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&render(bundle, format)?)?;
    w.flush()?;
    Ok(())
}
