//! Monte Carlo risk harness, named experiments and reports.

pub mod catalog;
pub mod config;
pub mod report;
pub mod risk;

pub use catalog::{list, run_experiment, CatalogEntry, Overrides};
pub use config::{EstimatorSpec, ExperimentConfig, FamilySpec, PartitionSpec, TruthSpec};
pub use report::{emit_report, Check, Format, ReportBundle};
pub use risk::{mc_risk, RiskReport, RunOptions};
