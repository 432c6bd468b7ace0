//! Monte Carlo risk engine.
//!
//! Replicate `r` draws its sample and all its randomization from stream
//! `(seed, r)`, and losses are reduced in replicate order, so reports do not
//! depend on the number of worker threads.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EstimatorSpec, ExperimentConfig};
use crate::density::{l2_dist_sq, pairwise_sum, sample, PiecewiseDensity, Sample, StepFunction};
use crate::estimators::{aggregate_select, first_half, linear_aggregate, prepare_level, EstimatorOptions, FullPlan};
use crate::models::{
    haar_basis, histogram, histogram_risk_exact, project_model, projection_coefficients,
    projection_estimator, Partition, WeightedModelFamily,
};
use crate::net::LinearModel;
use crate::rng::RngStream;
use crate::select::{t_select_prepared, Prepared};
use crate::{Error, Result};

/// Execution settings that do not change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    /// Record wall time; when off, `wall_ms` is 0 so reports are reproducible byte for byte.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 0, timing: true }
    }
}

/// Risk estimate for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub experiment: String,
    pub estimator: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub c_eta: f64,
    /// Mean of `‖s − ŝ‖²` over successful replicates.
    pub risk_mean: f64,
    /// Sample standard deviation over `√reps_effective` (0 for one replicate).
    pub risk_se: f64,
    /// Exact risk when a closed form exists.
    pub oracle: Option<f64>,
    pub qmoment_q: Option<f64>,
    /// Mean of `‖s − ŝ‖^q`.
    pub qmoment_value: Option<f64>,
    pub wall_ms: u64,
    pub reps_effective: usize,
    pub failures: usize,
    /// `‖s − s̄‖²` for estimators living in a fixed linear model; the mean
    /// risk minus this term is the estimation part.
    pub bias_sq: Option<f64>,
}

/// Mean, standard error and q-th moment of per-replicate losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSummary {
    pub mean: f64,
    pub se: f64,
    pub qmoment: Option<f64>,
}

pub fn summarize(losses: &[f64], q: Option<f64>) -> Option<LossSummary> {
    if losses.is_empty() {
        return None;
    }
    let k = losses.len() as f64;
    let mean = pairwise_sum(losses) / k;
    let se = if losses.len() > 1 {
        let dev: Vec<f64> = losses.iter().map(|l| (l - mean) * (l - mean)).collect();
        (pairwise_sum(&dev) / (k - 1.0)).sqrt() / k.sqrt()
    } else {
        0.0
    };
    let qmoment = q.map(|q| {
        let terms: Vec<f64> = losses.iter().map(|l| l.max(0.0).powf(q / 2.0)).collect();
        pairwise_sum(&terms) / k
    });
    Some(LossSummary { mean, se, qmoment })
}

/// Run `f` on replicates `0..reps`, replicate `r` with stream `(seed, r)`.
/// Results come back in replicate order.
pub fn run_replicates<T, F>(reps: usize, seed: u64, jobs: usize, f: F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(&mut RngStream) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        (0..reps as u64)
            .into_par_iter()
            .map(|r| f(&mut RngStream::for_replicate(seed, r)))
            .collect()
    }))
}

/// Data-independent state of an estimator, built once per experiment.
enum Plan {
    Histogram(Partition),
    Projection(Vec<StepFunction>),
    TSelect { prep: Prepared, gamma: f64 },
    Full(FullPlan),
    Aggregate { parts: Vec<Partition>, weights: Vec<f64> },
    Linear { parts: Vec<Partition> },
}

impl Plan {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let (truth, n, opts) = (&cfg.truth, cfg.n, &cfg.params);
        let parts = |fam: &WeightedModelFamily| fam.models.iter().map(|m| m.partition.clone()).collect();
        Ok(match &cfg.estimator {
            EstimatorSpec::Histogram { partition } => Plan::Histogram(partition.build(truth, n)?),
            EstimatorSpec::Projection { level } => Plan::Projection(haar_basis(*level)),
            EstimatorSpec::TSelect { family, gamma } => {
                let fam = family.build(truth, n)?;
                let models: Vec<LinearModel> = fam.models.iter().map(LinearModel::from).collect();
                Plan::TSelect { prep: prepare_level(&models, &fam.weights, *gamma, n, opts)?, gamma: *gamma }
            }
            EstimatorSpec::Full { family } => Plan::Full(FullPlan::for_family(&family.build(truth, n)?, n, opts)?),
            EstimatorSpec::AggregateSelect { family } => {
                let fam = family.build(truth, n)?;
                Plan::Aggregate { parts: parts(&fam), weights: fam.weights.clone() }
            }
            EstimatorSpec::LinearAggregate { family } => Plan::Linear { parts: parts(&family.build(truth, n)?) },
        })
    }

    fn estimate(&self, x: &Sample, opts: &EstimatorOptions, rng: &mut RngStream) -> Result<StepFunction> {
        let prelims = |parts: &[Partition], x1: &Sample| -> Result<Vec<StepFunction>> {
            parts.iter().map(|p| histogram(x1, p).map(PiecewiseDensity::into_step)).collect()
        };
        Ok(match self {
            Plan::Histogram(p) => histogram(x, p)?.into_step(),
            Plan::Projection(basis) => projection_estimator(&projection_coefficients(x, basis)?, basis),
            Plan::TSelect { prep, gamma } => t_select_prepared(prep, *gamma, x, opts.lambda, rng)?.0.into_step(),
            Plan::Full(plan) => plan.run(x, rng)?.estimate.into_step(),
            Plan::Aggregate { parts, weights } => {
                let (x1, x2) = x.split_at(first_half(x.len()));
                aggregate_select(&prelims(parts, &x1)?, weights, &x2, opts, rng)?.estimate.into_step()
            }
            Plan::Linear { parts } => {
                let (x1, x2) = x.split_at(first_half(x.len()));
                linear_aggregate(&prelims(parts, &x1)?, &x2, opts, rng)?.estimate.into_step()
            }
        })
    }

    /// Fixed model the estimator lives in, if any.
    fn model_partition(&self) -> Option<Partition> {
        match self {
            Plan::Histogram(p) => Some(p.clone()),
            Plan::Projection(basis) => Partition::new(basis[0].breakpoints().to_vec()).ok(),
            _ => None,
        }
    }
}

/// Monte Carlo risk of one configuration, with the per-replicate losses
/// (`None` for failed replicates).
pub fn mc_losses(cfg: &ExperimentConfig, run: &RunOptions) -> Result<(RiskReport, Vec<Option<f64>>)> {
    cfg.validate()?;
    let start = Instant::now();
    let truth = cfg.truth.density(cfg.n)?;
    let plan = Plan::new(cfg)?;
    let results = run_replicates(cfg.reps, cfg.seed, run.jobs, |rng| {
        let x = sample(&truth, cfg.n, rng);
        let est = plan.estimate(&x, &cfg.params, rng)?;
        Ok(l2_dist_sq(&est, &truth))
    })?;
    let losses: Vec<Option<f64>> = results.into_iter().map(|r| r.ok()).collect();
    let ok: Vec<f64> = losses.iter().flatten().copied().collect();
    let summary = summarize(&ok, cfg.qmoment).ok_or_else(|| {
        Error::InvalidParameter(format!("all {} replicates of {} failed", cfg.reps, cfg.name))
    })?;
    let model = plan.model_partition();
    let report = RiskReport {
        experiment: cfg.name.clone(),
        estimator: cfg.label(),
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        c_eta: cfg.params.c_eta,
        risk_mean: summary.mean,
        risk_se: summary.se,
        oracle: model.as_ref().map(|p| histogram_risk_exact(&truth, p, cfg.n)),
        qmoment_q: cfg.qmoment,
        qmoment_value: summary.qmoment,
        wall_ms: if run.timing { start.elapsed().as_millis() as u64 } else { 0 },
        reps_effective: ok.len(),
        failures: cfg.reps - ok.len(),
        bias_sq: model.as_ref().map(|p| l2_dist_sq(&truth, &project_model(&truth, p))),
    };
    Ok((report, losses))
}

/// Monte Carlo risk of one configuration.
pub fn mc_risk(cfg: &ExperimentConfig, run: &RunOptions) -> Result<RiskReport> {
    mc_losses(cfg, run).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_constant_losses() {
        let s = summarize(&[0.25, 0.25, 0.25, 0.25], Some(2.0)).unwrap();
        assert_eq!(s.mean, 0.25);
        assert_eq!(s.se, 0.0);
        assert_eq!(s.qmoment, Some(0.25));
        let s = summarize(&[1.0, 3.0], Some(4.0)).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.se - 1.0).abs() < 1e-15);
        assert_eq!(s.qmoment, Some(5.0));
        assert!(summarize(&[], None).is_none());
    }

    #[test]
    fn replicate_streams_are_ordered() {
        let a = run_replicates(8, 3, 1, |rng| Ok(rng.stream())).unwrap();
        let b = run_replicates(8, 3, 4, |rng| Ok(rng.stream())).unwrap();
        let a: Vec<u64> = a.into_iter().map(|r| r.unwrap()).collect();
        let b: Vec<u64> = b.into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(a, (0..8).collect::<Vec<u64>>());
        assert_eq!(a, b);
    }
}
