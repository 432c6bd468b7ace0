//! Named experiments.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{spiky, EstimatorSpec, ExperimentConfig, FamilySpec, PartitionSpec, TruthSpec};
use super::report::{Check, ReportBundle};
use super::risk::{mc_losses, mc_risk, RunOptions};
use crate::density::{
    hellinger_sq, l2_dist, l2_dist_sq, make_stheta, pairwise_sum, project_bounded, projection_bound_factor, tail_q,
    PiecewiseDensity, StepFunction,
};
use crate::estimators::{first_half, EstimatorOptions};
use crate::models::{histogram_risk_exact, Partition, WeightScheme};
use crate::rng::RngStream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub default_reps: usize,
    /// Rough single-core wall time of the release build at default settings.
    pub expected_secs: u32,
}

pub const CATALOG: [CatalogEntry; 5] = [
    CatalogEntry {
        name: "spiky",
        description: "histogram exact risk vs Γ-adaptive estimator on 2D narrow spikes (D=2, γ=50, n=1000)",
        default_reps: 200,
        expected_secs: 1,
    },
    CatalogEntry {
        name: "partition-select",
        description: "histogram selection over nested dyadic partitions on a two-scale truth vs per-model exact oracles (n=2000)",
        default_reps: 100,
        expected_secs: 1,
    },
    CatalogEntry {
        name: "stheta",
        description: "Hellinger and L2 distance laws of the two-piece family s_θ on a 20×20 grid; L2 blow-up as θ → 0",
        default_reps: 0,
        expected_secs: 1,
    },
    CatalogEntry {
        name: "projection-bound",
        description: "bounded-projection error vs the tail bound over 50 random step densities × Γ ∈ {2.5, 3, 5, 10}",
        default_reps: 0,
        expected_secs: 1,
    },
    CatalogEntry {
        name: "aggregation",
        description: "selection and linear aggregation of four histogram preliminaries vs the best preliminary (n=2000)",
        default_reps: 50,
        expected_secs: 20,
    },
];

/// Per-run changes to a catalog experiment's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub c_eta: Option<f64>,
    pub n: Option<usize>,
    /// Spike count `D` of the spiky experiment.
    pub d: Option<usize>,
    /// Spike height factor `γ` of the spiky experiment.
    pub gamma: Option<f64>,
}

pub fn list() -> &'static [CatalogEntry] {
    &CATALOG
}

pub fn run_experiment(name: &str, ov: &Overrides, run: &RunOptions) -> Result<ReportBundle> {
    match name {
        "spiky" => run_spiky(ov, run),
        "partition-select" => run_partition_select(ov, run),
        "stheta" => Ok(run_stheta()),
        "projection-bound" => Ok(run_projection_bound(ov.seed.unwrap_or(DEFAULT_SEED))),
        "aggregation" => run_aggregation(ov, run),
        _ => Err(Error::UnknownExperiment(name.to_string())),
    }
}

const DEFAULT_SEED: u64 = 1;

#[allow(clippy::too_many_arguments)]
fn config(name: &str, label: &str, truth: &TruthSpec, estimator: EstimatorSpec, n: usize, reps: usize, seed: u64, c_eta: f64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        label: Some(label.to_string()),
        truth: truth.clone(),
        estimator,
        n,
        reps,
        seed,
        params: EstimatorOptions { c_eta, ..Default::default() },
        qmoment: None,
    }
}

/// Lower `level` quantile of `hist / mean(resampled losses)` over `b` bootstrap resamples.
pub fn bootstrap_ratio_lower(hist: f64, losses: &[f64], b: usize, level: f64, rng: &mut RngStream) -> f64 {
    let k = losses.len();
    let mut ratios: Vec<f64> = (0..b)
        .map(|_| {
            let draw: Vec<f64> = (0..k).map(|_| losses[rng.gen_range(0..k)]).collect();
            hist / (pairwise_sum(&draw) / k as f64)
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    ratios[((level * b as f64).floor() as usize).min(b - 1)]
}

fn run_spiky(ov: &Overrides, run: &RunOptions) -> Result<ReportBundle> {
    let d = ov.d.unwrap_or(2);
    let gamma = ov.gamma.unwrap_or(50.0);
    let n = ov.n.unwrap_or(1000);
    let reps = ov.reps.unwrap_or(200);
    let seed = ov.seed.unwrap_or(DEFAULT_SEED);
    let c_eta = ov.c_eta.unwrap_or(0.1);
    let truth = TruthSpec::Spiky { d, gamma };
    let (s, cells) = spiky(d, gamma, n)?;

    let mut bundle = ReportBundle::new(
        "spiky",
        json!({"d": d, "gamma": gamma, "n": n, "reps": reps, "seed": seed, "c_eta": c_eta}),
    );
    let hist_cfg = config("spiky", "histogram", &truth, EstimatorSpec::Histogram { partition: PartitionSpec::Truth }, n, reps, seed, c_eta);
    bundle.reports.push(mc_risk(&hist_cfg, run)?);
    let full_cfg = config(
        "spiky",
        "full",
        &truth,
        EstimatorSpec::Full { family: FamilySpec::Single { partition: PartitionSpec::Truth, weight: 0.5 } },
        n,
        reps,
        seed,
        c_eta,
    );
    let (full, losses) = mc_losses(&full_cfg, run)?;
    let losses: Vec<f64> = losses.into_iter().flatten().collect();
    let hist_exact = histogram_risk_exact(&s, &cells, n);
    let lower_bound = 0.9 * d as f64 * gamma / n as f64;
    let ratio = hist_exact / full.risk_mean;
    let mut brng = RngStream::new(seed, u64::MAX);
    let ratio_lower = bootstrap_ratio_lower(hist_exact, &losses, 2000, 0.025, &mut brng);
    bundle.reports.push(full);
    bundle.derived.insert("histogram_exact".into(), hist_exact);
    bundle.derived.insert("histogram_lower_bound".into(), lower_bound);
    bundle.derived.insert("ratio".into(), ratio);
    bundle.derived.insert("ratio_lower95".into(), ratio_lower);
    bundle.checks.push(Check::closed("histogram_exact_above_0.9Dgamma/n", hist_exact, Some(lower_bound), None));
    bundle.checks.push(Check::open("ratio_lower95_above_1", ratio_lower, Some(1.0), None));
    Ok(bundle)
}

fn run_partition_select(ov: &Overrides, run: &RunOptions) -> Result<ReportBundle> {
    let n = ov.n.unwrap_or(2000);
    let reps = ov.reps.unwrap_or(100);
    let seed = ov.seed.unwrap_or(DEFAULT_SEED);
    let c_eta = ov.c_eta.unwrap_or(0.5);
    let max_level = 5;
    let truth = TruthSpec::TwoScale;
    let s = truth.density(n)?;
    let mut bundle = ReportBundle::new(
        "partition-select",
        json!({"truth": "two_scale", "max_level": max_level, "n": n, "reps": reps, "seed": seed, "c_eta": c_eta}),
    );
    let mut best = f64::INFINITY;
    let mut best_k = 0;
    for level in 0..=max_level {
        let k = 1usize << level;
        let cfg = config(
            "partition-select",
            &format!("histogram-k{k}"),
            &truth,
            EstimatorSpec::Histogram { partition: PartitionSpec::Dyadic { level } },
            n,
            reps,
            seed,
            c_eta,
        );
        bundle.reports.push(mc_risk(&cfg, run)?);
        let oracle = histogram_risk_exact(&s, &Partition::dyadic(level)?, n);
        if oracle < best {
            best = oracle;
            best_k = k;
        }
    }
    let cfg = config(
        "partition-select",
        "aggregate_select",
        &truth,
        EstimatorSpec::AggregateSelect { family: FamilySpec::NestedDyadic { max_level } },
        n,
        reps,
        seed,
        c_eta,
    );
    let mut sel = mc_risk(&cfg, run)?;
    sel.oracle = Some(best);
    let ratio = sel.risk_mean / best;
    bundle.reports.push(sel);
    bundle.derived.insert("best_oracle".into(), best);
    bundle.derived.insert("best_oracle_cells".into(), best_k as f64);
    bundle.derived.insert("selected_over_oracle".into(), ratio);
    bundle.checks.push(Check::closed("selected_within_5x_oracle", ratio, None, Some(5.0)));
    Ok(bundle)
}

/// Grid `θ_i = i/60`, `i = 1..=20`, covering `(0, 1/3]`.
pub fn stheta_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 60.0).collect()
}

/// Extremes of `h²/|θ−λ|` and `d₂²/|1/θ − 1/λ|` over distinct grid pairs.
pub fn stheta_ratio_ranges(grid: &[f64]) -> Result<[(f64, f64); 2]> {
    let dens = grid.iter().map(|&t| make_stheta(t)).collect::<Result<Vec<_>>>()?;
    let mut h = (f64::INFINITY, f64::NEG_INFINITY);
    let mut l = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            if i == j {
                continue;
            }
            let rh = hellinger_sq(&dens[i], &dens[j]) / (grid[i] - grid[j]).abs();
            let rl = l2_dist_sq(&dens[i], &dens[j]) / (1.0 / grid[i] - 1.0 / grid[j]).abs();
            h = (h.0.min(rh), h.1.max(rh));
            l = (l.0.min(rl), l.1.max(rl));
        }
    }
    Ok([h, l])
}

fn run_stheta() -> ReportBundle {
    let mut bundle = ReportBundle::new("stheta", json!({"grid": "i/60, i = 1..=20"}));
    let [h, l] = stheta_ratio_ranges(&stheta_grid()).expect("grid lies in (0, 1/3]");
    bundle.derived.insert("hellinger_ratio_min".into(), h.0);
    bundle.derived.insert("hellinger_ratio_max".into(), h.1);
    bundle.derived.insert("l2_ratio_min".into(), l.0);
    bundle.derived.insert("l2_ratio_max".into(), l.1);
    bundle.checks.push(Check::open("hellinger_ratio_min", h.0, Some(2.0 / 9.0), Some(1.5)));
    bundle.checks.push(Check::open("hellinger_ratio_max", h.1, Some(2.0 / 9.0), Some(1.5)));
    bundle.checks.push(Check::open("l2_ratio_min", l.0, Some(1.0), Some(3.0)));
    bundle.checks.push(Check::open("l2_ratio_max", l.1, Some(1.0), Some(3.0)));
    let far = make_stheta(1.0 / 3.0).expect("θ = 1/3 is valid");
    for e in 1..=6 {
        let theta = 10f64.powi(-e);
        let s = make_stheta(theta).expect("θ in range");
        bundle.derived.insert(format!("l2_to_third_theta_1e-{e}"), l2_dist(&s, &far));
        bundle.derived.insert(format!("hellinger_sq_to_third_theta_1e-{e}"), hellinger_sq(&s, &far));
    }
    bundle
}

/// A random density with at most `max_pieces` cells and occasional tall
/// cells: values are cubes of exponential draws, then normalised.
pub fn random_density(rng: &mut RngStream, max_pieces: usize) -> PiecewiseDensity {
    let pieces = rng.gen_range(1..=max_pieces);
    let mut interior: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(0.001..0.999)).collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    let mut breakpoints = vec![0.0];
    breakpoints.extend(interior);
    breakpoints.push(1.0);
    let values: Vec<f64> = (1..breakpoints.len())
        .map(|_| {
            let e: f64 = -(1.0 - rng.gen::<f64>()).ln();
            e * e * e + 1e-3
        })
        .collect();
    let f = StepFunction::new(breakpoints, values).expect("sorted breakpoints");
    let total = f.integral();
    let mut d = PiecewiseDensity::validate(f.scale(1.0 / total));
    // rescaling can miss the unit integral by an ulp or so; retry on the exact mass
    if d.is_err() {
        let g = f.scale(1.0 / total);
        d = PiecewiseDensity::validate(g.scale(1.0 / g.integral()));
    }
    d.expect("normalised step function")
}

/// Gammas of the projection-bound experiment.
pub const PROJECTION_GAMMAS: [f64; 4] = [2.5, 3.0, 5.0, 10.0];

/// Counts over random densities of bound violations, idempotence defects
/// and non-expansiveness violations of `π_Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ProjectionAudit {
    pub cases: usize,
    pub bound_violations: usize,
    pub max_bound_ratio: f64,
    pub max_idempotence_gap: f64,
    pub expansion_violations: usize,
}

pub fn projection_audit(seed: u64, count: usize) -> Result<ProjectionAudit> {
    let mut rng = RngStream::new(seed, 0xB0D);
    let dens: Vec<PiecewiseDensity> = (0..count).map(|_| random_density(&mut rng, 32)).collect();
    let mut audit = ProjectionAudit::default();
    for &g in &PROJECTION_GAMMAS {
        let proj = dens.iter().map(|s| project_bounded(s, g)).collect::<Result<Vec<_>>>()?;
        for (s, p) in dens.iter().zip(&proj) {
            audit.cases += 1;
            let lhs = l2_dist_sq(s, p);
            let rhs = projection_bound_factor(g) * tail_q(s, g);
            if lhs > rhs * (1.0 + 1e-12) + 1e-15 {
                audit.bound_violations += 1;
            }
            if rhs > 0.0 {
                audit.max_bound_ratio = audit.max_bound_ratio.max(lhs / rhs);
            }
            let again = project_bounded(p, g)?;
            audit.max_idempotence_gap = audit.max_idempotence_gap.max(l2_dist(&again, p));
        }
        for i in 0..count {
            let j = (i + 1) % count;
            if l2_dist(&proj[i], &proj[j]) > l2_dist(&dens[i], &dens[j]) * (1.0 + 1e-12) + 1e-15 {
                audit.expansion_violations += 1;
            }
        }
    }
    Ok(audit)
}

fn run_projection_bound(seed: u64) -> ReportBundle {
    let mut bundle = ReportBundle::new("projection-bound", json!({"densities": 50, "gammas": PROJECTION_GAMMAS, "seed": seed}));
    let a = projection_audit(seed, 50).expect("gammas exceed 1");
    bundle.derived.insert("cases".into(), a.cases as f64);
    bundle.derived.insert("max_bound_ratio".into(), a.max_bound_ratio);
    bundle.checks.push(Check::closed("bound_violations", a.bound_violations as f64, None, Some(0.0)));
    bundle.checks.push(Check::closed("idempotence_gap", a.max_idempotence_gap, None, Some(1e-12)));
    bundle.checks.push(Check::closed("expansion_violations", a.expansion_violations as f64, None, Some(0.0)));
    bundle
}

fn run_aggregation(ov: &Overrides, run: &RunOptions) -> Result<ReportBundle> {
    let n = ov.n.unwrap_or(2000);
    let reps = ov.reps.unwrap_or(50);
    let seed = ov.seed.unwrap_or(DEFAULT_SEED);
    let c_eta = ov.c_eta.unwrap_or(0.05);
    let truth = TruthSpec::Regular { values: vec![1.6, 0.4, 1.2, 0.8] };
    let s = truth.density(n)?;
    let cells = [1usize, 2, 4, 8];
    let partitions: Vec<PartitionSpec> = cells.iter().map(|&k| PartitionSpec::Regular { cells: k }).collect();
    let family = FamilySpec::Partitions { partitions, scheme: WeightScheme::Nested };
    let n1 = first_half(n);
    let mut bundle = ReportBundle::new(
        "aggregation",
        json!({"truth": [1.6, 0.4, 1.2, 0.8], "preliminaries": cells, "n": n, "reps": reps, "seed": seed, "c_eta": c_eta}),
    );
    let mut best = f64::INFINITY;
    for &k in &cells {
        let cfg = config(
            "aggregation",
            &format!("histogram-k{k}"),
            &truth,
            EstimatorSpec::Histogram { partition: PartitionSpec::Regular { cells: k } },
            n1,
            reps,
            seed,
            c_eta,
        );
        bundle.reports.push(mc_risk(&cfg, run)?);
        best = best.min(histogram_risk_exact(&s, &Partition::regular(k)?, n1));
    }
    bundle.derived.insert("best_preliminary_oracle".into(), best);
    for (label, est) in [
        ("aggregate_select", EstimatorSpec::AggregateSelect { family: family.clone() }),
        ("linear_aggregate", EstimatorSpec::LinearAggregate { family: family.clone() }),
    ] {
        let mut r = mc_risk(&config("aggregation", label, &truth, est, n, reps, seed, c_eta), run)?;
        r.oracle = Some(best);
        bundle.derived.insert(format!("{label}_over_oracle"), r.risk_mean / best);
        bundle.checks.push(Check::closed(&format!("{label}_within_5x_oracle"), r.risk_mean / best, None, Some(5.0)));
        bundle.reports.push(r);
    }
    Ok(bundle)
}
