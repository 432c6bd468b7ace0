//! Randomized likelihood-ratio tests and selection by the defeat radius.
//!
//! Every selection round randomizes the sample once: each observation is
//! kept with probability `λ` and replaced by a fresh uniform draw otherwise,
//! so the randomized sample has density `τ(s) = λ s + 1 − λ`. All pairwise
//! tests of the round read the same randomized sample.
//!
//! The test between `t` and `u` at level shift `x` computes
//! `T = Σ ln τu(X′_i) − Σ ln τt(X′_i)` and declares `u` iff
//! `T ≥ 2y` with `y = n x / (65 Γ)`. A tie goes to `u`.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{merged_grid, pairwise_sum, sup_norm, PiecewiseDensity, Sample, StepFunction};
use crate::net::Net;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Default randomization level.
pub const DEFAULT_LAMBDA: f64 = 0.995;

/// Candidate sets larger than this do not keep a per-test log.
pub const TEST_LOG_LIMIT: usize = 128;

/// Slack allowed between a candidate's sup norm and its certified bound.
const CERT_TOL: f64 = 1e-12;

/// Parameters of one pairwise test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub level_shift: f64,
    pub n: usize,
}

impl TestConfig {
    pub fn new(lambda: f64, gamma: f64, level_shift: f64, n: usize) -> Result<Self> {
        let cfg = Self { lambda, gamma, level_shift, n };
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} outside (0, 1]")));
        }
        if !(gamma >= 3.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("test bound gamma = {gamma} below 3")));
        }
        if !level_shift.is_finite() {
            return Err(Error::InvalidParameter("level shift must be finite".into()));
        }
        if !cfg.invariant_holds() {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} too small for gamma = {gamma}"
            )));
        }
        Ok(cfg)
    }

    /// `65 Γ λ² ≥ 64 (λ Γ + 1 − λ)`.
    pub fn invariant_holds(&self) -> bool {
        let (l, g) = (self.lambda, self.gamma);
        65.0 * g * l * l >= 64.0 * (l * g + 1.0 - l)
    }

    /// `2y = 2 n x / (65 Γ)`.
    pub fn threshold(&self) -> f64 {
        threshold(self.n, self.level_shift, self.gamma)
    }
}

fn threshold(n: usize, x: f64, gamma: f64) -> f64 {
    2.0 * n as f64 * x / (65.0 * gamma)
}

/// `X′_i = X_i` with probability `λ`, otherwise a fresh uniform draw.
pub fn randomize_sample(x: &Sample, lambda: f64, rng: &mut RngStream) -> Result<Sample> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} outside (0, 1]")));
    }
    let observations = x
        .observations
        .iter()
        .map(|&obs| {
            let keep = rng.gen::<f64>() < lambda;
            let z = rng.gen::<f64>();
            if keep {
                obs
            } else {
                z
            }
        })
        .collect();
    Ok(Sample { seed: rng.seed(), stream: rng.stream(), observations })
}

/// `Σ_i ln τt(X′_i)`.
pub fn log_likelihood(t: &StepFunction, lambda: f64, x: &Sample) -> Result<f64> {
    let terms = x
        .observations
        .iter()
        .map(|&obs| {
            let v = lambda * t.eval(obs) + 1.0 - lambda;
            if v > 0.0 {
                Ok(v.ln())
            } else {
                Err(Error::DegenerateRatio)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms))
}

/// Outcome of one test between candidates `i` and `j`, run as `ψ(t_i, t_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub i: usize,
    pub j: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub winner: usize,
}

/// Which argument of a test won.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub winner: Winner,
    pub statistic: f64,
    pub threshold: f64,
}

fn decide(statistic: f64, threshold: f64) -> Winner {
    if statistic >= threshold {
        Winner::Second
    } else {
        Winner::First
    }
}

/// The test `ψ(t, u)` on a randomized sample.
pub fn pairwise_test(
    t: &PiecewiseDensity,
    u: &PiecewiseDensity,
    cfg: &TestConfig,
    x_rand: &Sample,
) -> Result<TestOutcome> {
    let lt = log_likelihood(t, cfg.lambda, x_rand)?;
    let lu = log_likelihood(u, cfg.lambda, x_rand)?;
    let statistic = lu - lt;
    let threshold = cfg.threshold();
    Ok(TestOutcome { winner: decide(statistic, threshold), statistic, threshold })
}

/// Defeat radii with their test log and the chosen index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub d_values: Vec<f64>,
    pub chosen_index: usize,
    pub test_log: Vec<TestRecord>,
}

/// `D(i) = max { d(i, j) : ψ(t_i, t_j) = t_j }`, or 0 when nothing beats `t_i`.
///
/// `test(i, j)` is called once for each `i < j`; its `winner` must be `i` or `j`.
/// `chosen_index` of the returned trace is left at 0.
pub fn d_function(
    k: usize,
    dist: impl Fn(usize, usize) -> f64,
    mut test: impl FnMut(usize, usize) -> Result<TestRecord>,
    keep_log: bool,
) -> Result<SelectionTrace> {
    let mut d_values = vec![0.0_f64; k];
    let mut test_log = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let rec = test(i, j)?;
            let loser = if rec.winner == j { i } else { j };
            d_values[loser] = d_values[loser].max(dist(i, j));
            if keep_log {
                test_log.push(rec);
            }
        }
    }
    Ok(SelectionTrace { d_values, chosen_index: 0, test_log })
}

/// `min { j : D(j) < min_i D(i) + slack }`.
pub fn select_by_rule(d_values: &[f64], slack: f64) -> Option<usize> {
    let min = d_values.iter().cloned().fold(f64::INFINITY, f64::min);
    d_values.iter().position(|&d| d < min + slack)
}

/// Index minimizing `D`, ties broken by smaller level, then lower index.
pub fn argmin_rule(d_values: &[f64], levels: &[f64]) -> Option<usize> {
    (0..d_values.len()).min_by(|&a, &b| {
        d_values[a]
            .total_cmp(&d_values[b])
            .then(levels[a].total_cmp(&levels[b]))
            .then(a.cmp(&b))
    })
}

/// Candidates with their test levels and certified sup-norm bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub points: Vec<PiecewiseDensity>,
    pub levels: Vec<f64>,
    pub gamma_of: Vec<f64>,
}

impl CandidateSet {
    pub fn new(points: Vec<PiecewiseDensity>, levels: Vec<f64>, gamma_of: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        if levels.len() != points.len() || gamma_of.len() != points.len() {
            return Err(Error::InvalidParameter("one level and one bound per candidate".into()));
        }
        if let Some(&l) = levels.iter().find(|&&l| !(l > 0.0)) {
            return Err(Error::InvalidParameter(format!("candidate level {l} must be positive")));
        }
        for (index, (p, &bound)) in points.iter().zip(&gamma_of).enumerate() {
            let sup = sup_norm(p);
            if sup > bound + CERT_TOL {
                return Err(Error::UncertifiedCandidate { index, sup, bound });
            }
        }
        Ok(Self { points, levels, gamma_of })
    }

    /// Pool the points of several nets. Nets are visited by increasing `η`
    /// (ties in given order) and a point already pooled is skipped, so each
    /// distinct density keeps the smallest `η` it appears with.
    pub fn from_nets(nets: &[Net]) -> Result<Self> {
        if nets.iter().all(|n| n.is_empty()) {
            return Err(Error::EmptyNets);
        }
        let mut order: Vec<usize> = (0..nets.len()).collect();
        order.sort_by(|&a, &b| nets[a].eta.total_cmp(&nets[b].eta));
        let mut seen = HashMap::new();
        let (mut points, mut levels, mut gamma_of) = (Vec::new(), Vec::new(), Vec::new());
        for m in order {
            for p in &nets[m].points {
                if seen.insert(dedup_key(p), ()).is_none() {
                    points.push(p.clone());
                    levels.push(nets[m].eta);
                    gamma_of.push(nets[m].gamma);
                }
            }
        }
        Self::new(points, levels, gamma_of)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn dedup_key(p: &StepFunction) -> Vec<i64> {
    let s = p.simplify();
    let q = |v: f64| (v / crate::net::DEDUP_TOL).round() as i64;
    s.breakpoints().iter().chain(s.values()).map(|&v| q(v)).collect()
}

/// Symmetric distance matrix with a zero diagonal, stored by rows above it.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    k: usize,
    upper: Vec<f64>,
}

impl DistMatrix {
    pub fn l2(points: &[PiecewiseDensity]) -> Self {
        let k = points.len();
        let rows: Vec<Vec<f64>> = (0..k)
            .into_par_iter()
            .map(|i| {
                points[i + 1..]
                    .iter()
                    .map(|q| crate::density::l2_dist(&points[i], q))
                    .collect()
            })
            .collect();
        Self { k, upper: rows.concat() }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        // rows 0..a hold k-1, k-2, ... entries
        let start = a * (2 * self.k - a - 1) / 2;
        self.upper[start + b - a - 1]
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }
}

/// Log-likelihoods of many candidates on one randomized sample.
///
/// When the merged grid of the candidates is coarser than the sample, the
/// sample is binned once on that grid and each candidate costs one pass over
/// the grid.
pub fn log_likelihoods(points: &[PiecewiseDensity], lambda: f64, x: &Sample) -> Result<Vec<f64>> {
    let grid = merged_grid(points.iter().map(|p| p.as_step()));
    if grid.len() - 1 > x.len() {
        return points.par_iter().map(|p| log_likelihood(p, lambda, x)).collect();
    }
    let interior = &grid[1..grid.len() - 1];
    let mut counts = vec![0usize; grid.len() - 1];
    for &obs in &x.observations {
        counts[interior.partition_point(|&b| b <= obs)] += 1;
    }
    let mids: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    points
        .par_iter()
        .map(|p| {
            let terms = counts
                .iter()
                .zip(&mids)
                .filter(|(&c, _)| c > 0)
                .map(|(&c, &m)| {
                    let v = lambda * p.eval(m) + 1.0 - lambda;
                    if v > 0.0 {
                        Ok(c as f64 * v.ln())
                    } else {
                        Err(Error::DegenerateRatio)
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(pairwise_sum(&terms))
        })
        .collect()
}

/// A candidate set with its distance matrix, reusable across samples.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub set: CandidateSet,
    pub dist: DistMatrix,
}

impl Prepared {
    pub fn new(set: CandidateSet) -> Self {
        let dist = DistMatrix::l2(&set.points);
        Self { set, dist }
    }
}

/// T-estimator over pooled candidates with data-driven tests.
///
/// For `t_i` at level `η_i` against `t_j` at level `η_j` the level shift is
/// `x = η_j² − η_i²`. Returns the argmin of `D` (ties: smaller level, lower index).
pub fn t_select_prepared(
    prep: &Prepared,
    gamma: f64,
    x: &Sample,
    lambda: f64,
    rng: &mut RngStream,
) -> Result<(PiecewiseDensity, SelectionTrace)> {
    TestConfig::new(lambda, gamma, 0.0, x.len())?;
    let x_rand = randomize_sample(x, lambda, rng)?;
    let ll = log_likelihoods(&prep.set.points, lambda, &x_rand)?;
    let levels = &prep.set.levels;
    let n = x.len();
    select_min_d(prep, |i, j| {
        let shift = levels[j] * levels[j] - levels[i] * levels[i];
        let thr = threshold(n, shift, gamma);
        let statistic = ll[j] - ll[i];
        let winner = match decide(statistic, thr) {
            Winner::First => i,
            Winner::Second => j,
        };
        Ok(TestRecord { i, j, statistic, threshold: thr, winner })
    })
}

/// Argmin-of-`D` selection with an arbitrary test runner.
pub fn select_min_d(
    prep: &Prepared,
    test: impl FnMut(usize, usize) -> Result<TestRecord>,
) -> Result<(PiecewiseDensity, SelectionTrace)> {
    let k = prep.set.len();
    let mut trace = d_function(k, |i, j| prep.dist.get(i, j), test, k <= TEST_LOG_LIMIT)?;
    let chosen = argmin_rule(&trace.d_values, &prep.set.levels).ok_or(Error::EmptyCandidates)?;
    trace.chosen_index = chosen;
    Ok((prep.set.points[chosen].clone(), trace))
}

/// T-estimator over the union of `nets`, all built at the same `Γ`.
pub fn t_select(
    nets: &[Net],
    x: &Sample,
    lambda: f64,
    rng: &mut RngStream,
) -> Result<(PiecewiseDensity, SelectionTrace)> {
    let gamma = nets.first().ok_or(Error::EmptyNets)?.gamma;
    if nets.iter().any(|n| n.gamma != gamma) {
        return Err(Error::InvalidParameter("nets built at different gamma".into()));
    }
    let prep = Prepared::new(CandidateSet::from_nets(nets)?);
    t_select_prepared(&prep, gamma, x, lambda, rng)
}

/// Certified bound of candidate `i` (0-based) in the Γ ladder: `2^{i+2}`.
pub fn ladder_bound(i: usize) -> f64 {
    2f64.powi(i as i32 + 2)
}

/// Choose among candidates `t_0, t_1, …` with `‖t_i‖∞ ≤ 2^{i+2}`.
///
/// The test between `t_i` and `t_j`, `i < j`, runs at `Γ = 2^{j+2}` with level
/// shift `x = 65 Γ A (j − i) / n₂`, so `t_j` wins iff `T ≥ 2A(j − i)`. With
/// `a = n₂ / 130` the result is `t_p`, `p = min { j : D(j) < min D + √(A/a) }`.
pub fn select_gamma(
    cands: &[PiecewiseDensity],
    x2: &Sample,
    a_param: f64,
    lambda: f64,
    rng: &mut RngStream,
) -> Result<(PiecewiseDensity, SelectionTrace)> {
    if cands.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if x2.is_empty() {
        return Err(Error::SampleTooSmall { n: 0, min: 1 });
    }
    if !(a_param >= 1.0) {
        return Err(Error::InvalidParameter(format!("A = {a_param} must be at least 1")));
    }
    let bounds: Vec<f64> = (0..cands.len()).map(ladder_bound).collect();
    let set = CandidateSet::new(cands.to_vec(), bounds.clone(), bounds)?;
    let dist = DistMatrix::l2(&set.points);
    let x_rand = randomize_sample(x2, lambda, rng)?;
    let ll = log_likelihoods(&set.points, lambda, &x_rand)?;
    let n2 = x2.len();
    let k = set.len();
    let mut trace = d_function(
        k,
        |i, j| dist.get(i, j),
        |i, j| {
            let gamma_pair = ladder_bound(j);
            let cfg = TestConfig::new(lambda, gamma_pair, 65.0 * gamma_pair * a_param * (j - i) as f64 / n2 as f64, n2)?;
            let statistic = ll[j] - ll[i];
            let thr = cfg.threshold();
            let winner = match decide(statistic, thr) {
                Winner::First => i,
                Winner::Second => j,
            };
            Ok(TestRecord { i, j, statistic, threshold: thr, winner })
        },
        k <= TEST_LOG_LIMIT,
    )?;
    let slack = gamma_slack(a_param, n2);
    trace.chosen_index = select_by_rule(&trace.d_values, slack).ok_or(Error::EmptyCandidates)?;
    Ok((set.points[trace.chosen_index].clone(), trace))
}

/// `√(A / a)` with `a = n₂ / 130`.
pub fn gamma_slack(a_param: f64, n2: usize) -> f64 {
    (a_param * 130.0 / n2 as f64).sqrt()
}
