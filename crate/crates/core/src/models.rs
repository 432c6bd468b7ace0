//! Partition models, histogram and projection estimators, model weights.

use serde::{Deserialize, Serialize};

use crate::density::{
    l2_dist_sq, merged_grid, pairwise_sum, PiecewiseDensity, Sample, StepFunction,
};
use crate::{Error, Result};

/// A finite partition of `[0, 1]` into intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    breakpoints: Vec<f64>,
}

impl Partition {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        // reuse the step-function breakpoint checks
        StepFunction::new(breakpoints.clone(), vec![0.0; breakpoints.len().saturating_sub(1)])?;
        Ok(Self { breakpoints })
    }

    /// `k` cells of equal length.
    pub fn regular(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("partition with zero cells".into()));
        }
        let mut breakpoints: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
        breakpoints[k] = 1.0;
        Self::new(breakpoints)
    }

    /// Regular partition into `2^level` cells.
    pub fn dyadic(level: u32) -> Result<Self> {
        Self::regular(1usize << level)
    }

    pub fn trivial() -> Self {
        Self { breakpoints: vec![0.0, 1.0] }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn num_cells(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn cell_lengths(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index of the cell containing `x`.
    pub fn locate(&self, x: f64) -> usize {
        let interior = &self.breakpoints[1..self.breakpoints.len() - 1];
        interior.partition_point(|&b| b <= x)
    }

    /// Step function taking `values[j]` on cell `j`.
    pub fn step(&self, values: Vec<f64>) -> Result<StepFunction> {
        StepFunction::new(self.breakpoints.clone(), values)
    }

    /// The orthonormal basis `l_j^{-1/2} 1_{I_j}`.
    pub fn indicator_basis(&self) -> Vec<StepFunction> {
        let lengths = self.cell_lengths();
        (0..self.num_cells())
            .map(|j| {
                let mut v = vec![0.0; self.num_cells()];
                v[j] = 1.0 / lengths[j].sqrt();
                StepFunction::from_parts_unchecked(self.breakpoints.clone(), v)
            })
            .collect()
    }

    /// Cell counts `N_j` of a sample.
    pub fn counts(&self, x: &Sample) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_cells()];
        for &obs in &x.observations {
            counts[self.locate(obs)] += 1;
        }
        counts
    }

    /// Cell masses `p_j = ∫_{I_j} s dμ`.
    pub fn masses(&self, s: &StepFunction) -> Vec<f64> {
        self.breakpoints
            .windows(2)
            .map(|w| s.integral_between(w[0], w[1]))
            .collect()
    }
}

/// The linear space of step functions on a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionModel {
    pub partition: Partition,
    pub dim: usize,
    /// Metric dimension bound `D̄ = dim / 2`.
    pub metric_dim_bound: f64,
}

impl PartitionModel {
    pub fn new(partition: Partition) -> Self {
        let dim = partition.num_cells();
        Self { partition, dim, metric_dim_bound: dim as f64 / 2.0 }
    }
}

/// How [`default_weights`] assigns `Δ_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    /// `Δ_m = max(D̄_m, 1/10)`; meant for one model per dimension.
    Nested,
    /// `Δ_m = 2 |m|`, enough to pay for the `≤ 4^k` binary split trees with `k` leaves.
    BinarySplits,
}

/// Minimal admissible weight.
pub const MIN_WEIGHT: f64 = 0.1;

/// Models with weights `Δ_m` and `Σ = Σ_m exp(−Δ_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedModelFamily {
    pub models: Vec<PartitionModel>,
    pub weights: Vec<f64>,
    pub sigma: f64,
}

/// Check `Δ_m ≥ 1/10` and return `Σ exp(−Δ_m)`.
pub fn check_weights(weights: &[f64]) -> Result<f64> {
    for (index, &weight) in weights.iter().enumerate() {
        if !(weight >= MIN_WEIGHT) || !weight.is_finite() {
            return Err(Error::WeightTooSmall { index, weight });
        }
    }
    let terms: Vec<f64> = weights.iter().map(|w| (-w).exp()).collect();
    Ok(pairwise_sum(&terms))
}

impl WeightedModelFamily {
    pub fn new(models: Vec<PartitionModel>, weights: Vec<f64>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidParameter("empty model family".into()));
        }
        if models.len() != weights.len() {
            return Err(Error::InvalidParameter("one weight per model required".into()));
        }
        let sigma = check_weights(&weights)?;
        Ok(Self { models, weights, sigma })
    }

    /// Regular dyadic partitions with `1, 2, 4, …, 2^max_level` cells, nested weights.
    pub fn nested_dyadic(max_level: u32) -> Result<Self> {
        let models = (0..=max_level)
            .map(|l| Partition::dyadic(l).map(PartitionModel::new))
            .collect::<Result<Vec<_>>>()?;
        default_weights(models, WeightScheme::Nested)
    }

    /// A single model with weight 1/2.
    pub fn single(model: PartitionModel) -> Self {
        Self::new(vec![model], vec![0.5]).expect("weight 1/2 is admissible")
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

pub fn default_weights(
    models: Vec<PartitionModel>,
    scheme: WeightScheme,
) -> Result<WeightedModelFamily> {
    let weights = models
        .iter()
        .map(|m| match scheme {
            WeightScheme::Nested => m.metric_dim_bound.max(MIN_WEIGHT),
            WeightScheme::BinarySplits => 2.0 * m.dim as f64,
        })
        .collect();
    WeightedModelFamily::new(models, weights)
}

/// Orthogonal projection onto the partition model: cell averages `p_j / l_j`.
pub fn project_model(s: &StepFunction, p: &Partition) -> StepFunction {
    let lengths = p.cell_lengths();
    let values = p
        .masses(s)
        .into_iter()
        .zip(&lengths)
        .map(|(m, l)| m / l)
        .collect();
    StepFunction::from_parts_unchecked(p.breakpoints().to_vec(), values)
}

/// The histogram `Σ N_j / (n l_j) 1_{I_j}`.
pub fn histogram(x: &Sample, p: &Partition) -> Result<PiecewiseDensity> {
    if x.is_empty() {
        return Err(Error::SampleTooSmall { n: 0, min: 1 });
    }
    let n = x.len() as f64;
    let values = p
        .counts(x)
        .into_iter()
        .zip(p.cell_lengths())
        .map(|(c, l)| c as f64 / (n * l))
        .collect();
    PiecewiseDensity::validate(StepFunction::from_parts_unchecked(
        p.breakpoints().to_vec(),
        values,
    ))
}

/// Bias and variance parts of the exact histogram risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramRisk {
    pub bias_sq: f64,
    pub variance: f64,
}

impl HistogramRisk {
    pub fn total(&self) -> f64 {
        self.bias_sq + self.variance
    }
}

/// `E‖ŝ_I − s‖² = ‖s̄_I − s‖² + n⁻¹ Σ p_j (1 − p_j) / l_j`.
pub fn histogram_risk_exact(s: &StepFunction, p: &Partition, n: usize) -> f64 {
    histogram_risk_parts(s, p, n).total()
}

pub fn histogram_risk_parts(s: &StepFunction, p: &Partition, n: usize) -> HistogramRisk {
    let bias_sq = l2_dist_sq(s, &project_model(s, p));
    let terms: Vec<f64> = p
        .masses(s)
        .iter()
        .zip(p.cell_lengths())
        .map(|(pj, l)| pj * (1.0 - pj) / l)
        .collect();
    HistogramRisk { bias_sq, variance: pairwise_sum(&terms) / n as f64 }
}

/// Largest deviation of the Gram matrix of `basis` from the identity.
pub fn gram_deviation(basis: &[StepFunction]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.inner(b) - target).abs());
        }
    }
    worst
}

/// Empirical coefficients `β̂_j = n⁻¹ Σ_i φ_j(X_i)` of an orthonormal basis.
pub fn projection_coefficients(x: &Sample, basis: &[StepFunction]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::SampleTooSmall { n: 0, min: 1 });
    }
    let max_dev = gram_deviation(basis);
    if max_dev > 1e-10 {
        return Err(Error::NotOrthonormal { max_dev });
    }
    let n = x.len() as f64;
    Ok(basis
        .iter()
        .map(|phi| {
            let terms: Vec<f64> = x.observations.iter().map(|&obs| phi.eval(obs)).collect();
            pairwise_sum(&terms) / n
        })
        .collect())
}

/// `Σ β_j φ_j` on the merged grid of the basis.
pub fn projection_estimator(coefficients: &[f64], basis: &[StepFunction]) -> StepFunction {
    let grid = merged_grid(basis.iter());
    let mut values = vec![0.0; grid.len() - 1];
    for (beta, phi) in coefficients.iter().zip(basis) {
        for (v, phi_v) in values.iter_mut().zip(phi.refine_to(&grid)) {
            *v += beta * phi_v;
        }
    }
    StepFunction::from_parts_unchecked(grid, values)
}

/// Constant function plus the Haar wavelets `ψ_{j,k}`, `j < level`, on the
/// dyadic grid with `2^level` cells.
pub fn haar_basis(level: u32) -> Vec<StepFunction> {
    let cells = 1usize << level;
    let grid: Vec<f64> = (0..=cells).map(|j| j as f64 / cells as f64).collect();
    let mut basis = vec![StepFunction::from_parts_unchecked(grid.clone(), vec![1.0; cells])];
    for j in 0..level {
        let blocks = 1usize << j;
        let width = cells / blocks;
        let height = (blocks as f64).sqrt();
        for k in 0..blocks {
            let mut v = vec![0.0; cells];
            for (c, slot) in v.iter_mut().enumerate().skip(k * width).take(width) {
                *slot = if c < k * width + width / 2 { height } else { -height };
            }
            basis.push(StepFunction::from_parts_unchecked(grid.clone(), v));
        }
    }
    basis
}
