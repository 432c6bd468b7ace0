//! Experiment configuration.

use serde::{Deserialize, Serialize};

use crate::density::{make_stheta, PiecewiseDensity};
use crate::estimators::EstimatorOptions;
use crate::models::{default_weights, Partition, PartitionModel, WeightScheme, WeightedModelFamily};
use crate::{Error, Result};

/// Cell values of the two-scale truth on eight regular cells: a coarse
/// left/right imbalance with a fine alternation on top.
pub const TWO_SCALE_VALUES: [f64; 8] = [2.6, 0.4, 2.6, 0.4, 0.8, 0.2, 0.8, 0.2];

/// The spiky density with `2D` cells alternating lengths `α, β`, where
/// `α = 1/(γ² n)`, cell masses `p = γ α` on the short cells and
/// `q = 1/D − p` on the long ones. Returns the density and its partition.
pub fn spiky(d: usize, gamma: f64, n: usize) -> Result<(PiecewiseDensity, Partition)> {
    if d == 0 || !(gamma > 0.0) || n == 0 {
        return Err(Error::InvalidParameter("spiky truth needs D ≥ 1, γ > 0, n ≥ 1".into()));
    }
    let alpha = 1.0 / (gamma * gamma * n as f64);
    let beta = 1.0 / d as f64 - alpha;
    let p = gamma * alpha;
    let q = 1.0 / d as f64 - p;
    if !(beta > 0.0 && q >= 0.0) {
        return Err(Error::InvalidParameter(format!("spiky truth infeasible for D = {d}, γ = {gamma}, n = {n}")));
    }
    let mut breakpoints = vec![0.0];
    let mut values = Vec::with_capacity(2 * d);
    for j in 0..d {
        let start = j as f64 / d as f64;
        breakpoints.push(start + alpha);
        breakpoints.push(if j + 1 == d { 1.0 } else { (j + 1) as f64 / d as f64 });
        values.push(p / alpha);
        values.push(q / beta);
    }
    let partition = Partition::new(breakpoints)?;
    let density = PiecewiseDensity::validate(partition.step(values)?)?;
    Ok((density, partition))
}

/// The density that generates the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthSpec {
    Uniform,
    Stheta { theta: f64 },
    /// See [`spiky`]; `α` uses the experiment's `n`.
    Spiky { d: usize, gamma: f64 },
    TwoScale,
    /// Cell values on a regular partition.
    Regular { values: Vec<f64> },
    Custom { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl TruthSpec {
    pub fn density(&self, n: usize) -> Result<PiecewiseDensity> {
        match self {
            TruthSpec::Uniform => Ok(PiecewiseDensity::uniform()),
            TruthSpec::Stheta { theta } => make_stheta(*theta),
            TruthSpec::Spiky { d, gamma } => spiky(*d, *gamma, n).map(|(s, _)| s),
            TruthSpec::TwoScale => regular_density(&TWO_SCALE_VALUES),
            TruthSpec::Regular { values } => regular_density(values),
            TruthSpec::Custom { breakpoints, values } => PiecewiseDensity::new(breakpoints.clone(), values.clone()),
        }
    }

    /// The partition on which the truth is piecewise constant.
    pub fn cells(&self, n: usize) -> Result<Partition> {
        match self {
            TruthSpec::Spiky { d, gamma } => spiky(*d, *gamma, n).map(|(_, p)| p),
            _ => Partition::new(self.density(n)?.breakpoints().to_vec()),
        }
    }
}

fn regular_density(values: &[f64]) -> Result<PiecewiseDensity> {
    let p = Partition::regular(values.len())?;
    PiecewiseDensity::validate(p.step(values.to_vec())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    Regular { cells: usize },
    Dyadic { level: u32 },
    Breakpoints { breakpoints: Vec<f64> },
    /// The cells of the truth.
    Truth,
}

impl PartitionSpec {
    pub fn build(&self, truth: &TruthSpec, n: usize) -> Result<Partition> {
        match self {
            PartitionSpec::Regular { cells } => Partition::regular(*cells),
            PartitionSpec::Dyadic { level } => Partition::dyadic(*level),
            PartitionSpec::Breakpoints { breakpoints } => Partition::new(breakpoints.clone()),
            PartitionSpec::Truth => truth.cells(n),
        }
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Regular dyadic partitions with `1, 2, …, 2^max_level` cells, nested weights.
    NestedDyadic { max_level: u32 },
    Partitions { partitions: Vec<PartitionSpec>, scheme: WeightScheme },
    Single {
        partition: PartitionSpec,
        #[serde(default = "half")]
        weight: f64,
    },
}

impl FamilySpec {
    pub fn build(&self, truth: &TruthSpec, n: usize) -> Result<WeightedModelFamily> {
        match self {
            FamilySpec::NestedDyadic { max_level } => WeightedModelFamily::nested_dyadic(*max_level),
            FamilySpec::Partitions { partitions, scheme } => {
                let models = partitions
                    .iter()
                    .map(|p| p.build(truth, n).map(PartitionModel::new))
                    .collect::<Result<Vec<_>>>()?;
                if models.is_empty() {
                    return Err(Error::Config("empty partition family".into()));
                }
                default_weights(models, *scheme)
            }
            FamilySpec::Single { partition, weight } => {
                WeightedModelFamily::new(vec![PartitionModel::new(partition.build(truth, n)?)], vec![*weight])
            }
        }
    }
}

/// Which estimator a replicate runs.
///
/// The aggregation estimators build one histogram per family partition on
/// the first `⌈n/2⌉` observations and aggregate with the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Histogram { partition: PartitionSpec },
    /// Projection on the Haar basis with `2^level` cells.
    Projection { level: u32 },
    TSelect { family: FamilySpec, gamma: f64 },
    Full { family: FamilySpec },
    AggregateSelect { family: FamilySpec },
    LinearAggregate { family: FamilySpec },
}

impl EstimatorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            EstimatorSpec::Histogram { .. } => "histogram",
            EstimatorSpec::Projection { .. } => "projection",
            EstimatorSpec::TSelect { .. } => "t_select",
            EstimatorSpec::Full { .. } => "full",
            EstimatorSpec::AggregateSelect { .. } => "aggregate_select",
            EstimatorSpec::LinearAggregate { .. } => "linear_aggregate",
        }
    }

    fn min_n(&self) -> usize {
        match self {
            EstimatorSpec::Histogram { .. } | EstimatorSpec::Projection { .. } | EstimatorSpec::TSelect { .. } => 1,
            EstimatorSpec::Full { .. } => 2,
            // one half builds the preliminaries, the other is split again
            EstimatorSpec::AggregateSelect { .. } | EstimatorSpec::LinearAggregate { .. } => 3,
        }
    }
}

/// One Monte Carlo experiment: a truth, an estimator and the replicate plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Row label in reports; defaults to the estimator kind.
    #[serde(default)]
    pub label: Option<String>,
    pub truth: TruthSpec,
    pub estimator: EstimatorSpec,
    pub n: usize,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: EstimatorOptions,
    /// Report `E[d₂^q]` for this `q`.
    #[serde(default)]
    pub qmoment: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.estimator.kind().to_string())
    }

    /// Check every invariant that can be checked without sampling.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        let min_n = self.estimator.min_n();
        if self.n < min_n {
            return bad(format!("{} needs n ≥ {min_n}, got {}", self.estimator.kind(), self.n));
        }
        if let Some(q) = self.qmoment {
            if !(q > 0.0) || !q.is_finite() {
                return bad(format!("qmoment q = {q} must be positive"));
            }
        }
        let config_err = |e: Error| Error::Config(e.to_string());
        self.params.validate().map_err(config_err)?;
        self.truth.density(self.n).map_err(config_err)?;
        match &self.estimator {
            EstimatorSpec::Histogram { partition } => {
                partition.build(&self.truth, self.n).map_err(config_err)?;
            }
            EstimatorSpec::Projection { level } => {
                if *level > 20 {
                    return bad(format!("projection level {level} too large"));
                }
            }
            EstimatorSpec::TSelect { family, gamma } => {
                family.build(&self.truth, self.n).map_err(config_err)?;
                if !(*gamma >= 3.0) || !gamma.is_finite() {
                    return bad(format!("t_select needs gamma ≥ 3, got {gamma}"));
                }
            }
            EstimatorSpec::Full { family } | EstimatorSpec::AggregateSelect { family } => {
                family.build(&self.truth, self.n).map_err(config_err)?;
            }
            EstimatorSpec::LinearAggregate { family } => {
                let fam = family.build(&self.truth, self.n).map_err(config_err)?;
                if fam.len() > self.params.max_prelim {
                    return Err(config_err(Error::TooManyPreliminaries { n: fam.len(), cap: self.params.max_prelim }));
                }
            }
        }
        Ok(())
    }
}
