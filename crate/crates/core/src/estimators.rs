//! Composite estimators built from nets, tests and the Γ ladder.
//!
//! Everything that does not depend on the data (nets, pooled candidates and
//! their distances) lives in a plan, so Monte Carlo replicates share it.

use serde::{Deserialize, Serialize};

use crate::density::{project_bounded, PiecewiseDensity, Sample, StepFunction};
use crate::models::{check_weights, WeightedModelFamily};
use crate::net::{build_linear_net, eta_model, eta_point, LinearModel, NetSpec, DEFAULT_NET_CAP};
use crate::rng::RngStream;
use crate::select::{
    ladder_bound, select_gamma, t_select_prepared, CandidateSet, Prepared, SelectionTrace,
    DEFAULT_LAMBDA,
};
use crate::{Error, Result};

/// Default cap on pooled candidates per selection round.
pub const DEFAULT_POOL_CAP: usize = 5000;

/// Tuning shared by all composite estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorOptions {
    /// Randomization level `λ`.
    pub lambda: f64,
    /// Multiplier `c_η` on the net scales.
    pub c_eta: f64,
    /// Lattice radius; `None` means `Γ`.
    pub radius: Option<f64>,
    pub net_cap: usize,
    /// Largest pooled candidate set; the distance matrix grows with its square.
    pub pool_cap: usize,
    /// Top of the Γ ladder; `None` means `⌈log₂ n⌉`.
    pub i_max: Option<usize>,
    /// The constant `A ≥ 1` of the Γ selection.
    pub a_param: f64,
    /// Largest number of preliminary estimators for linear aggregation.
    pub max_prelim: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            c_eta: 1.0,
            radius: None,
            net_cap: DEFAULT_NET_CAP,
            pool_cap: DEFAULT_POOL_CAP,
            i_max: None,
            a_param: 1.0,
            max_prelim: 8,
        }
    }
}

impl EstimatorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!("lambda = {} outside (0, 1]", self.lambda)));
        }
        if !(self.c_eta > 0.0) || !self.c_eta.is_finite() {
            return Err(Error::InvalidParameter(format!("c_eta = {} must be positive", self.c_eta)));
        }
        if !(self.a_param >= 1.0) {
            return Err(Error::InvalidParameter(format!("A = {} must be at least 1", self.a_param)));
        }
        if self.i_max == Some(0) {
            return Err(Error::InvalidParameter("i_max must be at least 1".into()));
        }
        Ok(())
    }

    fn radius_for(&self, gamma: f64) -> f64 {
        self.radius.unwrap_or(gamma).max(gamma)
    }
}

/// `⌈log₂ n⌉`, at least 1.
pub fn default_i_max(n: usize) -> usize {
    let mut i = 0;
    while (1usize << i) < n {
        i += 1;
    }
    i.max(1)
}

/// Ladder levels `Γ_i = 2^{i+1}`, `i = 1..=i_max`.
pub fn gamma_ladder(i_max: usize) -> Vec<f64> {
    (0..i_max).map(ladder_bound).collect()
}

/// Size of the first half of a split sample, `⌈n/2⌉`.
pub fn first_half(n: usize) -> usize {
    n.div_ceil(2)
}

/// Pooled nets of weighted linear models at one `Γ`, for samples of size `n`.
pub fn prepare_level(
    models: &[LinearModel],
    weights: &[f64],
    gamma: f64,
    n: usize,
    opts: &EstimatorOptions,
) -> Result<Prepared> {
    let nets = models
        .iter()
        .zip(weights)
        .map(|(m, &w)| {
            let spec = NetSpec {
                eta: eta_model(m.metric_dim_bound(), w, gamma, n, opts.c_eta),
                gamma,
                radius: opts.radius_for(gamma),
                multiplier: opts.c_eta,
                cap: opts.net_cap,
            };
            build_linear_net(m, &spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let set = CandidateSet::from_nets(&nets)?;
    if set.len() > opts.pool_cap {
        return Err(Error::NetTooLarge { cap: opts.pool_cap });
    }
    Ok(Prepared::new(set))
}

fn linear_models(family: &WeightedModelFamily) -> Vec<LinearModel> {
    family.models.iter().map(LinearModel::from).collect()
}

/// T-estimator over the nets of every model at a fixed `Γ ≥ 3`.
pub fn estimate_for_gamma(
    family: &WeightedModelFamily,
    x: &Sample,
    gamma: f64,
    opts: &EstimatorOptions,
    rng: &mut RngStream,
) -> Result<(PiecewiseDensity, SelectionTrace)> {
    opts.validate()?;
    if x.is_empty() {
        return Err(Error::SampleTooSmall { n: 0, min: 1 });
    }
    let prep = prepare_level(&linear_models(family), &family.weights, gamma, x.len(), opts)?;
    t_select_prepared(&prep, gamma, x, opts.lambda, rng)
}

/// Data-independent part of the Γ-adaptive estimator for samples of size `n`.
#[derive(Debug, Clone)]
pub struct FullPlan {
    pub n: usize,
    pub gammas: Vec<f64>,
    pub levels: Vec<Prepared>,
    pub opts: EstimatorOptions,
}

/// Result of a two-stage estimator: the stage-one traces (one per `Γ`) and
/// the trace of the Γ selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullOutcome {
    pub estimate: PiecewiseDensity,
    pub gammas: Vec<f64>,
    pub stage_one: Vec<SelectionTrace>,
    pub gamma_trace: SelectionTrace,
}

impl FullOutcome {
    pub fn chosen_gamma(&self) -> f64 {
        self.gammas[self.gamma_trace.chosen_index]
    }
}

impl FullPlan {
    pub fn for_family(family: &WeightedModelFamily, n: usize, opts: &EstimatorOptions) -> Result<Self> {
        Self::for_linear(&linear_models(family), &family.weights, n, opts)
    }

    pub fn for_linear(
        models: &[LinearModel],
        weights: &[f64],
        n: usize,
        opts: &EstimatorOptions,
    ) -> Result<Self> {
        opts.validate()?;
        if n < 2 {
            return Err(Error::SampleTooSmall { n, min: 2 });
        }
        if models.len() != weights.len() || models.is_empty() {
            return Err(Error::InvalidParameter("one weight per model required".into()));
        }
        check_weights(weights)?;
        let gammas = gamma_ladder(opts.i_max.unwrap_or_else(|| default_i_max(n)));
        let n1 = first_half(n);
        let levels = gammas
            .iter()
            .map(|&g| prepare_level(models, weights, g, n1, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, gammas, levels, opts: *opts })
    }

    /// Stage one on the first `⌈n/2⌉` observations, Γ selection on the rest.
    pub fn run(&self, x: &Sample, rng: &mut RngStream) -> Result<FullOutcome> {
        if x.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "plan built for n = {}, sample has {}",
                self.n,
                x.len()
            )));
        }
        let (x1, x2) = x.split_at(first_half(x.len()));
        let mut ladder = Vec::with_capacity(self.levels.len());
        let mut stage_one = Vec::with_capacity(self.levels.len());
        for (prep, &g) in self.levels.iter().zip(&self.gammas) {
            let (t, trace) = t_select_prepared(prep, g, &x1, self.opts.lambda, rng)?;
            ladder.push(t);
            stage_one.push(trace);
        }
        let (estimate, gamma_trace) = select_gamma(&ladder, &x2, self.opts.a_param, self.opts.lambda, rng)?;
        Ok(FullOutcome { estimate, gammas: self.gammas.clone(), stage_one, gamma_trace })
    }
}

/// Adaptive estimator over models and `Γ`.
pub fn full_estimator(
    family: &WeightedModelFamily,
    x: &Sample,
    opts: &EstimatorOptions,
    rng: &mut RngStream,
) -> Result<FullOutcome> {
    FullPlan::for_family(family, x.len(), opts)?.run(x, rng)
}

/// Select one of `prelim` (built on independent data) with weights `Δ_m`.
///
/// For each `Γ` of the ladder the preliminaries are projected by `π_Γ` and
/// the T-estimator runs over these points at `η_m = c_η 37 √(Γ Δ_m / n₁)`
/// on the first half of `x`; `Γ` is then selected on the second half.
pub fn aggregate_select(
    prelim: &[StepFunction],
    weights: &[f64],
    x: &Sample,
    opts: &EstimatorOptions,
    rng: &mut RngStream,
) -> Result<FullOutcome> {
    opts.validate()?;
    if prelim.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if weights.len() != prelim.len() {
        return Err(Error::InvalidParameter("one weight per preliminary estimator".into()));
    }
    check_weights(weights)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    let gammas = gamma_ladder(opts.i_max.unwrap_or_else(|| default_i_max(n)));
    let (x1, x2) = x.split_at(first_half(n));
    let mut ladder = Vec::with_capacity(gammas.len());
    let mut stage_one = Vec::with_capacity(gammas.len());
    for &g in &gammas {
        let points = prelim
            .iter()
            .map(|t| project_bounded(t, g))
            .collect::<Result<Vec<_>>>()?;
        let levels = weights.iter().map(|&w| eta_point(w, g, x1.len(), opts.c_eta)).collect();
        let prep = Prepared::new(CandidateSet::new(points, levels, vec![g; prelim.len()])?);
        let (t, trace) = t_select_prepared(&prep, g, &x1, opts.lambda, rng)?;
        ladder.push(t);
        stage_one.push(trace);
    }
    let (estimate, gamma_trace) = select_gamma(&ladder, &x2, opts.a_param, opts.lambda, rng)?;
    Ok(FullOutcome { estimate, gammas, stage_one, gamma_trace })
}

/// `Δ_m = |m| (2 + ln(N / |m|))` for a subset of size `size` out of `n_prelim`.
pub fn linear_weight(size: usize, n_prelim: usize) -> f64 {
    let m = size as f64;
    m * (2.0 + (n_prelim as f64 / m).ln())
}

/// `Σ_m exp(−Δ_m)` over all nonempty subsets of `N` preliminaries.
pub fn linear_sigma(n_prelim: usize) -> f64 {
    let mut binom = 1.0;
    let mut sigma = 0.0;
    for k in 1..=n_prelim {
        binom *= (n_prelim + 1 - k) as f64 / k as f64;
        sigma += binom * (-linear_weight(k, n_prelim)).exp();
    }
    sigma
}

/// Span models of all nonempty subsets of `prelim`, in increasing bitmask order.
pub fn span_family(prelim: &[StepFunction], cap: usize) -> Result<(Vec<LinearModel>, Vec<f64>)> {
    let n = prelim.len();
    if n == 0 {
        return Err(Error::EmptyCandidates);
    }
    if n > cap {
        return Err(Error::TooManyPreliminaries { n, cap });
    }
    let mut models = Vec::new();
    let mut weights = Vec::new();
    for mask in 1usize..(1 << n) {
        let subset: Vec<StepFunction> = (0..n)
            .filter(|j| mask & (1 << j) != 0)
            .map(|j| prelim[j].clone())
            .collect();
        weights.push(linear_weight(subset.len(), n));
        models.push(LinearModel::span(&subset)?);
    }
    Ok((models, weights))
}

/// Select a linear combination of `prelim` through nets over their spans.
pub fn linear_aggregate(
    prelim: &[StepFunction],
    x: &Sample,
    opts: &EstimatorOptions,
    rng: &mut RngStream,
) -> Result<FullOutcome> {
    let (models, weights) = span_family(prelim, opts.max_prelim)?;
    FullPlan::for_linear(&models, &weights, x.len(), opts)?.run(x, rng)
}
