//! Step functions and step densities on `[0, 1]` with Lebesgue reference measure.
//!
//! Cells are half-open `[b_j, b_{j+1})` except the last, which also contains 1.
//! All integrals are exact sums over the cells of the merged breakpoint grid,
//! accumulated with pairwise summation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;
use crate::{Error, Result};

/// Tolerance on `∫ t dμ = 1` accepted by [`PiecewiseDensity::validate`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// A real-valued step function on `[0, 1]`, possibly signed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

fn check_breakpoints(breakpoints: &[f64]) -> Result<()> {
    if breakpoints.len() < 2 {
        return Err(Error::BadBreakpoints("need at least two breakpoints".into()));
    }
    if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
        return Err(Error::BadBreakpoints("breakpoints must start at 0 and end at 1".into()));
    }
    for w in breakpoints.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::BadBreakpoints(format!(
                "not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_breakpoints(&breakpoints)?;
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::BadBreakpoints(format!(
                "{} breakpoints for {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value {v}")));
        }
        Ok(Self { breakpoints, values })
    }

    pub(crate) fn from_parts_unchecked(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(breakpoints.len(), values.len() + 1);
        Self { breakpoints, values }
    }

    pub fn constant(c: f64) -> Self {
        Self { breakpoints: vec![0.0, 1.0], values: vec![c] }
    }

    /// `left` on `[0, split)` and `right` on `[split, 1]`.
    pub fn two_piece(split: f64, left: f64, right: f64) -> Result<Self> {
        Self::new(vec![0.0, split, 1.0], vec![left, right])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    pub fn cell_lengths(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index of the cell containing `x` (clamped into `[0, 1]`).
    pub fn locate(&self, x: f64) -> usize {
        // number of interior breakpoints <= x
        let interior = &self.breakpoints[1..self.breakpoints.len() - 1];
        interior.partition_point(|&b| b <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.locate(x)]
    }

    pub fn integral(&self) -> f64 {
        let terms: Vec<f64> = self
            .breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (w[1] - w[0]) * v)
            .collect();
        pairwise_sum(&terms)
    }

    /// `∫_a^b t dμ` for `0 <= a <= b <= 1`.
    pub fn integral_between(&self, a: f64, b: f64) -> f64 {
        let mut terms = Vec::new();
        for (w, v) in self.breakpoints.windows(2).zip(&self.values) {
            let lo = w[0].max(a);
            let hi = w[1].min(b);
            if hi > lo {
                terms.push((hi - lo) * v);
            }
        }
        pairwise_sum(&terms)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Apply `f` cellwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination on the merged grid.
    pub fn zip_with(&self, other: &StepFunction, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut breakpoints = vec![0.0];
        let mut values = Vec::new();
        for_each_segment(self, other, |_, right, a, b| {
            breakpoints.push(right);
            values.push(f(a, b));
        });
        Self { breakpoints, values }
    }

    pub fn add(&self, other: &StepFunction) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &StepFunction) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `⟨t, u⟩ = ∫ t u dμ`.
    pub fn inner(&self, other: &StepFunction) -> f64 {
        let mut terms = Vec::with_capacity(self.num_cells() + other.num_cells());
        for_each_segment(self, other, |len, _, a, b| terms.push(len * a * b));
        pairwise_sum(&terms)
    }

    pub fn norm_sq(&self) -> f64 {
        let terms: Vec<f64> = self
            .breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (w[1] - w[0]) * v * v)
            .collect();
        pairwise_sum(&terms)
    }

    /// Merge adjacent cells carrying the same value.
    pub fn simplify(&self) -> Self {
        let mut breakpoints = vec![0.0];
        let mut values: Vec<f64> = Vec::new();
        for (w, &v) in self.breakpoints.windows(2).zip(&self.values) {
            if values.last() == Some(&v) {
                *breakpoints.last_mut().unwrap() = w[1];
            } else {
                values.push(v);
                breakpoints.push(w[1]);
            }
        }
        Self { breakpoints, values }
    }

    /// Re-express on a finer grid that contains all of `self`'s breakpoints.
    pub fn refine_to(&self, grid: &[f64]) -> Vec<f64> {
        grid.windows(2).map(|w| self.eval(0.5 * (w[0] + w[1]))).collect()
    }
}

/// Walk the merged breakpoint grid of `a` and `b`, calling
/// `f(length, right_end, a_value, b_value)` on every segment.
pub fn for_each_segment(
    a: &StepFunction,
    b: &StepFunction,
    mut f: impl FnMut(f64, f64, f64, f64),
) {
    let (ab, bb) = (&a.breakpoints, &b.breakpoints);
    let (mut i, mut j) = (0usize, 0usize);
    let mut left = 0.0;
    while i < a.values.len() && j < b.values.len() {
        let ra = ab[i + 1];
        let rb = bb[j + 1];
        let right = ra.min(rb);
        f(right - left, right, a.values[i], b.values[j]);
        if ra == right {
            i += 1;
        }
        if rb == right {
            j += 1;
        }
        left = right;
    }
}

/// Union of several breakpoint grids.
pub fn merged_grid<'a>(fns: impl IntoIterator<Item = &'a StepFunction>) -> Vec<f64> {
    let mut all: Vec<f64> = fns
        .into_iter()
        .flat_map(|f| f.breakpoints.iter().copied())
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup();
    all
}

/// A nonnegative step function with unit integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFunction", into = "StepFunction")]
pub struct PiecewiseDensity(StepFunction);

impl TryFrom<StepFunction> for PiecewiseDensity {
    type Error = Error;

    fn try_from(f: StepFunction) -> Result<Self> {
        PiecewiseDensity::validate(f)
    }
}

impl From<PiecewiseDensity> for StepFunction {
    fn from(d: PiecewiseDensity) -> Self {
        d.0
    }
}

impl std::ops::Deref for PiecewiseDensity {
    type Target = StepFunction;

    fn deref(&self) -> &StepFunction {
        &self.0
    }
}

impl PiecewiseDensity {
    /// Accept `f` as a density if all values are nonnegative and it integrates
    /// to one within [`NORMALIZATION_TOL`].
    pub fn validate(f: StepFunction) -> Result<Self> {
        check_breakpoints(&f.breakpoints)?;
        if f.values.len() + 1 != f.breakpoints.len() {
            return Err(Error::BadBreakpoints("value/breakpoint count mismatch".into()));
        }
        for (index, &value) in f.values.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeValue { index, value });
            }
        }
        let integral = f.integral();
        if (integral - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { integral });
        }
        Ok(Self(f))
    }

    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::validate(StepFunction::new(breakpoints, values)?)
    }

    pub fn uniform() -> Self {
        Self(StepFunction::constant(1.0))
    }

    /// `height` on `[0, width)`, zero elsewhere, with `height * width = 1`.
    pub fn block(width: f64) -> Result<Self> {
        if !(width > 0.0 && width <= 1.0) {
            return Err(Error::InvalidParameter(format!("block width {width}")));
        }
        if width == 1.0 {
            return Ok(Self::uniform());
        }
        Self::new(vec![0.0, width, 1.0], vec![1.0 / width, 0.0])
    }

    /// Step approximation of a continuous target: cell averages of `f` by the
    /// midpoint rule on `cells` equal cells, renormalized.
    pub fn from_fn_grid(f: impl Fn(f64) -> f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidParameter("zero cells".into()));
        }
        let breakpoints: Vec<f64> = (0..=cells).map(|j| j as f64 / cells as f64).collect();
        let raw: Vec<f64> = breakpoints
            .windows(2)
            .map(|w| f(0.5 * (w[0] + w[1])).max(0.0))
            .collect();
        let step = StepFunction::new(breakpoints, raw)?;
        let mass = step.integral();
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("target has no mass".into()));
        }
        Self::validate(step.scale(1.0 / mass))
    }

    pub fn as_step(&self) -> &StepFunction {
        &self.0
    }

    pub fn into_step(self) -> StepFunction {
        self.0
    }

    /// Cumulative masses at the breakpoints.
    pub fn cdf_at_breakpoints(&self) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.breakpoints.len());
        acc.push(0.0);
        let mut c = 0.0;
        for (w, v) in self.breakpoints.windows(2).zip(&self.values) {
            c += (w[1] - w[0]) * v;
            acc.push(c);
        }
        acc
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.integral_between(0.0, x.clamp(0.0, 1.0))
    }
}

/// `d_2(t, u) = ‖t − u‖`.
pub fn l2_dist(t: &StepFunction, u: &StepFunction) -> f64 {
    l2_dist_sq(t, u).sqrt()
}

pub fn l2_dist_sq(t: &StepFunction, u: &StepFunction) -> f64 {
    let mut terms = Vec::with_capacity(t.num_cells() + u.num_cells());
    for_each_segment(t, u, |len, _, a, b| {
        let d = a - b;
        terms.push(len * d * d);
    });
    pairwise_sum(&terms)
}

/// Hellinger distance with `h² = ½∫(√t − √u)² = 1 − ∫√(tu)`.
pub fn hellinger_dist(t: &PiecewiseDensity, u: &PiecewiseDensity) -> f64 {
    hellinger_sq(t, u).sqrt()
}

pub fn hellinger_sq(t: &PiecewiseDensity, u: &PiecewiseDensity) -> f64 {
    let mut terms = Vec::with_capacity(t.num_cells() + u.num_cells());
    for_each_segment(t, u, |len, _, a, b| {
        let d = a.sqrt() - b.sqrt();
        terms.push(len * d * d);
    });
    (0.5 * pairwise_sum(&terms)).clamp(0.0, 1.0)
}

pub fn sup_norm(t: &StepFunction) -> f64 {
    t.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `Q_s(z) = ∫_{s>z} (s − z)² dμ`.
pub fn tail_q(s: &StepFunction, z: f64) -> f64 {
    let terms: Vec<f64> = s
        .breakpoints
        .windows(2)
        .zip(&s.values)
        .filter(|(_, &v)| v > z)
        .map(|(w, &v)| (w[1] - w[0]) * (v - z) * (v - z))
        .collect();
    pairwise_sum(&terms)
}

/// Coefficient `(Γ² − Γ − 1) / (Γ(Γ − 2))` bounding `‖s − π_Γ(s)‖² / Q_s(Γ)`
/// for `Γ > 2`.
pub fn projection_bound_factor(gamma: f64) -> f64 {
    (gamma * gamma - gamma - 1.0) / (gamma * (gamma - 2.0))
}

/// Projection of a step function onto densities bounded by `Γ`:
/// `π_Γ(t) = [(t + γ) ∨ 0] ∧ Γ` with `γ` solving `∫ π_Γ(t) dμ = 1`.
pub fn project_bounded(t: &StepFunction, gamma: f64) -> Result<PiecewiseDensity> {
    project_bounded_with_shift(t, gamma).map(|(d, _)| d)
}

/// As [`project_bounded`], also returning the shift `γ`.
///
/// The normalization map `g ↦ Σ l_j clamp(v_j + g, 0, Γ)` is continuous,
/// nondecreasing and piecewise linear with kinks at `−v_j` and `Γ − v_j`,
/// so the root is found exactly on the bracketing linear piece.
pub fn project_bounded_with_shift(t: &StepFunction, gamma: f64) -> Result<(PiecewiseDensity, f64)> {
    if !gamma.is_finite() || gamma < 1.0 {
        return Err(Error::InfeasibleBound { gamma });
    }
    if t.inf() >= 0.0 && t.sup() <= gamma && (t.integral() - 1.0).abs() <= NORMALIZATION_TOL {
        // already in the constraint set
        return Ok((PiecewiseDensity::validate(t.clone())?, 0.0));
    }
    let lengths = t.cell_lengths();
    if gamma == 1.0 {
        // the only density bounded by 1 is the uniform one
        let shift = 1.0 - t.inf();
        return Ok((PiecewiseDensity::uniform(), shift));
    }
    let mass = |g: f64| -> f64 {
        let terms: Vec<f64> = lengths
            .iter()
            .zip(&t.values)
            .map(|(l, v)| l * (v + g).clamp(0.0, gamma))
            .collect();
        pairwise_sum(&terms)
    };
    let mut kinks: Vec<f64> = t
        .values
        .iter()
        .flat_map(|&v| [-v, gamma - v])
        .collect();
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kinks.dedup();

    // mass(kinks[0]) = 0 and mass(kinks[last]) = Γ > 1.
    let mut lo = kinks[0];
    let mut f_lo = mass(lo);
    let mut shift = *kinks.last().unwrap();
    for &k in &kinks[1..] {
        let f_k = mass(k);
        if f_k >= 1.0 {
            shift = if f_k == 1.0 || f_k == f_lo {
                k
            } else {
                lo + (1.0 - f_lo) * (k - lo) / (f_k - f_lo)
            };
            break;
        }
        lo = k;
        f_lo = f_k;
    }
    let projected = t.map(|v| (v + shift).clamp(0.0, gamma));
    let d = PiecewiseDensity::validate(projected)?;
    Ok((d, shift))
}

/// `τ(t) = λ t + 1 − λ`.
pub fn tau_map(t: &PiecewiseDensity, lambda: f64) -> Result<PiecewiseDensity> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} outside (0, 1]")));
    }
    if lambda == 1.0 {
        return Ok(t.clone());
    }
    PiecewiseDensity::validate(t.map(|v| lambda * v + (1.0 - lambda)))
}

/// `s_θ = θ⁻² 1_{[0,θ³]} + (θ² + θ + 1)⁻¹ 1_{(θ³,1]}`.
pub fn make_stheta(theta: f64) -> Result<PiecewiseDensity> {
    if !(theta > 0.0 && theta <= 1.0 / 3.0) {
        return Err(Error::BadTheta(theta));
    }
    let split = theta * theta * theta;
    let high = 1.0 / (theta * theta);
    let low = 1.0 / (theta * theta + theta + 1.0);
    PiecewiseDensity::new(vec![0.0, split, 1.0], vec![high, low])
}

/// An i.i.d. sample on `[0, 1]` with the stream that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub seed: u64,
    pub stream: u64,
    pub observations: Vec<f64>,
}

impl Sample {
    pub fn new(observations: Vec<f64>, seed: u64, stream: u64) -> Result<Self> {
        if let Some(x) = observations.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidParameter(format!("observation {x} outside [0, 1]")));
        }
        Ok(Self { seed, stream, observations })
    }

    /// Sample without provenance (seed and stream 0).
    pub fn from_observations(observations: Vec<f64>) -> Result<Self> {
        Self::new(observations, 0, 0)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Split into the first `k` observations and the rest.
    pub fn split_at(&self, k: usize) -> (Sample, Sample) {
        let (a, b) = self.observations.split_at(k);
        (
            Sample { seed: self.seed, stream: self.stream, observations: a.to_vec() },
            Sample { seed: self.seed, stream: self.stream, observations: b.to_vec() },
        )
    }
}

/// Inverse-CDF sampler for a step density.
#[derive(Debug, Clone)]
pub struct StepSampler {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    cum: Vec<f64>,
    last_positive: usize,
}

impl StepSampler {
    pub fn new(s: &PiecewiseDensity) -> Self {
        let cum = s.cdf_at_breakpoints();
        let last_positive = s.values.iter().rposition(|&v| v > 0.0).unwrap_or(0);
        Self {
            breakpoints: s.breakpoints.clone(),
            values: s.values.clone(),
            cum,
            last_positive,
        }
    }

    /// Map a uniform variate `u ∈ [0, 1)` through the inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        // first cell whose right cumulative mass exceeds u
        let right = &self.cum[1..];
        let mut j = right.partition_point(|&c| c <= u);
        if j >= self.values.len() {
            j = self.last_positive;
        }
        while self.values[j] <= 0.0 && j < self.last_positive {
            j += 1;
        }
        let x = self.breakpoints[j] + (u - self.cum[j]) / self.values[j];
        x.clamp(self.breakpoints[j], self.breakpoints[j + 1])
    }

    pub fn draw(&self, n: usize, rng: &mut RngStream) -> Sample {
        let observations = (0..n).map(|_| self.quantile(rng.gen::<f64>())).collect();
        Sample { seed: rng.seed(), stream: rng.stream(), observations }
    }
}

/// Draw `n` i.i.d. observations from `s` by inverse CDF.
pub fn sample(s: &PiecewiseDensity, n: usize, rng: &mut RngStream) -> Sample {
    StepSampler::new(s).draw(n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_block() -> PiecewiseDensity {
        PiecewiseDensity::new(vec![0.0, 0.5, 1.0], vec![2.0, 0.0]).unwrap()
    }

    fn spike() -> PiecewiseDensity {
        PiecewiseDensity::new(vec![0.0, 0.05, 1.0], vec![10.0, 0.5 / 0.95]).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(PiecewiseDensity::new(vec![0.0, 1.0], vec![1.0]).is_ok());
        assert!(PiecewiseDensity::new(vec![0.0, 0.5, 1.0], vec![2.0, 0.0]).is_ok());
        match PiecewiseDensity::new(vec![0.0, 0.5, 1.0], vec![2.0, 1.0]) {
            Err(Error::NotNormalized { integral }) => assert!((integral - 1.5).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            PiecewiseDensity::new(vec![0.0, 0.5, 1.0], vec![3.0, -1.0]),
            Err(Error::NegativeValue { index: 1, .. })
        ));
        assert!(matches!(
            PiecewiseDensity::new(vec![0.0, 0.5, 0.5, 1.0], vec![1.0, 1.0, 1.0]),
            Err(Error::BadBreakpoints(_))
        ));
        assert!(matches!(
            PiecewiseDensity::new(vec![0.1, 1.0], vec![1.0]),
            Err(Error::BadBreakpoints(_))
        ));
    }

    #[test]
    fn l2_examples() {
        let u = PiecewiseDensity::uniform();
        assert_eq!(l2_dist(&u, &u), 0.0);
        assert!((l2_dist_sq(&u, &half_block()) - 1.0).abs() < 1e-15);
        assert_eq!(l2_dist(&u, &half_block()), l2_dist(&half_block(), &u));
    }

    #[test]
    fn hellinger_examples() {
        let u = PiecewiseDensity::uniform();
        assert_eq!(hellinger_sq(&u, &u), 0.0);
        let expected = 1.0 - 2f64.sqrt() / 2.0;
        assert!((hellinger_sq(&u, &half_block()) - expected).abs() < 1e-15);
    }

    #[test]
    fn sup_norm_examples() {
        assert_eq!(sup_norm(&PiecewiseDensity::uniform()), 1.0);
        assert_eq!(sup_norm(&half_block()), 2.0);
        assert!((sup_norm(&make_stheta(1.0 / 3.0).unwrap()) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn tail_q_examples() {
        let s = spike();
        assert_eq!(tail_q(&s, sup_norm(&s)), 0.0);
        let st = make_stheta(1.0 / 3.0).unwrap();
        assert!((tail_q(&st, 1.0) - 64.0 / 27.0).abs() < 1e-12);
        assert!((tail_q(&s, 3.0) - 2.45).abs() < 1e-12);
    }

    #[test]
    fn project_uniform_is_fixed() {
        let (d, g) = project_bounded_with_shift(&StepFunction::constant(1.0), 3.0).unwrap();
        assert_eq!(d, PiecewiseDensity::uniform());
        assert_eq!(g, 0.0);
    }

    #[test]
    fn project_half_block() {
        let (d, g) = project_bounded_with_shift(half_block().as_step(), 1.5).unwrap();
        assert!((g - 0.5).abs() < 1e-15);
        assert!((d.values()[0] - 1.5).abs() < 1e-15);
        assert!((d.values()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn project_spike_respects_bound() {
        let s = spike();
        let (p, g) = project_bounded_with_shift(s.as_step(), 3.0).unwrap();
        // frozen from the bisection oracle in tests/density_oracles.rs
        assert!((g - 0.368_421_052_631_578_9).abs() < 1e-12);
        let err = l2_dist_sq(&s, &p);
        assert!((err - 2.578_947_368_421_052_5).abs() < 1e-9);
        let bound = projection_bound_factor(3.0) * tail_q(&s, 3.0);
        assert!((projection_bound_factor(3.0) - 5.0 / 3.0).abs() < 1e-15);
        assert!((bound - 4.083_333_333_333_333).abs() < 1e-12);
        assert!(err <= bound);
        assert!(sup_norm(&p) <= 3.0);
    }

    #[test]
    fn project_rejects_small_gamma() {
        assert!(matches!(
            project_bounded(&StepFunction::constant(1.0), 0.9),
            Err(Error::InfeasibleBound { .. })
        ));
        // Γ = 1 admits only the uniform density
        let d = project_bounded(half_block().as_step(), 1.0).unwrap();
        assert_eq!(d, PiecewiseDensity::uniform());
    }

    #[test]
    fn project_signed_input() {
        let t = StepFunction::new(vec![0.0, 0.25, 1.0], vec![-3.0, 5.0]).unwrap();
        let p = project_bounded(&t, 4.0).unwrap();
        assert!(sup_norm(&p) <= 4.0);
        assert!((p.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tau_examples() {
        let t = half_block();
        assert_eq!(tau_map(&t, 1.0).unwrap(), t);
        let m = tau_map(&t, 0.995).unwrap();
        assert!((m.values()[0] - 1.995).abs() < 1e-15);
        assert!((m.values()[1] - 0.005).abs() < 1e-15);
        let u = PiecewiseDensity::uniform();
        let ratio = l2_dist(&tau_map(&u, 0.995).unwrap(), &m) / l2_dist(&u, &t);
        assert!((ratio - 0.995).abs() < 1e-14);
    }

    #[test]
    fn stheta_examples() {
        let s = make_stheta(1.0 / 3.0).unwrap();
        assert!((s.breakpoints()[1] - 1.0 / 27.0).abs() < 1e-16);
        assert!((s.values()[0] - 9.0).abs() < 1e-12);
        assert!((s.values()[1] - 9.0 / 13.0).abs() < 1e-15);
        let s = make_stheta(0.1).unwrap();
        assert!((s.breakpoints()[1] - 0.001).abs() < 1e-17);
        assert!((s.values()[0] - 100.0).abs() < 1e-11);
        assert!((s.values()[1] - 1.0 / 1.11).abs() < 1e-15);
        for theta in [1e-3, 0.01, 0.2, 1.0 / 3.0] {
            assert!((make_stheta(theta).unwrap().integral() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(make_stheta(0.0), Err(Error::BadTheta(_))));
        assert!(matches!(make_stheta(0.34), Err(Error::BadTheta(_))));
    }

    #[test]
    fn sampling_uniform_returns_raw_variates() {
        let mut a = RngStream::new(11, 0);
        let mut b = RngStream::new(11, 0);
        let x = sample(&PiecewiseDensity::uniform(), 64, &mut a);
        let raw: Vec<f64> = (0..64).map(|_| b.gen::<f64>()).collect();
        assert_eq!(x.observations, raw);
        assert_eq!((x.seed, x.stream), (11, 0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = spike();
        let a = sample(&s, 100, &mut RngStream::new(5, 9));
        let b = sample(&s, 100, &mut RngStream::new(5, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_skips_empty_cells() {
        let s = half_block();
        let sampler = StepSampler::new(&s);
        assert!(sampler.quantile(0.999_999) < 0.5);
        assert_eq!(sampler.quantile(0.0), 0.0);
    }

    #[test]
    fn simplify_merges_equal_neighbours() {
        let t = StepFunction::new(vec![0.0, 0.2, 0.6, 1.0], vec![1.0, 1.0, 2.0]).unwrap();
        let s = t.simplify();
        assert_eq!(s.breakpoints(), &[0.0, 0.6, 1.0]);
        assert_eq!(s.values(), &[1.0, 2.0]);
    }

    #[test]
    fn json_shape() {
        let d = half_block();
        let j = serde_json::to_string(&d).unwrap();
        assert_eq!(j, r#"{"breakpoints":[0.0,0.5,1.0],"values":[2.0,0.0]}"#);
        let bad = r#"{"breakpoints":[0.0,0.5,1.0],"values":[2.0,1.0]}"#;
        assert!(serde_json::from_str::<PiecewiseDensity>(bad).is_err());
        let x = Sample::new(vec![0.25, 0.5], 3, 4).unwrap();
        let j = serde_json::to_string(&x).unwrap();
        assert_eq!(j, r#"{"seed":3,"stream":4,"observations":[0.25,0.5]}"#);
    }
}
