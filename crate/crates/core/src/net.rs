//! Discrete nets of Γ-bounded densities over linear models.
//!
//! A net is a cell-centered lattice in orthonormal coordinates, pruned to the
//! region that can lie within `η` of a Γ-bounded density of the model, and
//! pushed through `π_Γ`. Since `π_Γ` is non-expansive, every Γ-bounded
//! density of the model is within `η` of the net.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::density::{merged_grid, pairwise_sum, project_bounded, PiecewiseDensity, StepFunction};
use crate::models::PartitionModel;
use crate::{Error, Result};

/// Default cap on the number of lattice points enumerated for one net.
pub const DEFAULT_NET_CAP: usize = 2_000_000;

/// Net points closer than this in `d₂` are treated as one.
pub const DEDUP_TOL: f64 = 1e-9;

/// A finite-dimensional linear space of step functions on a common grid,
/// carried with an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    grid: Vec<f64>,
    lengths: Vec<f64>,
    basis: Vec<Vec<f64>>,
    /// Coordinates of the projection of the constant 1.
    constant: Vec<f64>,
    /// Basis elements have disjoint supports and are nonnegative, so
    /// nonnegative functions have nonnegative coordinates.
    orthant: bool,
    metric_dim_bound: f64,
}

impl LinearModel {
    pub fn from_partition(model: &PartitionModel) -> Self {
        let p = &model.partition;
        let lengths = p.cell_lengths();
        let k = lengths.len();
        let basis = (0..k)
            .map(|j| {
                let mut v = vec![0.0; k];
                v[j] = 1.0 / lengths[j].sqrt();
                v
            })
            .collect();
        let constant = lengths.iter().map(|l| l.sqrt()).collect();
        Self {
            grid: p.breakpoints().to_vec(),
            lengths,
            basis,
            constant,
            orthant: true,
            metric_dim_bound: model.metric_dim_bound,
        }
    }

    /// The span of `fns`, orthonormalised by modified Gram-Schmidt.
    /// Directions with residual norm below `1e-10` are dropped. The metric
    /// dimension bound is `|fns| / 2`.
    pub fn span(fns: &[StepFunction]) -> Result<Self> {
        if fns.is_empty() {
            return Err(Error::InvalidParameter("span of no functions".into()));
        }
        let grid = merged_grid(fns.iter());
        let lengths: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            let terms: Vec<f64> = a.iter().zip(b).zip(&lengths).map(|((x, y), l)| x * y * l).collect();
            pairwise_sum(&terms)
        };
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for f in fns {
            let mut v = f.refine_to(&grid);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&v, b);
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-10 {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v);
            }
        }
        if basis.is_empty() {
            return Err(Error::InvalidParameter("span is the zero space".into()));
        }
        let ones = vec![1.0; lengths.len()];
        let constant = basis.iter().map(|b| dot(b, &ones)).collect();
        Ok(Self {
            grid,
            lengths,
            basis,
            constant,
            orthant: false,
            metric_dim_bound: fns.len() as f64 / 2.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn metric_dim_bound(&self) -> f64 {
        self.metric_dim_bound
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn contains_constants(&self) -> bool {
        let e: f64 = self.constant.iter().map(|c| c * c).sum();
        (e - 1.0).abs() < 1e-9
    }

    /// `Σ c_j φ_j`.
    pub fn function(&self, coords: &[f64]) -> StepFunction {
        let mut values = vec![0.0; self.lengths.len()];
        for (c, b) in coords.iter().zip(&self.basis) {
            values.iter_mut().zip(b).for_each(|(v, phi)| *v += c * phi);
        }
        StepFunction::from_parts_unchecked(self.grid.clone(), values)
    }

    /// Coordinates of the orthogonal projection of `f`.
    pub fn coordinates(&self, f: &StepFunction) -> Vec<f64> {
        let fv = f.refine_to(&self.grid);
        self.basis
            .iter()
            .map(|b| {
                let terms: Vec<f64> = fv.iter().zip(b).zip(&self.lengths).map(|((x, y), l)| x * y * l).collect();
                pairwise_sum(&terms)
            })
            .collect()
    }

    /// Coordinate box containing every Γ-bounded density of the model, or a
    /// symmetric box of half-width `ball` when no sharper bound is known.
    fn coordinate_box(&self, gamma: f64, ball: f64) -> Vec<(f64, f64)> {
        self.basis
            .iter()
            .zip(&self.constant)
            .map(|(b, &mass)| {
                if self.orthant {
                    let height = b.iter().cloned().fold(0.0, f64::max);
                    (0.0, (gamma / height).min(1.0 / mass).min(ball))
                } else {
                    (-ball, ball)
                }
            })
            .collect()
    }
}

impl From<&PartitionModel> for LinearModel {
    fn from(model: &PartitionModel) -> Self {
        Self::from_partition(model)
    }
}

/// `η_m = c_η · max(50 √D̄_m, 37 √Δ_m) · √(Γ / n)`.
pub fn eta_model(dim_bound: f64, weight: f64, gamma: f64, n: usize, c_eta: f64) -> f64 {
    c_eta * (50.0 * dim_bound.sqrt()).max(37.0 * weight.sqrt()) * (gamma / n as f64).sqrt()
}

/// `η = c_η · 37 √(Γ Δ / n)` for a single-point model.
pub fn eta_point(weight: f64, gamma: f64, n: usize, c_eta: f64) -> f64 {
    c_eta * 37.0 * (gamma * weight / n as f64).sqrt()
}

/// A finite set of Γ-bounded densities with its generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub points: Vec<PiecewiseDensity>,
    pub eta: f64,
    pub dim_bound: f64,
    pub gamma: f64,
    pub radius: f64,
    pub multiplier: f64,
}

impl Net {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Net parameters beyond the model itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetSpec {
    pub eta: f64,
    pub gamma: f64,
    pub radius: f64,
    pub multiplier: f64,
    pub cap: usize,
}

impl NetSpec {
    pub fn new(eta: f64, gamma: f64) -> Self {
        Self { eta, gamma, radius: gamma, multiplier: 1.0, cap: DEFAULT_NET_CAP }
    }
}

/// Net over a partition model with the default cap.
pub fn build_net(model: &PartitionModel, eta: f64, gamma: f64, radius: f64) -> Result<Net> {
    let spec = NetSpec { radius, ..NetSpec::new(eta, gamma) };
    build_linear_net(&LinearModel::from_partition(model), &spec)
}

/// Net over any linear model.
///
/// The lattice has step `2η/√k`, so every coordinate vector lies within `η`
/// of a lattice point. Only lattice cells that can contain the coordinates of
/// a Γ-bounded model density are kept: those meeting the coordinate box and
/// the ball of radius `min(radius, √Γ)`, and, when the model contains the
/// constants, those within `η` of the hyperplane `∫ t dμ = 1`.
pub fn build_linear_net(model: &LinearModel, spec: &NetSpec) -> Result<Net> {
    let NetSpec { eta, gamma, radius, multiplier, cap } = *spec;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("net scale eta = {eta} must be positive")));
    }
    if !(gamma >= 3.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("net bound gamma = {gamma} must be at least 3")));
    }
    if !(radius >= gamma) {
        return Err(Error::InvalidParameter(format!("net radius {radius} below gamma = {gamma}")));
    }
    let k = model.dim();
    let step = 2.0 * eta / (k as f64).sqrt();
    // a Γ-bounded density has ‖t‖² ≤ Γ, and so does its projection on the model
    let ball = radius.min(gamma.sqrt()) + eta;
    let bounds = model.coordinate_box(gamma, ball);
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            // cells of width `step` covering [lo, hi], centred on the box
            let cells = (((hi - lo) / step).ceil() as usize).max(1);
            let first = 0.5 * (lo + hi) - 0.5 * step * (cells as f64 - 1.0);
            (0..cells).map(|z| first + step * z as f64).collect()
        })
        .collect();

    let slab = model.contains_constants().then(|| Slab::new(&axes, &model.constant, eta));
    let min_sq: Vec<f64> = axes
        .iter()
        .map(|a| a.iter().map(|c| c * c).fold(f64::INFINITY, f64::min))
        .collect();
    let mut min_sq_rest = vec![0.0; k + 1];
    for j in (0..k).rev() {
        min_sq_rest[j] = min_sq_rest[j + 1] + min_sq[j];
    }

    let mut lattice: Vec<Vec<f64>> = Vec::new();
    let mut coords = vec![0.0; k];
    let mut walk = Walk {
        axes: &axes,
        ball_sq: ball * ball,
        min_sq_rest: &min_sq_rest,
        slab: slab.as_ref(),
        cap,
        out: &mut lattice,
    };
    walk.descend(0, 0.0, 0.0, &mut coords)?;

    let mut seen = HashSet::new();
    let mut points = Vec::new();
    for c in &lattice {
        let p = project_bounded(&model.function(c), gamma)?;
        let key: Vec<i64> = p.values().iter().map(|v| (v / DEDUP_TOL).round() as i64).collect();
        if seen.insert(key) {
            points.push(p);
        }
    }
    Ok(Net {
        points,
        eta,
        dim_bound: model.metric_dim_bound(),
        gamma,
        radius,
        multiplier,
    })
}

struct Slab {
    constant: Vec<f64>,
    // range of Σ_{i ≥ j} e_i c_i over the remaining axes
    rest_min: Vec<f64>,
    rest_max: Vec<f64>,
    tol: f64,
}

impl Slab {
    fn new(axes: &[Vec<f64>], constant: &[f64], eta: f64) -> Self {
        let k = axes.len();
        let mut rest_min = vec![0.0; k + 1];
        let mut rest_max = vec![0.0; k + 1];
        for j in (0..k).rev() {
            let ends = [constant[j] * axes[j][0], constant[j] * axes[j][axes[j].len() - 1]];
            rest_min[j] = rest_min[j + 1] + ends[0].min(ends[1]);
            rest_max[j] = rest_max[j + 1] + ends[0].max(ends[1]);
        }
        Self { constant: constant.to_vec(), rest_min, rest_max, tol: eta }
    }

    fn feasible(&self, j: usize, dot: f64) -> bool {
        dot + self.rest_max[j] >= 1.0 - self.tol && dot + self.rest_min[j] <= 1.0 + self.tol
    }
}

struct Walk<'a> {
    axes: &'a [Vec<f64>],
    ball_sq: f64,
    min_sq_rest: &'a [f64],
    slab: Option<&'a Slab>,
    cap: usize,
    out: &'a mut Vec<Vec<f64>>,
}

impl Walk<'_> {
    fn descend(&mut self, j: usize, sq: f64, dot: f64, coords: &mut [f64]) -> Result<()> {
        if j == self.axes.len() {
            if self.out.len() >= self.cap {
                return Err(Error::NetTooLarge { cap: self.cap });
            }
            self.out.push(coords.to_vec());
            return Ok(());
        }
        for &c in &self.axes[j] {
            let sq = sq + c * c;
            if sq + self.min_sq_rest[j + 1] > self.ball_sq {
                continue;
            }
            let dot = match self.slab {
                Some(slab) => {
                    let dot = dot + slab.constant[j] * c;
                    if !slab.feasible(j + 1, dot) {
                        continue;
                    }
                    dot
                }
                None => dot,
            };
            coords[j] = c;
            self.descend(j + 1, sq, dot, coords)?;
        }
        Ok(())
    }
}
