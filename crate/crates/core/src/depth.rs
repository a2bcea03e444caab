//! Tukey half-space depth φ_μ(x) = inf { μ(H) : H closed half-space, x ∈ H }.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::cramer::{cramer_with, CramerOptions, Status};
use crate::error::{Error, Result};
use crate::measures::{MeasureModel, ModelKind, Point};
use crate::rng::SeedStream;
use crate::sphere::{minimize, SphereBudget};
use crate::stats::{hill_tail_exponent, mean_stderr, pairwise_sum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMethod {
    ClosedForm,
    /// Smallest probed tail mass; an upper bound on the depth.
    SphereOptimization,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthResult {
    pub value: f64,
    pub minimizing_direction: Vec<f64>,
    pub method: DepthMethod,
    pub evaluations: usize,
}

/// Tail exponents at or below this value flag an infinite mean.
pub const DIVERGENCE_EXPONENT: f64 = 1.05;
/// Fraction of the largest summands used by the tail-exponent fit.
pub const HILL_FRACTION: f64 = 0.01;

fn unit_or_first_axis(x: &Point) -> Point {
    let r = x.norm();
    if r > 0.0 {
        x / r
    } else {
        let mut e = DVector::zeros(x.len());
        e[0] = 1.0;
        e
    }
}

/// φ_μ(x). Rotation-invariant and one-dimensional models use the exact
/// marginal tail; everything else minimizes `u ↦ P(⟨X,u⟩ ≥ ⟨x,u⟩)` over the sphere.
pub fn depth(model: &MeasureModel, x: &Point, budget: SphereBudget) -> Result<DepthResult> {
    model.check_dim(x)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("x must be finite"));
    }
    let n = model.dimension();
    if let ModelKind::AffinePushforward { base, map } = model.kind() {
        let mut r = depth(base, &map.invert(x), budget)?;
        let eta = map.inverse_matrix().tr_mul(&DVector::from_vec(r.minimizing_direction));
        r.minimizing_direction = eta.normalize().iter().copied().collect();
        return Ok(r);
    }
    if model.is_rotation_invariant() {
        let u = unit_or_first_axis(x);
        let value = model.marginal_unchecked(&u).sf(x.norm());
        return Ok(DepthResult {
            value,
            minimizing_direction: u.iter().copied().collect(),
            method: DepthMethod::ClosedForm,
            evaluations: 1,
        });
    }
    if n == 1 {
        let up = DVector::from_element(1, 1.0);
        let down = DVector::from_element(1, -1.0);
        let a = model.marginal_unchecked(&up).sf(x[0]);
        let b = model.marginal_unchecked(&down).sf(-x[0]);
        let (value, dir) = if a <= b { (a, 1.0) } else { (b, -1.0) };
        return Ok(DepthResult {
            value,
            minimizing_direction: vec![dir],
            method: DepthMethod::ClosedForm,
            evaluations: 2,
        });
    }
    let mut starts = model.facet_normals();
    if x.norm() > 0.0 {
        starts.push(x.normalize());
        // the Chernoff half-space is usually close to the minimizer
        if let Ok(r) = cramer_with(model, x, &CramerOptions { tol: 1e-6, ..CramerOptions::default() }) {
            if let (Status::Converged, Some(m)) = (r.status, r.maximizer) {
                let xi = DVector::from_vec(m);
                if xi.norm() > 0.0 {
                    starts.push(xi.normalize());
                }
            }
        }
    }
    let best = minimize(n, |u| model.marginal_unchecked(u).sf(x.dot(u)), &starts, budget);
    Ok(DepthResult {
        value: best.value,
        minimizing_direction: best.argmin.iter().copied().collect(),
        method: DepthMethod::SphereOptimization,
        evaluations: best.evaluations,
    })
}

/// Depth values of many points, in input order.
pub fn depth_many(model: &MeasureModel, points: &[Point], budget: SphereBudget) -> Result<Vec<f64>> {
    points.par_iter().map(|x| depth(model, x, budget).map(|r| r.value)).collect()
}

/// Both sides of `φ(x) ≤ e^{-Λ*(x)}` and `Λ*(x) ≥ ln(ε / (2φ(x))^{1-ε})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthCramerReport {
    pub depth: f64,
    pub lambda_star: f64,
    pub epsilon: f64,
    pub upper: f64,
    pub lower: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
    pub tol: f64,
}

impl DepthCramerReport {
    pub fn holds(&self) -> bool {
        self.upper_holds && self.lower_holds
    }
}

pub fn depth_cramer_bounds_check(
    model: &MeasureModel,
    x: &Point,
    epsilon: f64,
    budget: SphereBudget,
    tol: f64,
) -> Result<DepthCramerReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::input("epsilon must lie in (0, 1)"));
    }
    let phi = depth(model, x, budget)?.value;
    let lambda_star = cramer_with(model, x, &CramerOptions::default())?.value;
    if phi <= 0.0 {
        return Err(Error::input("x lies outside the support"));
    }
    let upper = (-lambda_star).exp();
    let lower = epsilon.ln() - (1.0 - epsilon) * (2.0 * phi).ln();
    Ok(DepthCramerReport {
        depth: phi,
        lambda_star,
        epsilon,
        upper,
        lower,
        upper_holds: phi <= upper + tol,
        lower_holds: lambda_star >= lower - tol,
        tol,
    })
}

/// Monte-Carlo estimate with a heavy-tail diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailedEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Hill exponent of the largest summands; `None` when too few are positive.
    pub tail_exponent: Option<f64>,
    pub divergence_flag: bool,
}

impl TailedEstimate {
    pub(crate) fn from_summands(values: &[f64], stderr: f64) -> Self {
        let estimate = pairwise_sum(values) / values.len() as f64;
        let tail_exponent = hill_tail_exponent(values, HILL_FRACTION);
        Self {
            estimate,
            stderr,
            samples: values.len(),
            tail_exponent,
            divergence_flag: tail_exponent.is_some_and(|a| a <= DIVERGENCE_EXPONENT),
        }
    }
}

/// Standard error of the mean of `values` post-stratified by deciles of `key`.
fn decile_stderr(values: &[f64], key: &[f64]) -> f64 {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    let mut var = 0.0;
    for k in 0..10 {
        let stratum: Vec<f64> = order[k * n / 10..(k + 1) * n / 10].iter().map(|&i| values[i]).collect();
        if stratum.len() < 2 {
            continue;
        }
        let w = stratum.len() as f64 / n as f64;
        let (_, se) = mean_stderr(&stratum);
        var += w * w * se * se;
    }
    var.sqrt()
}

fn depth_samples(model: &MeasureModel, stream: &SeedStream, samples: usize, budget: SphereBudget) -> Result<Vec<f64>> {
    if samples < 2 {
        return Err(Error::input("samples must be at least 2"));
    }
    let points = model.sample(stream, samples);
    depth_many(model, &points, budget)
}

/// `J_μ(p) = E φ(X)^{-p}`.
pub fn negative_moment(
    model: &MeasureModel,
    p: f64,
    seed: u64,
    samples: usize,
    budget: SphereBudget,
) -> Result<TailedEstimate> {
    if !(p > 0.0) {
        return Err(Error::input("p must be positive"));
    }
    let phi = depth_samples(model, &SeedStream::new(seed).derive_str("negative_moment"), samples, budget)?;
    let values: Vec<f64> = phi.iter().map(|&f| if f > 0.0 { f.powf(-p) } else { f64::INFINITY }).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DataQuality("a sample point has zero depth".into()));
    }
    let se = decile_stderr(&values, &phi);
    Ok(TailedEstimate::from_summands(&values, se))
}

/// `E φ(X)` with its standard error.
pub fn depth_mean(model: &MeasureModel, seed: u64, samples: usize, budget: SphereBudget) -> Result<(f64, f64)> {
    let phi = depth_samples(model, &SeedStream::new(seed).derive_str("depth_mean"), samples, budget)?;
    Ok(mean_stderr(&phi))
}
