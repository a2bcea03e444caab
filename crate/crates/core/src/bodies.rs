//! Body families attached to a measure, evaluated direction by direction.
//!
//! * `B_t = {Λ* ≤ t}`
//! * `R_t = {f ≥ e^{-t} f(0)}`
//! * `K_t`, Ball's body, `ρ(θ)^t = (t / f(0)) ∫_0^∞ r^{t-1} f(rθ) dr`
//! * `Z_t^+`, support function `h(u) = (E ⟨X,u⟩_+^t)^{1/t}`
//! * `T_s = {φ ≥ e^{-s}}`
//! * `Euclidean`, the centred Euclidean ball of radius `scale`

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::cramer::cramer_value;
use crate::error::{Error, Result};
use crate::measures::{MeasureModel, Point};
use crate::quad::{bisect_boundary, expand_until_fails, log_integral_unimodal};
use crate::rng::SeedStream;
use crate::sphere::{direction_set, grid_spacing, refine};
use crate::stats::{mean_stderr, proportion};

/// Largest admissible parameter of the `K` family.
pub const K_MAX_T: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    B,
    R,
    K,
    Zplus,
    T,
    Euclidean,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::B, Family::R, Family::K, Family::Zplus, Family::T, Family::Euclidean];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::B => "B",
            Family::R => "R",
            Family::K => "K",
            Family::Zplus => "Zplus",
            Family::T => "T",
            Family::Euclidean => "Euclidean",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::input(format!("unknown body family '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub family: Family,
    pub t: f64,
    pub scale: f64,
}

impl BodySpec {
    pub fn new(family: Family, t: f64) -> Self {
        Self { family, t, scale: 1.0 }
    }

    /// The same body dilated by `c`.
    pub fn scaled(self, c: f64) -> Self {
        Self { scale: self.scale * c, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        // R_0 = {f ≥ f(0)} is a legitimate degenerate member
        let t_ok = if self.family == Family::R { self.t >= 0.0 } else { self.t > 0.0 };
        if !(t_ok && self.t.is_finite()) {
            return Err(Error::input(format!("{} body needs a positive finite parameter, got {}", self.family, self.t)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::input(format!("body scale must be positive, got {}", self.scale)));
        }
        if self.family == Family::K && self.t > K_MAX_T {
            return Err(Error::Range(format!("K-family parameter t = {} exceeds {K_MAX_T}", self.t)));
        }
        Ok(())
    }
}

impl fmt::Display for BodySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 1.0 {
            write!(f, "{}_{}", self.family, self.t)
        } else {
            write!(f, "{}·{}_{}", self.scale, self.family, self.t)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyOptions {
    /// Relative tolerance of radial bisections.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Grid of the support-function gauges (`Zplus` and `T`).
    pub gauge_directions: usize,
    /// Geodesic arcs of the local gauge refinement.
    pub gauge_refine: usize,
}

impl Default for BodyOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-9, max_iter: 200, gauge_directions: 256, gauge_refine: 20 }
    }
}

fn unit_axis(n: usize) -> Point {
    let mut e = DVector::zeros(n);
    e[0] = 1.0;
    e
}

/// Typical length scale of a model, `sqrt(tr Cov / n)`.
fn typical_radius(model: &MeasureModel) -> f64 {
    (model.covariance().trace() / model.dimension() as f64).sqrt()
}

/// A body of a given family and parameter, attached to a model.
///
/// Gauge grids and the radius of rotation-invariant models are computed on
/// first use and cached.
pub struct Body<'a> {
    model: &'a MeasureModel,
    spec: BodySpec,
    opts: BodyOptions,
    grid: OnceLock<Result<Vec<(Point, f64)>>>,
    invariant: OnceLock<Result<f64>>,
}

impl<'a> Body<'a> {
    pub fn new(model: &'a MeasureModel, spec: BodySpec, opts: BodyOptions) -> Result<Self> {
        spec.validate()?;
        Ok(Self { model, spec, opts, grid: OnceLock::new(), invariant: OnceLock::new() })
    }

    pub fn spec(&self) -> BodySpec {
        self.spec
    }

    pub fn model(&self) -> &MeasureModel {
        self.model
    }

    fn check_direction(&self, theta: &Point) -> Result<()> {
        self.model.check_dim(theta)?;
        if (theta.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::input("direction must be a unit vector"));
        }
        Ok(())
    }

    /// Radial function `ρ(θ)`, including the scale.
    pub fn radial(&self, theta: &Point) -> Result<f64> {
        self.check_direction(theta)?;
        Ok(self.spec.scale * self.unit_radial(theta)?)
    }

    /// Support function of `Zplus` bodies, including the scale.
    pub fn support(&self, u: &Point) -> Result<f64> {
        if self.spec.family != Family::Zplus {
            return Err(Error::Capability(format!("support function of {} bodies is not evaluated", self.spec.family)));
        }
        self.check_direction(u)?;
        Ok(self.spec.scale * self.zplus_support(u)?)
    }

    /// Value reported in radial profiles: support for `Zplus`, radial otherwise.
    pub fn profile_value(&self, theta: &Point) -> Result<f64> {
        match self.spec.family {
            Family::Zplus => self.support(theta),
            _ => self.radial(theta),
        }
    }

    fn unit_radial(&self, theta: &Point) -> Result<f64> {
        let invariant = self.model.is_rotation_invariant() || self.spec.family == Family::Euclidean;
        if invariant {
            return self
                .invariant
                .get_or_init(|| {
                    let mut e = DVector::zeros(self.model.dimension());
                    e[0] = 1.0;
                    self.compute_radial(&e)
                })
                .clone();
        }
        self.compute_radial(theta)
    }

    fn compute_radial(&self, theta: &Point) -> Result<f64> {
        let t = self.spec.t;
        match self.spec.family {
            Family::Euclidean => Ok(1.0),
            Family::B => self.ray_boundary(theta, |x| cramer_value(self.model, x).map(|v| v <= t)),
            Family::R => {
                let level = self.model.log_density_at_zero() - t;
                self.ray_boundary(theta, |x| Ok(self.model.ln_f(x) >= level))
            }
            Family::K => self.k_radial(theta),
            Family::Zplus => {
                if self.model.is_rotation_invariant() {
                    return self.zplus_support(theta);
                }
                let g = self.gauge(theta)?;
                Ok(1.0 / g)
            }
            Family::T => {
                if self.model.is_rotation_invariant() {
                    return Ok(self.quantile(theta)?.max(0.0));
                }
                let g = self.gauge(theta)?;
                Ok(if g.is_finite() { 1.0 / g } else { 0.0 })
            }
        }
    }

    /// `sup { r ≥ 0 : holds(rθ) }` for a predicate whose truth set on the ray is an interval containing 0.
    fn ray_boundary(&self, theta: &Point, holds: impl Fn(&Point) -> Result<bool>) -> Result<f64> {
        let mut err = None;
        let mut pred = |r: f64| match holds(&(theta * r)) {
            Ok(b) => b,
            Err(e) => {
                err.get_or_insert(e);
                false
            }
        };
        let start = typical_radius(self.model);
        let (lo, hi) = expand_until_fails(&mut pred, start, 80)?;
        let r = bisect_boundary(&mut pred, lo, hi, self.opts.rel_tol, self.opts.max_iter)?;
        match err {
            Some(e) => Err(e),
            None => Ok(r),
        }
    }

    fn k_radial(&self, theta: &Point) -> Result<f64> {
        let t = self.spec.t;
        let lf0 = self.model.log_density_at_zero();
        let hint = typical_radius(self.model) * t.max(1.0).sqrt();
        let log_mass = if t >= 1.0 {
            let l = |r: f64| {
                let w = if t == 1.0 { 0.0 } else { (t - 1.0) * r.ln() };
                w + self.model.ln_f(&(theta * r))
            };
            t.ln() + log_integral_unimodal(l, None, hint)?
        } else {
            // r = u^{1/t} removes the singular weight
            let l = |u: f64| self.model.ln_f(&(theta * u.powf(1.0 / t)));
            log_integral_unimodal(l, None, hint.powf(t))?
        };
        let r = ((log_mass - lf0) / t).exp();
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::numeric(format!("K-body radial is not finite (t = {t})")));
        }
        Ok(r)
    }

    /// `h_{Z_t^+}(u)` without the scale.
    fn zplus_support(&self, u: &Point) -> Result<f64> {
        let t = self.spec.t;
        let lm = self.model.marginal_unchecked(u).log_positive_moment(t)?;
        let h = (lm / t).exp();
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::numeric(format!("support function is degenerate in direction {u:?}")));
        }
        Ok(h)
    }

    /// `sup { s : P(⟨X,u⟩ ≥ s) ≥ e^{-t} }`, the half-space bound of `T_t` in direction `u`.
    fn quantile(&self, u: &Point) -> Result<f64> {
        self.model.marginal_unchecked(u).upper_quantile((-self.spec.t).exp())
    }

    /// Value of the family's half-space description in direction `u`.
    fn half_space(&self, u: &Point) -> Result<f64> {
        match self.spec.family {
            Family::Zplus => self.zplus_support(u),
            Family::T => self.quantile(u),
            _ => unreachable!("gauge of a non-polar family"),
        }
    }

    fn gauge_grid(&self) -> Result<&Vec<(Point, f64)>> {
        self.grid
            .get_or_init(|| {
                let n = self.model.dimension();
                let mut dirs = direction_set(n, self.opts.gauge_directions);
                dirs.extend(self.model.facet_normals());
                dirs.into_par_iter().map(|u| self.half_space(&u).map(|h| (u, h))).collect()
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Minkowski gauge `max_u ⟨θ,u⟩ / h(u)` of the body `∩_u {⟨x,u⟩ ≤ h(u)}`;
    /// `+inf` when some `h(u) ≤ 0` (the origin is not interior).
    fn gauge(&self, theta: &Point) -> Result<f64> {
        let grid = self.gauge_grid()?;
        if grid.iter().any(|(_, h)| *h <= 0.0) {
            return Ok(f64::INFINITY);
        }
        let n = self.model.dimension();
        let mut scored: Vec<(f64, &Point)> = grid.iter().map(|(u, h)| (theta.dot(u) / h, u)).collect();
        let th_h = self.half_space(theta)?;
        if th_h <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let at_theta = 1.0 / th_h;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best = scored[0].0.max(at_theta);
        if n < 2 {
            return Ok(best);
        }
        let err: OnceLock<Error> = OnceLock::new();
        let neg = |u: &Point| -> f64 {
            let c = theta.dot(u);
            if c <= 0.0 {
                return 0.0;
            }
            match self.half_space(u) {
                Ok(h) if h > 0.0 => -c / h,
                Ok(_) => f64::NEG_INFINITY,
                Err(e) => {
                    let _ = err.set(e);
                    0.0
                }
            }
        };
        let width = grid_spacing(n, self.opts.gauge_directions);
        let (v, u) = if at_theta >= scored[0].0 { (at_theta, theta.clone()) } else { (scored[0].0, scored[0].1.clone()) };
        let r = refine(&neg, &u, -v, width, self.opts.gauge_refine);
        best = best.max(-r.value);
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(best)
    }

    /// Membership of `x`.
    pub fn contains(&self, x: &Point) -> Result<bool> {
        self.model.check_dim(x)?;
        let y = x / self.spec.scale;
        let t = self.spec.t;
        match self.spec.family {
            Family::B if self.model.is_rotation_invariant() => Ok(y.norm() <= self.unit_radial(&unit_axis(y.len()))?),
            Family::B => Ok(cramer_value(self.model, &y)? <= t),
            Family::R => Ok(self.model.ln_f(&y) >= self.model.log_density_at_zero() - t),
            Family::T => {
                let level = (-t).exp();
                Ok(crate::depth::depth(self.model, &y, crate::sphere::SphereBudget::default())?.value >= level)
            }
            Family::Euclidean => Ok(y.norm() <= 1.0),
            Family::K | Family::Zplus => {
                let r = y.norm();
                if r == 0.0 {
                    return Ok(true);
                }
                Ok(r <= self.unit_radial(&(&y / r))?)
            }
        }
    }
}

/// Radial (or, for `Zplus`, support) values over a direction set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub spec: BodySpec,
    pub directions: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

pub fn radial(model: &MeasureModel, spec: BodySpec, theta: &Point) -> Result<f64> {
    Body::new(model, spec, BodyOptions::default())?.radial(theta)
}

pub fn radial_profile(
    model: &MeasureModel,
    spec: BodySpec,
    directions: &[Point],
    opts: BodyOptions,
) -> Result<RadialProfile> {
    let body = Body::new(model, spec, opts)?;
    let values = directions.par_iter().map(|u| body.profile_value(u)).collect::<Result<Vec<_>>>()?;
    Ok(RadialProfile {
        spec,
        directions: directions.iter().map(|u| u.iter().copied().collect()).collect(),
        values,
    })
}

/// Outcome of a per-direction inclusion test `inner ⊆ outer`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionReport {
    pub claim: String,
    pub inner: BodySpec,
    pub outer: BodySpec,
    pub directions: usize,
    /// Minimum over directions of `(outer - inner) / outer`.
    pub worst_margin: f64,
    pub worst_direction: usize,
    pub violations: usize,
    pub tol: f64,
    pub semantics: String,
}

impl InclusionReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Combines per-direction relative margins.
    fn from_margins(claim: &str, inner: BodySpec, outer: BodySpec, margins: &[f64], tol: f64, semantics: &str) -> Self {
        let (worst_direction, worst_margin) = margins
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, m)| if m < acc.1 || m.is_nan() { (i, m) } else { acc });
        Self {
            claim: claim.to_string(),
            inner,
            outer,
            directions: margins.len(),
            worst_margin,
            worst_direction,
            violations: margins.iter().filter(|m| !(**m >= -tol)).count(),
            tol,
            semantics: semantics.to_string(),
        }
    }

    /// Merges several reports on the same claim into one.
    pub fn merge(claim: &str, parts: &[InclusionReport]) -> Self {
        let worst = parts
            .iter()
            .min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin))
            .expect("at least one report");
        Self {
            claim: claim.to_string(),
            directions: parts.iter().map(|p| p.directions).sum(),
            violations: parts.iter().map(|p| p.violations).sum(),
            ..worst.clone()
        }
    }
}

fn relative_margin(inner: f64, outer: f64) -> f64 {
    if inner <= outer {
        if outer > 0.0 { (outer - inner) / outer } else { 0.0 }
    } else {
        (outer - inner) / inner
    }
}

/// Per-direction check of `inner ⊆ outer`.
///
/// Star bodies are compared through radial functions. A `Zplus` body on
/// either side enters through its support-function gauge, so an outer
/// `Zplus` body amounts to testing the witness point `ρ_inner(θ)θ` against
/// the outer half-spaces. Two `Zplus` bodies compare support functions.
pub fn inclusion_check(
    model: &MeasureModel,
    claim: &str,
    inner: BodySpec,
    outer: BodySpec,
    directions: &[Point],
    tol: f64,
    opts: BodyOptions,
) -> Result<InclusionReport> {
    let a = Body::new(model, inner, opts)?;
    let b = Body::new(model, outer, opts)?;
    let both_z = inner.family == Family::Zplus && outer.family == Family::Zplus;
    let semantics = if both_z {
        "support-function comparison on the direction set"
    } else if outer.family == Family::Zplus {
        "witness point rho_inner(theta)*theta tested against the outer support function over a gauge grid with local refinement"
    } else if inner.family == Family::Zplus {
        "inner radial from the support-function gauge; radial comparison"
    } else {
        "radial comparison on the direction set"
    };
    let margins = directions
        .par_iter()
        .map(|u| {
            if both_z {
                Ok(relative_margin(a.support(u)?, b.support(u)?))
            } else {
                Ok(relative_margin(a.radial(u)?, b.radial(u)?))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(InclusionReport::from_margins(claim, inner, outer, &margins, tol, semantics))
}

/// `Γ(t+1)^{1/t} / Γ(s+1)^{1/s} K_s ⊆ K_t ⊆ e^{n/t - n/s} K_s` for `t ≤ s`.
pub fn kt_chain_check(
    model: &MeasureModel,
    t: f64,
    s: f64,
    directions: &[Point],
    tol: f64,
    opts: BodyOptions,
) -> Result<InclusionReport> {
    if !(t > 0.0 && t <= s) {
        return Err(Error::input("need 0 < t <= s"));
    }
    let n = model.dimension() as f64;
    let lower = (ln_gamma(t + 1.0) / t - ln_gamma(s + 1.0) / s).exp();
    let upper = (n / t - n / s).exp();
    let kt = Body::new(model, BodySpec::new(Family::K, t), opts)?;
    let ks = Body::new(model, BodySpec::new(Family::K, s), opts)?;
    let margins = directions
        .par_iter()
        .map(|u| {
            let (rt, rs) = (kt.radial(u)?, ks.radial(u)?);
            Ok(relative_margin(lower * rs, rt).min(relative_margin(rt, upper * rs)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(InclusionReport::from_margins(
        "k-chain",
        BodySpec::new(Family::K, s).scaled(lower),
        BodySpec::new(Family::K, s).scaled(upper),
        &margins,
        tol,
        "two-sided radial comparison of K_t against scaled K_s",
    ))
}

/// Monte-Carlo estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

fn membership(body: &Body<'_>, points: &[Point]) -> Result<Vec<bool>> {
    points.par_iter().map(|x| body.contains(x)).collect()
}

/// `μ(body)` as a membership frequency over `samples` draws.
pub fn body_measure(
    model: &MeasureModel,
    spec: BodySpec,
    seed: u64,
    samples: usize,
    opts: BodyOptions,
) -> Result<MeasureEstimate> {
    if samples < 1000 {
        return Err(Error::input("body_measure needs at least 1000 samples"));
    }
    let body = Body::new(model, spec, opts)?;
    let points = model.sample(&SeedStream::new(seed).derive_str("body_measure"), samples);
    let inside = membership(&body, &points)?.into_iter().filter(|b| *b).count();
    let (estimate, stderr) = proportion(inside, samples);
    Ok(MeasureEstimate { estimate, stderr, samples })
}

/// Shared-sample comparison of `μ((1+δ)A)` with `e^{2nδ} μ(A)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilationReport {
    pub body: BodySpec,
    pub delta: f64,
    pub dilated: f64,
    pub base: f64,
    pub factor: f64,
    /// Mean of `1[x ∈ (1+δ)A] - e^{2nδ} 1[x ∈ A]`.
    pub difference: f64,
    pub sigma: f64,
    pub samples: usize,
    pub holds: bool,
}

pub fn dilation_measure_check(
    model: &MeasureModel,
    body: BodySpec,
    delta: f64,
    seed: u64,
    samples: usize,
    opts: BodyOptions,
) -> Result<DilationReport> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::input("delta must be nonnegative"));
    }
    if samples < 2 {
        return Err(Error::input("samples must be at least 2"));
    }
    let factor = (2.0 * model.dimension() as f64 * delta).exp();
    let a = Body::new(model, body, opts)?;
    let big = Body::new(model, body.scaled(1.0 + delta), opts)?;
    let points = model.sample(&SeedStream::new(seed).derive_str("dilation"), samples);
    let ina = membership(&a, &points)?;
    let inb = membership(&big, &points)?;
    let diff: Vec<f64> = ina.iter().zip(&inb).map(|(&x, &y)| y as u8 as f64 - factor * x as u8 as f64).collect();
    let (difference, sigma) = mean_stderr(&diff);
    let count = |v: &[bool]| v.iter().filter(|b| **b).count() as f64 / samples as f64;
    Ok(DilationReport {
        body,
        delta,
        dilated: count(&inb),
        base: count(&ina),
        factor,
        difference,
        sigma,
        samples,
        holds: difference <= 3.0 * sigma + 1e-12,
    })
}

/// Both sides of `∫_0^ϱ r^m g ≥ (1 - e^{-αm/4}) ∫_0^∞ r^m g` with
/// `ϱ = sup { r : g(r) ≥ e^{-αm} g(0) }`, for a log-concave ray profile `g`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayProfileReport {
    pub m: f64,
    pub alpha: f64,
    pub rho: f64,
    /// `ln ∫_0^ϱ r^m g`.
    pub log_lhs: f64,
    /// `ln ∫_0^∞ r^m g`.
    pub log_total: f64,
    pub ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `log_g` is `ln g`, `-inf` off the support.
pub fn ray_profile_check(log_g: impl Fn(f64) -> f64, m: f64, alpha: f64) -> Result<RayProfileReport> {
    if !(m > 0.0) || !(alpha >= 5.0) {
        return Err(Error::input("need m > 0 and alpha >= 5"));
    }
    let g0 = log_g(0.0);
    if !g0.is_finite() {
        return Err(Error::input("g(0) must be positive"));
    }
    let level = g0 - alpha * m;
    let above = |r: f64| log_g(r) >= level;
    let (lo, hi) = expand_until_fails(above, 1.0, 200)?;
    let rho = bisect_boundary(above, lo, hi, 1e-13, 400)?;
    let l = |r: f64| m * r.ln() + log_g(r);
    let log_total = log_integral_unimodal(l, None, rho.max(1e-12))?;
    let log_lhs = log_integral_unimodal(l, Some(rho), rho.max(1e-12))?;
    let ratio = (log_lhs - log_total).exp();
    let bound = 1.0 - (-alpha * m / 4.0).exp();
    Ok(RayProfileReport { m, alpha, rho, log_lhs, log_total, ratio, bound, holds: ratio >= bound - 1e-12 })
}

/// Empirical constant `c` in `h_k(u) ≤ (c k / s) h_s(u)`, `k > s`: the
/// largest `(s/k) h_k / h_s` over the given pairs and directions.
pub fn regularity_constant(model: &MeasureModel, pairs: &[(f64, f64)], directions: &[Point]) -> Result<f64> {
    let opts = BodyOptions::default();
    let mut c: f64 = 0.0;
    for &(s, k) in pairs {
        if !(k > s && s >= 1.0) {
            return Err(Error::input("pairs must satisfy k > s >= 1"));
        }
        let zs = Body::new(model, BodySpec::new(Family::Zplus, s), opts)?;
        let zk = Body::new(model, BodySpec::new(Family::Zplus, k), opts)?;
        let worst = directions
            .par_iter()
            .map(|u| Ok(s / k * zk.support(u)? / zs.support(u)?))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        c = c.max(worst);
    }
    Ok(c)
}

/// Largest `γ` with `c γ k / (k!)^{1/k} ≤ 1/2` for all `1 ≤ k ≤ 1000`.
pub fn gamma_constant(c: f64) -> f64 {
    (1..=1000)
        .map(|k| {
            let k = k as f64;
            (ln_gamma(k + 1.0) / k).exp() / (2.0 * c * k)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `c₁` (to relative accuracy 1e-3) with `B_t ⊆ (1+δ) Z^+_{c₁ t/δ}` on the directions.
pub fn fit_b_in_z_constant(
    model: &MeasureModel,
    t: f64,
    delta: f64,
    directions: &[Point],
    opts: BodyOptions,
) -> Result<f64> {
    if !(t >= 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::input("need t >= 1 and delta in (0, 1)"));
    }
    let inner = BodySpec::new(Family::B, t);
    let b = Body::new(model, inner, opts)?;
    let radii = directions.par_iter().map(|u| b.radial(u)).collect::<Result<Vec<f64>>>()?;
    let holds = |c: f64| -> Result<bool> {
        let z = Body::new(model, BodySpec::new(Family::Zplus, (c * t / delta).max(1.0)).scaled(1.0 + delta), opts)?;
        let ok = directions
            .par_iter()
            .zip(&radii)
            .map(|(u, r)| Ok(*r <= z.radial(u)?))
            .collect::<Result<Vec<bool>>>()?;
        Ok(ok.into_iter().all(|b| b))
    };
    let mut lo = delta / t;
    if holds(lo)? {
        return Ok(lo);
    }
    let mut hi = 2.0 * lo;
    while !holds(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Range("no constant up to 1e6 gives the inclusion".into()));
        }
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
