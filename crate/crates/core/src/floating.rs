//! Tails `1 - μ(T_s)` of depth level sets and the floating-body limit of the
//! planar disk.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::{inclusion_check, BodyOptions, BodySpec, Family, InclusionReport};
use crate::depth::depth_many;
use crate::error::{Error, Result};
use crate::measures::{MeasureModel, ModelKind, Point};
use crate::rng::SeedStream;
use crate::sphere::SphereBudget;
use crate::stats::proportion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailCategory {
    /// Uniform measure on a convex body, rescaled by `e^{2s/(n+1)}`.
    Uniform,
    /// Any other model, rescaled by `e^{s/(8n)}`.
    General,
}

fn category(model: &MeasureModel) -> TailCategory {
    match model.kind() {
        ModelKind::UniformBall { .. } | ModelKind::UniformCube { .. } => TailCategory::Uniform,
        ModelKind::AffinePushforward { base, .. } => category(base),
        _ => TailCategory::General,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCurve {
    pub model: String,
    pub category: TailCategory,
    pub s_values: Vec<f64>,
    pub tail: Vec<f64>,
    pub stderr: Vec<f64>,
    pub rescaled: Vec<f64>,
    pub samples: usize,
}

impl TailCurve {
    /// `c` with `tail ≈ e^{-cs/n}`: least-squares slope of `ln tail` over the
    /// upper half of the grid, times `-n`. `None` with fewer than two positive tails.
    pub fn decay_exponent(&self, n: usize) -> Option<f64> {
        let half = self.s_values.len() / 2;
        let pts: Vec<(f64, f64)> = self.s_values[half..]
            .iter()
            .zip(&self.tail[half..])
            .filter(|(_, t)| **t > 0.0)
            .map(|(s, t)| (*s, t.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let k = pts.len() as f64;
        let ms = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let ml = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|(s, l)| (s - ms) * (l - ml)).sum();
        let sxx: f64 = pts.iter().map(|(s, _)| (s - ms) * (s - ms)).sum();
        Some(-(sxy / sxx) * n as f64)
    }

    /// `e^{cs/n} · tail` along the grid.
    pub fn rescale(&self, c: f64, n: usize) -> Vec<f64> {
        self.s_values.iter().zip(&self.tail).map(|(s, t)| (c * s / n as f64).exp() * t).collect()
    }
}

fn check_grid(s_grid: &[f64]) -> Result<()> {
    if s_grid.is_empty() || s_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::input("s values must be positive"));
    }
    if s_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::input("s values must increase"));
    }
    Ok(())
}

/// `1 - μ(T_s)` as the frequency of `φ(X) < e^{-s}`, one depth per draw.
pub fn tail_curve(
    model: &MeasureModel,
    s_grid: &[f64],
    seed: u64,
    samples: usize,
    budget: SphereBudget,
) -> Result<TailCurve> {
    check_grid(s_grid)?;
    if samples < 2 {
        return Err(Error::input("samples must be at least 2"));
    }
    let n = model.dimension() as f64;
    let points = model.sample(&SeedStream::new(seed).derive_str("tail_curve"), samples);
    let phi = depth_many(model, &points, budget)?;
    let cat = category(model);
    let mut tail = Vec::with_capacity(s_grid.len());
    let mut stderr = Vec::with_capacity(s_grid.len());
    let mut rescaled = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let level = (-s).exp();
        let (t, se) = proportion(phi.iter().filter(|f| **f < level).count(), samples);
        let factor = match cat {
            TailCategory::Uniform => (2.0 * s / (n + 1.0)).exp(),
            TailCategory::General => (s / (8.0 * n)).exp(),
        };
        tail.push(t);
        stderr.push(se);
        rescaled.push(factor * t);
    }
    Ok(TailCurve { model: model.name(), category: cat, s_values: s_grid.to_vec(), tail, stderr, rescaled, samples })
}

/// `e^{s/(8n)} (1 - μ(T_s)) ≤ exp(n ln n / 8)` along a tail curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralBoundReport {
    pub ceiling: f64,
    pub worst: f64,
    pub worst_s: f64,
    pub holds: bool,
    pub decay_exponent: Option<f64>,
}

pub fn general_bound_check(curve: &TailCurve, n: usize) -> GeneralBoundReport {
    let nf = n as f64;
    let ceiling = (nf * nf.ln() / 8.0).exp();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_s = f64::NAN;
    let mut holds = true;
    for ((s, t), se) in curve.s_values.iter().zip(&curve.tail).zip(&curve.stderr) {
        let f = (s / (8.0 * nf)).exp();
        if f * t > worst {
            worst = f * t;
            worst_s = *s;
        }
        holds &= f * (t - 3.0 * se) <= ceiling;
    }
    GeneralBoundReport { ceiling, worst, worst_s, holds, decay_exponent: curve.decay_exponent(n) }
}

/// `T_{s_1} ⊆ T_{s_2}` for consecutive grid values, through radial profiles.
pub fn nesting_check(model: &MeasureModel, s_grid: &[f64], directions: &[Point], tol: f64) -> Result<InclusionReport> {
    check_grid(s_grid)?;
    if s_grid.len() < 2 {
        return Err(Error::input("nesting needs at least two levels"));
    }
    let parts = s_grid
        .windows(2)
        .map(|w| {
            inclusion_check(
                model,
                "t-nesting",
                BodySpec::new(Family::T, w[0]),
                BodySpec::new(Family::T, w[1]),
                directions,
                tol,
                BodyOptions::default(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InclusionReport::merge("t-nesting", &parts))
}

/// Radius of the disk of area one.
pub fn unit_disk_radius() -> f64 {
    std::f64::consts::PI.powf(-0.5)
}

/// Depth of a point at distance `d` from the centre of the disk of area one:
/// the area of the cap cut off by the chord at distance `d`.
pub fn disk_depth(d: f64) -> f64 {
    let r = unit_disk_radius();
    if d >= r {
        return 0.0;
    }
    let d = d.max(0.0);
    r * r * (d / r).acos() - d * (r * r - d * d).sqrt()
}

/// Distance at which the disk depth equals `level`; 0 when `level ≥ 1/2`.
pub fn disk_level_radius(level: f64) -> f64 {
    if level >= 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, unit_disk_radius());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if disk_depth(mid) >= level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 {
            break;
        }
    }
    lo
}

/// `lim e^{2s/3} (1 - μ(T_s))` for the uniform measure on the disk of area
/// one. The affine surface area of a disk of radius `r` is
/// `∫ κ^{1/3} dℓ = 2π r^{2/3}`; with `r = π^{-1/2}` and `ω_1 = 2` the limit
/// `(1/2)(3/ω_1)^{2/3} as(K)` equals `(3π/2)^{2/3}`.
pub fn disk_limit() -> f64 {
    (1.5 * std::f64::consts::PI).powf(2.0 / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiskAsaReport {
    pub s_values: Vec<f64>,
    pub tail: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `e^{2s/3} · tail`.
    pub rescaled: Vec<f64>,
    pub target: f64,
    /// Fit of `L + a e^{-bs}` over the upper half of the grid.
    pub limit: f64,
    pub fit_rate: f64,
    pub relative_error: f64,
    /// `e^{2s} · tail`, growing when the exponent is too large.
    pub rescaled_c4: Vec<f64>,
    pub c4_grows: bool,
    pub samples: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Importance-sampled `1 - μ(T_s)` for the disk. Depth is the exact cap
/// area, and points are drawn from an annulus `a ≤ |x| ≤ r` that contains
/// `{φ < e^{-s}}`, with `a` set from the small-cap approximation and lowered
/// until the annulus provably covers the set. The area coordinate of the
/// annulus is stratified into `samples` equal cells with one uniform draw
/// each; depth depends on `|x|` only, so at most one cell straddles the
/// level and the returned error bound is that cell's Bernoulli spread.
fn disk_tail(s: f64, stream: &SeedStream, samples: usize) -> (f64, f64) {
    let r = unit_disk_radius();
    let level = (-s).exp();
    if level >= 0.5 {
        return (1.0, 0.0);
    }
    // cap of height h has area ≈ (4/3) √(2r) h^{3/2}
    let h = (0.75 * level / (2.0 * r).sqrt()).powf(2.0 / 3.0);
    let mut a = (r - 2.0 * h).max(0.0);
    while a > 0.0 && disk_depth(a) < level {
        a = (r - 2.0 * (r - a)).max(0.0);
    }
    let area = std::f64::consts::PI * (r * r - a * a);
    let chunk = crate::measures::SAMPLE_CHUNK;
    let hits: usize = (0..samples.div_ceil(chunk))
        .into_par_iter()
        .map(|k| {
            let mut rng = stream.derive(k as u64).rng();
            let len = chunk.min(samples - k * chunk);
            (0..len)
                .filter(|i| {
                    let v: f64 = rng.random();
                    let u = ((k * chunk + i) as f64 + v) / samples as f64;
                    let d = (a * a + u * (r * r - a * a)).sqrt();
                    disk_depth(d) < level
                })
                .count()
        })
        .sum();
    let p = hits as f64 / samples as f64;
    (area * p, area * 0.5 / samples as f64)
}

/// Weighted least squares fit of `y = L + a e^{-bs}`: linear in `(L, a)` for
/// fixed `b`, with `b` by golden-section search.
fn fit_limit(s: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let solve = |b: f64| -> (f64, f64, f64) {
        let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..s.len() {
            let e = (-b * s[i]).exp();
            s00 += w[i];
            s01 += w[i] * e;
            s11 += w[i] * e * e;
            t0 += w[i] * y[i];
            t1 += w[i] * e * y[i];
        }
        let det = s00 * s11 - s01 * s01;
        if det.abs() < 1e-300 {
            return (t0 / s00, 0.0, f64::INFINITY);
        }
        let l = (s11 * t0 - s01 * t1) / det;
        let a = (s00 * t1 - s01 * t0) / det;
        let sse: f64 = (0..s.len()).map(|i| w[i] * (y[i] - l - a * (-b * s[i]).exp()).powi(2)).sum();
        (l, a, sse)
    };
    let (b, _) = crate::quad::golden_max(|b| -solve(b).2, 0.1, 5.0, 100);
    (solve(b).0, b)
}

/// Tail of the floating bodies of the disk of area one against the
/// affine-surface-area limit.
pub fn disk_asa_limit_check(s_grid: &[f64], seed: u64, samples: usize, tol: f64) -> Result<DiskAsaReport> {
    check_grid(s_grid)?;
    if s_grid.len() < 4 {
        return Err(Error::input("the limit fit needs at least four grid values"));
    }
    if samples < 100 {
        return Err(Error::input("samples must be at least 100"));
    }
    let root = SeedStream::new(seed).derive_str("disk_asa");
    let est: Vec<(f64, f64)> = s_grid.iter().enumerate().map(|(i, &s)| disk_tail(s, &root.derive(i as u64), samples)).collect();
    let tail: Vec<f64> = est.iter().map(|e| e.0).collect();
    let stderr: Vec<f64> = est.iter().map(|e| e.1).collect();
    let rescaled: Vec<f64> = s_grid.iter().zip(&tail).map(|(s, t)| (2.0 * s / 3.0).exp() * t).collect();
    let half = s_grid.len() / 2;
    let w: Vec<f64> = s_grid[half..]
        .iter()
        .zip(&stderr[half..])
        .map(|(s, se)| {
            let v = (2.0 * s / 3.0).exp() * se;
            1.0 / (v * v).max(1e-30)
        })
        .collect();
    let (limit, fit_rate) = fit_limit(&s_grid[half..], &rescaled[half..], &w);
    let target = disk_limit();
    let relative_error = (limit - target).abs() / target;
    let rescaled_c4: Vec<f64> = s_grid.iter().zip(&tail).map(|(s, t)| (2.0 * s).exp() * t).collect();
    let c4_grows = rescaled_c4.last() > rescaled_c4.first();
    Ok(DiskAsaReport {
        s_values: s_grid.to_vec(),
        tail,
        stderr,
        rescaled,
        target,
        limit,
        fit_rate,
        relative_error,
        rescaled_c4,
        c4_grows,
        samples,
        tol,
        passed: relative_error <= tol && c4_grows,
    })
}
