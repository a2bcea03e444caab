//! Moments of Λ* under μ: L^p norms, exponential moments, the ratio β and
//! growth in the dimension.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cramer::cramer_value;
use crate::depth::TailedEstimate;
use crate::error::{Error, Result};
use crate::measures::{MeasureModel, Zoo};
use crate::rng::SeedStream;
use crate::stats::{mean_stderr, pairwise_sum};

/// Largest tolerated fraction of samples with `Λ* = ∞`.
pub const MAX_DIVERGED_FRACTION: f64 = 1e-3;

/// Points of the tail-integral grid.
pub const TAIL_GRID: usize = 60;

/// Left end of the tail-integral grid.
pub const TAIL_GRID_START: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    DirectMc,
    TailIntegral,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::DirectMc => "direct_mc",
            Estimator::TailIntegral => "tail_integral",
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct_mc" => Ok(Estimator::DirectMc),
            "tail_integral" => Ok(Estimator::TailIntegral),
            _ => Err(Error::input(format!("unknown estimator `{s}`"))),
        }
    }
}

/// Monte-Carlo estimate of `E Λ*^p` or `E exp(c Λ*)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub model: String,
    /// `p` for power moments, `c/n` for exponential ones.
    pub parameter: f64,
    pub estimator: Estimator,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Samples with `Λ* = ∞`, left out of the average.
    pub excluded: usize,
    pub tail_exponent: Option<f64>,
    pub divergence_flag: bool,
}

impl MomentReport {
    /// `(E Λ*^p)^{1/p}` and its delta-method standard error.
    pub fn norm(&self) -> (f64, f64) {
        let p = self.parameter;
        let v = self.estimate.powf(1.0 / p);
        (v, v * self.stderr / (p * self.estimate))
    }
}

/// Λ* at i.i.d. draws from μ.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaStarSample {
    pub model: String,
    /// Finite values only.
    pub values: Vec<f64>,
    pub excluded: usize,
}

pub fn lambda_star_sample(model: &MeasureModel, stream: &SeedStream, samples: usize) -> Result<LambdaStarSample> {
    if samples < 2 {
        return Err(Error::input("samples must be at least 2"));
    }
    let points = model.sample(stream, samples);
    let all = points.par_iter().map(|x| cramer_value(model, x)).collect::<Result<Vec<f64>>>()?;
    let values: Vec<f64> = all.iter().copied().filter(|v| v.is_finite()).collect();
    let excluded = samples - values.len();
    if excluded as f64 > MAX_DIVERGED_FRACTION * samples as f64 {
        return Err(Error::DataQuality(format!(
            "{excluded} of {samples} samples have infinite Λ*"
        )));
    }
    Ok(LambdaStarSample { model: model.name(), values, excluded })
}

impl LambdaStarSample {
    fn report(&self, parameter: f64, estimator: Estimator, summands: &[f64]) -> MomentReport {
        let (estimate, stderr) = mean_stderr(summands);
        MomentReport {
            model: self.model.clone(),
            parameter,
            estimator,
            estimate,
            stderr,
            samples: self.values.len() + self.excluded,
            excluded: self.excluded,
            tail_exponent: None,
            divergence_flag: false,
        }
    }

    /// Sample mean of `Λ*^p`.
    pub fn direct(&self, p: f64) -> MomentReport {
        let s: Vec<f64> = self.values.iter().map(|v| if p == 0.0 { 1.0 } else { v.powf(p) }).collect();
        self.report(p, Estimator::DirectMc, &s)
    }

    /// Trapezoid rule for `∫ p t^{p-1} (1 - μ(B_t)) dt` on a log grid, with the
    /// empirical tail of this sample. Each draw contributes the quadrature
    /// applied to its own indicator `1[Λ*(X) > t]`, so the standard error is
    /// that of a plain mean.
    pub fn tail_integral(&self, p: f64) -> MomentReport {
        let grid = self.tail_grid();
        let dens = |t: f64| p * t.powf(p - 1.0);
        let t0 = grid[0];
        let summands: Vec<f64> = self
            .values
            .iter()
            .map(|&v| {
                // [0, t0] with the tail taken as 1 at t = 0
                let mut s = 0.5 * t0.powf(p) * (1.0 + (v > t0) as u8 as f64);
                for w in grid.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if v <= a {
                        break;
                    }
                    let ib = (v > b) as u8 as f64;
                    s += 0.5 * (b - a) * (dens(a) + dens(b) * ib);
                }
                s
            })
            .collect();
        self.report(p, Estimator::TailIntegral, &summands)
    }

    /// Log-spaced grid from [`TAIL_GRID_START`] to the level where the
    /// empirical tail falls below ten draws.
    pub fn tail_grid(&self) -> Vec<f64> {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len().saturating_sub(10);
        let top = sorted.get(k).copied().unwrap_or(1.0).max(2.0 * TAIL_GRID_START);
        let (a, b) = (TAIL_GRID_START.ln(), top.ln());
        (0..TAIL_GRID).map(|i| (a + (b - a) * i as f64 / (TAIL_GRID - 1) as f64).exp()).collect()
    }

    pub fn moment(&self, p: f64, estimator: Estimator) -> MomentReport {
        match estimator {
            Estimator::DirectMc => self.direct(p),
            Estimator::TailIntegral => self.tail_integral(p),
        }
    }

    /// Sample mean of `exp(c Λ*)` with the heavy-tail diagnostic.
    pub fn exp_moment(&self, c: f64) -> MomentReport {
        let s: Vec<f64> = self.values.iter().map(|v| (c * v).exp()).collect();
        let mut r = self.report(c, Estimator::DirectMc, &s);
        let t = TailedEstimate::from_summands(&s, r.stderr);
        r.tail_exponent = t.tail_exponent;
        r.divergence_flag = t.divergence_flag;
        r
    }

    pub fn beta(&self) -> BetaReport {
        let v = &self.values;
        let n = v.len() as f64;
        let (tau, tau_stderr) = mean_stderr(v);
        let sq: Vec<f64> = v.iter().map(|x| (x - tau) * (x - tau)).collect();
        let var = pairwise_sum(&sq) / (n - 1.0);
        let beta = var / (tau * tau);
        // influence function of var / mean²
        let infl: Vec<f64> = v
            .iter()
            .map(|x| ((x - tau) * (x - tau) - var) / (tau * tau) - 2.0 * var * (x - tau) / tau.powi(3))
            .collect();
        let (_, beta_stderr) = mean_stderr(&infl);
        BetaReport { beta, beta_stderr, tau, tau_stderr, samples: v.len() + self.excluded, excluded: self.excluded }
    }

    /// Both sides of `E Λ* ≥ -ln E e^{-Λ*}`.
    pub fn jensen(&self) -> JensenReport {
        let (tau, tau_stderr) = mean_stderr(&self.values);
        let e: Vec<f64> = self.values.iter().map(|v| (-v).exp()).collect();
        let (m, se) = mean_stderr(&e);
        let floor = -m.ln();
        JensenReport { tau, tau_stderr, floor, floor_stderr: se / m, holds: tau >= floor }
    }
}

fn stream(seed: u64, label: &str) -> SeedStream {
    SeedStream::new(seed).derive_str(label)
}

/// `E Λ*^p`. The two estimators draw independent samples.
pub fn lp_moment(
    model: &MeasureModel,
    p: f64,
    seed: u64,
    samples: usize,
    estimator: Estimator,
) -> Result<MomentReport> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::input("p must be nonnegative"));
    }
    let label = match estimator {
        Estimator::DirectMc => "lp_moment/direct_mc",
        Estimator::TailIntegral => "lp_moment/tail_integral",
    };
    Ok(lambda_star_sample(model, &stream(seed, label), samples)?.moment(p, estimator))
}

/// `E exp((c/n) Λ*)`, given `c/n`.
pub fn exp_moment(model: &MeasureModel, c_over_n: f64, seed: u64, samples: usize) -> Result<MomentReport> {
    if !(c_over_n > 0.0 && c_over_n.is_finite()) {
        return Err(Error::input("c/n must be positive"));
    }
    Ok(lambda_star_sample(model, &stream(seed, "exp_moment"), samples)?.exp_moment(c_over_n))
}

/// `β = Var Λ* / (E Λ*)²` and `τ = E Λ*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaReport {
    pub beta: f64,
    pub beta_stderr: f64,
    pub tau: f64,
    pub tau_stderr: f64,
    pub samples: usize,
    pub excluded: usize,
}

pub fn beta_ratio(model: &MeasureModel, seed: u64, samples: usize) -> Result<BetaReport> {
    Ok(lambda_star_sample(model, &stream(seed, "beta_ratio"), samples)?.beta())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JensenReport {
    pub tau: f64,
    pub tau_stderr: f64,
    /// `-ln E e^{-Λ*}`.
    pub floor: f64,
    pub floor_stderr: f64,
    pub holds: bool,
}

pub fn jensen_floor_check(model: &MeasureModel, seed: u64, samples: usize) -> Result<JensenReport> {
    Ok(lambda_star_sample(model, &stream(seed, "jensen"), samples)?.jensen())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRow {
    pub n: usize,
    pub norm: f64,
    pub stderr: f64,
    pub per_n: f64,
    /// `None` at `n = 1`.
    pub per_n_ln_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub family: Zoo,
    pub p: f64,
    pub rows: Vec<GrowthRow>,
    /// `max / min - 1` of `‖Λ*‖_p / n` over the range.
    pub per_n_spread: f64,
    /// Range of `‖Λ*‖_p / (n ln n)` over `n ≥ 2`.
    pub per_n_ln_n_band: Option<(f64, f64)>,
}

/// `‖Λ*‖_p` across dimensions, compared with `n` and `n ln n`.
pub fn growth_fit(family: Zoo, ns: &[usize], p: f64, seed: u64, samples: usize) -> Result<GrowthReport> {
    if ns.is_empty() || ns.iter().any(|&n| !(1..=8).contains(&n)) {
        return Err(Error::input("dimensions must lie in 1..=8"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::input("p must be at least 1"));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let model = family.model(n)?;
        let s = lambda_star_sample(&model, &stream(seed, "growth_fit").derive(n as u64), samples)?;
        let (norm, stderr) = s.direct(p).norm();
        let nf = n as f64;
        rows.push(GrowthRow {
            n,
            norm,
            stderr,
            per_n: norm / nf,
            per_n_ln_n: (n >= 2).then(|| norm / (nf * nf.ln())),
        });
    }
    let per_n: Vec<f64> = rows.iter().map(|r| r.per_n).collect();
    let hi = per_n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = per_n.iter().copied().fold(f64::INFINITY, f64::min);
    let band: Vec<f64> = rows.iter().filter_map(|r| r.per_n_ln_n).collect();
    let per_n_ln_n_band = (!band.is_empty()).then(|| {
        (band.iter().copied().fold(f64::INFINITY, f64::min), band.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    });
    Ok(GrowthReport { family, p, rows, per_n_spread: hi / lo - 1.0, per_n_ln_n_band })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within(got: f64, want: f64, se: f64) -> bool {
        (got - want).abs() <= 3.0 * se
    }

    #[test]
    fn gaussian_first_and_second_moments() {
        // |X|²/2 with |X|² ~ χ²_n
        let m = MeasureModel::gaussian(3).unwrap();
        let r = lp_moment(&m, 1.0, 7, 20_000, Estimator::DirectMc).unwrap();
        assert!(within(r.estimate, 1.5, r.stderr), "{r:?}");
        let r = lp_moment(&m, 2.0, 7, 20_000, Estimator::DirectMc).unwrap();
        let (v, se) = r.norm();
        assert!(within(v, (15.0f64 / 4.0).sqrt(), se), "{v} ± {se}");
    }

    #[test]
    fn zeroth_moment_is_one() {
        let m = MeasureModel::exponential(2).unwrap();
        let r = lp_moment(&m, 0.0, 1, 1000, Estimator::DirectMc).unwrap();
        assert_eq!(r.estimate, 1.0);
    }

    #[test]
    fn estimators_agree() {
        for m in [MeasureModel::exponential(2).unwrap(), MeasureModel::cube(2, 1.0).unwrap()] {
            for p in [1.0, 2.0] {
                let a = lp_moment(&m, p, 3, 20_000, Estimator::DirectMc).unwrap();
                let b = lp_moment(&m, p, 3, 20_000, Estimator::TailIntegral).unwrap();
                let se = a.stderr.hypot(b.stderr);
                assert!((a.estimate - b.estimate).abs() <= 3.0 * se, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn tail_integral_of_exact_exponential_law() {
        // Gaussian n = 2: Λ* ~ Exp(1), so the quadrature is checked against E = 1
        let m = MeasureModel::gaussian(2).unwrap();
        let r = lp_moment(&m, 1.0, 11, 20_000, Estimator::TailIntegral).unwrap();
        assert!(within(r.estimate, 1.0, r.stderr), "{r:?}");
    }

    #[test]
    fn gaussian_exponential_moment() {
        // E exp(|X|²/64) = (1 - 1/32)^{-1} for n = 2
        let m = MeasureModel::gaussian(2).unwrap();
        let r = exp_moment(&m, 1.0 / 32.0, 5, 20_000).unwrap();
        assert!(within(r.estimate, 1.0 / (1.0 - 1.0 / 32.0), r.stderr), "{r:?}");
        assert!(!r.divergence_flag);
        // E exp(|X|²) = ∞
        let r = exp_moment(&m, 2.0, 5, 20_000).unwrap();
        assert!(r.divergence_flag, "{r:?}");
    }

    #[test]
    fn gaussian_beta() {
        // Var(χ²_n / 2) / (n/2)² = 2/n
        let m = MeasureModel::gaussian(4).unwrap();
        let b = beta_ratio(&m, 9, 40_000).unwrap();
        assert!(within(b.beta, 0.5, b.beta_stderr), "{b:?}");
        assert!(within(b.tau, 2.0, b.tau_stderr), "{b:?}");
    }

    /// Λ* of the centred uniform on [-1/2, 1/2] by bisection on the tilted mean.
    fn uniform_lambda_star(x: f64) -> f64 {
        let ln_mgf = |xi: f64| {
            if xi.abs() < 1e-6 {
                xi * xi / 24.0
            } else {
                let a = 0.5 * xi.abs();
                a + (-(-2.0 * a).exp()).ln_1p() - xi.abs().ln()
            }
        };
        let mean = |xi: f64| {
            if xi.abs() < 1e-6 {
                xi / 12.0
            } else {
                0.5 / (0.5 * xi).tanh() - 1.0 / xi
            }
        };
        let (mut lo, mut hi) = (-1e8, 1e8);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let xi = 0.5 * (lo + hi);
        x * xi - ln_mgf(xi)
    }

    #[test]
    fn cube_growth_is_linear() {
        // E Λ*_1(U) by midpoint quadrature, U uniform on [-1/2, 1/2]
        let k = 20_000;
        let one_d = (0..k).map(|i| uniform_lambda_star(-0.5 + (i as f64 + 0.5) / k as f64)).sum::<f64>() / k as f64;
        let g = growth_fit(Zoo::Cube, &[1, 2, 4], 1.0, 2, 20_000).unwrap();
        for r in &g.rows {
            assert!(within(r.per_n, one_d, r.stderr / r.n as f64), "{r:?} vs {one_d}");
        }
        assert!(g.per_n_spread < 0.1);
    }

    #[test]
    fn jensen_floor() {
        let m = MeasureModel::exponential(3).unwrap();
        let j = jensen_floor_check(&m, 4, 5000).unwrap();
        assert!(j.holds && j.floor > 0.0, "{j:?}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = MeasureModel::gaussian(2).unwrap();
        assert!(lp_moment(&m, -1.0, 1, 100, Estimator::DirectMc).is_err());
        assert!(exp_moment(&m, 0.0, 1, 100).is_err());
        assert!(growth_fit(Zoo::Cube, &[9], 1.0, 1, 100).is_err());
    }
}
