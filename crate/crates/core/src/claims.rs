//! Inclusion statements between the body families, each with a default
//! parameter schedule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bodies::{body_measure, inclusion_check, kt_chain_check, BodyOptions, BodySpec, Family, InclusionReport};
use crate::error::{Error, Result};
use crate::measures::{MeasureModel, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Claim {
    KChain,
    RInK,
    KInR,
    ZInB,
    Floating,
    TInZ,
    BallInR,
    RInT,
    BScaling,
    ZRegularity,
}

impl Claim {
    pub const ALL: [Claim; 10] = [
        Claim::KChain,
        Claim::RInK,
        Claim::KInR,
        Claim::ZInB,
        Claim::Floating,
        Claim::TInZ,
        Claim::BallInR,
        Claim::RInT,
        Claim::BScaling,
        Claim::ZRegularity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Claim::KChain => "k-chain",
            Claim::RInK => "r-in-k",
            Claim::KInR => "k-in-r",
            Claim::ZInB => "z-in-b",
            Claim::Floating => "floating",
            Claim::TInZ => "t-in-z",
            Claim::BallInR => "ball-in-r",
            Claim::RInT => "r-in-t",
            Claim::BScaling => "b-scaling",
            Claim::ZRegularity => "z-regularity",
        }
    }

    /// Whether the statement is about the isotropic position.
    pub fn needs_isotropy(self) -> bool {
        matches!(self, Claim::BallInR | Claim::RInT)
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Claim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Claim::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::input(format!("unknown claim '{s}'")))
    }
}

fn opts() -> BodyOptions {
    BodyOptions::default()
}

fn check(
    model: &MeasureModel,
    claim: &str,
    inner: BodySpec,
    outer: BodySpec,
    directions: &[Point],
    tol: f64,
) -> Result<InclusionReport> {
    inclusion_check(model, claim, inner, outer, directions, tol, opts())
}

/// `R_t ⊆ e^{t/s} K_s`.
pub fn r_in_k_check(model: &MeasureModel, t: f64, s: f64, directions: &[Point], tol: f64) -> Result<InclusionReport> {
    if !(t >= 0.0 && s > 0.0) {
        return Err(Error::input("need t >= 0 and s > 0"));
    }
    let outer = BodySpec::new(Family::K, s).scaled((t / s).exp());
    check(model, "r-in-k", BodySpec::new(Family::R, t), outer, directions, tol)
}

/// `(1 - 2n/t) K_t ⊆ R_{αt}`, and for even measures also
/// `(1 - e^{-αt/5}) K_t ⊆ R_{αt}`.
pub fn k_in_r_check(
    model: &MeasureModel,
    t: f64,
    alpha: f64,
    directions: &[Point],
    tol: f64,
) -> Result<InclusionReport> {
    let n = model.dimension() as f64;
    if !(t >= 2.0 * n && alpha >= 5.0) {
        return Err(Error::input("need t >= 2n and alpha >= 5"));
    }
    let outer = BodySpec::new(Family::R, alpha * t);
    let mut parts = Vec::new();
    let general = 1.0 - 2.0 * n / t;
    if general > 0.0 {
        parts.push(check(model, "k-in-r", BodySpec::new(Family::K, t).scaled(general), outer, directions, tol)?);
    }
    if model.is_even() {
        let even = 1.0 - (-alpha * t / 5.0).exp();
        parts.push(check(model, "k-in-r", BodySpec::new(Family::K, t).scaled(even), outer, directions, tol)?);
    }
    if parts.is_empty() {
        // the factor vanishes and the statement is empty
        parts.push(check(model, "k-in-r", BodySpec::new(Family::K, t).scaled(1e-12), outer, directions, tol)?);
    }
    Ok(InclusionReport::merge("k-in-r", &parts))
}

/// `Z^+_t ⊆ (1 + 2 ln s / s) B_s` for `t ≤ s`.
pub fn z_in_b_check(model: &MeasureModel, t: f64, s: f64, directions: &[Point], tol: f64) -> Result<InclusionReport> {
    if !(t >= 1.0 && t <= s && s > 1.0) {
        return Err(Error::input("need 1 <= t <= s and s > 1"));
    }
    let outer = BodySpec::new(Family::B, s).scaled(1.0 + 2.0 * s.ln() / s);
    check(model, "z-in-b", BodySpec::new(Family::Zplus, t), outer, directions, tol)
}

/// `T_s ⊆ B_s ⊆ T_{s + 3 ln s}`.
pub fn floating_check(model: &MeasureModel, s: f64, directions: &[Point], tol: f64) -> Result<InclusionReport> {
    if !(s > 1.0) {
        return Err(Error::input("need s > 1"));
    }
    let lower = check(model, "floating", BodySpec::new(Family::T, s), BodySpec::new(Family::B, s), directions, tol)?;
    let upper = check(
        model,
        "floating",
        BodySpec::new(Family::B, s),
        BodySpec::new(Family::T, s + 3.0 * s.ln()),
        directions,
        tol,
    )?;
    Ok(InclusionReport::merge("floating", &[lower, upper]))
}

/// Per-`s` outcome of the floating-body sandwich.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloatingScan {
    pub s_values: Vec<f64>,
    pub worst_margins: Vec<f64>,
    pub passed: Vec<bool>,
    /// Smallest grid value from which the sandwich holds at every larger grid value.
    pub empirical_s0: Option<f64>,
}

pub fn floating_scan(model: &MeasureModel, s_grid: &[f64], directions: &[Point], tol: f64) -> Result<FloatingScan> {
    let mut s_values = s_grid.to_vec();
    s_values.sort_by(f64::total_cmp);
    let reports = s_values.iter().map(|&s| floating_check(model, s, directions, tol)).collect::<Result<Vec<_>>>()?;
    let passed: Vec<bool> = reports.iter().map(InclusionReport::passed).collect();
    let first = passed.iter().rposition(|p| !p).map_or(0, |i| i + 1);
    Ok(FloatingScan {
        empirical_s0: s_values.get(first).copied(),
        worst_margins: reports.iter().map(|r| r.worst_margin).collect(),
        passed,
        s_values,
    })
}

/// `T_{t ln(1+δ)} ⊆ (1+δ) Z^+_t`.
pub fn t_in_z_check(model: &MeasureModel, t: f64, delta: f64, directions: &[Point], tol: f64) -> Result<InclusionReport> {
    if !(t >= 1.0 && delta > 0.0) {
        return Err(Error::input("need t >= 1 and delta > 0"));
    }
    let s = t * delta.ln_1p();
    let outer = BodySpec::new(Family::Zplus, t).scaled(1.0 + delta);
    check(model, "t-in-z", BodySpec::new(Family::T, s), outer, directions, tol)
}

/// `r B_2 ⊆ R_t` for an isotropic model.
pub fn ball_in_r_check(
    model: &MeasureModel,
    t: f64,
    radius: f64,
    directions: &[Point],
    tol: f64,
) -> Result<InclusionReport> {
    let inner = BodySpec::new(Family::Euclidean, 1.0).scaled(radius);
    check(model, "ball-in-r", inner, BodySpec::new(Family::R, t), directions, tol)
}

/// `(1-δ) R_t ⊆ T_{2t + n ln(1/δ)}` for an isotropic model.
pub fn r_in_t_check(model: &MeasureModel, t: f64, delta: f64, directions: &[Point], tol: f64) -> Result<InclusionReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input("need delta in (0, 1)"));
    }
    let n = model.dimension() as f64;
    let outer = BodySpec::new(Family::T, 2.0 * t - n * delta.ln());
    check(model, "r-in-t", BodySpec::new(Family::R, t).scaled(1.0 - delta), outer, directions, tol)
}

/// `B_t ⊆ B_s ⊆ (s/t) B_t` for `t ≤ s`.
pub fn b_scaling_check(model: &MeasureModel, t: f64, s: f64, directions: &[Point], tol: f64) -> Result<InclusionReport> {
    if !(t > 0.0 && t <= s) {
        return Err(Error::input("need 0 < t <= s"));
    }
    let bt = BodySpec::new(Family::B, t);
    let bs = BodySpec::new(Family::B, s);
    let lower = check(model, "b-scaling", bt, bs, directions, tol)?;
    let upper = check(model, "b-scaling", bs, bt.scaled(s / t), directions, tol)?;
    Ok(InclusionReport::merge("b-scaling", &[lower, upper]))
}

/// `(4/e)^{1/t - 1/s} Z^+_t ⊆ Z^+_s` for `1 ≤ t ≤ s`, compared through support functions.
pub fn z_regularity_check(
    model: &MeasureModel,
    t: f64,
    s: f64,
    directions: &[Point],
    tol: f64,
) -> Result<InclusionReport> {
    if !(t >= 1.0 && t <= s) {
        return Err(Error::input("need 1 <= t <= s"));
    }
    let factor = (4.0 / std::f64::consts::E).powf(1.0 / t - 1.0 / s);
    let inner = BodySpec::new(Family::Zplus, t).scaled(factor);
    check(model, "z-regularity", inner, BodySpec::new(Family::Zplus, s), directions, tol)
}

/// Runs a claim over its default parameter schedule.
///
/// Claims about the isotropic position are checked on the isotropized model.
pub fn claim_check(model: &MeasureModel, claim: Claim, directions: &[Point], tol: f64) -> Result<InclusionReport> {
    let n = model.dimension() as f64;
    let iso;
    let model = if claim.needs_isotropy() {
        iso = model.isotropize()?.1;
        &iso
    } else {
        model
    };
    let parts = match claim {
        Claim::KChain => vec![
            kt_chain_check(model, 2.0, 4.0, directions, tol, opts())?,
            kt_chain_check(model, n, 4.0 * n, directions, tol, opts())?,
        ],
        Claim::RInK => vec![
            r_in_k_check(model, n, 2.0 * n, directions, tol)?,
            r_in_k_check(model, 4.0 * n, 8.0 * n, directions, tol)?,
        ],
        Claim::KInR => vec![
            k_in_r_check(model, 2.0 * n, 5.0, directions, tol)?,
            k_in_r_check(model, 4.0 * n, 5.0, directions, tol)?,
        ],
        Claim::ZInB => vec![z_in_b_check(model, 32.0, 32.0, directions, tol)?],
        Claim::Floating => vec![floating_check(model, 10.0, directions, tol)?],
        Claim::TInZ => {
            let mut v = Vec::new();
            for t in [8.0, 16.0] {
                for delta in [0.2, 1.0] {
                    v.push(t_in_z_check(model, t, delta, directions, tol)?);
                }
            }
            v
        }
        Claim::BallInR => vec![ball_in_r_check(model, 20.0 * n, 1.0 / 3.0, directions, tol)?],
        Claim::RInT => vec![r_in_t_check(model, (n * n.ln()).ceil().max(1.0), 0.1, directions, tol)?],
        Claim::BScaling => vec![
            b_scaling_check(model, 2.0, 8.0, directions, tol)?,
            b_scaling_check(model, n, 4.0 * n, directions, tol)?,
        ],
        Claim::ZRegularity => vec![
            z_regularity_check(model, 2.0, 4.0, directions, tol)?,
            z_regularity_check(model, 4.0, 16.0, directions, tol)?,
        ],
    };
    Ok(InclusionReport::merge(claim.as_str(), &parts))
}

/// Monte-Carlo check of `1 - μ(B_{nt}) ≤ e^{-t/8}` for `t ≥ n ln n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub t: f64,
    pub outside: f64,
    pub stderr: f64,
    pub bound: f64,
    pub samples: usize,
    pub holds: bool,
}

pub fn b_measure_convergence_check(
    model: &MeasureModel,
    t: f64,
    seed: u64,
    samples: usize,
) -> Result<ConvergenceReport> {
    let n = model.dimension() as f64;
    if !(t >= n * n.ln()) || !(t > 0.0) {
        return Err(Error::input("need t >= n ln n"));
    }
    let est = body_measure(model, BodySpec::new(Family::B, n * t), seed, samples, opts())?;
    let outside = 1.0 - est.estimate;
    let bound = (-t / 8.0).exp();
    Ok(ConvergenceReport {
        t,
        outside,
        stderr: est.stderr,
        bound,
        samples,
        holds: outside <= bound + 3.0 * est.stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::direction_set;

    #[test]
    fn claim_names_round_trip() {
        for c in Claim::ALL {
            assert_eq!(c.as_str().parse::<Claim>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.as_str()));
        }
        assert!("r-3".parse::<Claim>().is_err());
    }

    #[test]
    fn gaussian_claims_hold() {
        let g = MeasureModel::gaussian(2).unwrap();
        let d = direction_set(2, 16);
        for c in Claim::ALL {
            let rep = claim_check(&g, c, &d, 1e-6).unwrap();
            assert!(rep.passed(), "{c}: {rep:?}");
        }
    }

    #[test]
    fn gaussian_z_regularity_margin() {
        // h_{Z^+_t} = 2^{-1/t} (E|X|^t)^{1/t} on a rotation-invariant Gaussian
        let g = MeasureModel::gaussian(2).unwrap();
        let d = direction_set(2, 8);
        let rep = z_regularity_check(&g, 2.0, 4.0, &d, 1e-9).unwrap();
        let h = |t: f64| {
            let abs = (t / 2.0 * 2f64.ln() + statrs::function::gamma::ln_gamma((t + 1.0) / 2.0)
                - 0.5 * std::f64::consts::PI.ln())
                / t;
            (abs - 2f64.ln() / t).exp()
        };
        let factor = (4.0 / std::f64::consts::E).powf(0.25);
        let want = (h(4.0) - factor * h(2.0)) / h(4.0);
        assert!((rep.worst_margin - want).abs() < 1e-7, "{} {want}", rep.worst_margin);
    }

    #[test]
    fn floating_scan_on_gaussian() {
        let g = MeasureModel::gaussian(2).unwrap();
        let d = direction_set(2, 8);
        let scan = floating_scan(&g, &[4.0, 2.0, 8.0], &d, 1e-6).unwrap();
        assert_eq!(scan.s_values, vec![2.0, 4.0, 8.0]);
        assert!(scan.empirical_s0.is_some());
    }

    #[test]
    fn measure_convergence_gaussian() {
        let g = MeasureModel::gaussian(2).unwrap();
        let r = b_measure_convergence_check(&g, 2.0, 3, 5_000).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(b_measure_convergence_check(&g, 1.0, 3, 5_000).is_err());
    }
}
