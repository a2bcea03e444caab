//! One-dimensional marginals ⟨X, ξ⟩ of the model zoo.

use nalgebra::{DMatrix, DVector};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::Result;
use crate::quad::{bisect_boundary, log_integral_unimodal_with_breaks};

/// Law of a centred one-dimensional random variable `Y`.
#[derive(Debug, Clone)]
pub enum Law {
    Normal { sd: f64 },
    /// Marginal of the uniform ball of dimension `n`: Beta((n+1)/2, (n+1)/2) on [-radius, radius].
    Ball { radius: f64, n: usize },
    /// Sum of independent centred uniforms of the given widths.
    UniformSum(UniformSum),
    /// `P - N + shift` with `P`, `N` independent sums of exponentials.
    PhaseType(PhaseType),
    /// Empirical law of sorted samples.
    Empirical { sorted: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct UniformSum {
    total: f64,
    k: usize,
    /// Subset sums and signs, with `1 / (k! Π w)` folded in.
    terms: Vec<(f64, f64)>,
    pdf_terms: Vec<(f64, f64)>,
    sd: f64,
}

impl UniformSum {
    /// Builds the law from widths, dropping components that are negligible
    /// next to the widest one or that would make the inclusion–exclusion sum
    /// lose more than nine digits.
    pub fn new(widths: &[f64]) -> Self {
        let mut w: Vec<f64> = widths.iter().map(|x| x.abs()).filter(|x| *x > 0.0).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        let sd = (w.iter().map(|x| x * x).sum::<f64>() / 12.0).sqrt();
        let mut kept: Vec<f64> = Vec::new();
        let mut loss = 1.0;
        for &x in &w {
            if kept.is_empty() {
                kept.push(x);
                continue;
            }
            let ratio = kept[0] / x;
            if ratio > 1e12 || loss * ratio > 1e9 {
                break;
            }
            loss *= ratio;
            kept.push(x);
        }
        let k = kept.len();
        let total: f64 = kept.iter().sum();
        let log_norm: f64 = kept.iter().map(|x| x.ln()).sum();
        let mut terms = Vec::with_capacity(1 << k);
        let mut pdf_terms = Vec::with_capacity(1 << k);
        let cdf_scale = (-log_norm - ln_gamma(k as f64 + 1.0)).exp();
        let pdf_scale = (-log_norm - ln_gamma(k as f64)).exp();
        for mask in 0u32..(1u32 << k) {
            let sum: f64 = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| kept[i]).sum();
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            terms.push((sum, sign * cdf_scale));
            pdf_terms.push((sum, sign * pdf_scale));
        }
        terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        pdf_terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { total, k, terms, pdf_terms, sd }
    }

    /// Points where the density has a kink or jump. With four or more
    /// components the density is twice differentiable and none are reported.
    fn kinks(&self) -> Vec<f64> {
        if self.k > 3 {
            return Vec::new();
        }
        let mut v: Vec<f64> = self.terms.iter().map(|(s, _)| s - 0.5 * self.total).collect();
        v.dedup();
        v
    }

    /// P(Y <= y) for y <= 0, evaluated from the lower end of the support.
    fn lower(&self, y: f64) -> f64 {
        let u = y + 0.5 * self.total;
        if u <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for &(s, c) in &self.terms {
            if s >= u {
                break;
            }
            acc += c * (u - s).powi(self.k as i32);
        }
        acc.clamp(0.0, 0.5)
    }

    fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            self.lower(y)
        } else {
            1.0 - self.lower(-y)
        }
    }

    fn pdf(&self, y: f64) -> f64 {
        let u = 0.5 * self.total - y.abs();
        if u <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for &(s, c) in &self.pdf_terms {
            if s >= u {
                break;
            }
            acc += c * (u - s).powi(self.k as i32 - 1);
        }
        acc.max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct PhaseType {
    shift: f64,
    pos: Option<Chain>,
    neg: Option<Chain>,
    sd: f64,
}

/// Sum of exponentials as a phase-type law, tilted by the opposite side.
#[derive(Debug, Clone)]
struct Chain {
    q: DMatrix<f64>,
    /// Π_j β_j (β_j I - Q)^{-1} 1 over the rates β_j of the opposite side.
    v: DVector<f64>,
    /// `e₁ᵀ e^{Qz} v = Σ a_k e^{-r_k z}` as pairs `(a_k, r_k)`, when the rates are distinct.
    mix: Option<Vec<(f64, f64)>>,
}

/// Largest tolerated ratio of `Σ |terms|` to `|Σ terms|` in the mixture form.
const MIX_CANCELLATION: f64 = 1e5;

fn mixture(rates: &[f64], v: &DVector<f64>) -> Option<Vec<(f64, f64)>> {
    let m = rates.len();
    for (k, &r) in rates.iter().enumerate() {
        if rates[..k].contains(&r) {
            return None;
        }
    }
    // (e^{Qz})_{0j} = Π_{i<j} r_i Σ_{k≤j} e^{-r_k z} / Π_{l≤j, l≠k} (r_l - r_k)
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut a = 0.0;
        for j in k..m {
            let mut c = v[j] * rates[..j].iter().product::<f64>();
            for l in 0..=j {
                if l != k {
                    c /= rates[l] - rates[k];
                }
            }
            a += c;
        }
        if !a.is_finite() {
            return None;
        }
        out.push((a, rates[k]));
    }
    Some(out)
}

impl Chain {
    fn new(rates: &[f64], other: &[f64]) -> Self {
        let m = rates.len();
        let mut q = DMatrix::zeros(m, m);
        for (i, &r) in rates.iter().enumerate() {
            q[(i, i)] = -r;
            if i + 1 < m {
                q[(i, i + 1)] = r;
            }
        }
        let mut v = DVector::from_element(m, 1.0);
        for &b in other {
            let a = DMatrix::identity(m, m) * b - &q;
            // upper bidiagonal: back substitution
            let mut x = DVector::zeros(m);
            for i in (0..m).rev() {
                let mut rhs = b * v[i];
                if i + 1 < m {
                    rhs -= a[(i, i + 1)] * x[i + 1];
                }
                x[i] = rhs / a[(i, i)];
            }
            v = x;
        }
        let mix = mixture(rates, &v);
        Self { q, v, mix }
    }

    /// `Σ term(a_k, r_k)` when the sum is not dominated by cancellation.
    fn mixed(&self, term: impl Fn(f64, f64) -> f64) -> Option<f64> {
        let mix = self.mix.as_ref()?;
        let (mut sum, mut abs) = (0.0, 0.0);
        for &(a, r) in mix {
            let x = term(a, r);
            sum += x;
            abs += x.abs();
        }
        (abs <= MIX_CANCELLATION * sum.abs()).then_some(sum)
    }

    /// P(P - N > z) for z >= 0.
    fn tail(&self, z: f64) -> f64 {
        if let Some(p) = self.mixed(|a, r| a * (-r * z).exp()) {
            return p.clamp(0.0, 1.0);
        }
        let e = (&self.q * z).exp();
        (e.row(0) * &self.v)[(0, 0)].clamp(0.0, 1.0)
    }

    /// `1 - tail(z)` without cancellation; valid when there is no opposite side.
    fn head(&self, z: f64) -> f64 {
        // Σ a_k = 1 without an opposite side
        if let Some(p) = self.mixed(|a, r| -a * (-r * z).exp_m1()) {
            return p.clamp(0.0, 1.0);
        }
        // 1 - e₁ᵀ e^{Qz} 1 = r_m z e₁ᵀ φ₁(Qz) e_m, read off exp([[Qz, e_m], [0, 0]])
        let m = self.q.nrows();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        a.view_mut((0, 0), (m, m)).copy_from(&(&self.q * z));
        a[(m - 1, m)] = 1.0;
        let e = a.exp();
        (-self.q[(m - 1, m - 1)] * z * e[(0, m)]).clamp(0.0, 1.0)
    }

    fn density(&self, z: f64) -> f64 {
        if let Some(p) = self.mixed(|a, r| a * r * (-r * z).exp()) {
            return p.max(0.0);
        }
        let e = (&self.q * z).exp();
        (-(self.q.row(0) * e * &self.v)[(0, 0)]).max(0.0)
    }
}

impl PhaseType {
    /// `pos` and `neg` are the rates of the exponentials entering with a plus
    /// and a minus sign.
    pub fn new(pos: &[f64], neg: &[f64], shift: f64) -> Self {
        let var: f64 = pos.iter().chain(neg).map(|r| 1.0 / (r * r)).sum();
        Self {
            shift,
            pos: (!pos.is_empty()).then(|| Chain::new(pos, neg)),
            neg: (!neg.is_empty()).then(|| Chain::new(neg, pos)),
            sd: var.sqrt(),
        }
    }

    fn sf(&self, y: f64) -> f64 {
        let z = y - self.shift;
        if z >= 0.0 {
            self.pos.as_ref().map_or(0.0, |c| c.tail(z))
        } else {
            match (&self.pos, &self.neg) {
                (None, Some(c)) => c.head(-z),
                (_, Some(c)) => 1.0 - c.tail(-z),
                (_, None) => 1.0,
            }
        }
    }

    fn cdf(&self, y: f64) -> f64 {
        let z = y - self.shift;
        if z < 0.0 {
            self.neg.as_ref().map_or(0.0, |c| c.tail(-z))
        } else {
            match (&self.pos, &self.neg) {
                (Some(c), None) => c.head(z),
                (Some(c), _) => 1.0 - c.tail(z),
                (None, _) => 1.0,
            }
        }
    }

    fn pdf(&self, y: f64) -> f64 {
        let z = y - self.shift;
        let side = if z >= 0.0 { &self.pos } else { &self.neg };
        side.as_ref().map_or(0.0, |c| c.density(z.abs()))
    }
}

impl Law {
    pub fn sd(&self) -> f64 {
        match self {
            Law::Normal { sd } => *sd,
            Law::Ball { radius, n } => radius / ((*n as f64) + 2.0).sqrt(),
            Law::UniformSum(u) => u.sd,
            Law::PhaseType(p) => p.sd,
            Law::Empirical { sorted } => {
                let n = sorted.len() as f64;
                let m = sorted.iter().sum::<f64>() / n;
                (sorted.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
            }
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            Law::Normal { sd } => 0.5 * erfc(-y / (sd * std::f64::consts::SQRT_2)),
            Law::Ball { radius, n } => {
                let w = 0.5 * (1.0 + y / radius);
                if w <= 0.0 {
                    0.0
                } else if w >= 1.0 {
                    1.0
                } else {
                    let a = 0.5 * (*n as f64 + 1.0);
                    if w <= 0.5 {
                        beta_reg(a, a, w)
                    } else {
                        1.0 - beta_reg(a, a, 1.0 - w)
                    }
                }
            }
            Law::UniformSum(u) => u.cdf(y),
            Law::PhaseType(p) => p.cdf(y),
            Law::Empirical { sorted } => sorted.partition_point(|&x| x <= y) as f64 / sorted.len() as f64,
        }
    }

    pub fn sf(&self, y: f64) -> f64 {
        match self {
            Law::Normal { .. } | Law::Ball { .. } | Law::UniformSum(_) => self.cdf(-y),
            Law::PhaseType(p) => p.sf(y),
            Law::Empirical { sorted } => {
                (sorted.len() - sorted.partition_point(|&x| x <= y)) as f64 / sorted.len() as f64
            }
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match self {
            Law::Normal { sd } => {
                let z = y / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            Law::Ball { radius, n } => {
                let w = 0.5 * (1.0 + y / radius);
                if w <= 0.0 || w >= 1.0 {
                    return 0.0;
                }
                let a = 0.5 * (*n as f64 + 1.0);
                ((a - 1.0) * (w * (1.0 - w)).ln() - ln_beta(a, a)).exp() / (2.0 * radius)
            }
            Law::UniformSum(u) => u.pdf(y),
            Law::PhaseType(p) => p.pdf(y),
            Law::Empirical { .. } => {
                let h = 0.05 * self.sd();
                (self.cdf(y + h) - self.cdf(y - h)) / (2.0 * h)
            }
        }
    }
}

/// Law of `⟨X, direction⟩`, represented as `scale · Y + shift`.
#[derive(Debug, Clone)]
pub struct DirectionalMarginal {
    pub direction: DVector<f64>,
    pub law: Law,
    pub scale: f64,
    pub shift: f64,
}

impl DirectionalMarginal {
    pub fn new(direction: DVector<f64>, law: Law) -> Self {
        Self { direction, law, scale: 1.0, shift: 0.0 }
    }

    pub fn cdf(&self, s: f64) -> f64 {
        self.law.cdf((s - self.shift) / self.scale)
    }

    /// `P(⟨X, ξ⟩ >= s)`, accurate in the upper tail.
    pub fn sf(&self, s: f64) -> f64 {
        self.law.sf((s - self.shift) / self.scale)
    }

    pub fn pdf(&self, s: f64) -> f64 {
        self.law.pdf((s - self.shift) / self.scale) / self.scale
    }

    pub fn sd(&self) -> f64 {
        self.scale * self.law.sd()
    }

    /// `sup { s : sf(s) >= level }`.
    pub fn upper_quantile(&self, level: f64) -> Result<f64> {
        let sd = self.sd().max(1e-300);
        if self.sf(self.shift) >= level {
            let mut hi = self.shift + sd;
            while self.sf(hi) >= level {
                hi = self.shift + 2.0 * (hi - self.shift);
                if !hi.is_finite() {
                    return Ok(f64::INFINITY);
                }
            }
            let lo = self.shift + 0.5 * (hi - self.shift);
            let lo = if self.sf(lo) >= level { lo } else { self.shift };
            bisect_boundary(|s| self.sf(s) >= level, lo, hi, 1e-13, 300)
        } else {
            let mut lo = self.shift - sd;
            while self.sf(lo) < level {
                lo = self.shift - 2.0 * (self.shift - lo);
                if !lo.is_finite() {
                    return Ok(f64::NEG_INFINITY);
                }
            }
            bisect_boundary(|s| self.sf(s) >= level, lo, self.shift, 1e-13, 300)
        }
    }

    /// `ln E ⟨X, ξ⟩_+^t`.
    pub fn log_positive_moment(&self, t: f64) -> Result<f64> {
        if let (Law::Normal { sd }, true) = (&self.law, self.shift == 0.0) {
            let s = sd * self.scale;
            return Ok(t * s.ln() + (0.5 * t - 1.0) * std::f64::consts::LN_2 + ln_gamma(0.5 * (t + 1.0))
                - 0.5 * std::f64::consts::PI.ln());
        }
        let sd = self.sd();
        let mut kinks: Vec<f64> = match &self.law {
            Law::UniformSum(u) => u.kinks().into_iter().map(|y| self.shift + self.scale * y).filter(|s| *s > 0.0).collect(),
            _ => Vec::new(),
        };
        // s^{t-1} is not smooth at 0: geometric panels towards it
        kinks.extend((1..60).map(|k| sd * 0.5f64.powi(k)));
        if t >= 1.0 {
            let l = |s: f64| {
                let p = self.sf(s);
                if p <= 0.0 {
                    f64::NEG_INFINITY
                } else if t == 1.0 {
                    p.ln()
                } else {
                    (t - 1.0) * s.ln() + p.ln()
                }
            };
            Ok(t.ln() + log_integral_unimodal_with_breaks(l, None, sd * t.max(1.0), &kinks)?)
        } else {
            let l = |u: f64| {
                let p = self.sf(u.powf(1.0 / t));
                if p <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    p.ln()
                }
            };
            let kinks: Vec<f64> = kinks.iter().map(|s| s.powf(t)).collect();
            log_integral_unimodal_with_breaks(l, None, sd.powf(t), &kinks)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    #[test]
    fn uniform_sum_matches_convolution() {
        // two widths: trapezoidal density
        let u = Law::UniformSum(UniformSum::new(&[1.0, 0.5]));
        let (a, b) = (1.0f64, 0.5f64);
        let oracle = |y: f64| {
            let x = y + 0.75;
            integrate(|s: f64| if s < x { (x - s).min(a).max(0.0) / a } else { 0.0 } / b, 0.0, b, 50)
        };
        for y in [-0.7, -0.4, -0.1, 0.0, 0.2, 0.6] {
            assert!((u.cdf(y) - oracle(y)).abs() < 1e-10, "{y}");
        }
        assert_eq!(u.cdf(0.75), 1.0);
        assert!((u.pdf(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_sum_tail_is_accurate() {
        let u = Law::UniformSum(UniformSum::new(&[1.0, 1.0, 1.0]));
        // lower corner of the cube: volume of the simplex of side d
        let d = 1e-3;
        assert!((u.sf(1.5 - d) - d * d * d / 6.0).abs() < 1e-22);
    }

    #[test]
    fn phase_type_reproduces_exponential_laws() {
        let one = Law::PhaseType(PhaseType::new(&[1.0], &[], -1.0));
        for y in [-0.5, 0.0, 2.0, 10.0] {
            assert!((one.sf(y) - (-(y + 1.0f64)).exp()).abs() < 1e-13);
        }
        assert_eq!(one.cdf(-1.5), 0.0);
        // Laplace(1): sf(y) = e^{-y}/2
        let lap = Law::PhaseType(PhaseType::new(&[1.0], &[1.0], 0.0));
        for y in [0.0f64, 1.0, 5.0] {
            assert!((lap.sf(y) - 0.5 * (-y).exp()).abs() < 1e-13);
            assert!((lap.cdf(-y) - 0.5 * (-y).exp()).abs() < 1e-13);
            assert!((lap.pdf(y) - 0.5 * (-y).exp()).abs() < 1e-12);
        }
        // Gamma(2,1): sf = (1+z) e^{-z}
        let g = Law::PhaseType(PhaseType::new(&[1.0, 1.0], &[], 0.0));
        assert!((g.sf(3.0) - 4.0 * (-3.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn phase_type_small_head_has_no_cancellation() {
        // -(E₁ + E₂/2): P(X ≥ -w) = P(E₁ + E₂/2 ≤ w) = (1 - e^{-w})²
        let law = Law::PhaseType(PhaseType::new(&[], &[1.0, 2.0], 0.0));
        for w in [1e-8f64, 1e-5, 1e-2, 0.5, 4.0] {
            let want = (-w).exp_m1().powi(2);
            assert!((law.sf(-w) - want).abs() <= 1e-10 * want, "w={w}: {} vs {want}", law.sf(-w));
        }
        let pos = Law::PhaseType(PhaseType::new(&[1.0, 2.0], &[], 0.0));
        assert!((pos.cdf(1e-6) - (-1e-6f64).exp_m1().powi(2)).abs() < 1e-20);
    }

    #[test]
    fn phase_type_mixture_matches_matrix_exponential() {
        for (pos, neg) in [(vec![1.0, 2.5, 0.7], vec![1.3]), (vec![3.0, 0.4], vec![]), (vec![0.9], vec![2.0, 5.0])] {
            let c = Chain::new(&pos, &neg);
            assert!(c.mix.is_some());
            for z in [0.0, 0.3, 2.0, 15.0] {
                let e = (&c.q * z).exp();
                let tail = (e.row(0) * &c.v)[(0, 0)];
                let dens = -(c.q.row(0) * &e * &c.v)[(0, 0)];
                assert!((c.tail(z) - tail).abs() <= 1e-12 * tail.max(1e-300) + 1e-300, "{z}: {} {tail}", c.tail(z));
                assert!((c.density(z) - dens).abs() <= 1e-11 * dens.abs() + 1e-300, "{z}");
            }
        }
        assert!(Chain::new(&[1.0, 1.0], &[]).mix.is_none());
    }

    #[test]
    fn ball_marginal_is_a_chord_law() {
        // disk of radius 1: P(X1 <= s) = (asin s + s sqrt(1-s²))/π + 1/2
        let b = Law::Ball { radius: 1.0, n: 2 };
        for s in [-0.9f64, -0.3, 0.0, 0.5] {
            let want = (s.asin() + s * (1.0 - s * s).sqrt()) / std::f64::consts::PI + 0.5;
            assert!((b.cdf(s) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn positive_moments() {
        let m = DirectionalMarginal::new(DVector::from_element(1, 1.0), Law::Normal { sd: 1.0 });
        assert!((m.log_positive_moment(2.0).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        // same through the generic path
        let shifted = DirectionalMarginal { shift: 1e-300, ..m.clone() };
        assert!((shifted.log_positive_moment(2.0).unwrap() - 0.5f64.ln()).abs() < 1e-9);
        assert!((shifted.log_positive_moment(0.5).unwrap() - m.log_positive_moment(0.5).unwrap()).abs() < 1e-9);
        assert!((m.upper_quantile(0.158_655_253_931_457).unwrap() - 1.0).abs() < 1e-9);
    }
}
