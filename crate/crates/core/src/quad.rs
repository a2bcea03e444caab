//! One-dimensional quadrature, root bracketing and line searches.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
fn legendre_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

pub(crate) fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(20))
}

/// Composite Gauss–Legendre (20 points per panel) on [a, b].
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gl20();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let half = 0.5 * h;
        let mid = lo + half;
        let s: f64 = nodes.iter().zip(weights).map(|(x, w)| w * f(mid + half * x)).sum();
        total += half * s;
    }
    total
}

/// Golden-section maximisation of a unimodal function on [a, b].
pub fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Boundary of a predicate that holds at `lo` and fails at `hi`.
pub fn bisect_boundary(
    mut holds: impl FnMut(f64) -> bool,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let floor = 1e-16 * (hi - lo);
    for _ in 0..max_iter {
        if hi - lo <= (rel_tol * lo.abs().max(hi.abs())).max(floor) {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::numeric(format!("bisection did not converge in {max_iter} iterations on [{lo}, {hi}]")))
}

/// Doubles `r` from `start` until the predicate fails; returns `(last_holding, first_failing)`.
/// `last_holding` is 0 when the predicate already fails at `start`.
pub fn expand_until_fails(
    mut holds: impl FnMut(f64) -> bool,
    start: f64,
    max_doublings: usize,
) -> Result<(f64, f64)> {
    let mut lo = 0.0;
    let mut r = start;
    for _ in 0..max_doublings {
        if !holds(r) {
            return Ok((lo, r));
        }
        lo = r;
        r *= 2.0;
    }
    Err(Error::numeric(format!("bracket expansion did not terminate (last r = {lo})")))
}

/// `ln ∫_0^upper exp(l(x)) dx` for `l` unimodal on the positive half-line.
///
/// `l` may be `-inf` outside a bounded support (which must be an interval
/// starting at 0, up to the value at 0 itself) and at `x = 0`. `scale` is a
/// hint for the width of the integrand.
pub fn log_integral_unimodal(l: impl Fn(f64) -> f64, upper: Option<f64>, scale: f64) -> Result<f64> {
    log_integral_unimodal_with_breaks(l, upper, scale, &[])
}

/// [`log_integral_unimodal`] with panel boundaries forced at `breaks`, the
/// points where `l` is not smooth.
pub fn log_integral_unimodal_with_breaks(
    l: impl Fn(f64) -> f64,
    upper: Option<f64>,
    scale: f64,
    breaks: &[f64],
) -> Result<f64> {
    const DROP: f64 = 46.0;
    // GL20 is exact to rounding on panels where exp(l) varies by less than e^SPLIT
    const SPLIT: f64 = 4.0;
    let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };

    // a point with a finite value
    let mut finite_at = None;
    for k in 0..80 {
        for x in [scale * 0.5f64.powi(k), scale * 2.0f64.powi(k)] {
            if upper.is_some_and(|u| x > u) {
                continue;
            }
            if l(x).is_finite() {
                finite_at = Some(x);
                break;
            }
        }
        if finite_at.is_some() {
            break;
        }
    }
    let Some(p) = finite_at else {
        return Ok(f64::NEG_INFINITY);
    };

    // right end: support end or the point where the integrand has died off
    let mut best = l(p);
    let right = match upper {
        Some(u) => u,
        None => {
            let mut x = p;
            let mut prev = best;
            let mut found = None;
            for _ in 0..400 {
                x *= 2.0;
                let v = l(x);
                if v == f64::NEG_INFINITY || (v < best - DROP && v < prev) {
                    found = Some(x);
                    break;
                }
                best = best.max(v);
                prev = v;
            }
            found.ok_or_else(|| Error::numeric("integrand does not decay"))?
        }
    };
    let right = if l(right) == f64::NEG_INFINITY && right > p {
        // support end between p and right
        let mut lo = p;
        let mut hi = right;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if l(mid).is_finite() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        lo
    } else {
        right
    };

    let (mut mode, mut top) = golden_max(&l, 0.0, right, 60);
    for x in [right, p] {
        let v = l(x);
        if v > top {
            top = v;
            mode = x;
        }
    }
    if !top.is_finite() {
        return Err(Error::numeric("integrand is not finite at its mode"));
    }
    let floor = top - DROP;
    let left = if l(0.0) >= floor {
        0.0
    } else {
        bisect_boundary(|x| l(x) < floor, 0.0, mode, 1e-8, 200).unwrap_or(0.0)
    };
    let right = if l(right) >= floor {
        right
    } else {
        bisect_boundary(|x| l(x) >= floor, mode, right, 1e-8, 200).unwrap_or(right)
    };

    let mut cuts = vec![left, mode, right];
    cuts.extend(breaks.iter().copied().filter(|b| *b > left && *b < right));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let (nodes, weights) = gl20();
    let mut sum = 0.0;
    let mut values: Vec<f64> = cuts.iter().map(|&x| l(x)).collect();
    for v in &mut values {
        if v.is_nan() {
            *v = f64::NEG_INFINITY;
        }
    }
    for i in 1..cuts.len() {
        let (a, b) = (cuts[i - 1], cuts[i]);
        if b <= a {
            continue;
        }
        let mut stack = vec![(a, b, values[i - 1], values[i], 0usize)];
        while let Some((a, b, la, lb, depth)) = stack.pop() {
            let steep = !(la.is_finite() && lb.is_finite()) || (la - lb).abs() > SPLIT;
            if depth < 60 && (steep || depth < 1) && b - a > 1e-14 * b.abs().max(1e-300) {
                let m = 0.5 * (a + b);
                let lm = l(m);
                let lm = if lm.is_nan() { f64::NEG_INFINITY } else { lm };
                // both halves negligible
                if la < floor - DROP && lm < floor - DROP && lb < floor - DROP && depth > 8 {
                    continue;
                }
                stack.push((a, m, la, lm, depth + 1));
                stack.push((m, b, lm, lb, depth + 1));
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = a + half;
            let s: f64 = nodes
                .iter()
                .zip(weights)
                .map(|(x, w)| {
                    let v = l(mid + half * x);
                    if v.is_finite() {
                        w * (v - top).exp()
                    } else {
                        0.0
                    }
                })
                .sum();
            sum += half * s;
        }
    }
    if sum <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(top + sum.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let v = integrate(|x| x.powi(7) + 3.0 * x * x, 0.0, 2.0, 1);
        assert!((v - (2f64.powi(8) / 8.0 + 8.0)).abs() < 1e-11);
        let (_, w) = legendre_rule(32);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn log_integral_of_gamma_kernel() {
        // ∫ r^{k} e^{-r} dr = k!
        for k in [0.0, 1.0, 4.0, 30.0, 200.0] {
            let got = log_integral_unimodal(|r: f64| k * r.ln() - r, None, 1.0).unwrap();
            let want = statrs::function::gamma::ln_gamma(k + 1.0);
            assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn log_integral_with_support_end() {
        // ∫_0^2 r^{9} dr = 2^10 / 10
        let l = |r: f64| if r <= 2.0 { 9.0 * r.ln() } else { f64::NEG_INFINITY };
        let got = log_integral_unimodal(l, None, 1.0).unwrap();
        assert!((got - (1024.0f64 / 10.0).ln()).abs() < 1e-10);
        let part = log_integral_unimodal(|r: f64| -r, Some(3.0), 1.0).unwrap();
        assert!((part - (1.0 - (-3.0f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn log_integral_tiny_and_large_scales() {
        let got = log_integral_unimodal(|r: f64| -1e6 * r, None, 1.0).unwrap();
        assert!((got + 1e6f64.ln()).abs() < 1e-10);
        let got = log_integral_unimodal(|r: f64| -r / 1e5, None, 1.0).unwrap();
        assert!((got - 1e5f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn bracket_and_bisect() {
        let (lo, hi) = expand_until_fails(|r| r * r <= 10.0, 1.0, 60).unwrap();
        assert_eq!((lo, hi), (2.0, 4.0));
        let r = bisect_boundary(|r| r * r <= 10.0, lo, hi, 1e-12, 200).unwrap();
        assert!((r - 10f64.sqrt()).abs() < 1e-10);
        assert!(expand_until_fails(|_| true, 1.0, 10).is_err());
    }

    #[test]
    fn golden_finds_peak() {
        let (x, fx) = golden_max(|x| -(x - 0.3) * (x - 0.3), -2.0, 5.0, 100);
        assert!((x - 0.3).abs() < 1e-8 && fx <= 0.0);
    }
}
