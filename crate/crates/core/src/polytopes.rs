//! Random polytopes `K_N = conv{X_1, …, X_N}`: membership, `E μ(K_N)`,
//! threshold windows and the covering bound.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::bodies::{BodyOptions, BodySpec, Family, Body};
use crate::error::{Error, Result};
use crate::measures::{MeasureModel, Point};
use crate::moments::{lp_moment, Estimator};
use crate::rng::SeedStream;
use crate::sphere::direction_set;
use crate::stats::{isotonic_nondecreasing, mean_stderr};

/// Pivot budget of the simplex solver.
pub const MAX_PIVOTS: usize = 100_000;

/// Phase-1 objective accepted as feasible, relative to `1 + |x|_∞`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Resampling attempts for vertex sets that fail to span R^n.
const MAX_RESAMPLES: usize = 100;

/// Vertices of a random polytope.
#[derive(Debug, Clone)]
pub struct HullInstance {
    vertices: Vec<Point>,
    dimension: usize,
    /// Counter-clockwise hull, `n = 2` only.
    polygon: Option<Vec<[f64; 2]>>,
}

impl HullInstance {
    /// Checks `N > n` and that the vertices affinely span R^n.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let n = vertices.first().map_or(0, |v| v.len());
        if n == 0 {
            return Err(Error::input("a hull needs vertices of positive dimension"));
        }
        if vertices.iter().any(|v| v.len() != n || v.iter().any(|c| !c.is_finite())) {
            return Err(Error::input("vertices must be finite points of one dimension"));
        }
        if vertices.len() <= n {
            return Err(Error::input(format!("need more than {n} vertices, got {}", vertices.len())));
        }
        if !spans(&vertices) {
            return Err(Error::numeric("vertices do not affinely span the space"));
        }
        let polygon = (n == 2).then(|| monotone_chain(&vertices));
        Ok(Self { vertices, dimension: n, polygon })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Membership of `x`. Dimensions one and two use the exact interval and
    /// polygon tests; higher dimensions solve the feasibility problem.
    pub fn contains(&self, x: &Point) -> Result<bool> {
        if x.len() != self.dimension {
            return Err(Error::input("point dimension does not match the hull"));
        }
        match (self.dimension, &self.polygon) {
            (1, _) => {
                let lo = self.vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
                let hi = self.vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
                Ok(lo <= x[0] && x[0] <= hi)
            }
            (2, Some(poly)) => Ok(in_polygon(poly, [x[0], x[1]])),
            _ => hull_contains(self, x),
        }
    }
}

fn spans(vertices: &[Point]) -> bool {
    let n = vertices[0].len();
    let m = vertices.len();
    let base = &vertices[0];
    let mut d = nalgebra::DMatrix::zeros(n, m - 1);
    for (j, v) in vertices[1..].iter().enumerate() {
        d.set_column(j, &(v - base));
    }
    let sv = d.singular_values();
    let top = sv.amax();
    top > 0.0 && sv.iter().filter(|s| **s > 1e-10 * top).count() == n
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn monotone_chain(vertices: &[Point]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = vertices.iter().map(|v| [v[0], v[1]]).collect();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

fn in_polygon(poly: &[[f64; 2]], x: [f64; 2]) -> bool {
    let k = poly.len();
    (0..k).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % k]);
        let scale = (b[0] - a[0]).abs() + (b[1] - a[1]).abs() + (x[0] - a[0]).abs() + (x[1] - a[1]).abs();
        cross(a, b, x) >= -1e-12 * scale * scale
    })
}

/// Whether `x ∈ conv{vertices}`: phase 1 of the dense simplex method on
/// `Σ λ_i X_i = x, Σ λ_i = 1, λ ≥ 0`, with Bland's rule.
pub fn hull_contains(hull: &HullInstance, x: &Point) -> Result<bool> {
    let n = hull.dimension;
    if x.len() != n || x.iter().any(|c| !c.is_finite()) {
        return Err(Error::input("point must be finite and match the hull dimension"));
    }
    // outside the bounding box
    for k in 0..n {
        let lo = hull.vertices.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min);
        let hi = hull.vertices.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max);
        if x[k] < lo || x[k] > hi {
            return Ok(false);
        }
    }
    let m = n + 1;
    let cols = hull.vertices.len();
    let width = cols + m + 1;
    let rhs = width - 1;
    // rows 0..m constraints, row m the phase-1 reduced costs
    let mut t = vec![0.0; (m + 1) * width];
    for (j, v) in hull.vertices.iter().enumerate() {
        for i in 0..n {
            t[i * width + j] = v[i];
        }
        t[n * width + j] = 1.0;
    }
    for i in 0..n {
        t[i * width + rhs] = x[i];
    }
    t[n * width + rhs] = 1.0;
    for i in 0..m {
        if t[i * width + rhs] < 0.0 {
            for j in 0..width {
                t[i * width + j] = -t[i * width + j];
            }
        }
        t[i * width + cols + i] = 1.0;
    }
    for j in 0..width {
        if j >= cols && j < cols + m {
            continue;
        }
        t[m * width + j] = -(0..m).map(|i| t[i * width + j]).sum::<f64>();
    }
    let mut basis: Vec<usize> = (cols..cols + m).collect();
    let eps = 1e-12;
    for _ in 0..MAX_PIVOTS {
        // Bland: lowest-index improving column
        let Some(enter) = (0..cols + m).find(|&j| t[m * width + j] < -eps) else {
            let infeasibility = -t[m * width + rhs];
            let scale = 1.0 + x.amax();
            return Ok(infeasibility <= FEASIBILITY_TOL * scale);
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[i * width + enter];
            if a > eps {
                let ratio = t[i * width + rhs] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = leave else {
            // phase 1 is bounded below by 0; an unbounded ray means round-off
            return Err(Error::numeric("phase-1 problem reported unbounded"));
        };
        let p = t[row * width + enter];
        for j in 0..width {
            t[row * width + j] /= p;
        }
        for i in 0..=m {
            if i == row {
                continue;
            }
            let f = t[i * width + enter];
            if f != 0.0 {
                for j in 0..width {
                    t[i * width + j] -= f * t[row * width + j];
                }
            }
        }
        basis[row] = enter;
    }
    Err(Error::numeric(format!("simplex exceeded {MAX_PIVOTS} pivots")))
}

/// Draws `count` vertices from `stream`, redrawing from child streams while
/// they fail to span. Returns the hull and the number of redraws.
fn random_hull(model: &MeasureModel, stream: &SeedStream, count: usize) -> Result<(HullInstance, usize)> {
    let mut last = None;
    for attempt in 0..MAX_RESAMPLES {
        let s = if attempt == 0 { *stream } else { stream.derive(attempt as u64) };
        match HullInstance::new(model.sample(&s, count)) {
            Ok(h) => return Ok((h, attempt)),
            Err(e @ Error::Numeric(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::numeric("could not draw a spanning vertex set")))
}

/// `E_{μ^N} μ(K_N)` from `reps` polytopes, each tested on `test_points` fresh draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureOfHull {
    pub vertices: usize,
    pub estimate: f64,
    /// Spread of the per-polytope frequencies, which carries both stages of noise.
    pub stderr: f64,
    pub reps: usize,
    pub test_points: usize,
    pub resampled: usize,
}

/// Rep `r` uses vertex stream `r` and test stream `r` of `seed` regardless of
/// `N`, and vertex draws are prefix-stable, so estimates for different `N`
/// share their polytopes and test points.
pub fn expected_measure(
    model: &MeasureModel,
    vertices: usize,
    reps: usize,
    test_points: usize,
    seed: u64,
) -> Result<MeasureOfHull> {
    if vertices <= model.dimension() {
        return Err(Error::input("need more vertices than the dimension"));
    }
    if reps == 0 || test_points == 0 {
        return Err(Error::input("reps and test_points must be positive"));
    }
    let root = SeedStream::new(seed);
    let vs = root.derive_str("vertices");
    let ts = root.derive_str("test_points");
    let per_rep = (0..reps)
        .into_par_iter()
        .map(|r| {
            let (hull, redraws) = random_hull(model, &vs.derive(r as u64), vertices)?;
            let pts = model.sample(&ts.derive(r as u64), test_points);
            let mut inside = 0usize;
            for x in &pts {
                inside += hull.contains(x)? as usize;
            }
            Ok((inside as f64 / test_points as f64, redraws))
        })
        .collect::<Result<Vec<(f64, usize)>>>()?;
    let freq: Vec<f64> = per_rep.iter().map(|p| p.0).collect();
    let (estimate, stderr) = mean_stderr(&freq);
    Ok(MeasureOfHull {
        vertices,
        estimate,
        stderr,
        reps,
        test_points,
        resampled: per_rep.iter().map(|p| p.1).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdOptions {
    pub reps: usize,
    pub test_points: usize,
    /// Draws for `τ = E Λ*`.
    pub tau_samples: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self { reps: 64, test_points: 2000, tau_samples: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub ln_n: f64,
    pub vertices: usize,
    pub estimate: f64,
    pub stderr: f64,
    /// Isotonic fit of the estimates.
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub delta: f64,
    pub grid: Vec<ThresholdRow>,
    /// `None` when the grid does not reach below `δ`.
    pub rho1: Option<f64>,
    /// `None` when the grid does not reach above `1 - δ`.
    pub rho2: Option<f64>,
    pub tau: f64,
    pub tau_stderr: f64,
    pub window: Option<f64>,
    /// `ρ₁ ≤ τ ≤ ρ₂`, with `τ` allowed its 3σ band.
    pub bracketed: bool,
    /// `ρ₂ / (n ln n)`, for `n ≥ 2`.
    pub rho2_per_n_ln_n: Option<f64>,
}

/// Scans `E μ(K_N)` over `ln N` and locates the window where it climbs from
/// `δ` to `1 - δ`. The estimates are made monotone by isotonic regression
/// before thresholding.
pub fn threshold_scan(
    model: &MeasureModel,
    delta: f64,
    ln_n_grid: &[f64],
    seed: u64,
    opts: ThresholdOptions,
) -> Result<ThresholdReport> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::input("delta must lie in (0, 1/2)"));
    }
    if ln_n_grid.is_empty() || ln_n_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::input("grid must be increasing"));
    }
    let mut grid = Vec::with_capacity(ln_n_grid.len());
    for &l in ln_n_grid {
        let vertices = l.exp().round() as usize;
        let e = expected_measure(model, vertices, opts.reps, opts.test_points, seed)?;
        grid.push(ThresholdRow { ln_n: l, vertices, estimate: e.estimate, stderr: e.stderr, fitted: f64::NAN });
    }
    let est: Vec<f64> = grid.iter().map(|r| r.estimate).collect();
    let fit = isotonic_nondecreasing(&est, &vec![1.0; est.len()]);
    for (r, f) in grid.iter_mut().zip(&fit) {
        r.fitted = *f;
    }
    let below = fit.iter().take_while(|f| **f <= delta).count();
    let rho1 = (below > 0).then(|| grid[below - 1].ln_n);
    let above = fit.iter().rev().take_while(|f| **f >= 1.0 - delta).count();
    let rho2 = (above > 0).then(|| grid[grid.len() - above].ln_n);
    let tau_report = lp_moment(model, 1.0, seed, opts.tau_samples, Estimator::DirectMc)?;
    let (tau, tau_stderr) = (tau_report.estimate, tau_report.stderr);
    let n = model.dimension() as f64;
    let report = ThresholdReport {
        delta,
        rho1,
        rho2,
        tau,
        tau_stderr,
        window: rho1.zip(rho2).map(|(a, b)| b - a),
        bracketed: match (rho1, rho2) {
            (Some(a), Some(b)) => a <= tau + 3.0 * tau_stderr && tau - 3.0 * tau_stderr <= b,
            _ => false,
        },
        rho2_per_n_ln_n: rho2.filter(|_| n >= 2.0).map(|b| b / (n * n.ln())),
        grid,
    };
    if rho1.is_none() || rho2.is_none() {
        let partial = serde_json::to_string(&report).unwrap_or_default();
        return Err(Error::Range(format!("grid does not bracket the threshold window; partial report: {partial}")));
    }
    Ok(report)
}

/// Frequency of `K_N ⊉ A` against `2 C(N,n) (1 - e^{-s})^{N-n}` for `A = T_s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringReport {
    pub body: BodySpec,
    pub vertices: usize,
    pub reps: usize,
    /// Boundary points of `A` tested for containment.
    pub test_points: usize,
    pub failure: f64,
    pub failure_stderr: f64,
    pub bound: f64,
    pub holds: bool,
    pub semantics: String,
}

/// `2 C(N,n) (1 - e^{-s})^{N-n}`, capped at 1.
pub fn covering_bound(n: usize, vertices: usize, s: f64) -> f64 {
    if vertices <= n {
        return 1.0;
    }
    let (nf, nv) = (n as f64, vertices as f64);
    let ln_binom = ln_gamma(nv + 1.0) - ln_gamma(nf + 1.0) - ln_gamma(nv - nf + 1.0);
    let ln_b = std::f64::consts::LN_2 + ln_binom + (nv - nf) * (-(-s).exp()).ln_1p();
    ln_b.exp().min(1.0)
}

pub fn covering_bound_check(
    model: &MeasureModel,
    spec: BodySpec,
    vertices: usize,
    reps: usize,
    seed: u64,
) -> Result<CoveringReport> {
    if spec.family != Family::T {
        return Err(Error::input("the covering bound is stated for depth level sets (family T)"));
    }
    if reps == 0 {
        return Err(Error::input("reps must be positive"));
    }
    let n = model.dimension();
    let body = Body::new(model, spec, BodyOptions::default())?;
    let dirs = direction_set(n, 128);
    let boundary = dirs.iter().map(|u| Ok(u * body.radial(u)?)).collect::<Result<Vec<Point>>>()?;
    let bound = if vertices > n { covering_bound(n, vertices, spec.t) } else { 1.0 };
    let vs = SeedStream::new(seed).derive_str("covering");
    let failures = (0..reps)
        .into_par_iter()
        .map(|r| {
            if vertices <= n {
                return Ok(true);
            }
            let (hull, _) = random_hull(model, &vs.derive(r as u64), vertices)?;
            for x in &boundary {
                if !hull.contains(x)? {
                    return Ok(true);
                }
            }
            Ok(false)
        })
        .collect::<Result<Vec<bool>>>()?;
    let k = failures.iter().filter(|f| **f).count();
    let (failure, failure_stderr) = crate::stats::proportion(k, reps);
    Ok(CoveringReport {
        body: spec,
        vertices,
        reps,
        test_points: boundary.len(),
        failure,
        failure_stderr,
        bound,
        holds: failure <= bound + 3.0 * failure_stderr,
        semantics: "containment of 128 radial boundary points of the body; a necessary condition for containing the body".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn p(v: &[f64]) -> Point {
        DVector::from_column_slice(v)
    }

    fn triangle() -> HullInstance {
        HullInstance::new(vec![p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 1.0])]).unwrap()
    }

    #[test]
    fn triangle_membership() {
        let h = triangle();
        for (x, want) in [([0.9, 0.9], false), ([0.2, 0.3], true), ([0.5, 0.5], true), ([-0.01, 0.5], false)] {
            assert_eq!(hull_contains(&h, &p(&x)).unwrap(), want, "{x:?}");
            assert_eq!(h.contains(&p(&x)).unwrap(), want, "{x:?}");
        }
    }

    #[test]
    fn vertices_and_centroid_are_inside() {
        let m = MeasureModel::gaussian(4).unwrap();
        let h = HullInstance::new(m.sample_seeded(3, 30).unwrap()).unwrap();
        let mean = h.vertices().iter().fold(DVector::zeros(4), |a, v| a + v) / 30.0;
        assert!(hull_contains(&h, &mean).unwrap());
        assert!(hull_contains(&h, &h.vertices()[0]).unwrap());
        assert!(!hull_contains(&h, &(&mean + DVector::from_element(4, 100.0))).unwrap());
    }

    #[test]
    fn degenerate_vertices_are_rejected() {
        let v = vec![p(&[0.0, 0.0]), p(&[1.0, 1.0]), p(&[2.0, 2.0])];
        assert!(matches!(HullInstance::new(v), Err(Error::Numeric(_))));
        assert!(HullInstance::new(vec![p(&[0.0, 0.0]), p(&[1.0, 0.0])]).is_err());
    }

    #[test]
    fn interval_range_law() {
        // E μ(K_N) = (N-1)/(N+1) for the uniform law on an interval
        let m = MeasureModel::cube(1, 1.0).unwrap();
        for n in [3usize, 10] {
            let e = expected_measure(&m, n, 400, 500, 1).unwrap();
            let want = (n as f64 - 1.0) / (n as f64 + 1.0);
            assert!((e.estimate - want).abs() <= 3.0 * e.stderr, "{e:?} vs {want}");
        }
    }

    #[test]
    fn coupled_estimates_are_monotone() {
        let m = MeasureModel::exponential(2).unwrap();
        let mut last = 0.0;
        for n in [5, 10, 40, 100] {
            let e = expected_measure(&m, n, 8, 300, 2).unwrap();
            assert!(e.estimate >= last, "{n}: {} < {last}", e.estimate);
            last = e.estimate;
        }
    }

    #[test]
    fn small_simplex_captures_little() {
        let m = MeasureModel::gaussian(2).unwrap();
        assert!(expected_measure(&m, 3, 64, 500, 3).unwrap().estimate < 0.5);
    }

    #[test]
    fn covering_bound_values() {
        assert_eq!(covering_bound(2, 3, 1.5), 1.0);
        let b = covering_bound(2, 200, 1.5);
        let want = 2.0 * 19900.0 * (1.0 - (-1.5f64).exp()).powi(198);
        assert!((b - want).abs() < 1e-12 * want);
    }

    #[test]
    fn covering_check_on_gaussian() {
        let m = MeasureModel::gaussian(2).unwrap();
        let r = covering_bound_check(&m, BodySpec::new(Family::T, 1.5), 50, 200, 4).unwrap();
        assert!(r.holds, "{r:?}");
        let r = covering_bound_check(&m, BodySpec::new(Family::T, 1.5), 3, 10, 4).unwrap();
        assert!(r.bound >= 1.0 && r.holds);
        assert!(covering_bound_check(&m, BodySpec::new(Family::B, 1.5), 50, 10, 4).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn polygon_agrees_with_simplex(seed in 0u64..1000, count in 3usize..40, x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let m = MeasureModel::gaussian(2).unwrap();
            let h = HullInstance::new(m.sample_seeded(seed, count).unwrap()).unwrap();
            let q = p(&[x, y]);
            prop_assert_eq!(h.contains(&q).unwrap(), hull_contains(&h, &q).unwrap());
        }
    }
}
