//! Direction sets on the unit sphere and a multi-start sphere minimiser.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::SeedStream;

/// Fixed seed used for every direction grid, so grids are shared across runs.
const GRID_SEED: u64 = 0x5EED_D1C7;

/// `count` unit vectors in dimension `n`.
///
/// n = 1 gives `[+1, -1]`, n = 2 equally spaced angles, n >= 3 normalised
/// Gaussian vectors from a fixed stream.
pub fn direction_set(n: usize, count: usize) -> Vec<DVector<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                DVector::from_vec(vec![a.cos(), a.sin()])
            })
            .collect(),
        _ => {
            let mut rng = SeedStream::new(GRID_SEED).derive(n as u64).rng();
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                let norm = v.norm();
                if norm > 1e-8 {
                    out.push(v / norm);
                }
            }
            out
        }
    }
}

/// Orthonormal basis of the tangent space at the unit vector `u`.
pub fn tangent_basis(u: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = u.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n.saturating_sub(1));
    // start from the coordinate axes least aligned with u
    let mut axes: Vec<usize> = (0..n).collect();
    axes.sort_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()));
    for &i in &axes {
        if basis.len() + 1 == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v -= u * u.dot(&v);
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / norm);
        }
    }
    basis
}

/// Point at angle `phi` along the great circle through `u` with tangent `v`.
pub fn geodesic(u: &DVector<f64>, v: &DVector<f64>, phi: f64) -> DVector<f64> {
    let w = u * phi.cos() + v * phi.sin();
    let norm = w.norm();
    w / norm
}

/// Effort spent by [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereBudget {
    pub coarse: usize,
    pub refine_top: usize,
    /// Geodesic arcs searched per refined start.
    pub refine_steps: usize,
}

impl Default for SphereBudget {
    fn default() -> Self {
        Self { coarse: 256, refine_top: 8, refine_steps: 40 }
    }
}

#[derive(Debug, Clone)]
pub struct SphereMin {
    pub value: f64,
    pub argmin: DVector<f64>,
    pub evaluations: usize,
}

/// Initial arc half-width for a grid of `count` points on S^{n-1}.
pub fn grid_spacing(n: usize, count: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let w = std::f64::consts::PI * (2.0 / count.max(2) as f64).powf(1.0 / (n as f64 - 1.0));
    w.min(std::f64::consts::FRAC_PI_2)
}

/// Local refinement of `f` around `start` by golden-section searches along
/// geodesic arcs, sweeping the tangent basis. Returns the best probe.
pub fn refine(
    f: &impl Fn(&DVector<f64>) -> f64,
    start: &DVector<f64>,
    start_value: f64,
    width: f64,
    arcs: usize,
) -> SphereMin {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut best = SphereMin { value: start_value, argmin: start.clone(), evaluations: 0 };
    if start.len() < 2 {
        return best;
    }
    let mut w = width;
    let mut arc = 0;
    while arc < arcs && w > 1e-6 {
        let basis = tangent_basis(&best.argmin);
        for v in &basis {
            if arc >= arcs {
                break;
            }
            arc += 1;
            let u0 = best.argmin.clone();
            let eval = |phi: f64| f(&geodesic(&u0, v, phi));
            let (mut a, mut b) = (-w, w);
            let mut c = b - INV_PHI * (b - a);
            let mut d = a + INV_PHI * (b - a);
            let (mut fc, mut fd) = (eval(c), eval(d));
            best.evaluations += 2;
            for _ in 0..12 {
                if fc <= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - INV_PHI * (b - a);
                    fc = eval(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + INV_PHI * (b - a);
                    fd = eval(d);
                }
                best.evaluations += 1;
            }
            let (phi, val) = if fc <= fd { (c, fc) } else { (d, fd) };
            if val < best.value {
                best.value = val;
                best.argmin = geodesic(&u0, v, phi);
            }
        }
        w *= 0.1;
    }
    best
}

/// Minimum of `f` over the unit sphere: coarse grid plus `extra` starts,
/// then refinement of the best `refine_top` probes. The value is the
/// smallest probe, hence an upper bound on the true infimum.
pub fn minimize(
    n: usize,
    f: impl Fn(&DVector<f64>) -> f64,
    extra: &[DVector<f64>],
    budget: SphereBudget,
) -> SphereMin {
    let mut probes: Vec<(f64, DVector<f64>)> = Vec::new();
    let grid = if n == 1 { direction_set(1, 2) } else { direction_set(n, budget.coarse) };
    for u in grid.into_iter().chain(extra.iter().cloned()) {
        let v = f(&u);
        probes.push((v, u));
    }
    let mut evaluations = probes.len();
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = SphereMin { value: probes[0].0, argmin: probes[0].1.clone(), evaluations: 0 };
    if n >= 2 {
        let width = grid_spacing(n, budget.coarse);
        for (v, u) in probes.iter().take(budget.refine_top) {
            let r = refine(&f, u, *v, width, budget.refine_steps);
            evaluations += r.evaluations;
            if r.value < best.value {
                best = r;
            }
        }
    }
    best.evaluations = evaluations;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_are_unit_and_deterministic() {
        for n in 1..=6 {
            let a = direction_set(n, 64);
            let b = direction_set(n, 64);
            assert_eq!(a, b);
            assert!(a.iter().all(|u| (u.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let u = DVector::from_vec(vec![0.6, 0.0, 0.8, 0.0]);
        let b = tangent_basis(&u);
        assert_eq!(b.len(), 3);
        for (i, x) in b.iter().enumerate() {
            assert!(x.dot(&u).abs() < 1e-12);
            for y in &b[i + 1..] {
                assert!(x.dot(y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn minimiser_finds_linear_minimum() {
        for n in 2..=5 {
            let target = DVector::from_fn(n, |i, _| (i as f64 + 1.0).sin());
            let target = &target / target.norm();
            let r = minimize(n, |u| -u.dot(&target), &[], SphereBudget::default());
            assert!((r.value + 1.0).abs() < 1e-9, "n={n}: {}", r.value);
        }
    }
}
