//! Log-Laplace transform Λ and its Legendre transform Λ*.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::measures::{MeasureModel, ModelKind, Point};
use crate::quad::{golden_max, gl20};
use crate::sphere::direction_set;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Grad,
    Hess,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogLaplaceEval {
    /// `+inf` outside the domain of Λ.
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

impl LogLaplaceEval {
    pub fn in_domain(&self) -> bool {
        self.value.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    DivergedToInfinity,
    BoundaryLimited,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendreResult {
    /// `+inf` when the supremum is unbounded.
    pub value: f64,
    pub maximizer: Option<Vec<f64>>,
    pub iterations: usize,
    pub gradient_residual: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CramerOptions {
    /// Bound on |∇Λ(ξ) - x| and on the Newton decrement at convergence.
    pub tol: f64,
    /// Objective value above which Λ*(x) is declared infinite.
    pub cap: f64,
    /// Bound on |ξ| times the model's scale above which Λ*(x) is declared infinite.
    pub xi_cap: f64,
    pub max_iter: usize,
}

impl Default for CramerOptions {
    fn default() -> Self {
        Self { tol: 1e-8, cap: 1e6, xi_cap: 1e12, max_iter: 500 }
    }
}

type Eval = (f64, DVector<f64>, Option<DMatrix<f64>>);

/// `ln ∫ e^{ρ s} (1-s²)^{(n-1)/2} ds / ∫ (1-s²)^{(n-1)/2} ds` and two derivatives.
pub fn ball_log_mgf(rho: f64, n: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    if rho < 1e-8 {
        let v = 1.0 / (nf + 2.0);
        return (0.5 * v * rho * rho, v * rho, v);
    }
    // θ with s = cos θ, u = 1 - s = 2 sin²(θ/2); the weight is e^{-ρu} sinⁿθ
    let u_cut = 80.0 / rho;
    let theta_max = if u_cut >= 2.0 { std::f64::consts::PI } else { 2.0 * (0.5 * u_cut).sqrt().asin() };
    let (nodes, weights) = gl20();
    const PANELS: usize = 8;
    let h = theta_max / PANELS as f64;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(PANELS * nodes.len());
    let mut top = f64::NEG_INFINITY;
    for p in 0..PANELS {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(weights) {
            let th = mid + 0.5 * h * x;
            let half = (0.5 * th).sin();
            let u = 2.0 * half * half;
            let lw = w.ln() - rho * u + nf * th.sin().ln();
            top = top.max(lw);
            pts.push((u, lw));
        }
    }
    let mut z = 0.0;
    let mut m1 = 0.0;
    for &(u, lw) in &pts {
        let w = (lw - top).exp();
        z += w;
        m1 += w * u;
    }
    let mean = m1 / z;
    let var = pts.iter().map(|&(u, lw)| (lw - top).exp() * (u - mean) * (u - mean)).sum::<f64>() / z;
    // ∫_0^π sinⁿθ dθ = √π Γ((n+1)/2) / Γ(n/2 + 1)
    let ln_i0 = 0.5 * std::f64::consts::PI.ln() + ln_gamma(0.5 * (nf + 1.0)) - ln_gamma(0.5 * nf + 1.0);
    let ln_i = top + (0.5 * h).ln() + z.ln();
    (rho + ln_i - ln_i0, 1.0 - mean, var)
}

fn eval_model(model: &MeasureModel, xi: &DVector<f64>, hess: bool) -> Option<Eval> {
    let n = model.dimension();
    match model.kind() {
        ModelKind::UniformBall { radius } => {
            let norm = xi.norm();
            let rho = radius * norm;
            let (h, d1, d2) = ball_log_mgf(rho, n);
            let r2 = radius * radius;
            if rho < 1e-8 {
                let v = r2 * d2;
                return Some((h, xi * v, hess.then(|| DMatrix::identity(n, n) * v)));
            }
            let unit = xi / norm;
            let grad = &unit * (radius * d1);
            let hm = hess.then(|| {
                let p = &unit * unit.transpose();
                let trans = radius * d1 / norm;
                &p * (r2 * d2) + (DMatrix::identity(n, n) - &p) * trans
            });
            Some((h, grad, hm))
        }
        ModelKind::AffinePushforward { base, map } => {
            let t = map.matrix();
            let inner = t.tr_mul(xi);
            let (v, g, h) = eval_model(base, &inner, hess)?;
            let grad = t * g + map.shift();
            let hm = h.map(|h| t * h * t.transpose());
            Some((v + map.shift().dot(xi), grad, hm))
        }
        _ => {
            let factors = model.factors().expect("product model");
            let mut value = 0.0;
            let mut grad = DVector::zeros(n);
            let mut diag = DVector::zeros(n);
            for (i, f) in factors.iter().enumerate() {
                let (v, d1, d2) = f.log_laplace(xi[i])?;
                value += v;
                grad[i] = d1;
                diag[i] = d2;
            }
            Some((value, grad, hess.then(|| DMatrix::from_diagonal(&diag))))
        }
    }
}

/// Λ_μ(ξ) with optional gradient (tilted mean) and Hessian (tilted covariance).
pub fn log_laplace(model: &MeasureModel, xi: &Point, order: Order) -> Result<LogLaplaceEval> {
    model.check_dim(xi)?;
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("ξ must be finite"));
    }
    match eval_model(model, xi, order >= Order::Hess) {
        None => Ok(LogLaplaceEval { value: f64::INFINITY, gradient: None, hessian: None }),
        Some((v, g, h)) => {
            if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(Error::numeric(format!("log-Laplace evaluation failed at ξ = {xi:?}")));
            }
            Ok(LogLaplaceEval {
                value: v,
                gradient: (order >= Order::Grad).then_some(g),
                hessian: h,
            })
        }
    }
}

/// Damped Newton ascent of `ξ ↦ ⟨x,ξ⟩ - Λ(ξ)`.
fn newton(
    x: &DVector<f64>,
    xi0: DVector<f64>,
    scale: f64,
    eval: impl Fn(&DVector<f64>, bool) -> Option<Eval>,
    opts: &CramerOptions,
) -> LegendreResult {
    let n = x.len();
    let objective = |xi: &DVector<f64>| eval(xi, false).map(|(l, _, _)| x.dot(xi) - l);
    let probe = |xi: &DVector<f64>| eval(xi, false).map(|(l, g, _)| (x.dot(xi) - l, (x - g).norm()));
    let mut xi = match objective(&xi0) {
        Some(f) if f.is_finite() && f >= 0.0 => xi0,
        _ => DVector::zeros(n),
    };
    let diverged = |iterations, residual| LegendreResult {
        value: f64::INFINITY,
        maximizer: None,
        iterations,
        gradient_residual: residual,
        status: Status::DivergedToInfinity,
    };
    let mut last_residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let Some((lam, grad, Some(h))) = eval(&xi, true) else {
            return LegendreResult {
                value: f64::NAN,
                maximizer: None,
                iterations: it,
                gradient_residual: f64::NAN,
                status: Status::BoundaryLimited,
            };
        };
        let f = x.dot(&xi) - lam;
        let g = x - grad;
        let residual = g.norm();
        last_residual = residual;
        if f > opts.cap || xi.norm() * scale > opts.xi_cap {
            return diverged(it, residual);
        }
        let d = match h.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => {
                let reg = h.diagonal().amax().max(1e-300) * 1e-12;
                match (h + DMatrix::identity(n, n) * reg).cholesky() {
                    Some(c) => c.solve(&g),
                    None => g.clone(),
                }
            }
        };
        let dec = g.dot(&d);
        if residual <= opts.tol && dec <= opts.tol {
            return LegendreResult {
                value: f.max(0.0),
                maximizer: Some(xi.iter().copied().collect()),
                iterations: it,
                gradient_residual: residual,
                status: Status::Converged,
            };
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-18 {
            let cand = &xi + &d * t;
            if let Some((fc, gc)) = probe(&cand) {
                // near the optimum the objective change drowns in rounding;
                // then a smaller gradient decides
                let flat = fc >= f - 1e-14 * (1.0 + f.abs()) && gc < residual;
                if fc.is_finite() && (fc >= f + 1e-4 * t * dec || flat) {
                    accepted = Some(cand);
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(c) => xi = c,
            None => {
                let status = if residual <= 100.0 * opts.tol { Status::Converged } else { Status::BoundaryLimited };
                return LegendreResult {
                    value: f.max(0.0),
                    maximizer: Some(xi.iter().copied().collect()),
                    iterations: it,
                    gradient_residual: residual,
                    status,
                };
            }
        }
    }
    if xi.norm() * scale > 1e-3 * opts.xi_cap {
        return diverged(opts.max_iter, last_residual);
    }
    let f = objective(&xi).unwrap_or(f64::NAN);
    LegendreResult {
        value: f.max(0.0),
        maximizer: Some(xi.iter().copied().collect()),
        iterations: opts.max_iter,
        gradient_residual: last_residual,
        status: Status::BoundaryLimited,
    }
}

fn check_point(model: &MeasureModel, x: &Point, opts: &CramerOptions) -> Result<()> {
    model.check_dim(x)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("x must be finite"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::input("tol must be positive"));
    }
    Ok(())
}

/// Λ*_μ(x) by damped Newton on the full n-dimensional problem.
pub fn cramer_newton(model: &MeasureModel, x: &Point, opts: &CramerOptions) -> Result<LegendreResult> {
    check_point(model, x, opts)?;
    let cov = model.covariance();
    let scale = (cov.trace() / model.dimension() as f64).sqrt();
    let xi0 = cov.cholesky().map_or_else(|| DVector::zeros(x.len()), |c| c.solve(x));
    Ok(newton(x, xi0, scale, |xi, h| eval_model(model, xi, h), opts))
}

/// Λ*_μ(x). Product models are solved coordinate by coordinate
/// (Λ* of a product is the sum of the coordinate transforms).
pub fn cramer_with(model: &MeasureModel, x: &Point, opts: &CramerOptions) -> Result<LegendreResult> {
    if let ModelKind::AffinePushforward { base, map } = model.kind() {
        // Λ*_{Tμ}(x) = Λ*_μ(T⁻¹(x - b)), maximizer T⁻ᵀ η
        check_point(model, x, opts)?;
        let mut r = cramer_with(base, &map.invert(x), opts)?;
        r.maximizer = r.maximizer.map(|m| {
            map.inverse_matrix().tr_mul(&DVector::from_vec(m)).iter().copied().collect()
        });
        return Ok(r);
    }
    if let ModelKind::UniformBall { radius } = model.kind() {
        // ξ* is parallel to x: a radial problem
        check_point(model, x, opts)?;
        let r = x.norm();
        if r > 0.0 {
            let (n, radius) = (model.dimension(), *radius);
            let var = radius * radius / (n as f64 + 2.0);
            let one = newton(
                &DVector::from_element(1, r),
                DVector::from_element(1, r / var),
                var.sqrt(),
                |xi, h| {
                    let rho = radius * xi[0];
                    let (v, d1, d2) = ball_log_mgf(rho.abs(), n);
                    let g = DVector::from_element(1, radius * d1 * rho.signum());
                    Some((v, g, h.then(|| DMatrix::from_element(1, 1, radius * radius * d2))))
                },
                opts,
            );
            let unit = x / r;
            let maximizer = one.maximizer.as_ref().map(|m| (&unit * m[0]).iter().copied().collect());
            return Ok(LegendreResult { maximizer, ..one });
        }
    }
    let Some(factors) = model.factors() else {
        return cramer_newton(model, x, opts);
    };
    check_point(model, x, opts)?;
    let mut value = 0.0;
    let mut maximizer = Vec::with_capacity(x.len());
    let mut iterations = 0;
    let mut residual2 = 0.0;
    let mut status = Status::Converged;
    let one_opts = CramerOptions { tol: opts.tol / (x.len() as f64).sqrt(), ..*opts };
    for (f, &xv) in factors.iter().zip(x.iter()) {
        let var = f.variance();
        let xv1 = DVector::from_element(1, xv);
        let r = newton(
            &xv1,
            DVector::from_element(1, xv / var),
            var.sqrt(),
            |xi, h| {
                let (v, d1, d2) = f.log_laplace(xi[0])?;
                Some((v, DVector::from_element(1, d1), h.then(|| DMatrix::from_element(1, 1, d2))))
            },
            &one_opts,
        );
        iterations += r.iterations;
        residual2 += r.gradient_residual * r.gradient_residual;
        match r.status {
            Status::DivergedToInfinity => {
                return Ok(LegendreResult {
                    value: f64::INFINITY,
                    maximizer: None,
                    iterations,
                    gradient_residual: residual2.sqrt(),
                    status: Status::DivergedToInfinity,
                });
            }
            Status::BoundaryLimited => status = Status::BoundaryLimited,
            Status::Converged => {}
        }
        value += r.value;
        maximizer.push(r.maximizer.map_or(f64::NAN, |m| m[0]));
    }
    Ok(LegendreResult { value, maximizer: Some(maximizer), iterations, gradient_residual: residual2.sqrt(), status })
}

pub fn cramer(model: &MeasureModel, x: &Point, tol: f64) -> Result<LegendreResult> {
    cramer_with(model, x, &CramerOptions { tol, ..CramerOptions::default() })
}

/// Λ*(x) with default options; `+inf` when divergent.
pub fn cramer_value(model: &MeasureModel, x: &Point) -> Result<f64> {
    Ok(cramer_with(model, x, &CramerOptions::default())?.value)
}

/// Rays used by [`biconjugate_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub directions: usize,
    pub iterations: usize,
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self { directions: 64, iterations: 100 }
    }
}

/// `|sup_x {⟨x,ξ⟩ - Λ*(x)} - Λ(ξ)|` with the supremum taken along rays:
/// the grid directions, ξ/|ξ| and ∇Λ(ξ)/|∇Λ(ξ)|.
pub fn biconjugate_residual(model: &MeasureModel, xi: &Point, grid: &RadialGrid) -> Result<f64> {
    let ll = log_laplace(model, xi, Order::Grad)?;
    if !ll.in_domain() {
        return Err(Error::input("ξ lies outside the domain of Λ"));
    }
    let n = model.dimension();
    let mut rays = direction_set(n, grid.directions);
    for v in [xi.clone(), ll.gradient.clone().expect("gradient")] {
        let norm = v.norm();
        if norm > 0.0 {
            rays.push(v / norm);
        }
    }
    let opts = CramerOptions::default();
    let mut best: f64 = 0.0;
    for theta in rays {
        let slope = theta.dot(xi);
        if slope <= 0.0 {
            continue;
        }
        let phi = |r: f64| match cramer_with(model, &(&theta * r), &opts) {
            Ok(res) if res.value.is_finite() => r * slope - res.value,
            _ => f64::NEG_INFINITY,
        };
        let mut hi = ll.gradient.as_ref().map_or(1.0, |g| g.norm()).max(1e-3);
        while phi(hi) >= phi(0.5 * hi) && hi < 1e6 {
            hi *= 2.0;
        }
        let (_, v) = golden_max(phi, 0.0, hi, grid.iterations);
        best = best.max(v);
    }
    Ok((best - ll.value).abs())
}
