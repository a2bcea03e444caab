//! Acceptance suite. Runs as a plain binary (no libtest harness) and prints
//! one line per criterion; exits non-zero if any criterion fails.
//!
//! `cargo test -p cramer-core --test acceptance -- 5 9` runs criteria 5 and 9 only.

use std::time::{Duration, Instant};

use cramer_core::bodies::{body_measure, dilation_measure_check, radial, BodyOptions, BodySpec, Family};
use cramer_core::claims::{claim_check, Claim};
use cramer_core::cramer::{biconjugate_residual, cramer_with, CramerOptions, RadialGrid, Status};
use cramer_core::depth::{depth, depth_cramer_bounds_check, negative_moment, DepthMethod};
use cramer_core::floating::{disk_asa_limit_check, general_bound_check, tail_curve};
use cramer_core::moments::{exp_moment, growth_fit, lambda_star_sample, lp_moment, Estimator};
use cramer_core::polytopes::{covering_bound_check, expected_measure, threshold_scan, ThresholdOptions};
use cramer_core::sphere::{direction_set, SphereBudget};
use cramer_core::{Factor, MeasureModel, Point, SeedStream, Zoo};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240101;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within_time(o: Outcome, elapsed: Duration, limit: Option<Duration>) -> Outcome {
    match limit {
        Some(l) if elapsed > l => outcome(false, format!("{}; over the {}s budget", o.detail, l.as_secs())),
        _ => o,
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, count: usize, half_width: f64) -> Vec<Point> {
    (0..count).map(|_| DVector::from_fn(n, |_, _| rng.random_range(-half_width..half_width))).collect()
}

fn zoo_models(ns: &[usize]) -> Vec<(String, MeasureModel)> {
    let mut out = Vec::new();
    for &n in ns {
        for z in Zoo::ALL {
            out.push((format!("{z}{n}"), z.model(n).expect("zoo model")));
        }
    }
    out
}

fn gaussian_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut worst_radius: f64 = 0.0;
    for n in 1..=8 {
        let m = MeasureModel::gaussian(n).unwrap();
        for x in random_points(&mut rng, n, 1000, 3.0) {
            let v = cramer_with(&m, &x, &CramerOptions::default()).unwrap().value;
            worst = worst.max((v - x.norm_squared() / 2.0).abs());
        }
        for t in [0.5, 1.0, 2.0, 8.0] {
            for u in direction_set(n, 16) {
                for family in [Family::B, Family::R] {
                    let r = radial(&m, BodySpec::new(family, t), &u).unwrap();
                    worst_radius = worst_radius.max((r - (2.0 * t).sqrt()).abs());
                }
            }
        }
    }
    outcome(
        worst <= 1e-8 && worst_radius <= 1e-7,
        format!("max |Λ* - |x|²/2| = {worst:.2e}, max radial error = {worst_radius:.2e}"),
    )
}

fn one_dimensional_oracles() -> Outcome {
    let m = MeasureModel::exponential(1).unwrap();
    let count = 2000;
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let x = -0.99 + 20.99 * (i as f64 + 0.5) / count as f64;
        let v = cramer_with(&m, &DVector::from_element(1, x), &CramerOptions::default()).unwrap().value;
        worst = worst.max((v - (x - x.ln_1p())).abs());
    }
    let mut diverged = true;
    for n in [1, 2, 3] {
        let cube = MeasureModel::cube(n, 1.0).unwrap();
        for sign in [-0.5, 0.5] {
            let mut x = DVector::zeros(n);
            x[0] = sign;
            let r = cramer_with(&cube, &x, &CramerOptions::default()).unwrap();
            diverged &= r.status == Status::DivergedToInfinity && r.value == f64::INFINITY;
        }
    }
    outcome(
        worst <= 1e-8 && diverged,
        format!("max |Λ* - (x - ln(1+x))| = {worst:.2e}, cube boundary diverged: {diverged}"),
    )
}

fn duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let grid = RadialGrid::default();
    let g = MeasureModel::gaussian(2).unwrap();
    let e = MeasureModel::exponential(1).unwrap();
    let mut worst: f64 = 0.0;
    for xi in random_points(&mut rng, 2, 50, 2.0) {
        worst = worst.max(biconjugate_residual(&g, &xi, &grid).unwrap());
    }
    for _ in 0..50 {
        let xi = DVector::from_element(1, rng.random_range(-3.0..0.9));
        worst = worst.max(biconjugate_residual(&e, &xi, &grid).unwrap());
    }
    outcome(worst <= 1e-4, format!("max biconjugate residual = {worst:.2e}"))
}

fn density_level_sets() -> Outcome {
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    for (name, m) in zoo_models(&[2, 3, 4]) {
        let (_, iso) = m.isotropize().unwrap();
        let n = m.dimension() as f64;
        for t in [5.0 * (n - 1.0), 8.0 * n, 12.0 * n] {
            let est = body_measure(&iso, BodySpec::new(Family::R, t), SEED, 100_000, BodyOptions::default()).unwrap();
            let slack = est.estimate - (1.0 - (-t / 4.0).exp()) + 3.0 * est.stderr;
            worst = worst.min(slack);
            if slack < 0.0 {
                failures.push(format!("{name} t={t}"));
            }
        }
    }
    outcome(failures.is_empty(), format!("min slack = {worst:.2e}; failing: {failures:?}"))
}

fn inclusion_suite() -> Outcome {
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    let mut checks = 0;
    for (name, m) in zoo_models(&[2, 3]) {
        let dirs = direction_set(m.dimension(), 128);
        for claim in Claim::ALL {
            checks += 1;
            match claim_check(&m, claim, &dirs, 1e-6) {
                Ok(r) => {
                    worst = worst.min(r.worst_margin);
                    if !r.passed() {
                        failures.push(format!("{name} {claim}: {} violations", r.violations));
                    }
                }
                Err(e) => failures.push(format!("{name} {claim}: {e}")),
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{checks} claim checks, worst margin = {worst:.2e}; failing: {failures:?}"),
    )
}

fn dilation() -> Outcome {
    let mut failures = Vec::new();
    let mut checks = 0;
    for (name, m) in zoo_models(&[2, 3]) {
        let n = m.dimension() as f64;
        for family in [Family::B, Family::R] {
            for delta in [0.05, 0.1, 0.3] {
                checks += 1;
                let r = dilation_measure_check(&m, BodySpec::new(family, n), delta, SEED, 20_000, BodyOptions::default())
                    .unwrap();
                if !r.holds {
                    failures.push(format!("{name} {family} δ={delta}: {:.3e} ± {:.1e}", r.difference, r.sigma));
                }
            }
        }
    }
    outcome(failures.is_empty(), format!("{checks} checks; failing: {failures:?}"))
}

fn moment_growth() -> Outcome {
    let ns: Vec<usize> = (2..=8).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [1.0, 2.0] {
        let r = growth_fit(Zoo::Ball, &ns, p, SEED, 100_000).unwrap();
        let (lo, hi) = r.per_n_ln_n_band.unwrap();
        ok &= lo >= 0.2 && hi <= 3.0;
        parts.push(format!("ball p={p} band [{lo:.3}, {hi:.3}]"));
    }
    let cube = growth_fit(Zoo::Cube, &ns, 1.0, SEED, 100_000).unwrap();
    ok &= cube.per_n_spread <= 0.1;
    parts.push(format!("cube spread {:.4}", cube.per_n_spread));
    let g = growth_fit(Zoo::Gaussian, &ns, 1.0, SEED, 100_000).unwrap();
    let dev = g.rows.iter().map(|r| (r.norm / (r.n as f64 / 2.0) - 1.0).abs()).fold(0.0, f64::max);
    ok &= dev <= 0.02;
    parts.push(format!("gaussian max rel dev {dev:.4}"));
    outcome(ok, parts.join(", "))
}

fn exponential_moments() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for (name, m) in zoo_models(&[2, 3, 4, 5, 6]) {
        let nf = m.dimension() as f64;
        let ceiling = 2.0 * (nf * nf.ln() / 16.0).exp();
        let s = lambda_star_sample(&m, &SeedStream::new(SEED).derive_str("exp_moment"), 100_000).unwrap();
        let r = s.exp_moment(1.0 / (16.0 * nf));
        worst_ratio = worst_ratio.max(r.estimate / ceiling);
        if r.estimate > ceiling || r.divergence_flag {
            failures.push(format!("{name}: {:.4} vs {ceiling:.4}, flag {}", r.estimate, r.divergence_flag));
        }
        if s.exp_moment(1.0 / 16.0).divergence_flag {
            failures.push(format!("{name}: flagged at c/n = 1/16"));
        }
    }
    let heavy = exp_moment(&MeasureModel::gaussian(2).unwrap(), 2.0, SEED, 100_000).unwrap();
    if !heavy.divergence_flag {
        failures.push(format!("gaussian2 at c/n = 2 not flagged (exponent {:?})", heavy.tail_exponent));
    }
    outcome(
        failures.is_empty(),
        format!("max estimate/ceiling = {worst_ratio:.3}; failing: {failures:?}"),
    )
}

/// `P(Z > r)` for a standard normal, by Simpson's rule on `[r, r + 40]`.
fn normal_tail(r: f64) -> f64 {
    let panels = 20_000;
    let h = 40.0 / panels as f64;
    let f = |s: f64| (-0.5 * s * s).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let inner: f64 = (1..panels).map(|i| f(r + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(r) + f(r + 40.0) + inner) * h / 3.0
}

fn depth_checks() -> Outcome {
    let budget = SphereBudget::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    let (mut closed, mut sphere): (f64, f64) = (0.0, 0.0);
    let mut methods_ok = true;
    for n in 2..=5 {
        let g = MeasureModel::gaussian(n).unwrap();
        let product = MeasureModel::product(vec![Factor::Gaussian { scale: 1.0 }; n]).unwrap();
        for x in random_points(&mut rng, n, 200, 2.0) {
            let want = normal_tail(x.norm());
            let a = depth(&g, &x, budget).unwrap();
            closed = closed.max((a.value - want).abs());
            let b = depth(&product, &x, budget).unwrap();
            sphere = sphere.max((b.value - want).abs());
            methods_ok &= a.method == DepthMethod::ClosedForm && b.method == DepthMethod::SphereOptimization;
        }
    }
    let mut failures = Vec::new();
    for (name, m) in zoo_models(&[2, 3]) {
        for x in m.sample_seeded(SEED, 1000).unwrap() {
            let r = depth_cramer_bounds_check(&m, &x, 0.5, budget, 1e-6).unwrap();
            if !r.holds() {
                failures.push(format!("{name} at {:?}: φ={:.3e} Λ*={:.3e}", x.as_slice(), r.depth, r.lambda_star));
            }
        }
    }
    outcome(
        closed <= 1e-6 && sphere <= 2e-3 && methods_ok && failures.is_empty(),
        format!(
            "closed-form err {closed:.2e}, sphere err {sphere:.2e}; bound failures {}: {:?}",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn negative_moments() -> Outcome {
    let budget = SphereBudget::default();
    let g1 = MeasureModel::gaussian(1).unwrap();
    let light = negative_moment(&g1, 0.5, SEED, 100_000, budget).unwrap();
    let heavy = negative_moment(&g1, 1.5, SEED, 100_000, budget).unwrap();
    let mut failures = Vec::new();
    if light.divergence_flag {
        failures.push("gaussian1 p=0.5 flagged".to_string());
    }
    if !heavy.divergence_flag {
        failures.push("gaussian1 p=1.5 not flagged".to_string());
    }
    for (name, m) in zoo_models(&[2, 3]) {
        let p = 1.0 / (32.0 * m.dimension() as f64);
        let r = negative_moment(&m, p, SEED, 10_000, budget).unwrap();
        if r.divergence_flag {
            failures.push(format!("{name} p={p:.4} flagged"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "J(0.5) = {:.4} (exponent {:.2?}), J(1.5) exponent {:.2?}; failing: {failures:?}",
            light.estimate, light.tail_exponent, heavy.tail_exponent
        ),
    )
}

fn threshold() -> Outcome {
    let grid: Vec<f64> = (1..=9).map(f64::from).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, m) in [("gaussian2", MeasureModel::gaussian(2).unwrap()), ("cube2", MeasureModel::cube(2, 1.0).unwrap())] {
        match threshold_scan(&m, 0.25, &grid, SEED, ThresholdOptions::default()) {
            Ok(r) => {
                ok &= r.bracketed;
                parts.push(format!("{name}: ρ₁={:?} τ={:.3} ρ₂={:?}", r.rho1, r.tau, r.rho2));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    let interval = MeasureModel::cube(1, 1.0).unwrap();
    for vertices in [3usize, 10, 30] {
        let e = expected_measure(&interval, vertices, 2000, 200, SEED).unwrap();
        let want = (vertices as f64 - 1.0) / (vertices as f64 + 1.0);
        ok &= (e.estimate - want).abs() <= 3.0 * e.stderr;
        parts.push(format!("N={vertices}: {:.4} vs {want:.4} ± {:.1e}", e.estimate, e.stderr));
    }
    outcome(ok, parts.join("; "))
}

fn covering() -> Outcome {
    let m = MeasureModel::gaussian(2).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for vertices in [50, 200] {
        let r = covering_bound_check(&m, BodySpec::new(Family::T, 1.5), vertices, 400, SEED).unwrap();
        ok &= r.holds;
        parts.push(format!("N={vertices}: failure {:.4} ± {:.1e} vs bound {:.4}", r.failure, r.failure_stderr, r.bound));
    }
    outcome(ok, parts.join("; "))
}

fn floating_tails() -> Outcome {
    let grid: Vec<f64> = (1..=14).map(f64::from).collect();
    let disk = disk_asa_limit_check(&grid, SEED, 20_000, 0.1).unwrap();
    let mut failures = Vec::new();
    if !disk.passed {
        failures.push(format!("disk limit {:.4} vs {:.4}", disk.limit, disk.target));
    }
    if !disk.c4_grows {
        failures.push("c = 4 rescaling does not grow".to_string());
    }
    let s_grid = [1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0];
    for (name, m) in zoo_models(&[1, 2, 3, 4]) {
        let curve = tail_curve(&m, &s_grid, SEED, 10_000, SphereBudget::default()).unwrap();
        let r = general_bound_check(&curve, m.dimension());
        if !r.holds {
            failures.push(format!("{name}: worst {:.3e} vs ceiling {:.3e} at s={}", r.worst, r.ceiling, r.worst_s));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "disk limit {:.4} (target {:.4}, rel err {:.2e}); failing: {failures:?}",
            disk.limit, disk.target, disk.relative_error
        ),
    )
}

/// Serialized outputs of a cross-section of the randomized routines.
fn artifacts() -> Vec<String> {
    let g = MeasureModel::gaussian(3).unwrap();
    let cube = MeasureModel::cube(2, 1.0).unwrap();
    let exp = MeasureModel::exponential(2).unwrap();
    let budget = SphereBudget::default();
    let dirs = direction_set(2, 32);
    let json = |v: serde_json::Result<String>| v.unwrap();
    vec![
        json(serde_json::to_string(&lp_moment(&g, 1.0, SEED, 20_000, Estimator::DirectMc).unwrap())),
        json(serde_json::to_string(&lp_moment(&exp, 2.0, SEED, 20_000, Estimator::TailIntegral).unwrap())),
        json(serde_json::to_string(&claim_check(&cube, Claim::Floating, &dirs, 1e-6).unwrap())),
        json(serde_json::to_string(&negative_moment(&exp, 0.05, SEED, 2000, budget).unwrap())),
        json(serde_json::to_string(&expected_measure(&cube, 30, 32, 500, SEED).unwrap())),
        json(serde_json::to_string(&tail_curve(&exp, &[1.0, 2.0, 4.0], SEED, 2000, budget).unwrap())),
        json(serde_json::to_string(
            &dilation_measure_check(&exp, BodySpec::new(Family::B, 2.0), 0.1, SEED, 5000, BodyOptions::default())
                .unwrap(),
        )),
        json(serde_json::to_string(&body_measure(&g, BodySpec::new(Family::R, 4.0), SEED, 5000, BodyOptions::default()).unwrap())),
        json(serde_json::to_string(&disk_asa_limit_check(&[1.0, 2.0, 3.0, 4.0, 5.0], SEED, 2000, 0.5).unwrap())),
    ]
}

fn determinism() -> Outcome {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(artifacts)
    };
    let a = run(1);
    let b = run(1);
    let c = run(4);
    let same = a == b && a == c;
    outcome(same, format!("{} artifacts, identical across repeats and pool sizes 1/4: {same}", a.len()))
}

type Criterion = (usize, &'static str, fn() -> Outcome, Option<u64>);

const CRITERIA: [Criterion; 14] = [
    (1, "gaussian exactness", gaussian_exactness, Some(10)),
    (2, "one-dimensional oracles", one_dimensional_oracles, Some(5)),
    (3, "duality", duality, None),
    (4, "density level-set measure", density_level_sets, Some(120)),
    (5, "inclusion suite", inclusion_suite, Some(600)),
    (6, "dilation inequality", dilation, None),
    (7, "moment growth", moment_growth, Some(300)),
    (8, "exponential moments", exponential_moments, None),
    (9, "half-space depth", depth_checks, None),
    (10, "negative depth moments", negative_moments, None),
    (11, "polytope threshold", threshold, Some(600)),
    (12, "covering bound", covering, None),
    (13, "floating-body tails", floating_tails, Some(600)),
    (14, "determinism", determinism, None),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (k, name, run, limit) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let o = within_time(o, elapsed, limit.map(Duration::from_secs));
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {k:>2} {name}: {verdict} [{:.1}s] {}", elapsed.as_secs_f64(), o.detail);
        if !o.passed {
            failed.push(k);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
