use std::fmt::Write as _;
use std::path::Path;

use cramer_core::bodies::{radial_profile, BodyOptions, BodySpec, Family};
use cramer_core::claims::{claim_check, floating_scan, Claim};
use cramer_core::cramer::{cramer_with, log_laplace, CramerOptions, Order};
use cramer_core::depth::{depth, depth_cramer_bounds_check, negative_moment};
use cramer_core::floating::{disk_asa_limit_check, general_bound_check, nesting_check, tail_curve};
use cramer_core::moments::{beta_ratio, exp_moment, growth_fit, jensen_floor_check, lp_moment};
use cramer_core::polytopes::{covering_bound_check, threshold_scan, ThresholdOptions};
use cramer_core::sphere::{direction_set, SphereBudget};
use cramer_core::{Point, SeedStream, Zoo};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{emit, Artifact, Statement};
use crate::{
    BodiesArgs, DepthArgs, FloatingArgs, InclusionsArgs, MomentsArgs, PointArgs, ThresholdArgs, TransformArgs,
};

const DEFAULT_DIRECTIONS: usize = 128;
const DEFAULT_INCLUSION_TOL: f64 = 1e-6;

fn file_name(base: &str, ext: &str, tag: Option<&str>) -> String {
    match tag {
        Some(t) => format!("{base}-{t}.{ext}"),
        None => format!("{base}.{ext}"),
    }
}

fn parse_point(text: &str, n: usize) -> Result<Point, CliError> {
    let coords = text
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| CliError::config(format!("bad coordinate '{c}': {e}"))))
        .collect::<Result<Vec<f64>, _>>()?;
    if coords.len() != n {
        return Err(CliError::config(format!("point '{text}' has {} coordinates, model dimension is {n}", coords.len())));
    }
    Ok(Point::from_vec(coords))
}

fn read_points(path: &Path, n: usize) -> Result<Vec<Point>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("invalid points file: {e}")))?;
    rows.into_iter()
        .map(|r| {
            if r.len() == n {
                Ok(Point::from_vec(r))
            } else {
                Err(CliError::config(format!("point of length {} in a dimension-{n} run", r.len())))
            }
        })
        .collect()
}

fn collect_points(args: &PointArgs, n: usize) -> Result<Vec<Point>, CliError> {
    let mut pts = args.point.iter().map(|p| parse_point(p, n)).collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &args.points {
        pts.extend(read_points(path, n)?);
    }
    Ok(pts)
}

fn coords(p: &Point) -> Vec<f64> {
    p.iter().copied().collect()
}

pub fn transform(cfg: &Resolved, a: &TransformArgs, tag: Option<&str>) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let n = model.dimension();
    let mut points = collect_points(&a.points, n)?;
    if let Some(ray) = &a.ray {
        let u = parse_point(ray, n)?;
        let norm = u.norm();
        if !(norm > 0.0) || a.ray_count == 0 || !(a.ray_max > 0.0) {
            return Err(CliError::config("ray needs a nonzero direction, ray-count >= 1 and ray-max > 0"));
        }
        let u = u / norm;
        points.extend((1..=a.ray_count).map(|k| &u * (a.ray_max * k as f64 / a.ray_count as f64)));
    }
    let xis = a.xi.iter().map(|p| parse_point(p, n)).collect::<Result<Vec<_>, _>>()?;
    if points.is_empty() && xis.is_empty() {
        return Err(CliError::config("no points given"));
    }
    let tol = a.tol.or(cfg.tolerances.cramer).unwrap_or(CramerOptions::default().tol);
    let opts = CramerOptions { tol, ..CramerOptions::default() };
    let cramer = points
        .par_iter()
        .map(|x| {
            let r = cramer_with(&model, x, &opts)?;
            Ok(json!({
                "x": coords(x),
                "value": r.value,
                "status": r.status,
                "maximizer": r.maximizer,
                "iterations": r.iterations,
                "gradient_residual": r.gradient_residual,
            }))
        })
        .collect::<Result<Vec<Value>, cramer_core::Error>>()?;
    let laplace = xis
        .iter()
        .map(|xi| {
            let e = log_laplace(&model, xi, Order::Grad)?;
            Ok(json!({ "xi": coords(xi), "value": e.value, "gradient": e.gradient.map(|g| coords(&g)) }))
        })
        .collect::<Result<Vec<Value>, cramer_core::Error>>()?;
    let results = json!({ "cramer": cramer, "log_laplace": laplace });
    emit(Artifact::json("transform", file_name("transform", "json", tag), cfg, results, vec![])?, cfg, "transform")
}

pub fn bodies(cfg: &Resolved, a: &BodiesArgs, tag: Option<&str>) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let n = model.dimension();
    let dirs = direction_set(n, cfg.directions(DEFAULT_DIRECTIONS));
    let mut csv = String::from("family,t");
    csv.push_str(",dir_index");
    for k in 0..n {
        write!(csv, ",theta_{k}").unwrap();
    }
    csv.push_str(",value\n");
    for &t in &a.t {
        let spec = BodySpec::new(a.family, t).scaled(a.scale);
        spec.validate()?;
        let prof = radial_profile(&model, spec, &dirs, BodyOptions::default())?;
        for (i, (u, v)) in prof.directions.iter().zip(&prof.values).enumerate() {
            write!(csv, "{},{}", a.family, t).unwrap();
            write!(csv, ",{i}").unwrap();
            for c in u {
                write!(csv, ",{c}").unwrap();
            }
            writeln!(csv, ",{v}").unwrap();
        }
    }
    let base = format!("bodies-{}", a.family);
    emit(Artifact::Csv { name: file_name(&base, "csv", tag), text: csv }, cfg, "bodies")
}

pub fn inclusions(cfg: &Resolved, a: &InclusionsArgs, tag: Option<&str>) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let claims: Vec<Claim> =
        if a.claim.eq_ignore_ascii_case("all") { Claim::ALL.to_vec() } else { vec![a.claim.parse::<Claim>()?] };
    let tol = a.tol.or(cfg.tolerances.inclusion).unwrap_or(DEFAULT_INCLUSION_TOL);
    let dirs = direction_set(model.dimension(), cfg.directions(DEFAULT_DIRECTIONS));
    let mut reports = Vec::new();
    let mut statements = Vec::new();
    for c in claims {
        let rep = claim_check(&model, c, &dirs, tol)?;
        statements.push(Statement::check(
            c.as_str(),
            rep.passed(),
            json!({ "worst_margin": rep.worst_margin, "violations": rep.violations, "directions": rep.directions }),
        ));
        reports.push(rep);
    }
    let scan = if a.s_grid.is_empty() {
        None
    } else {
        let scan = floating_scan(&model, &a.s_grid, &dirs, tol)?;
        statements.push(Statement::measure("floating-onset", json!({ "empirical_s0": scan.empirical_s0 })));
        Some(scan)
    };
    let base = if a.claim.eq_ignore_ascii_case("all") { "inclusions".to_string() } else { format!("inclusions-{}", a.claim) };
    let results = json!({ "reports": reports, "floating_scan": scan });
    emit(Artifact::json("inclusions", file_name(&base, "json", tag), cfg, results, statements)?, cfg, "inclusions")
}

pub fn moments(cfg: &Resolved, a: &MomentsArgs, zoo: Option<Zoo>, tag: Option<&str>) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let n = model.dimension() as f64;
    let samples = cfg.samples(100_000);
    let mut statements = Vec::new();
    let mut lp = Vec::new();
    for &p in &a.p {
        let r = lp_moment(&model, p, cfg.seed, samples, a.estimator)?;
        let (norm, norm_se) = r.norm();
        statements.push(Statement::measure(
            &format!("lp-moment-{p}"),
            json!({ "norm": norm, "stderr": norm_se, "per_n": norm / n }),
        ));
        lp.push(r);
    }
    let ceiling = 2.0 * (n * n.ln() / 16.0).exp();
    let mut exps = Vec::new();
    for &c in &a.exp_c {
        let r = exp_moment(&model, c, cfg.seed, samples)?;
        let measured = json!({
            "c": c, "estimate": r.estimate, "stderr": r.stderr,
            "divergence_flag": r.divergence_flag, "ceiling": ceiling,
        });
        // the ceiling is asserted only at and below c = 1/(16n)
        if c <= 1.0 / (16.0 * n) * (1.0 + 1e-12) {
            statements.push(Statement::check("exp-moment", r.estimate <= ceiling && !r.divergence_flag, measured));
        } else {
            statements.push(Statement::measure("exp-moment", measured));
        }
        exps.push(r);
    }
    let beta = if a.beta {
        let b = beta_ratio(&model, cfg.seed, samples)?;
        statements.push(Statement::measure("beta", json!({ "beta": b.beta, "stderr": b.beta_stderr, "n_beta": n * b.beta })));
        Some(b)
    } else {
        None
    };
    let jensen = if a.jensen {
        let j = jensen_floor_check(&model, cfg.seed, samples)?;
        statements.push(Statement::check("jensen-floor", j.holds, json!({ "tau": j.tau, "floor": j.floor })));
        Some(j)
    } else {
        None
    };
    let growth = if a.growth.is_empty() {
        None
    } else {
        let family = zoo.ok_or_else(|| CliError::config("--growth needs --zoo"))?;
        let mut rows = Vec::new();
        for &p in &a.p {
            let g = growth_fit(family, &a.growth, p, cfg.seed, samples)?;
            statements.push(Statement::measure(
                &format!("moment-growth-{p}"),
                json!({ "per_n_spread": g.per_n_spread, "per_n_ln_n_band": g.per_n_ln_n_band }),
            ));
            rows.push(g);
        }
        Some(rows)
    };
    let results = json!({ "lp": lp, "exp": exps, "beta": beta, "jensen": jensen, "growth": growth });
    emit(Artifact::json("moments", file_name("moments", "json", tag), cfg, results, statements)?, cfg, "moments")
}

pub fn depth_command(cfg: &Resolved, a: &DepthArgs, tag: Option<&str>) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let n = model.dimension();
    let budget = SphereBudget::default();
    let tol = a.tol.or(cfg.tolerances.depth).unwrap_or(1e-9);
    let points = collect_points(&a.points, n)?;
    let values = points
        .par_iter()
        .map(|x| depth(&model, x, budget).map(|r| json!({ "x": coords(x), "result": r })))
        .collect::<Result<Vec<Value>, _>>()?;
    let mut statements = Vec::new();
    let bounds = match a.random {
        Some(count) => {
            let pts = model.sample(&SeedStream::new(cfg.seed).derive_str("depth_points"), count);
            let reps = pts
                .par_iter()
                .map(|x| depth_cramer_bounds_check(&model, x, a.epsilon, budget, tol))
                .collect::<Result<Vec<_>, _>>()?;
            let failures = reps.iter().filter(|r| !r.holds()).count();
            statements.push(Statement::check(
                "depth-cramer-bounds",
                failures == 0,
                json!({ "points": count, "failures": failures, "epsilon": a.epsilon }),
            ));
            Some(reps)
        }
        None => None,
    };
    let mut negative = Vec::new();
    for &p in &a.negative_p {
        let r = negative_moment(&model, p, cfg.seed, cfg.samples(20_000), budget)?;
        statements.push(Statement::measure(
            &format!("negative-depth-moment-{p}"),
            json!({ "estimate": r.estimate, "stderr": r.stderr, "divergence_flag": r.divergence_flag }),
        ));
        negative.push(json!({ "p": p, "estimate": r }));
    }
    let results = json!({ "depth": values, "bounds": bounds, "negative_moments": negative });
    emit(Artifact::json("depth", file_name("depth", "json", tag), cfg, results, statements)?, cfg, "depth")
}

pub fn threshold(cfg: &Resolved, a: &ThresholdArgs, tag: Option<&str>) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let mut statements = Vec::new();
    let scan = if a.no_scan {
        None
    } else {
        let defaults = ThresholdOptions::default();
        let opts = ThresholdOptions {
            reps: cfg.reps(defaults.reps),
            test_points: cfg.test_points(defaults.test_points),
            tau_samples: a.tau_samples.unwrap_or(defaults.tau_samples),
        };
        let r = threshold_scan(&model, a.delta, &a.grid, cfg.seed, opts)?;
        statements.push(Statement::check(
            "threshold-window",
            r.bracketed,
            json!({ "rho1": r.rho1, "rho2": r.rho2, "tau": r.tau, "tau_stderr": r.tau_stderr }),
        ));
        Some(r)
    };
    let mut covering = Vec::new();
    if let Some(s) = a.covering_s {
        for &v in &a.covering_vertices {
            let spec = BodySpec::new(Family::T, s);
            let r = covering_bound_check(&model, spec, v, cfg.reps(200), cfg.seed)?;
            statements.push(Statement::check(
                "covering-bound",
                r.holds,
                json!({ "vertices": v, "failure": r.failure, "bound": r.bound }),
            ));
            covering.push(r);
        }
    }
    let results = json!({ "scan": scan, "covering": covering });
    emit(Artifact::json("threshold", file_name("threshold", "json", tag), cfg, results, statements)?, cfg, "threshold")
}

pub fn floating(cfg: &Resolved, a: &FloatingArgs, tag: Option<&str>) -> Result<(), CliError> {
    let tol = a.tol.unwrap_or(0.1);
    if a.disk {
        let r = disk_asa_limit_check(&a.s_grid, cfg.seed, cfg.samples(20_000), tol)?;
        let statements = vec![
            Statement::check(
                "disk-floating-limit",
                r.passed,
                json!({ "limit": r.limit, "target": r.target, "relative_error": r.relative_error }),
            ),
            Statement::check("disk-floating-sharp-exponent", r.c4_grows, json!({ "rescaled_c4": r.rescaled_c4 })),
        ];
        let name = file_name("floating-disk", "json", tag);
        return emit(Artifact::json("floating", name, cfg, &r, statements)?, cfg, "floating");
    }
    let model = cfg.build_model()?;
    let n = model.dimension();
    let curve = tail_curve(&model, &a.s_grid, cfg.seed, cfg.samples(20_000), SphereBudget::default())?;
    let bound = general_bound_check(&curve, n);
    let dirs = direction_set(n, cfg.directions(64));
    let nest = nesting_check(&model, &a.s_grid, &dirs, cfg.tolerances.inclusion.unwrap_or(DEFAULT_INCLUSION_TOL))?;
    let statements = vec![
        Statement::check(
            "floating-tail-bound",
            bound.holds,
            json!({ "worst": bound.worst, "ceiling": bound.ceiling, "decay_exponent": bound.decay_exponent }),
        ),
        Statement::check("t-nesting", nest.passed(), json!({ "worst_margin": nest.worst_margin })),
    ];
    let results = json!({ "curve": curve, "bound": bound, "nesting": nest });
    emit(Artifact::json("floating", file_name("floating", "json", tag), cfg, results, statements)?, cfg, "floating")
}
