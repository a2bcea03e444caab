//! `cramer-bodies`: seeded, config-driven runs of the cramer-core experiments.

mod commands;
mod config;
mod error;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cramer_core::bodies::Family;
use cramer_core::moments::Estimator;
use cramer_core::{ModelDescriptor, Zoo};

use config::{Resolved, RunConfig, DEFAULT_SEED};
use error::{CliError, EXIT_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "cramer-bodies", version, about = "Cramér transforms, body families, depth and random polytopes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "CRAMER_BODIES_THREADS")]
    threads: Option<usize>,
    /// Output directory; artifacts go to stdout when unset.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Model descriptor as inline JSON.
    #[arg(long, global = true, value_name = "JSON")]
    model: Option<String>,
    /// Zoo model (gaussian, cube, ball, exponential); needs --dim.
    #[arg(long, global = true)]
    zoo: Option<Zoo>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true)]
    directions: Option<usize>,
    #[arg(long, global = true)]
    test_points: Option<usize>,
    /// Suffix added to the artifact file name.
    #[arg(long, global = true)]
    tag: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Batch evaluation of Λ* (and optionally Λ).
    Transform(TransformArgs),
    /// Radial functions of a body family as CSV.
    Bodies(BodiesArgs),
    /// Per-direction inclusion checks between body families.
    Inclusions(InclusionsArgs),
    /// Moments of Λ* under the measure.
    Moments(MomentsArgs),
    /// Half-space depth, its comparison with Λ*, and negative moments.
    Depth(DepthArgs),
    /// Random-polytope threshold scan and covering bound.
    Threshold(ThresholdArgs),
    /// Floating-body tail curves, nesting and the disk limit.
    Floating(FloatingArgs),
    /// Aggregates the JSON artifacts of a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PointArgs {
    /// Point as comma-separated coordinates; repeatable.
    #[arg(long = "point", allow_hyphen_values = true)]
    pub point: Vec<String>,
    /// JSON file holding an array of points.
    #[arg(long)]
    pub points: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub points: PointArgs,
    /// Ray direction; evaluates Λ* at `ray-count` points up to `ray-max` along it.
    #[arg(long, allow_hyphen_values = true)]
    pub ray: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub ray_max: f64,
    #[arg(long, default_value_t = 10)]
    pub ray_count: usize,
    /// Dual point at which Λ is evaluated; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Vec<String>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BodiesArgs {
    #[arg(long)]
    pub family: Family,
    /// Parameters, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Args)]
pub struct InclusionsArgs {
    /// Claim id, or `all`.
    #[arg(long, default_value = "all")]
    pub claim: String,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Grid of s for the empirical onset of the floating-body sandwich.
    #[arg(long, value_delimiter = ',')]
    pub s_grid: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub p: Vec<f64>,
    #[arg(long, default_value = "direct_mc")]
    pub estimator: Estimator,
    /// Coefficients c of E exp(c Λ*).
    #[arg(long, value_delimiter = ',')]
    pub exp_c: Vec<f64>,
    #[arg(long)]
    pub beta: bool,
    #[arg(long)]
    pub jensen: bool,
    /// Dimensions of a growth fit over the --zoo family.
    #[arg(long, value_delimiter = ',')]
    pub growth: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct DepthArgs {
    #[command(flatten)]
    pub points: PointArgs,
    /// Number of random model points for the Λ* comparison.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Exponents p of E φ^{-p}.
    #[arg(long, value_delimiter = ',')]
    pub negative_p: Vec<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    /// Grid of ln N.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9")]
    pub grid: Vec<f64>,
    #[arg(long)]
    pub tau_samples: Option<usize>,
    /// Depth level s of the covering-bound check.
    #[arg(long)]
    pub covering_s: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "50,200")]
    pub covering_vertices: Vec<usize>,
    /// Skip the threshold scan.
    #[arg(long)]
    pub no_scan: bool,
}

#[derive(Debug, Args)]
pub struct FloatingArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,8")]
    pub s_grid: Vec<f64>,
    /// Run the area-one disk limit instead of the model tail.
    #[arg(long)]
    pub disk: bool,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory (defaults to --out).
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

fn resolve(g: &Global) -> Result<Resolved, CliError> {
    let file = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let model = if let Some(text) = &g.model {
        ModelDescriptor::from_json(text)?
    } else if let Some(z) = g.zoo {
        let n = g.dim.ok_or_else(|| CliError::config("--zoo needs --dim"))?;
        z.model(n)?.descriptor()
    } else {
        file.model.clone().ok_or_else(|| CliError::config("no model given (--model, --zoo/--dim or config)"))?
    };
    let mut budgets = file.budgets.clone();
    budgets.samples = g.samples.or(budgets.samples);
    budgets.reps = g.reps.or(budgets.reps);
    budgets.directions = g.directions.or(budgets.directions);
    budgets.test_points = g.test_points.or(budgets.test_points);
    Ok(Resolved {
        model,
        seed: g.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        budgets,
        tolerances: file.tolerances.clone(),
        out: g.out.clone().or(file.out.clone()),
    })
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot build thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.global.threads)?;
    if let Command::Report(args) = &cli.command {
        let dir = args.dir.clone().or(cli.global.out.clone()).ok_or_else(|| CliError::config("report needs --dir"))?;
        return report::run(&dir, cli.global.out.as_deref());
    }
    let cfg = resolve(&cli.global)?;
    let tag = cli.global.tag.as_deref();
    match &cli.command {
        Command::Transform(a) => commands::transform(&cfg, a, tag),
        Command::Bodies(a) => commands::bodies(&cfg, a, tag),
        Command::Inclusions(a) => commands::inclusions(&cfg, a, tag),
        Command::Moments(a) => commands::moments(&cfg, a, cli.global.zoo, tag),
        Command::Depth(a) => commands::depth_command(&cfg, a, tag),
        Command::Threshold(a) => commands::threshold(&cfg, a, tag),
        Command::Floating(a) => commands::floating(&cfg, a, tag),
        Command::Report(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            eprintln!("{}", CliError::config(e.to_string().trim_end()).to_json());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code as u8)
        }
    }
}
