//! `nashseek` subcommands.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nashseek_core::EstimatorKind;

use crate::artifacts;
use crate::bias_variance::{self, GridSpec, Target};
use crate::config::{parse_f64_list, parse_projection, parse_seed_list, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{self, resolve_workers};
use crate::plot::{render_svg, Series};

#[derive(Parser, Debug)]
#[command(name = "nashseek", version, about = "Zeroth-order Nash equilibrium learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one config over all its seeds and write its artifacts.
    Run(RunArgs),
    /// Run SDL for several values of p on one instance.
    Sweep(RunArgs),
    /// Estimator bias and variance over a grid of h and ell.
    BiasVariance(BiasVarianceArgs),
    /// Solve and certify the reference equilibrium of a config's game.
    SolveNe(SolveArgs),
    /// Render mean-curve CSVs (or run directories) to one SVG.
    Plot(PlotArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use seeds 0..K.
    #[arg(long, conflicts_with = "seed_list")]
    seeds: Option<u64>,
    #[arg(long)]
    seed_list: Option<String>,
    /// One value for `run`, a comma-separated list for `sweep`.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    /// full | hyperplane
    #[arg(long)]
    projection: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct BiasVarianceArgs {
    #[arg(long, default_value = "spsa")]
    estimator: String,
    /// quadratic | cournot
    #[arg(long, default_value = "quadratic")]
    target: String,
    /// `a..b` doubles from a to b, or a comma-separated list.
    #[arg(long, default_value = "0.02..0.32")]
    h: String,
    #[arg(long, default_value = "1..64")]
    ell: String,
    #[arg(long, default_value_t = 10_000)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out/bias_variance")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reference file to write; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// `mean.csv` files or run directories containing one.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Linear axes instead of log-log.
    #[arg(long)]
    linear: bool,
    #[arg(long, default_value = "mean squared error")]
    title: String,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Apply command-line overrides on top of the config file.
fn configure(args: &RunArgs, sweep: bool) -> Result<ExperimentConfig> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(k) = args.seeds {
        cfg.seeds = (0..k).collect();
    }
    if let Some(list) = &args.seed_list {
        cfg.seeds = parse_seed_list(list)?;
    }
    if let Some(p) = &args.p {
        if sweep {
            cfg.sweep_p = parse_f64_list("p", p)?;
        } else {
            cfg.set("p", p)?;
        }
    }
    if let Some(a) = &args.algorithm {
        cfg.algorithm = a.parse()?;
    }
    if let Some(m) = &args.projection {
        cfg.projection = parse_projection(m)?;
    }
    if let Some(t) = args.iters {
        cfg.iterations = t;
        // an explicit budget applies to every sweep point
        cfg.iters_per_p.clear();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = configure(&args, false)?;
    let summary = experiment::run_experiment(&cfg, resolve_workers(args.workers))?;
    print!("{}", summary.to_text());
    println!("artifacts in {}", cfg.output_dir.display());
    Ok(())
}

fn sweep(args: RunArgs) -> Result<()> {
    let cfg = configure(&args, true)?;
    let summaries = experiment::sweep(&cfg, resolve_workers(args.workers))?;
    for s in &summaries {
        let slope = s.fit.as_ref().map(|f| format!("{:.4}", f.slope)).unwrap_or_else(|| "none".into());
        println!(
            "p = {:<4} T = {:<7} final mean sq error {:.4e}  slope {slope}",
            s.p, s.iterations, s.final_mean_sq_error
        );
    }
    println!("artifacts in {}", cfg.output_dir.display());
    Ok(())
}

fn bias_variance(args: BiasVarianceArgs) -> Result<()> {
    let estimator: EstimatorKind = args.estimator.parse()?;
    let target: Target = args.target.parse()?;
    let spec = GridSpec {
        estimator,
        target,
        hs: bias_variance::parse_geometric_f64(&args.h)?,
        ells: bias_variance::parse_geometric_usize(&args.ell)?,
        replications: args.replications,
        seed: args.seed,
    };
    let rows = bias_variance::run_grid(&spec)?;
    std::fs::create_dir_all(&args.out).map_err(|e| HarnessError::io(&args.out, e))?;
    let path = args.out.join("grid.csv");
    artifacts::write_text(&path, &bias_variance::grid_csv(&spec, &rows))?;
    let (vs_h, vs_ell) = bias_variance::grid_slopes(&rows);
    let show = |v: Option<f64>| v.map(|s| format!("{s:.3}")).unwrap_or_else(|| "n/a".into());
    println!("variance slope vs h:   {}", show(vs_h));
    println!("variance slope vs ell: {}", show(vs_ell));
    println!("grid written to {}", path.display());
    Ok(())
}

fn solve_ne(args: SolveArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let game = experiment::build_game(&cfg)?;
    let r = experiment::certified_reference(&cfg, &game)?;
    let text = artifacts::reference_text(&r.x_star, r.vi_residual);
    match args.out {
        Some(path) => {
            artifacts::write_text(&path, &text)?;
            eprintln!(
                "reference written to {} (residual {:e}, largest improvement {:e})",
                path.display(),
                r.vi_residual,
                r.max_improvement
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    let mut curves = Vec::new();
    for input in &args.inputs {
        let path = if input.is_dir() { input.join(experiment::MEAN_FILE) } else { input.clone() };
        let label = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| input.display().to_string());
        curves.push((label, artifacts::read_mean_csv(&path)?));
    }
    let series: Vec<Series<'_>> = curves
        .iter()
        .map(|(label, curve)| Series {
            label: label.clone(),
            curve,
        })
        .collect();
    artifacts::write_text(&args.out, &render_svg(&series, &args.title, !args.linear))?;
    println!("plot written to {}", args.out.display());
    Ok(())
}

/// Parse `argv` and dispatch; returns the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::BiasVariance(a) => bias_variance(a),
        Command::SolveNe(a) => solve_ne(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
