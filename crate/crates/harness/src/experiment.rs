//! Running configs: build the game, certify the reference equilibrium, run
//! every seed, aggregate, fit, and persist.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use nashseek_core::oracle::{
    best_response_improvement, fit_rate_slope, solve_ne_reference, vi_residual, window_from_fraction,
};
use nashseek_core::sdl::{run_single_shot_baseline, run_sdl, step_condition_holds};
use nashseek_core::{
    CournotConstraint, CournotGame, CournotParams, Game, ProjectionMode, RateFit, RunOptions, RunTrace, Schedules,
    SingleShotSchedules, SolverOptions, StrategySet,
};
use rayon::prelude::*;

use crate::aggregate::{aggregate_seeds, MeanCurve};
use crate::artifacts;
use crate::config::{projection_name, Algorithm, ExperimentConfig, GameKind};
use crate::error::{HarnessError, Result};
use crate::plot::{render_svg, Series};

pub fn build_game(cfg: &ExperimentConfig) -> Result<CournotGame> {
    let game = match cfg.game {
        GameKind::Cournot => {
            let params = CournotParams::generate(cfg.players, cfg.markets, cfg.instance_seed)?;
            // hyperplane mode only drops the sign constraint from the step;
            // the set itself keeps x >= 0
            CournotGame::new(params.with_noise_scale(cfg.noise_scale), CournotConstraint::UnitSimplex)?
        }
        GameKind::Duopoly => {
            let params = CournotParams::duopoly(5.0, 1.0, 3.0).with_noise_scale(cfg.noise_scale);
            CournotGame::with_sets(params, vec![StrategySet::boxed(vec![0.0], vec![10.0])?; 2])?
        }
    };
    Ok(game)
}

/// A reference equilibrium that passed both certificates.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedReference {
    pub x_star: Vec<f64>,
    pub vi_residual: f64,
    pub max_improvement: f64,
}

fn solver_options(cfg: &ExperimentConfig) -> SolverOptions {
    SolverOptions {
        tol: cfg.solver_tol,
        max_iter: cfg.solver_max_iter,
        step: None,
        improvement_tol: cfg.improvement_tol,
        seed: cfg.instance_seed,
    }
}

/// Solve for the equilibrium, or load `cfg.reference` and re-certify it.
pub fn certified_reference(cfg: &ExperimentConfig, game: &CournotGame) -> Result<CertifiedReference> {
    let opts = solver_options(cfg);
    match &cfg.reference {
        None => {
            let r = solve_ne_reference(game, &opts)?;
            Ok(CertifiedReference {
                max_improvement: r.per_player_improvement.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                x_star: r.x_star,
                vi_residual: r.vi_residual,
            })
        }
        Some(path) => {
            let (x, _) = artifacts::read_reference(path)?;
            if x.len() != game.layout().total() {
                return Err(HarnessError::Reference(format!(
                    "{} holds a point of dimension {}, the game has {}",
                    path.display(),
                    x.len(),
                    game.layout().total()
                )));
            }
            game.check_feasible(&x, 1e-9)?;
            let residual = vi_residual(game, &x, 1.0)?;
            if residual > 10.0 * cfg.solver_tol {
                return Err(HarnessError::Reference(format!(
                    "{}: natural-map residual {residual:e} exceeds 10 x solver_tol",
                    path.display()
                )));
            }
            let step = 1.0 / game.params().lipschitz();
            let mut worst = f64::NEG_INFINITY;
            for i in 0..game.num_players() {
                let imp = best_response_improvement(game, &x, i, step, cfg.solver_max_iter)?;
                if imp > cfg.improvement_tol {
                    return Err(HarnessError::Reference(format!(
                        "{}: player {i} improves by {imp:e}",
                        path.display()
                    )));
                }
                worst = worst.max(imp);
            }
            Ok(CertifiedReference {
                x_star: x,
                vi_residual: residual,
                max_improvement: worst,
            })
        }
    }
}

/// Every number a summary reports; see [`ExperimentSummary::to_text`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSummary {
    pub algorithm: Algorithm,
    pub projection: ProjectionMode,
    pub p: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub n_seeds: usize,
    pub final_mean_sq_error: f64,
    /// Mean squared error at `n = ceil(fit_from * T)`.
    pub window_start_mean_sq_error: f64,
    pub fit: Option<RateFit>,
    /// Why no slope was fitted, if none was.
    pub fit_error: Option<String>,
    pub beta: Option<f64>,
    pub step_condition: Option<bool>,
    pub negativity_events: u64,
    pub total_evaluations: u64,
    pub reference_vi_residual: f64,
    pub reference_max_improvement: f64,
}

impl ExperimentSummary {
    fn values(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "none".into());
        let fit = self.fit.as_ref();
        vec![
            ("algorithm", self.algorithm.name().into()),
            ("projection", projection_name(self.projection).into()),
            ("p", self.p.to_string()),
            ("gamma", self.gamma.to_string()),
            ("iterations", self.iterations.to_string()),
            ("n_seeds", self.n_seeds.to_string()),
            ("final_mean_sq_error", self.final_mean_sq_error.to_string()),
            ("window_start_mean_sq_error", self.window_start_mean_sq_error.to_string()),
            ("slope", opt(fit.map(|f| f.slope))),
            ("intercept", opt(fit.map(|f| f.intercept))),
            ("r_squared", opt(fit.map(|f| f.r_squared))),
            (
                "fit_window",
                fit.map(|f| format!("{}..{}", f.window.0, f.window.1)).unwrap_or_else(|| "none".into()),
            ),
            ("beta", opt(self.beta)),
            ("gamma_beta", opt(self.beta.map(|b| b * self.gamma))),
            (
                "step_condition",
                self.step_condition.map(|b| b.to_string()).unwrap_or_else(|| "unknown".into()),
            ),
            ("negativity_events", self.negativity_events.to_string()),
            ("total_evaluations", self.total_evaluations.to_string()),
            ("reference_vi_residual", self.reference_vi_residual.to_string()),
            ("reference_max_improvement", self.reference_max_improvement.to_string()),
        ]
    }

    /// A readable paragraph followed by a `[values]` block of `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} with {} projection, p = {}, gamma = {}, {} iterations x {} seeds",
            self.algorithm.name(),
            projection_name(self.projection),
            self.p,
            self.gamma,
            self.iterations,
            self.n_seeds
        );
        let _ = writeln!(
            s,
            "mean squared error {:.4e} at the end, {:.4e} at the start of the fit window",
            self.final_mean_sq_error, self.window_start_mean_sq_error
        );
        match (&self.fit, &self.fit_error) {
            (Some(f), _) => {
                let _ = writeln!(
                    s,
                    "log-log slope {:.4} over n in [{}, {}] (r^2 = {:.4})",
                    f.slope, f.window.0, f.window.1, f.r_squared
                );
            }
            (None, Some(e)) => {
                let _ = writeln!(s, "no slope fitted: {e}");
            }
            (None, None) => {}
        }
        if let (Some(b), Some(ok)) = (self.beta, self.step_condition) {
            let _ = writeln!(
                s,
                "beta = {b:.4}, gamma * beta = {:.4} ({})",
                b * self.gamma,
                if ok { "step condition holds" } else { "step condition violated" }
            );
        }
        if self.projection == ProjectionMode::HyperplaneOnly {
            let _ = writeln!(s, "player updates with a negative component: {}", self.negativity_events);
        }
        s.push_str("\n[values]\n");
        for (k, v) in self.values() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Read the `[values]` block of a summary back into a map.
pub fn parse_summary_values(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .skip_while(|l| l.trim() != "[values]")
        .skip(1)
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Everything an experiment produced, before anything touches the disk.
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub reference: CertifiedReference,
    pub runs: Vec<RunTrace>,
    pub mean: MeanCurve,
    pub summary: ExperimentSummary,
}

impl ExperimentOutcome {
    pub fn run_id(&self, seed: u64) -> String {
        run_id(&self.config, seed)
    }
}

pub fn run_id(cfg: &ExperimentConfig, seed: u64) -> String {
    match cfg.algorithm {
        Algorithm::Sdl => format!("sdl-p{}-seed{seed}", cfg.p),
        Algorithm::SingleShot => format!("single_shot-seed{seed}"),
    }
}

/// Worker count: `NASHSEEK_WORKERS` if set, else `flag`, else all cores.
pub fn resolve_workers(flag: Option<usize>) -> usize {
    let env = std::env::var("NASHSEEK_WORKERS").ok().and_then(|v| v.trim().parse().ok());
    env.or(flag)
        .filter(|w| *w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::config(format!("cannot start {workers} workers: {e}")))
}

/// Run every seed of `cfg` in memory.
pub fn execute(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let game = build_game(cfg)?;
    let reference = certified_reference(cfg, &game)?;
    let x0 = game.center();
    let opts = RunOptions::new(cfg.iterations)
        .record_every(cfg.record_every)
        .projection(cfg.projection);
    info!(
        "{} on {} ({} seeds, T = {}, {} workers)",
        cfg.algorithm.name(),
        cfg.game.name(),
        cfg.seeds.len(),
        cfg.iterations,
        workers
    );
    let run_one = |seed: u64| -> Result<RunTrace> {
        let r = Some(reference.x_star.as_slice());
        let trace = match cfg.algorithm {
            Algorithm::Sdl => run_sdl(&game, &Schedules::new(cfg.gamma, cfg.ell0, cfg.p, cfg.h0)?, &x0, &opts, r, seed)?,
            Algorithm::SingleShot => {
                let s = SingleShotSchedules::new(cfg.gamma, cfg.h0, cfg.h_exponent)?;
                run_single_shot_baseline(&game, &s, &x0, &opts, r, seed)?
            }
        };
        Ok(trace)
    };
    let runs: Vec<RunTrace> = pool(workers)?.install(|| cfg.seeds.par_iter().map(|&s| run_one(s)).collect::<Result<_>>())?;
    let curves: Vec<&[f64]> = runs.iter().map(|r| r.sq_error.as_slice()).collect();
    let mean = aggregate_seeds(&curves)?;

    let window = window_from_fraction(mean.len(), cfg.fit_from);
    let (fit, fit_error) = match fit_rate_slope(&mean.mean, Some(window)) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let beta = game.strong_monotonicity();
    let summary = ExperimentSummary {
        algorithm: cfg.algorithm,
        projection: cfg.projection,
        p: if cfg.algorithm == Algorithm::Sdl { cfg.p } else { 0.0 },
        gamma: cfg.gamma,
        iterations: mean.len(),
        n_seeds: runs.len(),
        final_mean_sq_error: mean.last(),
        window_start_mean_sq_error: mean.mean[window.0 - 1],
        fit,
        fit_error,
        beta,
        step_condition: beta.map(|b| step_condition_holds(cfg.gamma, b)),
        negativity_events: runs.iter().map(|r| r.negativity_events).sum(),
        total_evaluations: runs.iter().map(|r| r.eval_counts.last().copied().unwrap_or(0)).sum(),
        reference_vi_residual: reference.vi_residual,
        reference_max_improvement: reference.max_improvement,
    };
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        reference,
        runs,
        mean,
        summary,
    })
}

pub const CONFIG_FILE: &str = "config.cfg";
pub const REFERENCE_FILE: &str = "reference.txt";
pub const MEAN_FILE: &str = "mean.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const PLOT_FILE: &str = "plot.svg";
pub const TRACE_DIR: &str = "traces";

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(TRACE_DIR).join(format!("seed_{seed}.csv"))
}

/// Write config, reference, per-seed traces, mean curve, summary and plot.
pub fn write_artifacts(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    create_dir(&dir.join(TRACE_DIR))?;
    let mut persisted = outcome.config.clone();
    persisted.output_dir = dir.to_path_buf();
    artifacts::write_text(&dir.join(CONFIG_FILE), &persisted.to_text())?;
    artifacts::write_reference(&dir.join(REFERENCE_FILE), &outcome.reference.x_star, outcome.reference.vi_residual)?;
    for run in &outcome.runs {
        let rows = artifacts::trace_rows(&outcome.run_id(run.seed), run);
        artifacts::write_trace_csv(&trace_path(dir, run.seed), &rows)?;
    }
    artifacts::write_mean_csv(&dir.join(MEAN_FILE), &outcome.mean)?;
    artifacts::write_text(&dir.join(SUMMARY_FILE), &outcome.summary.to_text())?;
    let label = match outcome.config.algorithm {
        Algorithm::Sdl => format!("SDL p = {}", outcome.config.p),
        Algorithm::SingleShot => "single-shot".to_string(),
    };
    let svg = render_svg(
        &[Series {
            label,
            curve: &outcome.mean,
        }],
        &format!("{} seeds", outcome.mean.n_seeds),
        outcome.config.plot_log,
    );
    artifacts::write_text(&dir.join(PLOT_FILE), &svg)
}

/// Execute `cfg` and persist everything under `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentSummary> {
    let outcome = execute(cfg, workers)?;
    write_artifacts(&outcome, &cfg.output_dir)?;
    Ok(outcome.summary)
}

/// One sweep point's directory name.
pub fn sweep_dir(out: &Path, p: f64) -> PathBuf {
    out.join(format!("p{p}"))
}

/// Run `cfg.sweep_p` on one instance and one start point. The reference is
/// solved once and shared through `out/reference.txt`.
pub fn sweep(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<ExperimentSummary>> {
    if cfg.sweep_p.is_empty() {
        return Err(HarnessError::config("sweep_p is empty"));
    }
    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    let game = build_game(cfg)?;
    let reference = certified_reference(cfg, &game)?;
    let ref_path = out.join(REFERENCE_FILE);
    artifacts::write_reference(&ref_path, &reference.x_star, reference.vi_residual)?;

    let mut summaries = Vec::new();
    let mut outcomes = Vec::new();
    for &p in &cfg.sweep_p {
        let mut point = cfg.clone();
        point.algorithm = Algorithm::Sdl;
        point.p = p;
        point.iterations = cfg.iterations_for(p);
        point.reference = Some(ref_path.clone());
        point.output_dir = sweep_dir(&out, p);
        let outcome = execute(&point, workers)?;
        write_artifacts(&outcome, &point.output_dir)?;
        summaries.push(outcome.summary.clone());
        outcomes.push(outcome);
    }
    let series: Vec<Series<'_>> = outcomes
        .iter()
        .map(|o| Series {
            label: format!("p = {}", o.config.p),
            curve: &o.mean,
        })
        .collect();
    artifacts::write_text(
        &out.join("comparison.svg"),
        &render_svg(&series, "SDL, varying p", cfg.plot_log),
    )?;
    let mut text = String::from("p,iterations,final_mean_sq_error,slope,r_squared\n");
    for s in &summaries {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            s.p,
            s.iterations,
            s.final_mean_sq_error,
            s.fit.as_ref().map(|f| f.slope.to_string()).unwrap_or_else(|| "none".into()),
            s.fit.as_ref().map(|f| f.r_squared.to_string()).unwrap_or_else(|| "none".into()),
        );
    }
    artifacts::write_text(&out.join("sweep.csv"), &text)?;
    Ok(summaries)
}
