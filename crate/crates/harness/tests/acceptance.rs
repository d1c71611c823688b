//! Acceptance criteria, one line each. Runs as a plain binary so the lines
//! survive output capture; exits nonzero if any criterion fails.
//!
//! `NASHSEEK_ACCEPT_ONLY=1,4,7` restricts the run to the listed criteria.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nashseek::experiment::{self, ExperimentOutcome};
use nashseek::{run_experiment, ExperimentConfig};
use nashseek_core::estimators::empirical_bias_variance;
use nashseek_core::mirror::{check_prox_bounds, project_simplex};
use nashseek_core::oracle::{projected_gradient_solve, solve_ne_reference};
use nashseek_core::sdl::{run_sdl, sdl_step};
use nashseek_core::stream::purpose;
use nashseek_core::{
    CournotConstraint, CournotGame, CournotParams, Euclidean, EstimatorKind, Game, ProjectionMode, RunOptions,
    ScaledCosts, Schedules, SolverOptions, Stream, StrategySet, StreamRng,
};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn preset(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn workers() -> usize {
    experiment::resolve_workers(None)
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

// f(x) = 0.5 x'Ax + b'x plus U[-1, 1] noise, d = 4
const A: [[f64; 4]; 4] = [
    [2.0, 0.4, 0.0, 0.1],
    [0.4, 1.5, 0.2, 0.0],
    [0.0, 0.2, 1.0, 0.3],
    [0.1, 0.0, 0.3, 0.8],
];
const B: [f64; 4] = [0.5, -1.0, 0.25, 0.0];

fn noisy_quadratic(x: &[f64], rng: &mut StreamRng) -> f64 {
    let mut v = rng.random_range(-1.0..1.0);
    for i in 0..4 {
        v += B[i] * x[i];
        for j in 0..4 {
            v += 0.5 * A[i][j] * x[i] * x[j];
        }
    }
    v
}

fn quadratic_gradient(x: &[f64]) -> Vec<f64> {
    (0..4).map(|i| B[i] + (0..4).map(|j| A[i][j] * x[j]).sum::<f64>()).collect()
}

fn c1_spsa_unbiased() -> Verdict {
    let t = Instant::now();
    let x = [0.4, -0.3, 0.8, 1.2];
    let g = quadratic_gradient(&x);
    let r = empirical_bias_variance(EstimatorKind::Spsa, noisy_quadratic, &x, &g, 0.1, 1, 100_000, Stream::new(101))
        .unwrap();
    let z = r.max_bias_z();
    let el = t.elapsed();
    verdict(
        z < 4.0 && within(el, 10.0),
        format!("max |bias| = {z:.2} SE over 4 coordinates (need < 4), 1e5 replications, {el:.1?} (limit 10 s)"),
    )
}

fn c2_variance_orders() -> Verdict {
    let t = Instant::now();
    // at the minimiser the gradient term vanishes: variance = d sigma^2 / (2 ell h^2)
    let x_min: Vec<f64> = {
        // solve A x = -b by Gauss-Seidel; A is diagonally dominant
        let mut x = vec![0.0; 4];
        for _ in 0..200 {
            for i in 0..4 {
                let off: f64 = (0..4).filter(|&j| j != i).map(|j| A[i][j] * x[j]).sum();
                x[i] = (-B[i] - off) / A[i][i];
            }
        }
        x
    };
    let g = quadratic_gradient(&x_min);
    let var = |h: f64, ell: usize, s: u64| {
        empirical_bias_variance(EstimatorKind::Spsa, noisy_quadratic, &x_min, &g, h, ell, 10_000, Stream::new(s))
            .unwrap()
            .empirical_variance
    };
    let ells: Vec<usize> = (0..7).map(|k| 1 << k).collect();
    let ell_vars: Vec<f64> = ells.iter().map(|&l| var(0.1, l, 200 + l as u64)).collect();
    let ell_slope = log_slope(&ells.iter().map(|&l| l as f64).collect::<Vec<_>>(), &ell_vars);
    let hs: Vec<f64> = (0..5).map(|k| 0.02 * 2f64.powi(k)).collect();
    let h_vars: Vec<f64> = hs.iter().enumerate().map(|(k, &h)| var(h, 1, 300 + k as u64)).collect();
    let h_slope = log_slope(&hs, &h_vars);
    let el = t.elapsed();
    verdict(
        (ell_slope + 1.0).abs() <= 0.1 && (h_slope + 2.0).abs() <= 0.2 && within(el, 60.0),
        format!(
            "variance slope vs ell in 1..64 = {ell_slope:.3} (need -1 +- 0.1), vs h in 0.02..0.32 = {h_slope:.3} (need -2 +- 0.2), {el:.1?} (limit 60 s)"
        ),
    )
}

fn c3_bias_order() -> Verdict {
    let t = Instant::now();
    let cube = |x: &[f64], _: &mut StreamRng| x[0].powi(3);
    let mut ratios = Vec::new();
    for h in [0.05, 0.1] {
        let r =
            empirical_bias_variance(EstimatorKind::Spsa, cube, &[1.0], &[3.0], h, 1, 1_000_000, Stream::new(7)).unwrap();
        ratios.push(r.bias[0] / (h * h));
    }
    let el = t.elapsed();
    verdict(
        ratios.iter().all(|r| (0.85..=1.15).contains(r)) && within(el, 60.0),
        format!(
            "bias / h^2 = {:.4} at h = 0.05, {:.4} at h = 0.1 (need [0.85, 1.15]), 1e6 replications, {el:.1?} (limit 60 s)",
            ratios[0], ratios[1]
        ),
    )
}

fn c4_prox_bounds() -> Verdict {
    let t = Instant::now();
    let sets = [
        StrategySet::simplex(1.0, 5).unwrap(),
        StrategySet::boxed(vec![0.0; 5], vec![1.0, 2.0, 0.5, 3.0, 1.0]).unwrap(),
    ];
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (k, set) in sets.iter().enumerate() {
        let r = check_prox_bounds(&Euclidean, set, 10_000, Stream::new(400 + k as u64), 1e-9);
        violations += r.violations;
        worst = worst.max(r.max_violation);
    }
    let el = t.elapsed();
    verdict(
        violations == 0 && within(el, 10.0),
        format!("{violations} violations in 2 x 1e4 trials (slack 1e-9, largest gap {worst:.1e}), {el:.1?} (limit 10 s)"),
    )
}

fn brute_force_simplex(y: &[f64]) -> Vec<f64> {
    let d = y.len();
    let mut best = (f64::INFINITY, vec![]);
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|k| mask >> k & 1 == 1).collect();
        let shift = (support.iter().map(|&k| y[k]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; d];
        support.iter().for_each(|&k| x[k] = y[k] - shift);
        if x.iter().all(|v| *v >= -1e-12) {
            let dist: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best.0 {
                best = (dist, x);
            }
        }
    }
    best.1
}

fn c5_projection_oracle() -> Verdict {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..1000u64 {
        let mut rng = Stream::new(500).child(k).rng();
        let d = rng.random_range(1..=6);
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let fast = project_simplex(&y, 1.0);
        let slow = brute_force_simplex(&y);
        worst = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    let el = t.elapsed();
    verdict(
        worst <= 1e-8 && within(el, 10.0),
        format!("largest deviation from support enumeration {worst:.1e} on 1e3 points, dim <= 6 (need <= 1e-8), {el:.1?} (limit 10 s)"),
    )
}

fn c6_reference() -> Verdict {
    let t = Instant::now();
    let cfg = preset("cournot_p0.cfg");
    let game = experiment::build_game(&cfg).unwrap();
    let opts = SolverOptions {
        tol: cfg.solver_tol,
        max_iter: cfg.solver_max_iter,
        improvement_tol: 1e-6,
        seed: cfg.instance_seed,
        ..SolverOptions::default()
    };
    let r = match solve_ne_reference(&game, &opts) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("solver failed: {e}")),
    };
    let step = 1.0 / game.params().lipschitz();
    let mut rng = Stream::new(600).child(purpose::START).rng();
    let other: Vec<f64> = (0..game.num_players()).flat_map(|i| game.strategy_set(i).sample_point(&mut rng)).collect();
    let (x_other, _, _) = projected_gradient_solve(&game, &other, opts.tol, opts.max_iter, step).unwrap();
    let gap = r.x_star.iter().zip(&x_other).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let improvement = r.per_player_improvement.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let el = t.elapsed();
    verdict(
        r.vi_residual <= 1e-8 && improvement <= 1e-6 && gap <= 1e-7 && within(el, 60.0),
        format!(
            "20 x 5 instance: residual {:.1e} (need <= 1e-8), best-response gain {improvement:.1e} (need <= 1e-6), start gap {gap:.1e} (need <= 1e-7), {el:.1?} (limit 60 s)",
            r.vi_residual
        ),
    )
}

fn c7_duopoly() -> Verdict {
    let t = Instant::now();
    let cfg = preset("duopoly.cfg");
    let out = experiment::execute(&cfg, workers()).unwrap();
    let x = &out.runs[0].final_point;
    let err: f64 = x.iter().map(|v| (v - 2.0 / 3.0).powi(2)).sum();
    let beta = out.summary.beta.unwrap();
    let el = t.elapsed();
    verdict(
        err < 1e-3 && cfg.gamma * beta > 1.0 && cfg.p == 0.0 && cfg.iterations == 10_000 && within(el, 10.0),
        format!(
            "gamma beta = {:.2}, final |x - (2/3, 2/3)|^2 = {err:.2e} after 1e4 steps (need < 1e-3), {el:.1?} (limit 10 s)",
            cfg.gamma * beta
        ),
    )
}

struct RateRuns {
    p0: ExperimentOutcome,
}

fn c8_rates() -> (Verdict, Option<RateRuns>) {
    let t = Instant::now();
    let cfg0 = preset("cournot_p0.cfg");
    let cfg1 = preset("cournot_p1.cfg");
    let p0 = experiment::execute(&cfg0, workers()).unwrap();
    let p1 = experiment::execute(&cfg1, workers()).unwrap();
    let s0 = p0.summary.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
    let s1 = p1.summary.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
    let w0 = p0.summary.fit.as_ref().map(|f| f.window).unwrap_or_default();
    let w1 = p1.summary.fit.as_ref().map(|f| f.window).unwrap_or_default();
    let el = t.elapsed();
    let pass = (-0.7..=-0.35).contains(&s0)
        && (-1.25..=-0.75).contains(&s1)
        && s1 < s0
        && cfg0.seeds.len() == 20
        && cfg1.seeds.len() == 20;
    let detail = format!(
        "p = 0: slope {s0:.3} on [{}, {}] (need [-0.7, -0.35]); p = 1: slope {s1:.3} on [{}, {}] (need [-1.25, -0.75]); 20 seeds each, gamma beta = {:.2}, {el:.0?}",
        w0.0,
        w0.1,
        w1.0,
        w1.1,
        cfg0.gamma * p0.summary.beta.unwrap_or(f64::NAN)
    );
    (verdict(pass, detail), Some(RateRuns { p0 }))
}

fn c9_baseline(runs: Option<&RateRuns>) -> Verdict {
    let t = Instant::now();
    let cfg0 = preset("cournot_p0.cfg");
    let owned;
    let p0 = match runs {
        Some(r) => &r.p0,
        None => {
            owned = experiment::execute(&cfg0, workers()).unwrap();
            &owned
        }
    };
    let ss_cfg = preset("single_shot.cfg");
    let ss = experiment::execute(&ss_cfg, workers()).unwrap();
    let slope = |o: &ExperimentOutcome| o.summary.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
    let (sdl_final, ss_final) = (p0.summary.final_mean_sq_error, ss.summary.final_mean_sq_error);
    let (sdl_slope, ss_slope) = (slope(p0), slope(&ss));
    let el = t.elapsed();
    verdict(
        ss_final > sdl_final
            && ss_slope - sdl_slope >= 0.05
            && ss_cfg.iterations == cfg0.iterations
            && ss_cfg.iterations == 100_000,
        format!(
            "T = 1e5, 20 seeds: final mean sq error single-shot {ss_final:.3e} vs SDL {sdl_final:.3e}; slopes {ss_slope:.3} vs {sdl_slope:.3} (need gap >= 0.05), {el:.0?}"
        ),
    )
}

fn c10_isolation() -> Verdict {
    let game = CournotGame::new(CournotParams::generate(20, 5, 1).unwrap(), CournotConstraint::UnitSimplex).unwrap();
    let layout = game.layout().clone();
    let s = Schedules::new(2.0, 1, 1.0, 0.1).unwrap();
    let seed = 1000;
    let trace = run_sdl(&game, &s, &game.center(), &RunOptions::new(40).record_every(1), None, seed).unwrap();
    let player = 3;
    let mut rng = Stream::new(1001).rng();
    let mut mismatches = 0;
    let mut checked = 0;
    let mut rescalings = Vec::new();
    for _ in 0..5 {
        let rival = loop {
            let k = rng.random_range(0..game.num_players());
            if k != player {
                break k;
            }
        };
        let factor = 10f64.powf(rng.random_range(-2.0..2.0));
        rescalings.push(format!("{rival}:{factor:.3}"));
        let mut factors = vec![1.0; game.num_players()];
        factors[rival] = factor;
        let scaled = ScaledCosts { inner: game.clone(), factors };
        for w in trace.iterates.windows(2) {
            let (n, prev) = (w[1].0, &w[0].1);
            let replay = sdl_step(&scaled, &s, prev, n, ProjectionMode::FullSet, seed).unwrap();
            let r = layout.range(player);
            let same = replay[r.clone()].iter().zip(&w[1].1[r]).all(|(a, b)| a.to_bits() == b.to_bits());
            mismatches += usize::from(!same);
            checked += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!(
            "player {player}: {mismatches} non-identical updates in {checked} replayed steps under rescalings [{}]",
            rescalings.join(", ")
        ),
    )
}

fn read_dir_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (PathBuf::from(p.file_name().unwrap()), bytes)
        })
        .collect();
    files.sort();
    files
}

fn c11_reproducibility() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset("cournot_p0.cfg");
    cfg.players = 6;
    cfg.markets = 3;
    cfg.iterations = 3000;
    cfg.seeds = vec![0, 1, 2, 3];
    cfg.output_dir = tmp.path().join("first");
    run_experiment(&cfg, workers()).unwrap();

    let mut replay = ExperimentConfig::from_file(&cfg.output_dir.join(experiment::CONFIG_FILE)).unwrap();
    replay.output_dir = tmp.path().join("second");
    run_experiment(&replay, workers()).unwrap();

    let first = read_dir_files(&cfg.output_dir.join(experiment::TRACE_DIR));
    let second = read_dir_files(&replay.output_dir.join(experiment::TRACE_DIR));
    let mean_same = std::fs::read(cfg.output_dir.join(experiment::MEAN_FILE)).unwrap()
        == std::fs::read(replay.output_dir.join(experiment::MEAN_FILE)).unwrap();
    let complete = [
        experiment::CONFIG_FILE,
        experiment::REFERENCE_FILE,
        experiment::MEAN_FILE,
        experiment::SUMMARY_FILE,
        experiment::PLOT_FILE,
    ]
    .iter()
    .all(|f| replay.output_dir.join(f).is_file());
    verdict(
        first.len() == 4 && first == second && mean_same && complete,
        format!(
            "{} of {} trace CSVs byte-identical after re-running the persisted config; mean curve identical: {mean_same}; artifacts complete: {complete}",
            first.iter().zip(&second).filter(|(a, b)| a == b).count(),
            first.len()
        ),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("NASHSEEK_ACCEPT_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |k: u32| only.as_ref().is_none_or(|o| o.contains(&k));
    let names = [
        "SPSA unbiasedness",
        "variance orders",
        "bias order",
        "prox-step bounds",
        "projection oracle",
        "reference certification",
        "closed-form convergence",
        "rate slopes",
        "single-shot baseline ordering",
        "information isolation",
        "reproducibility",
    ];
    let mut failed = 0;
    let mut report = |k: u32, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {k:>2} {tag}  {}: {}", names[k as usize - 1], v.detail);
        failed += usize::from(!v.pass);
    };
    let simple: [(u32, fn() -> Verdict); 7] = [
        (1, c1_spsa_unbiased),
        (2, c2_variance_orders),
        (3, c3_bias_order),
        (4, c4_prox_bounds),
        (5, c5_projection_oracle),
        (6, c6_reference),
        (7, c7_duopoly),
    ];
    for (k, f) in simple {
        if wanted(k) {
            report(k, f());
        }
    }
    let mut rate_runs = None;
    if wanted(8) {
        let (v, runs) = c8_rates();
        rate_runs = runs;
        report(8, v);
    }
    if wanted(9) {
        report(9, c9_baseline(rate_runs.as_ref()));
    }
    if wanted(10) {
        report(10, c10_isolation());
    }
    if wanted(11) {
        report(11, c11_reproducibility());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all selected acceptance criteria passed");
}
