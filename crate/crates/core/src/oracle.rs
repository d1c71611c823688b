//! Ground truth for experiments: a certified reference equilibrium of the
//! expected game, and power-law fits of error curves.

use crate::error::{invalid, Error, Result};
use crate::game::Game;
use crate::stream::{purpose, Stream};

/// A reference equilibrium with its two certificates.
#[derive(Clone, Debug, PartialEq)]
pub struct NeReference {
    pub x_star: Vec<f64>,
    /// Natural-map residual `|x - P(x - phi(x))|`.
    pub vi_residual: f64,
    /// `f_i(x*) - min_{z in X_i} f_i(z, x*_{-i})` for each player.
    pub per_player_improvement: Vec<f64>,
    pub solver_iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Target natural-map residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Fixed step; defaults to `1 / L` from the game's Lipschitz constant.
    pub step: Option<f64>,
    /// Largest accepted best-response improvement.
    pub improvement_tol: f64,
    /// Seed of the second, random starting point.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1_000_000,
            step: None,
            improvement_tol: 1e-8,
            seed: 0,
        }
    }
}

fn gradient<G: Game + ?Sized>(game: &G, x: &[f64]) -> Result<Vec<f64>> {
    game.exact_gradient(x).ok_or(Error::MissingOracle("an exact gradient"))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn natural_step<G: Game + ?Sized>(game: &G, x: &[f64], grad: &[f64], tau: f64) -> Vec<f64> {
    let y: Vec<f64> = x.iter().zip(grad).map(|(v, g)| v - tau * g).collect();
    game.project(&y)
}

/// `|x - P(x - tau phi(x))|` with per-player projections.
pub fn vi_residual<G: Game + ?Sized>(game: &G, x: &[f64], tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau", "must be positive"));
    }
    let g = gradient(game, x)?;
    Ok(distance(x, &natural_step(game, x, &g, tau)))
}

fn default_step<G: Game + ?Sized>(game: &G, step: Option<f64>) -> Result<f64> {
    match step.or_else(|| game.lipschitz().map(|l| 1.0 / l)) {
        Some(s) if s > 0.0 && s.is_finite() => Ok(s),
        Some(s) => Err(invalid("step", format!("must be positive, got {s}"))),
        None => Err(Error::MissingOracle("a Lipschitz constant or explicit step")),
    }
}

/// Fixed-step projected gradient on the variational inequality, run until
/// the natural-map residual drops to `tol`. Returns the point, the
/// iteration count and the final residual.
pub fn projected_gradient_solve<G: Game + ?Sized>(
    game: &G,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
    step: f64,
) -> Result<(Vec<f64>, usize, f64)> {
    let mut x = game.project(x0);
    let mut residual = f64::INFINITY;
    for k in 0..=max_iter {
        let g = gradient(game, &x)?;
        residual = distance(&x, &natural_step(game, &x, &g, 1.0));
        if residual <= tol {
            return Ok((x, k, residual));
        }
        if k < max_iter {
            x = natural_step(game, &x, &g, step);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// How much `player` could lower its expected cost by deviating from `x`
/// while rivals stay put, found by projected gradient on its own block.
pub fn best_response_improvement<G: Game + ?Sized>(
    game: &G,
    x: &[f64],
    player: usize,
    step: f64,
    max_iter: usize,
) -> Result<f64> {
    let layout = game.layout();
    let range = layout.range(player);
    let set = game.strategy_set(player);
    let current = game
        .expected_cost(player, x)
        .ok_or(Error::MissingOracle("expected costs"))?;
    let mut joint = x.to_vec();
    for _ in 0..max_iter {
        let g = gradient(game, &joint)?;
        let own = &joint[range.clone()];
        let y: Vec<f64> = own.iter().zip(&g[range.clone()]).map(|(v, d)| v - step * d).collect();
        let next = set.project(&y);
        let moved = distance(own, &next);
        joint[range.clone()].copy_from_slice(&next);
        if moved <= 1e-15 {
            break;
        }
    }
    let best = game.expected_cost(player, &joint).unwrap();
    Ok(current - best)
}

/// Solve the expected game from two starting points (the barycentre and a
/// seeded random feasible point), require them to agree within `10 tol`, and
/// certify the result by natural-map residual and per-player best responses.
pub fn solve_ne_reference<G: Game + ?Sized>(game: &G, opts: &SolverOptions) -> Result<NeReference> {
    if !(opts.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    if let Some(beta) = game.strong_monotonicity() {
        if !(beta > 0.0) {
            return Err(Error::NotStronglyMonotone { lambda_min: beta / 2.0 });
        }
    }
    let step = default_step(game, opts.step)?;
    let (x_star, iterations, _) = projected_gradient_solve(game, &game.center(), opts.tol, opts.max_iter, step)?;

    let layout = game.layout();
    let mut rng = Stream::new(opts.seed).child(purpose::START).rng();
    let other: Vec<f64> = (0..layout.num_players())
        .flat_map(|i| game.strategy_set(i).sample_point(&mut rng))
        .collect();
    let (x_other, _, _) = projected_gradient_solve(game, &other, opts.tol, opts.max_iter, step)?;
    let gap = distance(&x_star, &x_other);
    if gap > 10.0 * opts.tol {
        return Err(Error::Certificate(format!(
            "solutions from two starts differ by {gap:e}"
        )));
    }

    let vi = vi_residual(game, &x_star, 1.0)?;
    let per_player_improvement = (0..layout.num_players())
        .map(|i| best_response_improvement(game, &x_star, i, step, opts.max_iter))
        .collect::<Result<Vec<_>>>()?;
    if let Some((i, v)) = per_player_improvement
        .iter()
        .enumerate()
        .find(|(_, v)| **v > opts.improvement_tol)
    {
        return Err(Error::Certificate(format!(
            "player {i} can improve its expected cost by {v:e}"
        )));
    }
    Ok(NeReference {
        x_star,
        vi_residual: vi,
        per_player_improvement,
        solver_iterations: iterations,
    })
}

/// Least-squares line through `(log n, log mse)` over a window of iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Inclusive iteration range `(n_lo, n_hi)`.
    pub window: (usize, usize),
    pub r_squared: f64,
    pub points: usize,
}

/// Minimum number of points in a fitting window.
pub const MIN_FIT_POINTS: usize = 50;

/// The last decade `[T/10, T]` of a curve of length `T`.
pub fn last_decade(len: usize) -> (usize, usize) {
    ((len / 10).max(1), len)
}

/// Window `[ceil(frac T), T]`.
pub fn window_from_fraction(len: usize, frac: f64) -> (usize, usize) {
    (((frac * len as f64).ceil() as usize).clamp(1, len.max(1)), len)
}

/// Fit `log mse_n = intercept + slope log n` where `curve[k]` is the value at
/// iteration `n = k + 1`. Defaults to the last decade.
pub fn fit_rate_slope(curve: &[f64], window: Option<(usize, usize)>) -> Result<RateFit> {
    let (lo, hi) = window.unwrap_or_else(|| last_decade(curve.len()));
    if lo < 1 || hi > curve.len() || lo > hi {
        return Err(Error::RateFit(format!(
            "window ({lo}, {hi}) does not fit a curve of length {}",
            curve.len()
        )));
    }
    let count = hi - lo + 1;
    if count < MIN_FIT_POINTS {
        return Err(Error::RateFit(format!(
            "window holds {count} points, need at least {MIN_FIT_POINTS}"
        )));
    }
    let values = &curve[lo - 1..hi];
    if let Some(k) = values.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::RateFit(format!(
            "non-positive value {} at iteration {}",
            values[k],
            lo + k
        )));
    }
    let xs: Vec<f64> = (lo..=hi).map(|n| (n as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let nf = count as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        window: (lo, hi),
        r_squared,
        points: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cournot::{CournotConstraint, CournotGame, CournotParams};
    use crate::game::StrategySet;

    fn duopoly_box() -> CournotGame {
        let p = CournotParams::duopoly(5.0, 1.0, 3.0).with_noise_scale(0.0);
        let set = StrategySet::boxed(vec![0.0], vec![10.0]).unwrap();
        CournotGame::with_sets(p, vec![set.clone(), set]).unwrap()
    }

    #[test]
    fn duopoly_reference_is_closed_form() {
        let g = duopoly_box();
        let r = solve_ne_reference(&g, &SolverOptions::default()).unwrap();
        for v in &r.x_star {
            assert!((v - 2.0 / 3.0).abs() < 1e-9, "{v}");
        }
        assert!(r.vi_residual <= 1e-10);
    }

    #[test]
    fn symmetric_instance_gives_symmetric_equilibrium() {
        let mut p = CournotParams::generate(6, 3, 2).unwrap();
        let row = p.c[..3].to_vec();
        for i in 0..6 {
            p.c[i * 3..(i + 1) * 3].copy_from_slice(&row);
        }
        let g = CournotGame::new(p, CournotConstraint::UnitSimplex).unwrap();
        let r = solve_ne_reference(&g, &SolverOptions::default()).unwrap();
        for i in 1..6 {
            for j in 0..3 {
                assert!((r.x_star[i * 3 + j] - r.x_star[j]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn residual_properties() {
        let g = duopoly_box();
        let r = solve_ne_reference(&g, &SolverOptions::default()).unwrap();
        assert!(vi_residual(&g, &r.x_star, 2.0).unwrap() <= 2e-10);
        let mut rng = Stream::new(4).rng();
        for _ in 0..200 {
            let dir = crate::estimators::sample_unit_sphere(2, &mut rng);
            let x: Vec<f64> = r.x_star.iter().zip(&dir).map(|(v, d)| v + 1e-3 * d).collect();
            assert!(vi_residual(&g, &x, 1.0).unwrap() > 0.0);
        }
        assert!(vi_residual(&g, &r.x_star, 0.0).is_err());
    }

    #[test]
    fn residual_decreases_along_small_fixed_steps() {
        let g = CournotGame::new(CournotParams::generate(5, 3, 8).unwrap(), CournotConstraint::UnitSimplex).unwrap();
        let step = 1.0 / g.lipschitz().unwrap();
        let mut x = g.center();
        let mut prev = vi_residual(&g, &x, step).unwrap();
        for _ in 0..300 {
            let grad = g.exact_gradient(&x).unwrap();
            x = natural_step(&g, &x, &grad, step);
            let r = vi_residual(&g, &x, step).unwrap();
            assert!(r <= prev * (1.0 + 1e-12) + 1e-14, "{r} > {prev}");
            prev = r;
        }
    }

    #[test]
    fn non_convergence_reports_residual() {
        let g = duopoly_box();
        let err = projected_gradient_solve(&g, &[0.0, 0.0], 1e-14, 2, 0.01).unwrap_err();
        match err {
            Error::NoConvergence { iterations, residual } => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_power_law_slope() {
        let curve: Vec<f64> = (1..=1000).map(|n| 7.0 / n as f64).collect();
        let fit = fit_rate_slope(&curve, None).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-6);
        assert!(fit.r_squared > 0.999999);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-6);
        assert_eq!(fit.window, (100, 1000));
    }

    #[test]
    fn perturbed_power_law_slope() {
        use rand::Rng;
        let mut rng = Stream::new(12).rng();
        let curve: Vec<f64> = (1..=5000)
            .map(|n| (n as f64).powf(-0.5) * (1.0 + 0.1 * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        let fit = fit_rate_slope(&curve, None).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn fit_rejections() {
        let short: Vec<f64> = (1..=40).map(|n| 1.0 / n as f64).collect();
        assert!(fit_rate_slope(&short, None).is_err());
        let mut curve: Vec<f64> = (1..=1000).map(|n| 1.0 / n as f64).collect();
        curve[500] = 0.0;
        assert!(matches!(fit_rate_slope(&curve, None), Err(Error::RateFit(_))));
        assert!(fit_rate_slope(&curve, Some((10, 400))).is_ok());
        assert!(fit_rate_slope(&curve, Some((0, 400))).is_err());
        assert!(fit_rate_slope(&curve, Some((10, 4000))).is_err());
    }
}
