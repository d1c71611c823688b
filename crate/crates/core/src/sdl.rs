//! Communication-free equilibrium learning.
//!
//! At iteration `n` all players jointly play `x + h_n Delta_j` and
//! `x - h_n Delta_j` for `ell_n` Rademacher directions `Delta_j`. Each player
//! sees only its own realized costs and its own slice of `Delta_j`, builds a
//! simultaneous-perturbation estimate of its own gradient, and takes a
//! mirror-descent step of size `gamma_n`. No player reads another player's
//! costs, gradient estimate or strategy.

use crate::error::{invalid, Error, Result};
use crate::estimators::{fill_rademacher, sample_unit_sphere, SpsaAccumulator};
use crate::game::{Game, StrategySet};
use crate::mirror::{mirror_step, on_hyperplane, Euclidean, ProjectionMode, FEASIBILITY_SLACK};
use crate::stream::{purpose, Stream};

/// Smoothing radii below this end a run early.
pub const MIN_SMOOTHING: f64 = 1e-12;

/// `gamma_n = gamma / n`, `ell_n = ceil(ell0 n^p)`, `h_n = h0 n^(-(p+1)/4)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedules {
    pub gamma: f64,
    pub ell0: usize,
    pub p: f64,
    pub h0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleStep {
    pub gamma: f64,
    pub ell: usize,
    pub h: f64,
}

fn check_iteration(n: usize) -> Result<()> {
    if n == 0 {
        Err(invalid("n", "iterations are numbered from 1"))
    } else {
        Ok(())
    }
}

impl Schedules {
    pub fn new(gamma: f64, ell0: usize, p: f64, h0: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be positive, got {gamma}")));
        }
        if ell0 < 1 {
            return Err(invalid("ell0", "must be at least 1"));
        }
        if !(p >= 0.0 && p.is_finite()) {
            return Err(invalid("p", format!("must be non-negative, got {p}")));
        }
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(invalid("h0", format!("must be positive, got {h0}")));
        }
        Ok(Self { gamma, ell0, p, h0 })
    }

    pub fn at(&self, n: usize) -> Result<ScheduleStep> {
        check_iteration(n)?;
        let nf = n as f64;
        let raw = self.ell0 as f64 * nf.powf(self.p);
        // guard against powf landing a hair above an integer
        let ell = ((raw - 1e-9).ceil() as usize).max(1);
        Ok(ScheduleStep {
            gamma: self.gamma / nf,
            ell,
            h: self.h0 * nf.powf(-(self.p + 1.0) / 4.0),
        })
    }

    /// Sum of `2 ell_n` over `n = 1..=iterations`.
    pub fn total_evaluations(&self, iterations: usize) -> u64 {
        (1..=iterations).map(|n| 2 * self.at(n).unwrap().ell as u64).sum()
    }
}

/// `gamma_n = gamma / n`, `h_n = h0 n^(-h_exponent)` for the single-shot learner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleShotSchedules {
    pub gamma: f64,
    pub h0: f64,
    pub h_exponent: f64,
}

impl SingleShotSchedules {
    pub const DEFAULT_H_EXPONENT: f64 = 1.0 / 3.0;

    pub fn new(gamma: f64, h0: f64, h_exponent: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be positive, got {gamma}")));
        }
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(invalid("h0", format!("must be positive, got {h0}")));
        }
        if !(h_exponent >= 0.0) {
            return Err(invalid("h_exponent", "must be non-negative"));
        }
        Ok(Self { gamma, h0, h_exponent })
    }

    pub fn at(&self, n: usize) -> Result<ScheduleStep> {
        check_iteration(n)?;
        let nf = n as f64;
        Ok(ScheduleStep {
            gamma: self.gamma / nf,
            ell: 1,
            h: self.h0 * nf.powf(-self.h_exponent),
        })
    }
}

/// Whether `gamma beta > 1`, the step condition for the mean-square rates.
pub fn step_condition_holds(gamma: f64, beta: f64) -> bool {
    gamma * beta > 1.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub iterations: usize,
    /// Keep every `record_every`-th iterate (squared errors are kept for all).
    pub record_every: usize,
    pub projection: ProjectionMode,
}

impl RunOptions {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            record_every: iterations.max(1),
            projection: ProjectionMode::FullSet,
        }
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn projection(mut self, mode: ProjectionMode) -> Self {
        self.projection = mode;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub seed: u64,
    /// `(n, x^n)` at `n = 0`, every `record_every` iterations, and the last one.
    pub iterates: Vec<(usize, Vec<f64>)>,
    /// `|x^n - x*|^2` for `n = 1..`, when a reference point was supplied.
    pub sq_error: Vec<f64>,
    /// Cumulative cost evaluations per player after each iteration.
    pub eval_counts: Vec<u64>,
    pub schedule_log: Vec<ScheduleStep>,
    /// Player updates that left a negative component (hyperplane mode only).
    pub negativity_events: u64,
    pub final_point: Vec<f64>,
    /// Set when the run ended because `h_n` underflowed.
    pub stopped_early: bool,
}

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.schedule_log.len()
    }
}

/// One learner's private state: its strategy, its set, and its running
/// gradient estimate. Updates read nothing but this struct and the
/// observations handed to it.
#[derive(Clone, Debug)]
struct Player<'g> {
    strategy: Vec<f64>,
    set: &'g StrategySet,
    acc: SpsaAccumulator,
    grad: Vec<f64>,
}

impl<'g> Player<'g> {
    fn new(strategy: Vec<f64>, set: &'g StrategySet) -> Self {
        let m = strategy.len();
        Self {
            strategy,
            set,
            acc: SpsaAccumulator::new(m),
            grad: vec![0.0; m],
        }
    }

    /// Write the strategy actually played, `x_i + scale * direction`.
    #[inline]
    fn play(&self, scale: f64, direction: &[f64], out: &mut [f64]) {
        for ((o, x), d) in out.iter_mut().zip(&self.strategy).zip(direction) {
            *o = x + scale * d;
        }
    }

    #[inline]
    fn observe_pair(&mut self, plus: f64, minus: f64, h: f64, own_delta: &[f64]) {
        self.acc.add_pair(plus, minus, h, own_delta);
    }

    fn update_from_pairs(&mut self, gamma: f64, mode: ProjectionMode) -> Result<()> {
        self.acc.mean_into(&mut self.grad);
        self.acc.reset();
        self.strategy = mirror_step(&Euclidean, self.set, mode, &self.strategy, &self.grad, gamma)?;
        Ok(())
    }

    fn update_from_shot(&mut self, value: f64, h: f64, z: &[f64], gamma: f64, mode: ProjectionMode) -> Result<()> {
        let scale = self.strategy.len() as f64 / h * value;
        self.grad.iter_mut().zip(z).for_each(|(g, s)| *g = scale * s);
        self.strategy = mirror_step(&Euclidean, self.set, mode, &self.strategy, &self.grad, gamma)?;
        Ok(())
    }
}

fn check_start<G: Game + ?Sized>(game: &G, x0: &[f64], mode: ProjectionMode) -> Result<()> {
    let layout = game.layout();
    if x0.len() != layout.total() {
        return Err(Error::DimensionMismatch {
            expected: layout.total(),
            actual: x0.len(),
        });
    }
    match mode {
        ProjectionMode::FullSet => game.check_feasible(x0, FEASIBILITY_SLACK),
        ProjectionMode::HyperplaneOnly => {
            for i in 0..layout.num_players() {
                let set = game.strategy_set(i);
                let sum = set.sum_constraint().ok_or(Error::IncompatibleMode {
                    mode: "hyperplane",
                    set: set.kind_name(),
                })?;
                let block = &x0[layout.range(i)];
                if !on_hyperplane(block, sum) {
                    return Err(Error::Infeasible {
                        player: i,
                        reason: "start is off the sum hyperplane".into(),
                    });
                }
            }
            Ok(())
        }
    }
}

fn tag_player(err: Error, player: usize) -> Error {
    match err {
        Error::OutsideSet { set } => Error::Infeasible {
            player,
            reason: format!("iterate left its {set} set"),
        },
        other => other,
    }
}

/// Joint-play environment plus one private learner per player.
struct Population<'g, G: Game + ?Sized> {
    game: &'g G,
    players: Vec<Player<'g>>,
    mode: ProjectionMode,
    delta: Vec<f64>,
    probe: Vec<f64>,
    costs_plus: Vec<f64>,
    costs_minus: Vec<f64>,
}

impl<'g, G: Game + ?Sized> Population<'g, G> {
    fn new(game: &'g G, x: &[f64], mode: ProjectionMode) -> Self {
        let layout = game.layout();
        let players = (0..layout.num_players())
            .map(|i| Player::new(x[layout.range(i)].to_vec(), game.strategy_set(i)))
            .collect();
        let (d, n) = (layout.total(), layout.num_players());
        Self {
            game,
            players,
            mode,
            delta: vec![0.0; d],
            probe: vec![0.0; d],
            costs_plus: vec![0.0; n],
            costs_minus: vec![0.0; n],
        }
    }

    fn joint(&self) -> Vec<f64> {
        self.players.iter().flat_map(|p| p.strategy.iter().copied()).collect()
    }

    fn write_joint(&self, out: &mut [f64]) {
        let layout = self.game.layout();
        for (i, p) in self.players.iter().enumerate() {
            out[layout.range(i)].copy_from_slice(&p.strategy);
        }
    }

    fn play(&mut self, scale: f64) {
        let layout = self.game.layout();
        for (i, p) in self.players.iter().enumerate() {
            let r = layout.range(i);
            p.play(scale, &self.delta[r.clone()], &mut self.probe[r]);
        }
    }

    fn check_costs(costs: &[f64], iteration: usize) -> Result<()> {
        match costs.iter().position(|c| !c.is_finite()) {
            Some(player) => Err(Error::NonFiniteCost { player, iteration }),
            None => Ok(()),
        }
    }

    fn sdl_iteration(&mut self, n: usize, step: ScheduleStep, stream: Stream) -> Result<()> {
        let h = step.h;
        for j in 0..step.ell {
            let pair = stream.child(j as u64);
            fill_rademacher(&mut pair.child(purpose::PERTURBATION).rng(), &mut self.delta);

            self.play(h);
            self.game
                .sample_costs(&self.probe, &mut pair.child(purpose::PLUS).rng(), &mut self.costs_plus);
            self.play(-h);
            self.game
                .sample_costs(&self.probe, &mut pair.child(purpose::MINUS).rng(), &mut self.costs_minus);
            Self::check_costs(&self.costs_plus, n)?;
            Self::check_costs(&self.costs_minus, n)?;

            let layout = self.game.layout();
            for (i, p) in self.players.iter_mut().enumerate() {
                p.observe_pair(self.costs_plus[i], self.costs_minus[i], h, &self.delta[layout.range(i)]);
            }
        }
        for (i, p) in self.players.iter_mut().enumerate() {
            p.update_from_pairs(step.gamma, self.mode).map_err(|e| tag_player(e, i))?;
        }
        Ok(())
    }

    fn single_shot_iteration(&mut self, n: usize, step: ScheduleStep, stream: Stream) -> Result<()> {
        let layout = self.game.layout();
        let sphere = stream.child(purpose::SPHERE);
        let directions: Vec<Vec<f64>> = (0..self.players.len())
            .map(|i| sample_unit_sphere(layout.dim(i), &mut sphere.child(i as u64).rng()))
            .collect();
        for (i, p) in self.players.iter().enumerate() {
            p.play(step.h, &directions[i], &mut self.probe[layout.range(i)]);
        }
        self.game
            .sample_costs(&self.probe, &mut stream.child(purpose::PLAY).rng(), &mut self.costs_plus);
        Self::check_costs(&self.costs_plus, n)?;
        for (i, p) in self.players.iter_mut().enumerate() {
            p.update_from_shot(self.costs_plus[i], step.h, &directions[i], step.gamma, self.mode)
                .map_err(|e| tag_player(e, i))?;
        }
        Ok(())
    }

    fn count_negative_blocks(&self) -> u64 {
        self.players
            .iter()
            .filter(|p| p.strategy.iter().any(|v| *v < 0.0))
            .count() as u64
    }
}

fn warn_step_condition<G: Game + ?Sized>(game: &G, gamma: f64) {
    if let Some(beta) = game.strong_monotonicity() {
        if !step_condition_holds(gamma, beta) {
            log::warn!("step constant gamma = {gamma} does not satisfy gamma > 1/beta = {}", 1.0 / beta);
        }
    }
}

enum Learner<'a> {
    Sdl(&'a Schedules),
    SingleShot(&'a SingleShotSchedules),
}

fn run<G: Game + ?Sized>(
    game: &G,
    learner: Learner<'_>,
    x0: &[f64],
    opts: &RunOptions,
    reference: Option<&[f64]>,
    seed: u64,
) -> Result<RunTrace> {
    if opts.iterations < 1 {
        return Err(invalid("iterations", "need at least one iteration"));
    }
    check_start(game, x0, opts.projection)?;
    if let Some(r) = reference {
        if r.len() != x0.len() {
            return Err(Error::DimensionMismatch {
                expected: x0.len(),
                actual: r.len(),
            });
        }
    }
    let gamma = match learner {
        Learner::Sdl(s) => s.gamma,
        Learner::SingleShot(s) => s.gamma,
    };
    warn_step_condition(game, gamma);

    let stream = Stream::new(seed);
    let mut pop = Population::new(game, x0, opts.projection);
    let t = opts.iterations;
    let mut trace = RunTrace {
        seed,
        iterates: vec![(0, x0.to_vec())],
        sq_error: Vec::with_capacity(if reference.is_some() { t } else { 0 }),
        eval_counts: Vec::with_capacity(t),
        schedule_log: Vec::with_capacity(t),
        negativity_events: 0,
        final_point: Vec::new(),
        stopped_early: false,
    };
    let mut joint = x0.to_vec();
    let mut evals = 0u64;
    for n in 1..=t {
        let step = match learner {
            Learner::Sdl(s) => s.at(n)?,
            Learner::SingleShot(s) => s.at(n)?,
        };
        if step.h < MIN_SMOOTHING {
            trace.stopped_early = true;
            break;
        }
        let it = stream.child(n as u64);
        match learner {
            Learner::Sdl(_) => {
                pop.sdl_iteration(n, step, it)?;
                evals += 2 * step.ell as u64;
            }
            Learner::SingleShot(_) => {
                pop.single_shot_iteration(n, step, it)?;
                evals += 1;
            }
        }
        if opts.projection == ProjectionMode::HyperplaneOnly {
            trace.negativity_events += pop.count_negative_blocks();
        }
        pop.write_joint(&mut joint);
        if let Some(r) = reference {
            trace
                .sq_error
                .push(joint.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum());
        }
        trace.eval_counts.push(evals);
        trace.schedule_log.push(step);
        if n % opts.record_every == 0 || n == t {
            trace.iterates.push((n, joint.clone()));
        }
    }
    if trace.stopped_early {
        let n = trace.schedule_log.len();
        if trace.iterates.last().map(|(k, _)| *k) != Some(n) {
            trace.iterates.push((n, joint.clone()));
        }
    }
    trace.final_point = pop.joint();
    Ok(trace)
}

/// Run the simultaneous-perturbation learner for `opts.iterations` steps.
pub fn run_sdl<G: Game + ?Sized>(
    game: &G,
    schedules: &Schedules,
    x0: &[f64],
    opts: &RunOptions,
    reference: Option<&[f64]>,
    seed: u64,
) -> Result<RunTrace> {
    run(game, Learner::Sdl(schedules), x0, opts, reference, seed)
}

/// Run the single-shot sphere-sampling learner for comparison.
pub fn run_single_shot_baseline<G: Game + ?Sized>(
    game: &G,
    schedules: &SingleShotSchedules,
    x0: &[f64],
    opts: &RunOptions,
    reference: Option<&[f64]>,
    seed: u64,
) -> Result<RunTrace> {
    run(game, Learner::SingleShot(schedules), x0, opts, reference, seed)
}

/// Replay iteration `n` of a seeded SDL run from the joint point `x_prev`.
pub fn sdl_step<G: Game + ?Sized>(
    game: &G,
    schedules: &Schedules,
    x_prev: &[f64],
    n: usize,
    mode: ProjectionMode,
    seed: u64,
) -> Result<Vec<f64>> {
    check_start(game, x_prev, mode)?;
    let step = schedules.at(n)?;
    let mut pop = Population::new(game, x_prev, mode);
    pop.sdl_iteration(n, step, Stream::new(seed).child(n as u64))?;
    Ok(pop.joint())
}
