//! Flat `key = value` experiment configs.
//!
//! One key per line, `#` starts a comment, lists are comma separated. Every
//! field has a default, so a config only needs to name what it changes. The
//! serialized form written next to each run lists every key explicitly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nashseek_core::ProjectionMode;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GameKind {
    /// Random multi-market Cournot instance.
    Cournot,
    /// Two firms, one market, `a = 5, b = 1, c = 3`, boxes `[0, 10]`.
    Duopoly,
}

impl GameKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Cournot => "cournot",
            Self::Duopoly => "duopoly",
        }
    }
}

impl FromStr for GameKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cournot" => Ok(Self::Cournot),
            "duopoly" => Ok(Self::Duopoly),
            other => Err(HarnessError::config(format!("unknown game `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Sdl,
    SingleShot,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sdl => "sdl",
            Self::SingleShot => "single_shot",
        }
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdl" => Ok(Self::Sdl),
            "single_shot" | "single-shot" => Ok(Self::SingleShot),
            other => Err(HarnessError::config(format!("unknown algorithm `{other}`"))),
        }
    }
}

pub fn parse_projection(s: &str) -> Result<ProjectionMode> {
    match s {
        "full" => Ok(ProjectionMode::FullSet),
        "hyperplane" => Ok(ProjectionMode::HyperplaneOnly),
        other => Err(HarnessError::config(format!("unknown projection `{other}` (full|hyperplane)"))),
    }
}

pub fn projection_name(mode: ProjectionMode) -> &'static str {
    match mode {
        ProjectionMode::FullSet => "full",
        ProjectionMode::HyperplaneOnly => "hyperplane",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub game: GameKind,
    pub players: usize,
    pub markets: usize,
    pub instance_seed: u64,
    /// Multiplier on the default shock half-widths; 0 makes the game noiseless.
    pub noise_scale: f64,
    pub algorithm: Algorithm,
    pub projection: ProjectionMode,
    pub gamma: f64,
    pub ell0: usize,
    pub p: f64,
    pub h0: f64,
    /// Smoothing decay exponent of the single-shot learner.
    pub h_exponent: f64,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub record_every: usize,
    /// Reference file to load instead of solving for the equilibrium.
    pub reference: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub improvement_tol: f64,
    /// Start of the slope window as a fraction of the run length.
    pub fit_from: f64,
    pub plot_log: bool,
    /// Sweep only: `p` values and per-`p` iteration budgets (`p:T` pairs).
    pub sweep_p: Vec<f64>,
    pub iters_per_p: Vec<(f64, usize)>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            game: GameKind::Cournot,
            players: 20,
            markets: 5,
            instance_seed: 1,
            noise_scale: 1.0,
            algorithm: Algorithm::Sdl,
            projection: ProjectionMode::FullSet,
            gamma: 1.0,
            ell0: 1,
            p: 0.0,
            h0: 0.1,
            h_exponent: 1.0 / 3.0,
            iterations: 100_000,
            seeds: (0..20).collect(),
            record_every: 1000,
            reference: None,
            output_dir: PathBuf::from("out"),
            solver_tol: 1e-10,
            solver_max_iter: 1_000_000,
            improvement_tol: 1e-6,
            fit_from: 0.1,
            plot_log: true,
            sweep_p: vec![0.0, 0.5, 1.0],
            iters_per_p: Vec::new(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| HarnessError::config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(HarnessError::config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

/// Comma-separated list; `a..b` inside a list expands to `a, a+1, ..., b-1`.
pub fn parse_seed_list(v: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let (lo, hi): (u64, u64) = (parse_num("seeds", lo)?, parse_num("seeds", hi)?);
            out.extend(lo..hi);
        } else {
            out.push(parse_num("seeds", item)?);
        }
    }
    Ok(out)
}

pub fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_iters_per_p(v: &str) -> Result<Vec<(f64, usize)>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (p, t) = item
                .split_once(':')
                .ok_or_else(|| HarnessError::config(format!("`iters_per_p`: expected p:T, got `{item}`")))?;
            Ok((parse_num("iters_per_p", p.trim())?, parse_num("iters_per_p", t.trim())?))
        })
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "game" => self.game = v.parse()?,
            "players" => self.players = parse_num(key, v)?,
            "markets" => self.markets = parse_num(key, v)?,
            "instance_seed" => self.instance_seed = parse_num(key, v)?,
            "noise_scale" => self.noise_scale = parse_num(key, v)?,
            "algorithm" => self.algorithm = v.parse()?,
            "projection" => self.projection = parse_projection(v)?,
            "gamma" => self.gamma = parse_num(key, v)?,
            "ell0" => self.ell0 = parse_num(key, v)?,
            "p" => self.p = parse_num(key, v)?,
            "h0" => self.h0 = parse_num(key, v)?,
            "h_exponent" => self.h_exponent = parse_num(key, v)?,
            "iterations" => self.iterations = parse_num(key, v)?,
            "seeds" => self.seeds = parse_seed_list(v)?,
            "record_every" => self.record_every = parse_num(key, v)?,
            "reference" => self.reference = (!v.is_empty()).then(|| PathBuf::from(v)),
            "output_dir" => self.output_dir = PathBuf::from(v),
            "solver_tol" => self.solver_tol = parse_num(key, v)?,
            "solver_max_iter" => self.solver_max_iter = parse_num(key, v)?,
            "improvement_tol" => self.improvement_tol = parse_num(key, v)?,
            "fit_from" => self.fit_from = parse_num(key, v)?,
            "plot_log" => self.plot_log = parse_bool(key, v)?,
            "sweep_p" => self.sweep_p = parse_f64_list(key, v)?,
            "iters_per_p" => self.iters_per_p = parse_iters_per_p(v)?,
            other => return Err(HarnessError::config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::config(msg));
        if self.iterations < 1 {
            return bad("iterations must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("need at least one seed".into());
        }
        if self.record_every < 1 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.fit_from > 0.0 && self.fit_from < 1.0) {
            return bad(format!("fit_from must lie in (0, 1), got {}", self.fit_from));
        }
        if !(self.noise_scale >= 0.0) {
            return bad("noise_scale must be non-negative".into());
        }
        Ok(())
    }

    /// Iteration budget for a sweep point, falling back to `iterations`.
    pub fn iterations_for(&self, p: f64) -> usize {
        self.iters_per_p
            .iter()
            .find(|(q, _)| (q - p).abs() < 1e-12)
            .map(|(_, t)| *t)
            .unwrap_or(self.iterations)
    }

    /// Every key, in a fixed order, in a form [`parse`](Self::parse) reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("game", self.game.name().into());
        kv("players", self.players.to_string());
        kv("markets", self.markets.to_string());
        kv("instance_seed", self.instance_seed.to_string());
        kv("noise_scale", self.noise_scale.to_string());
        kv("algorithm", self.algorithm.name().into());
        kv("projection", projection_name(self.projection).into());
        kv("gamma", self.gamma.to_string());
        kv("ell0", self.ell0.to_string());
        kv("p", self.p.to_string());
        kv("h0", self.h0.to_string());
        kv("h_exponent", self.h_exponent.to_string());
        kv("iterations", self.iterations.to_string());
        kv("seeds", join(&self.seeds));
        kv("record_every", self.record_every.to_string());
        kv(
            "reference",
            self.reference.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        kv("output_dir", self.output_dir.display().to_string());
        kv("solver_tol", self.solver_tol.to_string());
        kv("solver_max_iter", self.solver_max_iter.to_string());
        kv("improvement_tol", self.improvement_tol.to_string());
        kv("fit_from", self.fit_from.to_string());
        kv("plot_log", self.plot_log.to_string());
        kv("sweep_p", join(&self.sweep_p));
        kv(
            "iters_per_p",
            self.iters_per_p.iter().map(|(p, t)| format!("{p}:{t}")).collect::<Vec<_>>().join(","),
        );
        s
    }
}
