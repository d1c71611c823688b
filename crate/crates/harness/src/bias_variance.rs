//! Estimator error over a grid of smoothing radii and pair counts.

use std::fmt::Write as _;

use nashseek_core::estimators::empirical_bias_variance;
use nashseek_core::{CournotConstraint, CournotGame, CournotParams, EstimatorKind, Game, Stream};

use crate::error::{HarnessError, Result};
use crate::targets::{NoisyQuadratic, OwnCost};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// `0.5 |x|^2 + U[-1, 1]` in four dimensions, at its minimiser.
    Quadratic,
    /// Firm 0's cost on the default Cournot instance, rivals at the barycentre.
    Cournot,
}

impl std::str::FromStr for Target {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Self::Quadratic),
            "cournot" => Ok(Self::Cournot),
            other => Err(HarnessError::config(format!("unknown target `{other}` (quadratic|cournot)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub estimator: EstimatorKind,
    pub target: Target,
    pub hs: Vec<f64>,
    pub ells: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub h: f64,
    pub ell: usize,
    pub bias_norm: f64,
    pub max_bias_z: f64,
    pub variance: f64,
    pub mse: f64,
}

/// `a..b` doubles from `a` up to `b`; otherwise a comma-separated list.
pub fn parse_geometric_f64(v: &str) -> Result<Vec<f64>> {
    let bad = || HarnessError::config(format!("cannot parse grid `{v}`"));
    if let Some((lo, hi)) = v.split_once("..") {
        let (lo, hi): (f64, f64) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
        if !(lo > 0.0 && hi >= lo) {
            return Err(bad());
        }
        let mut out = vec![lo];
        while *out.last().unwrap() * 2.0 <= hi * (1.0 + 1e-9) {
            out.push(out.last().unwrap() * 2.0);
        }
        Ok(out)
    } else {
        v.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    }
}

pub fn parse_geometric_usize(v: &str) -> Result<Vec<usize>> {
    let values = parse_geometric_f64(v)?;
    values
        .iter()
        .map(|x| {
            if x.fract() == 0.0 && *x >= 1.0 {
                Ok(*x as usize)
            } else {
                Err(HarnessError::config(format!("pair counts must be positive integers, got {x}")))
            }
        })
        .collect()
}

pub fn run_grid(spec: &GridSpec) -> Result<Vec<GridRow>> {
    let game;
    let mut rows = Vec::new();
    let stream = Stream::new(spec.seed);
    let (eval, x, truth): (Box<dyn Fn(&[f64], &mut nashseek_core::StreamRng) -> f64 + '_>, Vec<f64>, Vec<f64>) =
        match spec.target {
            Target::Quadratic => {
                let q = NoisyQuadratic { dim: 4, noise: 1.0 };
                (Box::new(move |x, rng| q.eval(x, rng)), vec![0.0; 4], vec![0.0; 4])
            }
            Target::Cournot => {
                game = CournotGame::new(CournotParams::generate(20, 5, 1)?, CournotConstraint::UnitSimplex)?;
                let own = OwnCost { game: &game, player: 0, base: game.center() };
                let (x, g) = (own.own_point(), own.gradient());
                (Box::new(move |z, rng| own.eval(z, rng)), x, g)
            }
        };
    for (a, &h) in spec.hs.iter().enumerate() {
        for (b, &ell) in spec.ells.iter().enumerate() {
            let cell = stream.child(a as u64).child(b as u64);
            let r = empirical_bias_variance(spec.estimator, &eval, &x, &truth, h, ell, spec.replications, cell)?;
            rows.push(GridRow {
                h,
                ell,
                bias_norm: r.empirical_bias_norm,
                max_bias_z: r.max_bias_z(),
                variance: r.empirical_variance,
                mse: r.mse,
            });
        }
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Variance slope against `h` at the smallest `ell`, and against `ell` at the
/// smallest `h`.
pub fn grid_slopes(rows: &[GridRow]) -> (Option<f64>, Option<f64>) {
    let Some(ell0) = rows.iter().map(|r| r.ell).min() else {
        return (None, None);
    };
    let h0 = rows.iter().map(|r| r.h).fold(f64::INFINITY, f64::min);
    let (hs, hv): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.ell == ell0).map(|r| (r.h, r.variance)).unzip();
    let (ls, lv): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.h == h0)
        .map(|r| (r.ell as f64, r.variance))
        .unzip();
    (log_log_slope(&hs, &hv), log_log_slope(&ls, &lv))
}

pub fn grid_csv(spec: &GridSpec, rows: &[GridRow]) -> String {
    let mut s = String::from("estimator,h,ell,replications,bias_norm,max_bias_z,variance,mse\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            spec.estimator.name(),
            r.h,
            r.ell,
            spec.replications,
            r.bias_norm,
            r.max_bias_z,
            r.variance,
            r.mse
        );
    }
    s
}
