//! Bregman-proximal strategy updates and the Euclidean projections behind
//! them.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::game::StrategySet;
use crate::stream::Stream;

/// Slack used when checking that an update's input is feasible. Iterate
/// chains accumulate rounding in the sum constraint, so this is looser than
/// the membership tolerance.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// A strongly convex distance-generating function `h` on a strategy set.
pub trait Regularizer {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Strong convexity modulus `sigma`.
    fn modulus(&self) -> f64;

    /// `argmin { <y, center - z> + D(z, center) : z in set }`.
    fn prox(&self, set: &StrategySet, center: &[f64], y: &[f64]) -> Vec<f64>;
}

/// `h(x) = |x|^2 / 2`, for which the prox step is a Euclidean projection.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Euclidean;

impl Regularizer for Euclidean {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn modulus(&self) -> f64 {
        1.0
    }

    fn prox(&self, set: &StrategySet, center: &[f64], y: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = center.iter().zip(y).map(|(c, v)| c + v).collect();
        set.project(&shifted)
    }
}

/// How the update maps a gradient step back onto the strategy set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProjectionMode {
    /// Exact prox step onto the player's full strategy set.
    #[default]
    FullSet,
    /// Closed-form affine step onto `1'x = s` that ignores sign constraints.
    HyperplaneOnly,
}

impl ProjectionMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FullSet => "full",
            Self::HyperplaneOnly => "hyperplane",
        }
    }
}

/// `D(x, x_ref) = h(x) - h(x_ref) - <grad h(x_ref), x - x_ref>`.
pub fn bregman_divergence<R: Regularizer + ?Sized>(reg: &R, x: &[f64], x_ref: &[f64]) -> Result<f64> {
    if x.len() != x_ref.len() {
        return Err(Error::DimensionMismatch {
            expected: x_ref.len(),
            actual: x.len(),
        });
    }
    let g = reg.gradient(x_ref);
    let linear: f64 = g.iter().zip(x.iter().zip(x_ref)).map(|(g, (a, b))| g * (a - b)).sum();
    Ok(reg.value(x) - reg.value(x_ref) - linear)
}

/// One mirror-descent update of a single player's strategy along `-gamma * grad`.
pub fn mirror_step<R: Regularizer + ?Sized>(
    reg: &R,
    set: &StrategySet,
    mode: ProjectionMode,
    x: &[f64],
    grad: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(crate::error::invalid("gamma", format!("step must be positive, got {gamma}")));
    }
    if x.len() != set.dim() || grad.len() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            actual: if x.len() != set.dim() { x.len() } else { grad.len() },
        });
    }
    match mode {
        ProjectionMode::FullSet => {
            if !set.contains(x, FEASIBILITY_SLACK) {
                return Err(Error::OutsideSet { set: set.kind_name() });
            }
            let y: Vec<f64> = grad.iter().map(|g| -gamma * g).collect();
            Ok(reg.prox(set, x, &y))
        }
        ProjectionMode::HyperplaneOnly => {
            let sum = set.sum_constraint().ok_or(Error::IncompatibleMode {
                mode: "hyperplane",
                set: set.kind_name(),
            })?;
            if !on_hyperplane(x, sum) {
                return Err(Error::OutsideSet { set: "sum hyperplane" });
            }
            let mut next = affine_step(x, grad, gamma);
            // exact arithmetic keeps the sum; put back what rounding removed
            let drift = (sum - next.iter().sum::<f64>()) / next.len() as f64;
            next.iter_mut().for_each(|v| *v += drift);
            Ok(next)
        }
    }
}

/// Whether `1'x = sum` up to [`FEASIBILITY_SLACK`], scaled by the size of `x`.
pub fn on_hyperplane(x: &[f64], sum: f64) -> bool {
    let scale = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    (x.iter().sum::<f64>() - sum).abs() <= FEASIBILITY_SLACK * scale
}

/// `x - gamma g + (1/m) 1 1' gamma g`.
pub fn affine_step(x: &[f64], grad: &[f64], gamma: f64) -> Vec<f64> {
    let mean = grad.iter().sum::<f64>() / grad.len() as f64;
    x.iter().zip(grad).map(|(v, g)| v - gamma * (g - mean)).collect()
}

pub fn project_box(y: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| v.max(*l).min(*h))
        .collect()
}

/// Projection onto the affine set `1'x = sum`.
pub fn project_hyperplane(y: &[f64], sum: f64) -> Vec<f64> {
    let shift = (y.iter().sum::<f64>() - sum) / y.len() as f64;
    y.iter().map(|v| v - shift).collect()
}

/// Euclidean projection onto `{x >= 0, 1'x = sum}` by sorting and
/// thresholding: find the largest `rho` with `u_rho > (sum_{r<=rho} u_r - sum)/rho`
/// over the descending sort `u`, then clamp `y - tau` at zero.
pub fn project_simplex(y: &[f64], sum: f64) -> Vec<f64> {
    debug_assert!(sum > 0.0);
    let mut u = y.to_vec();
    u.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (k, v) in u.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - sum) / (k + 1) as f64;
        if *v > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    let mut x: Vec<f64> = y.iter().map(|v| (v - tau).max(0.0)).collect();
    // absorb the rounding left in the sum into the support
    let support = x.iter().filter(|v| **v > 0.0).count();
    if support > 0 {
        let excess = (x.iter().sum::<f64>() - sum) / support as f64;
        if excess != 0.0 {
            x.iter_mut().filter(|v| **v > 0.0 && **v > excess).for_each(|v| *v -= excess);
        }
    }
    x
}

/// Outcome of a randomized check of the prox-step divergence bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxBoundsReport {
    pub trials: usize,
    pub violations: usize,
    pub max_violation: f64,
}

impl ProxBoundsReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Random-trial check of, for `p, x` in the set and `x+ = prox(x, y)`:
///
/// ```text
/// D(p, x)  >= sigma/2 |p - x|^2
/// D(p, x+) <= D(p, x) - D(x+, x) + <y, x+ - p>
///          <= D(p, x) + <y, x - p> + |y|^2 / (2 sigma)
/// ```
pub fn check_prox_bounds<R: Regularizer + ?Sized>(
    reg: &R,
    set: &StrategySet,
    trials: usize,
    stream: Stream,
    slack: f64,
) -> ProxBoundsReport {
    use rand::Rng;
    let sigma = reg.modulus();
    let mut violations = 0;
    let mut max_violation: f64 = 0.0;
    for t in 0..trials {
        let mut rng = stream.child(t as u64).rng();
        let p = set.sample_point(&mut rng);
        let x = set.sample_point(&mut rng);
        let scale = 10f64.powf(rng.random_range(-2.0..1.0));
        let y: Vec<f64> = (0..set.dim()).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let x_plus = reg.prox(set, &x, &y);

        let d_px = bregman_divergence(reg, &p, &x).unwrap();
        let d_pxp = bregman_divergence(reg, &p, &x_plus).unwrap();
        let d_xpx = bregman_divergence(reg, &x_plus, &x).unwrap();
        let dist2: f64 = p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
        let y_norm2: f64 = y.iter().map(|v| v * v).sum();
        let ip = |u: &[f64], v: &[f64]| -> f64 { y.iter().zip(u.iter().zip(v)).map(|(w, (a, b))| w * (a - b)).sum() };
        let middle = d_px - d_xpx + ip(&x_plus, &p);
        let right = d_px + ip(&x, &p) + y_norm2 / (2.0 * sigma);

        let gaps = [
            0.5 * sigma * dist2 - d_px,
            d_pxp - middle,
            middle - right,
        ];
        let worst = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if worst > slack {
            violations += 1;
        }
        max_violation = max_violation.max(worst.max(0.0));
    }
    ProxBoundsReport {
        trials,
        violations,
        max_violation,
    }
}
