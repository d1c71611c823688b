//! Zeroth-order gradient estimators built from noisy function values.
//!
//! * [`spsa_gradient`]: simultaneous perturbation with Rademacher directions,
//!   `2 * ell` evaluations regardless of dimension.
//! * [`single_shot_gradient`]: one evaluation at a point displaced along a
//!   uniform direction on the unit sphere.
//! * [`central_fd_gradient`]: coordinate-wise central differences,
//!   `2 * d` evaluations per repetition.
//!
//! Every evaluation draws its noise from its own derived stream, so the two
//! sides of a pair are independent and results do not depend on evaluation
//! order.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::stream::{purpose, Stream, StreamRng};

/// A Rademacher direction: every entry is exactly `+1` or `-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationVector(Vec<f64>);

impl PerturbationVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Componentwise reciprocal, which equals the vector itself for `+-1` entries.
    pub fn psi(&self) -> &[f64] {
        &self.0
    }
}

/// Fill `out` with i.i.d. Rademacher signs, 64 per generator word.
pub fn fill_rademacher(rng: &mut StreamRng, out: &mut [f64]) {
    for chunk in out.chunks_mut(64) {
        let bits = rng.next_u64();
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = if (bits >> k) & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
}

pub fn sample_perturbation(d: usize, rng: &mut StreamRng) -> PerturbationVector {
    let mut v = vec![0.0; d];
    fill_rademacher(rng, &mut v);
    PerturbationVector(v)
}

/// Uniform direction on the unit sphere in `R^m`.
pub fn sample_unit_sphere(m: usize, rng: &mut StreamRng) -> Vec<f64> {
    if m == 1 {
        return vec![if rng.next_u64() & 1 == 1 { 1.0 } else { -1.0 }];
    }
    loop {
        let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return z.into_iter().map(|v| v / norm).collect();
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub vector: Vec<f64>,
    pub h_used: f64,
    pub ell_used: usize,
    /// Noisy function evaluations spent on this estimate.
    pub eval_count: u64,
}

/// Running sum of simultaneous-perturbation pair quotients.
///
/// Used both by [`spsa_gradient`] and by learners that only see their own
/// slice of each joint perturbation.
#[derive(Clone, Debug)]
pub struct SpsaAccumulator {
    sum: Vec<f64>,
    pairs: usize,
}

impl SpsaAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: vec![0.0; dim],
            pairs: 0,
        }
    }

    pub fn reset(&mut self) {
        self.sum.iter_mut().for_each(|v| *v = 0.0);
        self.pairs = 0;
    }

    /// Add `(f(x + h delta) - f(x - h delta)) / (2h) * psi(delta)`.
    #[inline]
    pub fn add_pair(&mut self, plus: f64, minus: f64, h: f64, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.sum.len());
        let quotient = (plus - minus) / (2.0 * h);
        // psi(delta) = delta for Rademacher entries
        self.sum.iter_mut().zip(delta).for_each(|(s, d)| *s += quotient * d);
        self.pairs += 1;
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// Mean over the pairs added so far, written into `out`.
    pub fn mean_into(&self, out: &mut [f64]) {
        let scale = 1.0 / self.pairs.max(1) as f64;
        out.iter_mut().zip(&self.sum).for_each(|(o, s)| *o = s * scale);
    }

    pub fn estimate(&self, h: f64) -> GradientEstimate {
        let mut vector = vec![0.0; self.sum.len()];
        self.mean_into(&mut vector);
        GradientEstimate {
            vector,
            h_used: h,
            ell_used: self.pairs,
            eval_count: 2 * self.pairs as u64,
        }
    }
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(invalid("h", format!("smoothing radius must be positive, got {h}")))
    }
}

/// Simultaneous-perturbation estimate of `grad f(x)` from `ell` pairs.
pub fn spsa_gradient<F>(mut eval: F, x: &[f64], h: f64, ell: usize, stream: Stream) -> Result<GradientEstimate>
where
    F: FnMut(&[f64], &mut StreamRng) -> f64,
{
    check_h(h)?;
    if ell < 1 {
        return Err(invalid("ell", "need at least one perturbation pair"));
    }
    let d = x.len();
    let mut acc = SpsaAccumulator::new(d);
    let mut delta = vec![0.0; d];
    let mut probe = vec![0.0; d];
    for j in 0..ell {
        let pair = stream.child(j as u64);
        fill_rademacher(&mut pair.child(purpose::PERTURBATION).rng(), &mut delta);
        probe.iter_mut().zip(x.iter().zip(&delta)).for_each(|(p, (v, s))| *p = v + h * s);
        let plus = eval(&probe, &mut pair.child(purpose::PLUS).rng());
        probe.iter_mut().zip(x.iter().zip(&delta)).for_each(|(p, (v, s))| *p = v - h * s);
        let minus = eval(&probe, &mut pair.child(purpose::MINUS).rng());
        acc.add_pair(plus, minus, h, &delta);
    }
    Ok(acc.estimate(h))
}

/// One-evaluation sphere estimate `(m/h) f(x~) z` with `x~ = x + h z`.
///
/// `embed` places the displaced own strategy into the joint point that
/// `eval` consumes. Returns the estimate and the displaced point played.
pub fn single_shot_gradient<F, E>(
    mut eval: F,
    x: &[f64],
    embed: E,
    h: f64,
    stream: Stream,
) -> Result<(GradientEstimate, Vec<f64>)>
where
    F: FnMut(&[f64], &mut StreamRng) -> f64,
    E: Fn(&[f64]) -> Vec<f64>,
{
    check_h(h)?;
    let m = x.len();
    let z = sample_unit_sphere(m, &mut stream.child(purpose::SPHERE).rng());
    let played: Vec<f64> = x.iter().zip(&z).map(|(v, s)| v + h * s).collect();
    let value = eval(&embed(&played), &mut stream.child(purpose::PLAY).rng());
    let scale = m as f64 / h * value;
    let estimate = GradientEstimate {
        vector: z.iter().map(|s| scale * s).collect(),
        h_used: h,
        ell_used: 1,
        eval_count: 1,
    };
    Ok((estimate, played))
}

/// Coordinate-wise central differences averaged over `reps` noise draws.
pub fn central_fd_gradient<F>(mut eval: F, x: &[f64], h: f64, reps: usize, stream: Stream) -> Result<GradientEstimate>
where
    F: FnMut(&[f64], &mut StreamRng) -> f64,
{
    check_h(h)?;
    if reps < 1 {
        return Err(invalid("reps", "need at least one repetition"));
    }
    let d = x.len();
    let mut g = vec![0.0; d];
    let mut probe = x.to_vec();
    for r in 0..reps {
        let rep = stream.child(r as u64);
        for i in 0..d {
            let coord = rep.child(i as u64);
            probe[i] = x[i] + h;
            let plus = eval(&probe, &mut coord.child(purpose::PLUS).rng());
            probe[i] = x[i] - h;
            let minus = eval(&probe, &mut coord.child(purpose::MINUS).rng());
            probe[i] = x[i];
            g[i] += (plus - minus) / (2.0 * h);
        }
    }
    g.iter_mut().for_each(|v| *v /= reps as f64);
    Ok(GradientEstimate {
        vector: g,
        h_used: h,
        ell_used: reps,
        eval_count: 2 * (d * reps) as u64,
    })
}

/// Smoothing radius `scale * ell^(-1/6)`, which balances the `h^4` squared
/// bias against the `1/(ell h^2)` variance of one SPSA estimate. This is the
/// per-estimate MSE balance only; learning schedules use their own decay.
pub fn mse_balanced_h(scale: f64, ell: usize) -> f64 {
    scale * (ell.max(1) as f64).powf(-1.0 / 6.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Spsa,
    CentralDifference,
    /// `ell` independent single-shot estimates, averaged.
    SingleShot,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Spsa => "spsa",
            Self::CentralDifference => "fd",
            Self::SingleShot => "single_shot",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spsa" => Ok(Self::Spsa),
            "fd" | "central" => Ok(Self::CentralDifference),
            "single_shot" | "single-shot" => Ok(Self::SingleShot),
            other => Err(invalid("estimator", format!("unknown estimator `{other}`"))),
        }
    }
}

/// Monte Carlo bias and variance of an estimator at a fixed point.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasVarianceReport {
    pub mean_estimate: Vec<f64>,
    /// `mean_estimate - true_grad`.
    pub bias: Vec<f64>,
    pub empirical_bias_norm: f64,
    /// Trace of the sample covariance (normalized by the replication count).
    pub empirical_variance: f64,
    pub mse: f64,
    /// Standard error of each coordinate of the mean.
    pub standard_errors: Vec<f64>,
    pub replications: usize,
    pub evals_per_estimate: u64,
}

impl BiasVarianceReport {
    /// Largest `|bias_i| / se_i` over coordinates.
    pub fn max_bias_z(&self) -> f64 {
        self.bias
            .iter()
            .zip(&self.standard_errors)
            .map(|(b, se)| if *se > 0.0 { b.abs() / se } else if *b == 0.0 { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

/// Replicate an estimator `replications` times at `x` and summarize its error
/// against `true_grad`. Replication `r` uses `stream.child(r)`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_bias_variance<F>(
    kind: EstimatorKind,
    mut eval: F,
    x: &[f64],
    true_grad: &[f64],
    h: f64,
    ell: usize,
    replications: usize,
    stream: Stream,
) -> Result<BiasVarianceReport>
where
    F: FnMut(&[f64], &mut StreamRng) -> f64,
{
    if replications < 100 {
        return Err(invalid("replications", "need at least 100 replications"));
    }
    if true_grad.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: true_grad.len(),
        });
    }
    let d = x.len();
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    let mut sq_err = 0.0;
    let mut evals = 0;
    for r in 0..replications {
        let rep = stream.child(r as u64);
        let est = match kind {
            EstimatorKind::Spsa => spsa_gradient(&mut eval, x, h, ell, rep)?,
            EstimatorKind::CentralDifference => central_fd_gradient(&mut eval, x, h, ell, rep)?,
            EstimatorKind::SingleShot => {
                let shots = ell.max(1);
                let mut avg = vec![0.0; d];
                for s in 0..shots {
                    let (e, _) = single_shot_gradient(&mut eval, x, |p| p.to_vec(), h, rep.child(s as u64))?;
                    avg.iter_mut().zip(&e.vector).for_each(|(a, v)| *a += v / shots as f64);
                }
                GradientEstimate {
                    vector: avg,
                    h_used: h,
                    ell_used: shots,
                    eval_count: shots as u64,
                }
            }
        };
        evals = est.eval_count;
        let count = (r + 1) as f64;
        for i in 0..d {
            let v = est.vector[i];
            let delta = v - mean[i];
            mean[i] += delta / count;
            m2[i] += delta * (v - mean[i]);
            let e = v - true_grad[i];
            sq_err += e * e;
        }
    }
    let n = replications as f64;
    let bias: Vec<f64> = mean.iter().zip(true_grad).map(|(m, t)| m - t).collect();
    let bias_norm = bias.iter().map(|b| b * b).sum::<f64>().sqrt();
    Ok(BiasVarianceReport {
        standard_errors: m2.iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect(),
        empirical_variance: m2.iter().sum::<f64>() / n,
        mse: sq_err / n,
        empirical_bias_norm: bias_norm,
        mean_estimate: mean,
        bias,
        replications,
        evals_per_estimate: evals,
    })
}
