//! Seed averaging.

use crate::error::{HarnessError, Result};

/// Pointwise mean of several error curves with a central 80% band.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanCurve {
    /// `iters[k]` is the iteration of the `k`-th value (1-based).
    pub iters: Vec<usize>,
    pub mean: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    pub n_seeds: usize,
}

impl MeanCurve {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.mean.last().unwrap()
    }

    /// Mean at iteration `n`.
    pub fn at(&self, n: usize) -> Option<f64> {
        self.iters.iter().position(|&k| k == n).map(|k| self.mean[k])
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Average curves indexed by iteration `1..=T`. Every curve must have the
/// same length.
pub fn aggregate_seeds<C: AsRef<[f64]>>(curves: &[C]) -> Result<MeanCurve> {
    let first = curves
        .first()
        .ok_or_else(|| HarnessError::Aggregate("no curves to aggregate".into()))?
        .as_ref()
        .len();
    if let Some((k, c)) = curves.iter().enumerate().find(|(_, c)| c.as_ref().len() != first) {
        return Err(HarnessError::Aggregate(format!(
            "curve {k} has length {} but curve 0 has length {first}",
            c.as_ref().len()
        )));
    }
    let n = curves.len();
    let mut mean = Vec::with_capacity(first);
    let mut band_lo = Vec::with_capacity(first);
    let mut band_hi = Vec::with_capacity(first);
    let mut column = vec![0.0; n];
    for t in 0..first {
        for (slot, c) in column.iter_mut().zip(curves) {
            *slot = c.as_ref()[t];
        }
        // summed in seed order so the reduction is deterministic
        mean.push(column.iter().sum::<f64>() / n as f64);
        column.sort_by(f64::total_cmp);
        band_lo.push(quantile(&column, 0.1));
        band_hi.push(quantile(&column, 0.9));
    }
    Ok(MeanCurve {
        iters: (1..=first).collect(),
        mean,
        band_lo,
        band_hi,
        n_seeds: n,
    })
}
