//! Stochastic non-cooperative games: strategy sets, the joint layout of
//! decision variables, and the [`Game`] trait every learner consumes.

use std::ops::Range;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::mirror;
use crate::stream::StreamRng;

/// Tolerance of the sum constraint in membership tests.
pub const SUM_TOL: f64 = 1e-12;

/// A player's closed convex strategy set.
#[derive(Clone, Debug, PartialEq)]
pub enum StrategySet {
    /// `lo <= x <= hi` componentwise.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `x >= 0`, `1'x = sum`.
    Simplex { sum: f64, dim: usize },
    /// `1'x = 1` with no sign constraint.
    HyperplaneSumOne { dim: usize },
}

impl StrategySet {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(invalid("box", "dimension must be at least 1"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(invalid("box", "lo must not exceed hi"));
        }
        Ok(Self::Box { lo, hi })
    }

    pub fn simplex(sum: f64, dim: usize) -> Result<Self> {
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(invalid("simplex", format!("sum must be positive, got {sum}")));
        }
        if dim == 0 {
            return Err(invalid("simplex", "dimension must be at least 1"));
        }
        Ok(Self::Simplex { sum, dim })
    }

    pub fn hyperplane(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("hyperplane", "dimension must be at least 1"));
        }
        Ok(Self::HyperplaneSumOne { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lo, .. } => lo.len(),
            Self::Simplex { dim, .. } | Self::HyperplaneSumOne { dim } => *dim,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Box { .. } => "box",
            Self::Simplex { .. } => "simplex",
            Self::HyperplaneSumOne { .. } => "hyperplane",
        }
    }

    /// Target of the sum constraint, if the set has one.
    pub fn sum_constraint(&self) -> Option<f64> {
        match self {
            Self::Box { .. } => None,
            Self::Simplex { sum, .. } => Some(*sum),
            Self::HyperplaneSumOne { .. } => Some(1.0),
        }
    }

    /// Membership with slack `tol` on every constraint.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Self::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            Self::Simplex { sum, .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - sum).abs() <= tol.max(SUM_TOL)
            }
            Self::HyperplaneSumOne { .. } => (x.iter().sum::<f64>() - 1.0).abs() <= tol.max(SUM_TOL),
        }
    }

    pub fn is_member(&self, x: &[f64]) -> bool {
        self.contains(x, SUM_TOL)
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Self::Box { lo, hi } => mirror::project_box(y, lo, hi),
            Self::Simplex { sum, .. } => mirror::project_simplex(y, *sum),
            Self::HyperplaneSumOne { .. } => mirror::project_hyperplane(y, 1.0),
        }
    }

    /// Barycentre for sum sets, box midpoint otherwise.
    pub fn center(&self) -> Vec<f64> {
        match self {
            Self::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            Self::Simplex { sum, dim } => vec![sum / *dim as f64; *dim],
            Self::HyperplaneSumOne { dim } => vec![1.0 / *dim as f64; *dim],
        }
    }

    /// A random feasible point: uniform on boxes and simplices, a bounded
    /// random offset from the barycentre on the hyperplane.
    pub fn sample_point(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            Self::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect(),
            Self::Simplex { sum, dim } => {
                let e: Vec<f64> = (0..*dim).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let total: f64 = e.iter().sum();
                let mut x: Vec<f64> = e.iter().map(|v| sum * v / total).collect();
                // re-centre rounding so that the sum constraint holds tightly
                let drift = (x.iter().sum::<f64>() - sum) / *dim as f64;
                x.iter_mut().for_each(|v| *v = (*v - drift).max(0.0));
                x
            }
            Self::HyperplaneSumOne { dim } => {
                let y: Vec<f64> = (0..*dim).map(|_| rng.random::<f64>() - 0.5).collect();
                mirror::project_hyperplane(&y, 1.0)
            }
        }
    }
}

/// Offsets of each player's block inside the joint decision vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    offsets: Vec<usize>,
}

impl Layout {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(invalid("dims", "a game needs at least one player"));
        }
        if dims.contains(&0) {
            return Err(invalid("dims", "every player needs at least one decision variable"));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        offsets.push(0);
        for d in dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        Ok(Self { offsets })
    }

    pub fn uniform(players: usize, dim: usize) -> Result<Self> {
        Self::new(&vec![dim; players])
    }

    pub fn num_players(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total dimension `d`.
    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn dim(&self, player: usize) -> usize {
        self.offsets[player + 1] - self.offsets[player]
    }

    #[inline]
    pub fn range(&self, player: usize) -> Range<usize> {
        self.offsets[player]..self.offsets[player + 1]
    }
}

/// A stochastic game in which each player only observes noisy draws of its
/// own cost.
pub trait Game: Send + Sync {
    fn layout(&self) -> &Layout;

    fn strategy_set(&self, player: usize) -> &StrategySet;

    /// Draw one realization of the game at the joint point `x` and write every
    /// player's realized cost into `costs`. Noise shared between players is
    /// drawn once per call.
    fn sample_costs(&self, x: &[f64], rng: &mut StreamRng, costs: &mut [f64]);

    fn num_players(&self) -> usize {
        self.layout().num_players()
    }

    /// One draw of player `player`'s cost at `x`.
    fn noisy_cost(&self, player: usize, x: &[f64], rng: &mut StreamRng) -> f64 {
        let mut costs = vec![0.0; self.num_players()];
        self.sample_costs(x, rng, &mut costs);
        costs[player]
    }

    /// Expected cost `f_i(x)`, when known in closed form.
    fn expected_cost(&self, _player: usize, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Stacked own-gradients `(grad_{x_1} f_1, ..., grad_{x_N} f_N)`.
    fn exact_gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Strong monotonicity constant `beta` with
    /// `(phi(x) - phi(y))'(x - y) >= beta/2 |x - y|^2`.
    fn strong_monotonicity(&self) -> Option<f64> {
        None
    }

    /// Lipschitz constant of the gradient map.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// Check that `x` lies in the product of the strategy sets.
    fn check_feasible(&self, x: &[f64], tol: f64) -> Result<()> {
        let layout = self.layout();
        if x.len() != layout.total() {
            return Err(Error::DimensionMismatch {
                expected: layout.total(),
                actual: x.len(),
            });
        }
        for i in 0..layout.num_players() {
            let set = self.strategy_set(i);
            if !set.contains(&x[layout.range(i)], tol) {
                return Err(Error::Infeasible {
                    player: i,
                    reason: format!("block lies outside its {} set", set.kind_name()),
                });
            }
        }
        Ok(())
    }

    /// Per-player projection onto the product set.
    fn project(&self, y: &[f64]) -> Vec<f64> {
        let layout = self.layout();
        let mut out = Vec::with_capacity(y.len());
        for i in 0..layout.num_players() {
            out.extend(self.strategy_set(i).project(&y[layout.range(i)]));
        }
        out
    }

    /// Barycentre of every player's set.
    fn center(&self) -> Vec<f64> {
        (0..self.num_players())
            .flat_map(|i| self.strategy_set(i).center())
            .collect()
    }
}

/// Wraps a game and rescales selected players' realized costs.
pub struct ScaledCosts<G> {
    pub inner: G,
    pub factors: Vec<f64>,
}

impl<G: Game> Game for ScaledCosts<G> {
    fn layout(&self) -> &Layout {
        self.inner.layout()
    }

    fn strategy_set(&self, player: usize) -> &StrategySet {
        self.inner.strategy_set(player)
    }

    fn sample_costs(&self, x: &[f64], rng: &mut StreamRng, costs: &mut [f64]) {
        self.inner.sample_costs(x, rng, costs);
        costs.iter_mut().zip(&self.factors).for_each(|(c, f)| *c *= f);
    }

    fn expected_cost(&self, player: usize, x: &[f64]) -> Option<f64> {
        self.inner.expected_cost(player, x).map(|c| c * self.factors[player])
    }
}
