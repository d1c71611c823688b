//! Multi-market Cournot competition with uniform price and cost shocks.
//!
//! Firm `i` supplies `x[i][j]` to market `j`. The realized price is
//! `a_j + zeta_j - b_j * sum_k x[k][j]` and the realized cost of firm `i` is
//! `sum_j (c_ij + eta_ij - price_j) * x[i][j]`. Price shocks `zeta_j` are
//! common to all firms within one realization, cost shocks `eta_ij` are
//! private.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::game::{Game, Layout, StrategySet};
use crate::stream::{Stream, StreamRng};

#[derive(Clone, Debug, PartialEq)]
pub struct CournotParams {
    pub players: usize,
    pub markets: usize,
    /// Demand intercepts, one per market.
    pub a: Vec<f64>,
    /// Demand slopes, one per market.
    pub b: Vec<f64>,
    /// Unit costs, row-major `players x markets`.
    pub c: Vec<f64>,
    /// Capacities, row-major `players x markets`.
    pub capacity: Vec<f64>,
    pub price_noise_halfwidth: Vec<f64>,
    pub cost_noise_halfwidth: Vec<f64>,
}

#[inline]
fn symmetric_uniform(rng: &mut StreamRng, halfwidth: f64) -> f64 {
    halfwidth * (2.0 * rng.random::<f64>() - 1.0)
}

impl CournotParams {
    /// Random instance: `c_ij ~ U[3,4]`, `a_j ~ U[4,5]`, `b_j ~ U[0.5,0.55]`,
    /// shock half-widths `a_j/8` and `c_ij/8`, unit capacities.
    pub fn generate(players: usize, markets: usize, seed: u64) -> Result<Self> {
        if players < 2 {
            return Err(invalid("players", format!("a game needs at least 2 players, got {players}")));
        }
        if markets < 1 {
            return Err(invalid("markets", "need at least one market"));
        }
        let mut rng = Stream::new(seed).rng();
        let mut draw = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
        let c: Vec<f64> = (0..players * markets).map(|_| draw(3.0, 4.0)).collect();
        let a: Vec<f64> = (0..markets).map(|_| draw(4.0, 5.0)).collect();
        let b: Vec<f64> = (0..markets).map(|_| draw(0.5, 0.55)).collect();
        Ok(Self::from_parts(players, markets, a, b, c))
    }

    /// Single-market duopoly with identical unit cost `c`.
    pub fn duopoly(a: f64, b: f64, c: f64) -> Self {
        Self::from_parts(2, 1, vec![a], vec![b], vec![c, c])
    }

    /// Build from demand and cost parameters with the default shock widths.
    pub fn from_parts(players: usize, markets: usize, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Self {
        let price_noise_halfwidth = a.iter().map(|v| v / 8.0).collect();
        let cost_noise_halfwidth = c.iter().map(|v| v / 8.0).collect();
        Self {
            players,
            markets,
            a,
            b,
            capacity: vec![1.0; players * markets],
            c,
            price_noise_halfwidth,
            cost_noise_halfwidth,
        }
    }

    /// Multiply every shock half-width by `scale` (0 gives a noiseless game).
    pub fn with_noise_scale(mut self, scale: f64) -> Self {
        self.price_noise_halfwidth.iter_mut().for_each(|w| *w *= scale);
        self.cost_noise_halfwidth.iter_mut().for_each(|w| *w *= scale);
        self
    }

    pub fn with_capacity(mut self, capacity: Vec<f64>) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn dim(&self) -> usize {
        self.players * self.markets
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.markets + j
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.players, self.markets);
        if n < 2 {
            return Err(invalid("players", "a game needs at least 2 players"));
        }
        if m < 1 {
            return Err(invalid("markets", "need at least one market"));
        }
        let check_len = |v: &[f64], len: usize| {
            if v.len() == len {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: len,
                    actual: v.len(),
                })
            }
        };
        check_len(&self.a, m)?;
        check_len(&self.b, m)?;
        check_len(&self.price_noise_halfwidth, m)?;
        check_len(&self.c, n * m)?;
        check_len(&self.capacity, n * m)?;
        check_len(&self.cost_noise_halfwidth, n * m)?;
        if self.a.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("a", "demand intercepts must be positive"));
        }
        if self.b.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("b", "demand slopes must be positive"));
        }
        if self.c.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("c", "unit costs must be positive"));
        }
        let widths = self.price_noise_halfwidth.iter().chain(&self.cost_noise_halfwidth);
        if widths.clone().any(|w| !(*w >= 0.0)) {
            return Err(invalid("noise", "half-widths must be non-negative"));
        }
        Ok(())
    }

    fn market_totals(&self, x: &[f64]) -> Vec<f64> {
        let m = self.markets;
        let mut totals = vec![0.0; m];
        for row in x.chunks_exact(m) {
            totals.iter_mut().zip(row).for_each(|(t, v)| *t += v);
        }
        totals
    }

    /// One draw of firm `i`'s realized cost at `x`.
    pub fn noisy_cost(&self, i: usize, x: &[f64], rng: &mut StreamRng) -> f64 {
        debug_assert!(x.iter().all(|v| v.is_finite()));
        let totals = self.market_totals(x);
        (0..self.markets)
            .map(|j| {
                let zeta = symmetric_uniform(rng, self.price_noise_halfwidth[j]);
                let k = self.idx(i, j);
                let eta = symmetric_uniform(rng, self.cost_noise_halfwidth[k]);
                let price = self.a[j] + zeta - self.b[j] * totals[j];
                (self.c[k] + eta - price) * x[k]
            })
            .sum()
    }

    /// One realization of every firm's cost. Market `j` draws `zeta_j` and
    /// then `eta_ij` for each firm in order.
    pub fn sample_costs(&self, x: &[f64], rng: &mut StreamRng, costs: &mut [f64]) {
        debug_assert!(x.iter().all(|v| v.is_finite()));
        let (n, m) = (self.players, self.markets);
        costs[..n].iter_mut().for_each(|c| *c = 0.0);
        for j in 0..m {
            let zeta = symmetric_uniform(rng, self.price_noise_halfwidth[j]);
            let mut total = 0.0;
            for i in 0..n {
                total += x[i * m + j];
            }
            let base = self.b[j] * total - self.a[j] - zeta;
            for (i, cost) in costs[..n].iter_mut().enumerate() {
                let k = i * m + j;
                let eta = symmetric_uniform(rng, self.cost_noise_halfwidth[k]);
                *cost += (self.c[k] + eta + base) * x[k];
            }
        }
    }

    /// `f_i(x) = sum_j (c_ij - a_j + b_j sum_k x_kj) x_ij`.
    pub fn expected_cost(&self, i: usize, x: &[f64]) -> f64 {
        let totals = self.market_totals(x);
        (0..self.markets)
            .map(|j| {
                let k = self.idx(i, j);
                (self.c[k] - self.a[j] + self.b[j] * totals[j]) * x[k]
            })
            .sum()
    }

    /// Component `(i, j)` is `c_ij - a_j + b_j sum_k x_kj + b_j x_ij`.
    pub fn exact_gradient(&self, x: &[f64]) -> Vec<f64> {
        let totals = self.market_totals(x);
        let m = self.markets;
        x.iter()
            .enumerate()
            .map(|(k, v)| {
                let j = k % m;
                self.c[k] - self.a[j] + self.b[j] * (totals[j] + v)
            })
            .collect()
    }

    /// `beta = 2 lambda_min` of the symmetric Jacobian of the gradient map.
    /// The Jacobian is block diagonal over markets with blocks
    /// `b_j (I + 11')`, whose smallest eigenvalue is `b_j`.
    pub fn compute_beta(&self) -> Result<f64> {
        let lambda_min = self.b.iter().copied().fold(f64::INFINITY, f64::min);
        if !(lambda_min > 0.0) {
            return Err(Error::NotStronglyMonotone { lambda_min });
        }
        Ok(2.0 * lambda_min)
    }

    /// Largest eigenvalue of the Jacobian, `(N + 1) max_j b_j`.
    pub fn lipschitz(&self) -> f64 {
        let b_max = self.b.iter().copied().fold(0.0, f64::max);
        (self.players as f64 + 1.0) * b_max
    }
}

/// Which strategy sets the firms are constrained to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CournotConstraint {
    /// `x_i >= 0`, `1'x_i = 1`.
    UnitSimplex,
    /// `1'x_i = 1` only.
    UnitHyperplane,
    /// `0 <= x_ij <= C_ij`.
    Capacity,
}

#[derive(Clone, Debug)]
pub struct CournotGame {
    params: CournotParams,
    layout: Layout,
    sets: Vec<StrategySet>,
}

impl CournotGame {
    pub fn new(params: CournotParams, constraint: CournotConstraint) -> Result<Self> {
        params.validate()?;
        let (n, m) = (params.players, params.markets);
        let sets = (0..n)
            .map(|i| match constraint {
                CournotConstraint::UnitSimplex => StrategySet::simplex(1.0, m),
                CournotConstraint::UnitHyperplane => StrategySet::hyperplane(m),
                CournotConstraint::Capacity => {
                    StrategySet::boxed(vec![0.0; m], params.capacity[i * m..(i + 1) * m].to_vec())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layout: Layout::uniform(n, m)?,
            params,
            sets,
        })
    }

    /// Use explicit per-player sets (for example a common box).
    pub fn with_sets(params: CournotParams, sets: Vec<StrategySet>) -> Result<Self> {
        params.validate()?;
        if sets.len() != params.players {
            return Err(Error::DimensionMismatch {
                expected: params.players,
                actual: sets.len(),
            });
        }
        if let Some(bad) = sets.iter().find(|s| s.dim() != params.markets) {
            return Err(Error::DimensionMismatch {
                expected: params.markets,
                actual: bad.dim(),
            });
        }
        Ok(Self {
            layout: Layout::uniform(params.players, params.markets)?,
            params,
            sets,
        })
    }

    pub fn params(&self) -> &CournotParams {
        &self.params
    }
}

impl Game for CournotGame {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn strategy_set(&self, player: usize) -> &StrategySet {
        &self.sets[player]
    }

    fn sample_costs(&self, x: &[f64], rng: &mut StreamRng, costs: &mut [f64]) {
        self.params.sample_costs(x, rng, costs);
    }

    fn noisy_cost(&self, player: usize, x: &[f64], rng: &mut StreamRng) -> f64 {
        self.params.noisy_cost(player, x, rng)
    }

    fn expected_cost(&self, player: usize, x: &[f64]) -> Option<f64> {
        Some(self.params.expected_cost(player, x))
    }

    fn exact_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.params.exact_gradient(x))
    }

    fn strong_monotonicity(&self) -> Option<f64> {
        self.params.compute_beta().ok()
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.params.lipschitz())
    }
}
