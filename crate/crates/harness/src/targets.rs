//! Test functions for estimator studies.

use nashseek_core::{CournotGame, Game, StreamRng};
use rand::Rng;

/// `0.5 |x|^2 + U[-noise, noise]`.
#[derive(Clone, Copy, Debug)]
pub struct NoisyQuadratic {
    pub dim: usize,
    pub noise: f64,
}

impl NoisyQuadratic {
    pub fn eval(&self, x: &[f64], rng: &mut StreamRng) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>() + self.noise * (2.0 * rng.random::<f64>() - 1.0)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// Player `player`'s realized Cournot cost as a function of its own block,
/// rivals fixed at `base`.
pub struct OwnCost<'g> {
    pub game: &'g CournotGame,
    pub player: usize,
    pub base: Vec<f64>,
}

impl OwnCost<'_> {
    pub fn own_point(&self) -> Vec<f64> {
        self.base[self.game.layout().range(self.player)].to_vec()
    }

    pub fn eval(&self, own: &[f64], rng: &mut StreamRng) -> f64 {
        let mut x = self.base.clone();
        x[self.game.layout().range(self.player)].copy_from_slice(own);
        self.game.noisy_cost(self.player, &x, rng)
    }

    pub fn gradient(&self) -> Vec<f64> {
        let g = self.game.exact_gradient(&self.base).unwrap();
        g[self.game.layout().range(self.player)].to_vec()
    }
}
