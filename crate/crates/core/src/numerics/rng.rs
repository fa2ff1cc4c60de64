use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Deterministic random stream: the same seed always yields the same draws.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream seeded from this one.
    pub fn fork(&mut self) -> SeededRng {
        SeededRng::new(self.inner.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Argument(format!(
                "uniform bounds must be finite with lo < hi, got [{lo}, {hi})"
            )));
        }
        let u: f64 = self.inner.random();
        let x = lo + (hi - lo) * u;
        // rounding can land exactly on `hi`
        Ok(if x >= hi { hi.next_down() } else { x })
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> Result<f64> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(Error::Argument(format!(
                "normal needs finite mean and std > 0, got mean {mean}, std {std}"
            )));
        }
        let z: f64 = self.inner.sample(StandardNormal);
        Ok(mean + std * z)
    }

    /// `amount` distinct indices from `0..n`, uniformly, in draw order.
    pub fn choose_distinct(&mut self, n: usize, amount: usize) -> Result<Vec<usize>> {
        if amount > n {
            return Err(Error::Argument(format!(
                "cannot draw {amount} distinct items from {n}"
            )));
        }
        Ok(rand::seq::index::sample(&mut self.inner, n, amount).into_vec())
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}
