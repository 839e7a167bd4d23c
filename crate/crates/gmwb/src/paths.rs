//! Path engine: discretized risk-neutral growth factors for the fee-dragged
//! account, generated lazily from counter-based random numbers.
//!
//! A path set never materializes its factors. Each factor is an O(1) pure
//! function of `(seed, path, step)`, which keeps memory flat at any path
//! count and makes generation embarrassingly parallel with bit-reproducible
//! results.

use serde::{Deserialize, Serialize};

use crate::contract::MarketParams;
use crate::error::{Error, Result};
use crate::rng::{CounterRng, MAX_STEPS, MAX_STREAMS};

/// Uniform time grid with `steps_per_year` steps per year.
///
/// Grid times are `t_k = k / n`; the final grid point lands exactly on the
/// maturity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    steps_per_year: u32,
    num_steps: usize,
    maturity: f64,
}

impl TimeGrid {
    /// Builds a grid covering `[0, maturity]`. The maturity must sit on the
    /// grid: `steps_per_year * maturity` has to be a whole number of steps.
    pub fn new(steps_per_year: u32, maturity: f64) -> Result<Self> {
        if steps_per_year == 0 {
            return Err(Error::InvalidInput(
                "steps_per_year must be positive".into(),
            ));
        }
        if maturity <= 0.0 || !maturity.is_finite() {
            return Err(Error::InvalidInput(format!(
                "maturity must be positive and finite, got {maturity}"
            )));
        }
        let exact = steps_per_year as f64 * maturity;
        let num_steps = exact.round();
        if (exact - num_steps).abs() > 1e-9 * exact.max(1.0) || num_steps < 1.0 {
            return Err(Error::InvalidInput(format!(
                "maturity {maturity} is not a whole number of steps at {steps_per_year}/year"
            )));
        }
        if num_steps >= MAX_STEPS as f64 {
            return Err(Error::InvalidInput(format!(
                "grid of {num_steps} steps exceeds the supported maximum"
            )));
        }
        let num_steps = num_steps as usize;
        // Snap the stored maturity onto the grid so t_N == T bit-exactly.
        Ok(TimeGrid {
            steps_per_year,
            num_steps,
            maturity: num_steps as f64 / steps_per_year as f64,
        })
    }

    pub fn steps_per_year(&self) -> u32 {
        self.steps_per_year
    }

    /// Number of steps N; grid points are indexed 0..=N.
    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_year as f64
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    /// Time of grid point `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.steps_per_year as f64
    }

    /// Index of the grid point at time `t`, if `t` lies on the grid.
    pub fn step_at(&self, t: f64) -> Result<usize> {
        let exact = self.steps_per_year as f64 * t;
        let k = exact.round();
        if (exact - k).abs() > 1e-9 * exact.abs().max(1.0) || k < 0.0 || k > self.num_steps as f64 {
            return Err(Error::InvalidInput(format!(
                "time {t} is not a grid point at {}/year",
                self.steps_per_year
            )));
        }
        Ok(k as usize)
    }

    /// Grid covering `[t_k, T]`, used to restart simulations mid-contract.
    pub fn remaining_from(&self, k: usize) -> Result<TimeGrid> {
        if k >= self.num_steps {
            return Err(Error::InvalidInput(format!(
                "cannot restart at step {k} of {}",
                self.num_steps
            )));
        }
        Ok(TimeGrid {
            steps_per_year: self.steps_per_year,
            num_steps: self.num_steps - k,
            maturity: (self.num_steps - k) as f64 / self.steps_per_year as f64,
        })
    }
}

/// Everything a Monte Carlo estimator needs besides the contract itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub grid: TimeGrid,
    pub num_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl SimSettings {
    pub fn new(grid: TimeGrid, num_paths: usize, seed: u64, antithetic: bool) -> Self {
        SimSettings {
            grid,
            num_paths,
            seed,
            antithetic,
        }
    }
}

/// A lazily evaluated set of per-path, per-step lognormal growth factors
///
/// ```text
/// R_k = exp((r - alpha - sigma^2 / 2) dt + sigma sqrt(dt) xi_k)
/// ```
///
/// computed as `drift_factor * shock` with the deterministic drift factored
/// out. On common random numbers the shocks do not depend on the fee rate, so
/// factors (and therefore simulated accounts) are exactly monotone in
/// `alpha`, not just monotone in expectation.
///
/// With antithetic pairing on, paths `2i` and `2i + 1` share the draws of
/// pair `i`; the odd path applies the reciprocal shock, i.e. the negated
/// normal.
#[derive(Clone, Copy, Debug)]
pub struct PathSet {
    rng: CounterRng,
    grid: TimeGrid,
    num_paths: usize,
    antithetic: bool,
    seed: u64,
    rate: f64,
    sigma: f64,
    fee_rate: f64,
    drift_factor: f64,
    sig_sqrt_dt: f64,
}

impl PathSet {
    pub fn generate(
        market: &MarketParams,
        fee_rate: f64,
        grid: TimeGrid,
        num_paths: usize,
        seed: u64,
        antithetic: bool,
    ) -> Result<PathSet> {
        if num_paths == 0 {
            return Err(Error::InvalidInput("at least one path is required".into()));
        }
        if antithetic && !num_paths.is_multiple_of(2) {
            return Err(Error::InvalidInput(
                "antithetic sampling pairs paths; use an even path count".into(),
            ));
        }
        if num_paths as u64 >= MAX_STREAMS {
            return Err(Error::InvalidInput(format!(
                "{num_paths} paths exceeds the supported maximum"
            )));
        }
        if !market.rate.is_finite()
            || market.sigma < 0.0
            || market.sigma.is_nan()
            || fee_rate < 0.0
            || fee_rate.is_nan()
        {
            return Err(Error::InvalidInput(
                "market rate must be finite, sigma and fee rate non-negative".into(),
            ));
        }
        let dt = grid.dt();
        let drift = (market.rate - fee_rate - 0.5 * market.sigma * market.sigma) * dt;
        Ok(PathSet {
            rng: CounterRng::new(seed),
            grid,
            num_paths,
            antithetic,
            seed,
            rate: market.rate,
            sigma: market.sigma,
            fee_rate,
            drift_factor: drift.exp(),
            sig_sqrt_dt: market.sigma * dt.sqrt(),
        })
    }

    /// Path set for the same draws under a different fee rate. The shocks are
    /// untouched; only the deterministic drift factor moves.
    pub fn with_fee(&self, fee_rate: f64) -> PathSet {
        let drift = (self.rate - fee_rate - 0.5 * self.sigma * self.sigma) * self.grid.dt();
        PathSet {
            fee_rate,
            drift_factor: drift.exp(),
            ..*self
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn antithetic(&self) -> bool {
        self.antithetic
    }

    pub fn fee_rate(&self) -> f64 {
        self.fee_rate
    }

    pub(crate) fn drift_factor(&self) -> f64 {
        self.drift_factor
    }

    pub(crate) fn is_deterministic(&self) -> bool {
        self.sigma == 0.0
    }

    /// Multiplicative shock of pair `pair` at step `step`, strictly positive.
    #[inline(always)]
    pub(crate) fn shock(&self, pair: usize, step: usize) -> f64 {
        (self.sig_sqrt_dt * self.rng.standard_normal(pair as u64, step as u64)).exp()
    }

    /// Growth factor of path `path` over step `step`.
    #[inline]
    pub fn growth_factor(&self, path: usize, step: usize) -> f64 {
        debug_assert!(path < self.num_paths && step < self.grid.num_steps);
        if self.is_deterministic() {
            return self.drift_factor;
        }
        if self.antithetic {
            let shock = self.shock(path / 2, step);
            if path.is_multiple_of(2) {
                self.drift_factor * shock
            } else {
                self.drift_factor / shock
            }
        } else {
            self.drift_factor * self.shock(path, step)
        }
    }

    /// Account value path under a no-withdrawal strategy, `Z_0 = 1`.
    pub fn z_path(&self, path: usize) -> Result<Vec<f64>> {
        if path >= self.num_paths {
            return Err(Error::PathIndexOutOfRange {
                index: path,
                num_paths: self.num_paths,
            });
        }
        let n = self.grid.num_steps;
        let mut z = Vec::with_capacity(n + 1);
        let mut cur = 1.0;
        z.push(cur);
        for k in 0..n {
            cur *= self.growth_factor(path, k);
            z.push(cur);
        }
        Ok(z)
    }

    /// Streams every factor, path-major, as little-endian 64-bit floats.
    pub fn write_factors_binary<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(self.grid.num_steps * 8);
        for path in 0..self.num_paths {
            buf.clear();
            for step in 0..self.grid.num_steps {
                buf.extend_from_slice(&self.growth_factor(path, step).to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::MeanStderr;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn market(rate: f64, sigma: f64) -> MarketParams {
        MarketParams {
            rate,
            sigma,
            mu: 0.0,
        }
    }

    #[test]
    fn grid_lands_exactly_on_maturity() {
        let grid = TimeGrid::new(252, 10.0).unwrap();
        assert_eq!(grid.num_steps(), 2520);
        assert_eq!(grid.time(2520), 10.0);
        assert_eq!(grid.maturity(), 10.0);
        // Non-integer step counts are refused.
        assert!(TimeGrid::new(252, 10.0001).is_err());
        // g = 0.3 gives T = 10/3, which is fine at 3 steps/year.
        let grid = TimeGrid::new(3, 1.0 / 0.3).unwrap();
        assert_eq!(grid.num_steps(), 10);
    }

    #[test]
    fn zero_volatility_factors_are_exact() {
        let grid = TimeGrid::new(252, 10.0).unwrap();
        let paths = PathSet::generate(&market(0.05, 0.0), 0.01, grid, 4, 1, false).unwrap();
        let expected = ((0.05f64 - 0.01) / 252.0).exp();
        for path in 0..4 {
            for step in [0usize, 100, 2519] {
                assert_eq!(paths.growth_factor(path, step), expected);
            }
        }
    }

    #[test]
    fn factor_mean_matches_lognormal_identity() {
        // One annual step: E[R] = exp(r - alpha) for the exact scheme.
        let grid = TimeGrid::new(1, 1.0).unwrap();
        let paths = PathSet::generate(&market(0.05, 0.2), 0.0, grid, 1_000_000, 99, false).unwrap();
        let draws: Vec<f64> = (0..paths.num_paths())
            .map(|j| paths.growth_factor(j, 0))
            .collect();
        let est = MeanStderr::from_samples(&draws);
        assert_abs_diff_eq!(est.mean, 0.05f64.exp(), epsilon = 3.0 * est.stderr);
    }

    #[test]
    fn same_seed_reproduces_factors_bit_for_bit() {
        let grid = TimeGrid::new(12, 2.0).unwrap();
        let a = PathSet::generate(&market(0.05, 0.25), 0.01, grid, 64, 7, true).unwrap();
        let b = PathSet::generate(&market(0.05, 0.25), 0.01, grid, 64, 7, true).unwrap();
        for path in 0..64 {
            for step in 0..grid.num_steps() {
                assert_eq!(a.growth_factor(path, step), b.growth_factor(path, step));
            }
        }
        let c = PathSet::generate(&market(0.05, 0.25), 0.01, grid, 64, 8, true).unwrap();
        assert_ne!(a.growth_factor(0, 0), c.growth_factor(0, 0));
    }

    #[test]
    fn z_path_is_positive_and_deterministic_case_matches_exponential() {
        let grid = TimeGrid::new(12, 3.0).unwrap();
        let flat = PathSet::generate(&market(0.05, 0.0), 0.0, grid, 1, 3, false).unwrap();
        let z = flat.z_path(0).unwrap();
        assert_eq!(z[0], 1.0);
        for (k, value) in z.iter().enumerate() {
            assert_relative_eq!(*value, (0.05 * grid.time(k)).exp(), max_relative = 1e-12);
        }

        let noisy = PathSet::generate(&market(0.05, 0.4), 0.02, grid, 8, 3, false).unwrap();
        for path in 0..8 {
            assert!(noisy.z_path(path).unwrap().iter().all(|&v| v > 0.0));
        }
        assert!(noisy.z_path(8).is_err());
    }

    #[test]
    fn discounted_terminal_z_is_a_martingale_after_fee_restoration() {
        let grid = TimeGrid::new(4, 2.0).unwrap();
        let alpha = 0.03;
        let paths =
            PathSet::generate(&market(0.05, 0.2), alpha, grid, 1_000_000, 11, false).unwrap();
        let terminal: Vec<f64> = (0..paths.num_paths())
            .map(|j| {
                let mut z = 1.0;
                for k in 0..grid.num_steps() {
                    z *= paths.growth_factor(j, k);
                }
                z
            })
            .collect();
        let est = MeanStderr::from_samples(&terminal);
        let expected = ((0.05 - alpha) * 2.0f64).exp();
        assert_abs_diff_eq!(est.mean, expected, epsilon = 3.0 * est.stderr);
    }

    #[test]
    fn antithetic_pairs_use_negated_normals() {
        let grid = TimeGrid::new(12, 1.0).unwrap();
        let paths = PathSet::generate(&market(0.05, 0.3), 0.0, grid, 16, 5, true).unwrap();
        let log_drift = paths.drift_factor().ln();
        for pair in 0..8 {
            for step in 0..grid.num_steps() {
                let up = paths.growth_factor(2 * pair, step).ln() - log_drift;
                let down = paths.growth_factor(2 * pair + 1, step).ln() - log_drift;
                assert_abs_diff_eq!(up + down, 0.0, epsilon = 1e-12);
            }
        }
        // Odd path counts cannot pair up.
        assert!(PathSet::generate(&market(0.05, 0.3), 0.0, grid, 15, 5, true).is_err());
    }

    #[test]
    fn with_fee_changes_only_the_drift() {
        let grid = TimeGrid::new(12, 1.0).unwrap();
        let base = PathSet::generate(&market(0.05, 0.3), 0.0, grid, 4, 5, false).unwrap();
        let bumped = base.with_fee(0.02);
        assert!(bumped.drift_factor() < base.drift_factor());
        for step in 0..grid.num_steps() {
            // Shocks are shared; only the deterministic factor moves.
            assert_eq!(
                bumped.growth_factor(0, step),
                bumped.drift_factor() * base.shock(0, step)
            );
            assert!(bumped.growth_factor(0, step) < base.growth_factor(0, step));
        }
    }
}
