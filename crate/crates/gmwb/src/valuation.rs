//! Monte Carlo estimators for the policyholder value `V`, the insurer rider
//! value `U` under no lapses, and the decomposition `V = W + U`.
//!
//! Two valuation conventions keep variance down and identities tight:
//!
//! * the guaranteed withdrawal stream is valued in closed form with the
//!   continuous annuity (zero variance);
//! * the guarantee payoff at trigger is valued in closed form as
//!   `exp(-r tau_bar) G a(T - tau_bar)`; once the account is exhausted no
//!   uncertainty remains.
//!
//! `V` and `U` are always estimated on the same path set, so the
//! decomposition residual carries a meaningful joint standard error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::account::{path_outcomes, path_outcomes_from, PathOutcome};
use crate::contract::{annuity_factor, validate, ContractSpec, MarketParams};
use crate::error::{Error, Result};
use crate::paths::{PathSet, SimSettings};
use crate::stats::MeanStderr;

/// A Monte Carlo estimate with its one-sigma standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl From<MeanStderr> for Estimate {
    fn from(m: MeanStderr) -> Self {
        Estimate {
            value: m.mean,
            stderr: m.stderr,
        }
    }
}

/// Joint valuation of both contract perspectives on common random numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuationReport {
    /// Policyholder value of VA plus rider.
    pub v0: Estimate,
    /// Insurer rider value with no lapses.
    pub u0_nolapse: Estimate,
    /// Account value at inception, i.e. the premium.
    pub w0: f64,
    /// `V0 - (W0 + U0)`; zero in expectation.
    pub residual: Estimate,
    pub num_paths: usize,
    pub steps_per_year: u32,
    pub seed: u64,
    pub antithetic: bool,
}

struct PathValues {
    v: Vec<f64>,
    u: Vec<f64>,
}

/// Per-path discounted policyholder and insurer values from the terminal
/// summaries, all relative to the walk start.
fn path_values(
    spec: &ContractSpec,
    market: &MarketParams,
    paths: &PathSet,
    outcomes: &[PathOutcome],
) -> PathValues {
    let rate = market.rate;
    let g = spec.annual_withdrawal();
    let horizon = paths.grid().maturity();
    let annuity_total = g * annuity_factor(rate, horizon);
    let disc_t = (-rate * horizon).exp();
    let grid = paths.grid();

    let mut v = Vec::with_capacity(outcomes.len());
    let mut u = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let tau_bar = o.tau_bar(grid);
        let guarantee = (-rate * tau_bar).exp() * g * annuity_factor(rate, horizon - tau_bar);
        v.push(annuity_total + disc_t * o.w_terminal);
        u.push(guarantee - o.fee_pv);
    }
    PathValues { v, u }
}

fn simulate(
    spec: &ContractSpec,
    market: &MarketParams,
    sim: &SimSettings,
) -> Result<(PathSet, Vec<PathOutcome>)> {
    validate(spec, market)?;
    let paths = PathSet::generate(
        market,
        spec.fee_rate,
        sim.grid,
        sim.num_paths,
        sim.seed,
        sim.antithetic,
    )?;
    let outcomes = path_outcomes(spec, market.rate, &paths);
    Ok((paths, outcomes))
}

/// Policyholder value `V0 = G a(T) + exp(-rT) E[W_T]`.
pub fn price_policyholder(
    spec: &ContractSpec,
    market: &MarketParams,
    sim: &SimSettings,
) -> Result<Estimate> {
    let (paths, outcomes) = simulate(spec, market, sim)?;
    let values = path_values(spec, market, &paths, &outcomes);
    Ok(MeanStderr::from_paths(&values.v, sim.antithetic).into())
}

/// Insurer rider value with no lapses: expected discounted guarantee payoff
/// at trigger minus the discounted fee ledger.
pub fn price_insurer_nolapse(
    spec: &ContractSpec,
    market: &MarketParams,
    sim: &SimSettings,
) -> Result<Estimate> {
    let (paths, outcomes) = simulate(spec, market, sim)?;
    let values = path_values(spec, market, &paths, &outcomes);
    Ok(MeanStderr::from_paths(&values.u, sim.antithetic).into())
}

/// Values both perspectives on one path set and reports the decomposition
/// residual `V0 - (W0 + U0)` with its joint standard error.
pub fn decompose(
    spec: &ContractSpec,
    market: &MarketParams,
    sim: &SimSettings,
) -> Result<ValuationReport> {
    let (paths, outcomes) = simulate(spec, market, sim)?;
    let values = path_values(spec, market, &paths, &outcomes);
    let residuals: Vec<f64> = values
        .v
        .iter()
        .zip(&values.u)
        .map(|(v, u)| v - (spec.premium + u))
        .collect();
    Ok(ValuationReport {
        v0: MeanStderr::from_paths(&values.v, sim.antithetic).into(),
        u0_nolapse: MeanStderr::from_paths(&values.u, sim.antithetic).into(),
        w0: spec.premium,
        residual: MeanStderr::from_paths(&residuals, sim.antithetic).into(),
        num_paths: sim.num_paths,
        steps_per_year: sim.grid.steps_per_year(),
        seed: sim.seed,
        antithetic: sim.antithetic,
    })
}

/// Sampled `V0` across a ladder of fee rates on common random numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaLadder {
    pub alphas: Vec<f64>,
    pub values: Vec<Estimate>,
    /// `V0(alpha_j) - V0(alpha_{j+1})` with the joint (per-path difference)
    /// standard error.
    pub gaps: Vec<Estimate>,
    /// Whether `alpha_i < alpha_j` implied `W(alpha_i) >= W(alpha_j)` exactly
    /// at every path and step.
    pub pathwise_ordering_held: bool,
}

/// Evaluates `V0` at every fee rate of a strictly increasing ladder in a
/// single sweep over the paths, sharing each per-step shock across all rates.
///
/// The shocks do not depend on the fee, so the simulated accounts are ordered
/// *exactly* across the ladder: the per-step update is monotone in the drift
/// factor, in floating point too, not just in expectation. The sweep verifies
/// the ordering at every path and step.
pub fn alpha_ladder(
    spec: &ContractSpec,
    market: &MarketParams,
    sim: &SimSettings,
    alphas: &[f64],
) -> Result<AlphaLadder> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("empty fee ladder".into()));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "fee ladder must be strictly increasing".into(),
        ));
    }
    validate(&spec.with_fee(alphas[0]), market)?;

    let base = PathSet::generate(
        market,
        alphas[0],
        sim.grid,
        sim.num_paths,
        sim.seed,
        sim.antithetic,
    )?;
    let n_alpha = alphas.len();
    let n_steps = sim.grid.num_steps();
    let dt = sim.grid.dt();
    let g_dt = spec.annual_withdrawal() * dt;
    let sigma = market.sigma;
    let deterministic = sigma == 0.0;
    let drift: Vec<f64> = alphas
        .iter()
        .map(|a| ((market.rate - a - 0.5 * sigma * sigma) * dt).exp())
        .collect();
    let slots = if sim.antithetic { 2 } else { 1 };
    let pairs = sim.num_paths / slots;

    // One sweep per draw stream; terminal account values for every
    // (slot, alpha), plus the exact-ordering flag.
    let per_pair: Vec<(bool, Vec<f64>)> = (0..pairs)
        .into_par_iter()
        .map(|pair| {
            let mut w = vec![spec.premium; slots * n_alpha];
            let mut alive = [true, slots == 2];
            let mut ordered = true;
            for k in 0..n_steps {
                if !alive[0] && !alive[1] {
                    break;
                }
                let shock = if deterministic {
                    1.0
                } else {
                    base.shock(pair, k)
                };
                for slot in 0..slots {
                    if !alive[slot] {
                        continue;
                    }
                    let row = &mut w[slot * n_alpha..(slot + 1) * n_alpha];
                    for (j, d) in drift.iter().enumerate() {
                        let factor = if deterministic {
                            *d
                        } else if slot == 0 {
                            d * shock
                        } else {
                            d / shock
                        };
                        row[j] = (row[j] * factor - g_dt).max(0.0);
                    }
                    for j in 1..n_alpha {
                        if row[j - 1] < row[j] {
                            ordered = false;
                        }
                    }
                    // The lowest fee dominates every other rung; once it
                    // dies, the whole slot is absorbed.
                    if row[0] == 0.0 {
                        alive[slot] = false;
                    }
                }
            }
            (ordered, w)
        })
        .collect();

    let ordered = per_pair.iter().all(|(ok, _)| *ok);
    let maturity = sim.grid.maturity();
    let annuity_total = spec.annual_withdrawal() * annuity_factor(market.rate, maturity);
    let disc_t = (-market.rate * maturity).exp();

    let mut values = Vec::with_capacity(n_alpha);
    let mut per_path: Vec<Vec<f64>> = Vec::with_capacity(n_alpha);
    for j in 0..n_alpha {
        let mut v = vec![0.0f64; sim.num_paths];
        for (pair, (_, w)) in per_pair.iter().enumerate() {
            for slot in 0..slots {
                v[pair * slots + slot] = annuity_total + disc_t * w[slot * n_alpha + j];
            }
        }
        values.push(Estimate::from(MeanStderr::from_paths(&v, sim.antithetic)));
        per_path.push(v);
    }
    let mut gaps = Vec::with_capacity(n_alpha - 1);
    for j in 1..n_alpha {
        let diffs: Vec<f64> = per_path[j - 1]
            .iter()
            .zip(&per_path[j])
            .map(|(a, b)| a - b)
            .collect();
        gaps.push(Estimate::from(MeanStderr::from_paths(
            &diffs,
            sim.antithetic,
        )));
    }

    Ok(AlphaLadder {
        alphas: alphas.to_vec(),
        values,
        gaps,
        pathwise_ordering_held: ordered,
    })
}

/// Grid of `(t, w)` valuations obtained by restarting the simulation from
/// account value `w` at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueSurface {
    pub points: Vec<SurfacePoint>,
    pub num_paths: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub t: f64,
    pub w: f64,
    pub v: Estimate,
    pub u: Estimate,
    /// `v - u - w`, zero in expectation at every point.
    pub residual: Estimate,
    /// ITM when `v > w` beyond noise, OTM when below, ATM within two
    /// standard errors.
    pub moneyness: String,
}

impl ValueSurface {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,w,v,u,stderr_v,stderr_u,moneyness\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.t, p.w, p.v.value, p.u.value, p.v.stderr, p.u.stderr, p.moneyness
            ));
        }
        out
    }
}

/// Estimates `v(t, w)` and `u(t, w)` at every point of
/// `t_points x w_points` by restarting the account at `W_t = w`.
///
/// Restarting is exact by the Markov property of the account. Each `t` must
/// fall on the simulation grid; at `t = T` the values are the maturity
/// payoffs with no uncertainty. At `w = 0` the insurer value is the remaining
/// guarantee annuity, exactly.
pub fn value_surface(
    spec: &ContractSpec,
    market: &MarketParams,
    sim: &SimSettings,
    t_points: &[f64],
    w_points: &[f64],
) -> Result<ValueSurface> {
    validate(spec, market)?;
    if w_points.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidInput(
            "surface account values must be non-negative".into(),
        ));
    }
    let rate = market.rate;
    let g = spec.annual_withdrawal();
    let mut points = Vec::with_capacity(t_points.len() * w_points.len());

    for &t in t_points {
        let k = sim.grid.step_at(t)?;
        let t = sim.grid.time(k);
        for &w in w_points {
            let point = if k == sim.grid.num_steps() {
                SurfacePoint {
                    t,
                    w,
                    v: Estimate {
                        value: w,
                        stderr: 0.0,
                    },
                    u: Estimate::default(),
                    residual: Estimate::default(),
                    moneyness: "ATM".to_string(),
                }
            } else {
                let rem = sim.grid.remaining_from(k)?;
                let horizon = rem.maturity();
                let paths = PathSet::generate(
                    market,
                    spec.fee_rate,
                    rem,
                    sim.num_paths,
                    sim.seed ^ (k as u64),
                    sim.antithetic,
                )?;
                let outcomes = path_outcomes_from(spec, rate, &paths, w);
                let annuity_rem = g * annuity_factor(rate, horizon);
                let disc = (-rate * horizon).exp();
                let mut v = Vec::with_capacity(outcomes.len());
                let mut u = Vec::with_capacity(outcomes.len());
                for o in &outcomes {
                    let tau_rel = o.tau_bar(&rem);
                    let guarantee =
                        (-rate * tau_rel).exp() * g * annuity_factor(rate, horizon - tau_rel);
                    v.push(annuity_rem + disc * o.w_terminal);
                    u.push(guarantee - o.fee_pv);
                }
                let residuals: Vec<f64> = v.iter().zip(&u).map(|(v, u)| v - u - w).collect();
                let v_est: Estimate = MeanStderr::from_paths(&v, sim.antithetic).into();
                let u_est: Estimate = MeanStderr::from_paths(&u, sim.antithetic).into();
                let diff = v_est.value - w;
                let moneyness = if diff > 2.0 * v_est.stderr {
                    "ITM"
                } else if diff < -2.0 * v_est.stderr {
                    "OTM"
                } else {
                    "ATM"
                };
                SurfacePoint {
                    t,
                    w,
                    v: v_est,
                    u: u_est,
                    residual: MeanStderr::from_paths(&residuals, sim.antithetic).into(),
                    moneyness: moneyness.to_string(),
                }
            };
            points.push(point);
        }
    }
    Ok(ValueSurface {
        points,
        num_paths: sim.num_paths,
        seed: sim.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::CdscSchedule;
    use crate::paths::TimeGrid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn spec(fee_rate: f64) -> ContractSpec {
        ContractSpec {
            premium: 100.0,
            withdrawal_rate: 0.1,
            fee_rate,
            cdsc: CdscSchedule::zero(),
        }
    }

    fn market(sigma: f64) -> MarketParams {
        MarketParams {
            rate: 0.05,
            sigma,
            mu: 0.0,
        }
    }

    fn sim(n: u32, paths: usize, seed: u64) -> SimSettings {
        SimSettings::new(TimeGrid::new(n, 10.0).unwrap(), paths, seed, false)
    }

    #[test]
    fn riskless_free_contract_reconstructs_premium() {
        // sigma = 0, alpha = 0: discounted cashflows rebuild P up to O(dt).
        let v = price_policyholder(&spec(0.0), &market(0.0), &sim(252, 8, 1)).unwrap();
        assert_abs_diff_eq!(v.value, 100.0, epsilon = 0.02);
        assert_eq!(v.stderr, 0.0);
        // Insurer side carries neither fees nor payouts.
        let u = price_insurer_nolapse(&spec(0.0), &market(0.0), &sim(252, 8, 1)).unwrap();
        assert_abs_diff_eq!(u.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_fee_case_matches_closed_forms() {
        // alpha = 0.10: ruin at ln(1.5)/0.05, V0 = G a(T), U0 = V0 - P.
        let report = decompose(&spec(0.10), &market(0.0), &sim(2520, 4, 1)).unwrap();
        assert_abs_diff_eq!(report.v0.value, 78.69386805747332, epsilon = 1e-9);
        assert_abs_diff_eq!(report.u0_nolapse.value, -21.306, epsilon = 0.02);
        assert_abs_diff_eq!(
            report.v0.value - (report.w0 + report.u0_nolapse.value),
            0.0,
            epsilon = 0.005
        );
    }

    #[test]
    fn huge_fee_drives_value_to_the_guarantee_annuity() {
        let v = price_policyholder(&spec(5.0), &market(0.2), &sim(252, 20_000, 3)).unwrap();
        assert_abs_diff_eq!(
            v.value,
            78.69386805747332,
            epsilon = 3.0 * v.stderr.max(1e-6)
        );
    }

    #[test]
    fn decomposition_residual_within_noise_for_stochastic_runs() {
        let report = decompose(&spec(0.01), &market(0.2), &sim(52, 40_000, 5)).unwrap();
        assert!(
            report.residual.value.abs() < 4.0 * report.residual.stderr,
            "residual {} vs stderr {}",
            report.residual.value,
            report.residual.stderr
        );
        // V0 >= G a(T): withdrawals are guaranteed.
        assert!(report.v0.value >= 78.69386805747332);
    }

    #[test]
    fn value_scales_linearly_in_premium() {
        let small = price_policyholder(&spec(0.01), &market(0.2), &sim(12, 4_000, 9)).unwrap();
        let mut big_spec = spec(0.01);
        big_spec.premium = 200.0;
        let big = price_policyholder(&big_spec, &market(0.2), &sim(12, 4_000, 9)).unwrap();
        assert_relative_eq!(big.value, 2.0 * small.value, max_relative = 1e-12);
    }

    #[test]
    fn ladder_is_strictly_decreasing_with_exact_path_ordering() {
        let alphas: Vec<f64> = (0..6).map(|i| i as f64 * 0.01).collect();
        let ladder = alpha_ladder(&spec(0.0), &market(0.2), &sim(12, 4_000, 11), &alphas).unwrap();
        assert!(ladder.pathwise_ordering_held);
        for gap in &ladder.gaps {
            assert!(gap.value > 0.0, "sampled V0 must fall between rungs");
        }
        // Rejects unsorted ladders.
        assert!(alpha_ladder(&spec(0.0), &market(0.2), &sim(12, 100, 1), &[0.02, 0.01]).is_err());
    }

    #[test]
    fn ladder_matches_single_evaluations() {
        let alphas = [0.0, 0.02];
        let s = sim(12, 2_000, 13);
        let ladder = alpha_ladder(&spec(0.0), &market(0.25), &s, &alphas).unwrap();
        for (j, &alpha) in alphas.iter().enumerate() {
            let direct = price_policyholder(&spec(alpha), &market(0.25), &s).unwrap();
            assert_relative_eq!(ladder.values[j].value, direct.value, max_relative = 1e-12);
        }
    }

    #[test]
    fn surface_boundary_and_maturity_are_exact() {
        let s = sim(12, 2_000, 17);
        let surface =
            value_surface(&spec(0.01), &market(0.2), &s, &[5.0, 10.0], &[0.0, 80.0]).unwrap();
        // u(t, 0) = G a(T - t) exactly, with zero variance.
        let at_zero = &surface.points[0];
        assert_eq!(at_zero.t, 5.0);
        assert_eq!(at_zero.w, 0.0);
        let expected = 10.0 * annuity_factor(0.05, 5.0);
        assert_abs_diff_eq!(at_zero.u.value, expected, epsilon = 1e-12);
        // The sample mean of identical values rounds at the ulp scale, so
        // the stderr is tiny rather than exactly zero.
        assert!(at_zero.u.stderr < 1e-12);
        assert_abs_diff_eq!(at_zero.residual.value, 0.0, epsilon = 1e-12);
        assert_eq!(at_zero.moneyness, "ITM");
        // v(T, w) = w.
        let maturity_point = &surface.points[3];
        assert_eq!(maturity_point.t, 10.0);
        assert_eq!(maturity_point.v.value, 80.0);
        assert_eq!(maturity_point.u.value, 0.0);
    }

    #[test]
    fn surface_residuals_vanish_within_noise() {
        let s = sim(12, 8_000, 19);
        let surface =
            value_surface(&spec(0.01), &market(0.2), &s, &[2.0, 7.0], &[40.0, 120.0]).unwrap();
        for p in &surface.points {
            assert!(
                p.residual.value.abs() <= 4.0 * p.residual.stderr,
                "residual {} at (t={}, w={}) vs stderr {}",
                p.residual.value,
                p.t,
                p.w,
                p.residual.stderr
            );
        }
    }

    #[test]
    fn surface_requires_grid_times_and_finite_states() {
        let s = sim(12, 100, 1);
        assert!(value_surface(&spec(0.0), &market(0.2), &s, &[1.03], &[50.0]).is_err());
        assert!(value_surface(&spec(0.0), &market(0.2), &s, &[1.0], &[-3.0]).is_err());
    }
}
