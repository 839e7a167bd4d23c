//! Account evolution: fee drag, guaranteed withdrawals, absorption at zero,
//! and the trigger time.
//!
//! The discrete scheme applies the full-step growth factor, then withdraws
//! `G * dt` at the step end. The policyholder receives the full withdrawal
//! every step regardless of the account: whatever the account cannot cover is
//! funded by the rider guarantee, and the account absorbs at zero.
//!
//! The per-step fee ledger entry is the value lost to fee drag over the step,
//! `W * R * (exp(alpha dt) - 1)`, booked at the step end. With this
//! convention the discrete decomposition `V = W + U` holds in expectation
//! without any continuous-time integral.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contract::{ContractSpec, MarketParams};
use crate::error::{Error, Result};
use crate::paths::{PathSet, TimeGrid};

/// Result of one account step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct StepOutcome {
    pub w_after: f64,
    pub from_account: f64,
    pub shortfall: f64,
    pub fee: f64,
}

/// Applies one step: grow by `factor`, book the fee-drag ledger entry, pay
/// the withdrawal, truncate at zero.
#[inline(always)]
pub(crate) fn step_account(w: f64, factor: f64, withdrawal: f64, fee_mult: f64) -> StepOutcome {
    let grown = w * factor;
    let fee = grown * fee_mult;
    let from_account = grown.min(withdrawal);
    StepOutcome {
        w_after: (grown - withdrawal).max(0.0),
        from_account,
        shortfall: withdrawal - from_account,
        fee,
    }
}

/// Per-run constants of the discrete scheme.
#[derive(Clone, Copy, Debug)]
pub(crate) struct WalkConsts {
    /// Withdrawal per step, `G * dt`.
    pub g_dt: f64,
    /// Fee ledger multiplier, `exp(alpha * dt) - 1`.
    pub fee_mult: f64,
    /// One-step discount factor, `exp(-r * dt)`.
    pub disc_step: f64,
}

impl WalkConsts {
    pub fn new(spec: &ContractSpec, rate: f64, grid: &TimeGrid) -> WalkConsts {
        let dt = grid.dt();
        WalkConsts {
            g_dt: spec.annual_withdrawal() * dt,
            fee_mult: (spec.fee_rate * dt).exp_m1(),
            disc_step: (-rate * dt).exp(),
        }
    }
}

/// Terminal summary of one simulated account path.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct PathOutcome {
    pub w_terminal: f64,
    /// Grid index of the first zero state, if the account was exhausted.
    pub trigger_step: Option<usize>,
    /// Fee ledger discounted to the walk start.
    pub fee_pv: f64,
}

impl PathOutcome {
    /// Trigger time capped at maturity.
    pub fn tau_bar(&self, grid: &TimeGrid) -> f64 {
        match self.trigger_step {
            Some(k) => grid.time(k),
            None => grid.maturity(),
        }
    }
}

/// Walks every path of one draw stream (a pair under antithetic sampling,
/// otherwise a single path), sharing the per-step shock between the two pair
/// members.
///
/// `visit` is called after each step as `(slot, state_index, w, fee_pv,
/// discount)` where `slot` is 0 or 1 within the pair. Once every slot has
/// absorbed at zero the walk stops early; visitors must treat missing calls
/// as `w = 0` with the fee ledger frozen.
#[inline]
pub(crate) fn walk_pair<F>(
    paths: &PathSet,
    consts: &WalkConsts,
    pair: usize,
    initial_w: f64,
    visit: &mut F,
) -> ([PathOutcome; 2], usize)
where
    F: FnMut(usize, usize, f64, f64, f64),
{
    let n = paths.grid().num_steps();
    let slots = if paths.antithetic() { 2 } else { 1 };
    let drift = paths.drift_factor();
    let deterministic = paths.is_deterministic();

    let mut w = [initial_w, initial_w];
    let mut fee_pv = [0.0f64; 2];
    let mut trigger: [Option<usize>; 2] = [None, None];
    let mut disc = 1.0f64;

    if initial_w == 0.0 {
        // Already exhausted: the guarantee starts paying immediately.
        trigger = [Some(0), Some(0)];
    } else {
        for k in 0..n {
            let (f0, f1) = if deterministic {
                (drift, drift)
            } else if slots == 2 {
                let shock = paths.shock(pair, k);
                (drift * shock, drift / shock)
            } else {
                (drift * paths.shock(pair, k), 0.0)
            };
            disc *= consts.disc_step;

            let mut all_dead = true;
            for slot in 0..slots {
                let factor = if slot == 0 { f0 } else { f1 };
                let step = step_account(w[slot], factor, consts.g_dt, consts.fee_mult);
                fee_pv[slot] += disc * step.fee;
                w[slot] = step.w_after;
                if step.w_after == 0.0 {
                    if trigger[slot].is_none() {
                        trigger[slot] = Some(k + 1);
                    }
                } else {
                    all_dead = false;
                }
                visit(slot, k + 1, step.w_after, fee_pv[slot], disc);
            }
            if all_dead {
                break;
            }
        }
    }

    let outcomes = [
        PathOutcome {
            w_terminal: w[0],
            trigger_step: trigger[0],
            fee_pv: fee_pv[0],
        },
        PathOutcome {
            w_terminal: w[1],
            trigger_step: trigger[1],
            fee_pv: fee_pv[1],
        },
    ];
    (outcomes, slots)
}

/// Bulk terminal summaries for every path, in path order, parallel over draw
/// streams.
pub(crate) fn path_outcomes(spec: &ContractSpec, rate: f64, paths: &PathSet) -> Vec<PathOutcome> {
    path_outcomes_from(spec, rate, paths, spec.premium)
}

pub(crate) fn path_outcomes_from(
    spec: &ContractSpec,
    rate: f64,
    paths: &PathSet,
    initial_w: f64,
) -> Vec<PathOutcome> {
    let consts = WalkConsts::new(spec, rate, paths.grid());
    let slots = if paths.antithetic() { 2 } else { 1 };
    let mut out = vec![PathOutcome::default(); paths.num_paths()];
    out.par_chunks_mut(slots)
        .enumerate()
        .for_each(|(pair, chunk)| {
            let (outcomes, n) = walk_pair(paths, &consts, pair, initial_w, &mut |_, _, _, _, _| {});
            chunk[..n].copy_from_slice(&outcomes[..n]);
        });
    out
}

fn check_alpha(spec: &ContractSpec, paths: &PathSet) -> Result<()> {
    if spec.fee_rate != paths.fee_rate() {
        return Err(Error::AlphaMismatch {
            spec: spec.fee_rate,
            paths: paths.fee_rate(),
        });
    }
    Ok(())
}

/// One fully materialized account path with its cashflow ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccountPath {
    grid: TimeGrid,
    /// Account value at each grid point, starting at the premium.
    pub values: Vec<f64>,
    /// Grid index of the first zero value, if any.
    pub trigger_index: Option<usize>,
    /// Withdrawal paid from the account at each grid point (zero at `t_0`).
    pub account_withdrawals: Vec<f64>,
    /// Withdrawal portion funded by the rider guarantee at each grid point.
    pub guarantee_payments: Vec<f64>,
    /// Fee ledger entry booked at each grid point (zero at `t_0`).
    pub fees: Vec<f64>,
}

impl AccountPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Trigger time and its floored/capped variants as of time `t`.
    pub fn trigger_times(&self, t: f64) -> TriggerTimes {
        assert!(
            (0.0..=self.grid.maturity()).contains(&t),
            "query time {t} outside [0, T]"
        );
        let tau = match self.trigger_index {
            Some(k) => self.grid.time(k),
            None => f64::INFINITY,
        };
        let tau_t = tau.max(t);
        TriggerTimes {
            tau,
            tau_t,
            tau_bar_t: tau_t.min(self.grid.maturity()),
        }
    }

    /// CSV rendering with columns `t, Z, W, withdrawal, fee`; `z` must be the
    /// matching no-withdrawal path from the same path set.
    pub fn to_csv(&self, z: &[f64]) -> Result<String> {
        if z.len() != self.values.len() {
            return Err(Error::InvalidInput(format!(
                "Z path has {} points, account has {}",
                z.len(),
                self.values.len()
            )));
        }
        let mut out = String::from("t,Z,W,withdrawal,fee\n");
        for (k, (z_k, w_k)) in z.iter().zip(&self.values).enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.grid.time(k),
                z_k,
                w_k,
                self.account_withdrawals[k],
                self.fees[k]
            ));
        }
        Ok(out)
    }
}

/// The trigger time `tau` (infinite when the account survives) together with
/// `tau_t = tau v t` and `tau_bar_t = (tau v t) ^ T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggerTimes {
    pub tau: f64,
    pub tau_t: f64,
    pub tau_bar_t: f64,
}

/// Evolves a single account path, recording values and cashflows at every
/// grid point.
///
/// The contract and the path set must agree on the fee rate; the fee is baked
/// into the growth factors.
pub fn evolve(
    spec: &ContractSpec,
    market: &MarketParams,
    paths: &PathSet,
    path: usize,
) -> Result<AccountPath> {
    check_alpha(spec, paths)?;
    if path >= paths.num_paths() {
        return Err(Error::PathIndexOutOfRange {
            index: path,
            num_paths: paths.num_paths(),
        });
    }
    let grid = *paths.grid();
    let n = grid.num_steps();
    let consts = WalkConsts::new(spec, market.rate, &grid);

    let mut values = Vec::with_capacity(n + 1);
    let mut account_withdrawals = vec![0.0];
    let mut guarantee_payments = vec![0.0];
    let mut fees = vec![0.0];
    let mut trigger_index = None;

    let mut w = spec.premium;
    values.push(w);
    for k in 0..n {
        let step = step_account(
            w,
            paths.growth_factor(path, k),
            consts.g_dt,
            consts.fee_mult,
        );
        w = step.w_after;
        values.push(w);
        account_withdrawals.push(step.from_account);
        guarantee_payments.push(step.shortfall);
        fees.push(step.fee);
        if w == 0.0 && trigger_index.is_none() {
            trigger_index = Some(k + 1);
        }
    }

    Ok(AccountPath {
        grid,
        values,
        trigger_index,
        account_withdrawals,
        guarantee_payments,
        fees,
    })
}

/// Probability that the account survives to maturity, with the binomial
/// standard error of the estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuinProbability {
    /// Estimate of `Q(W_T > 0)`.
    pub survival_probability: f64,
    /// Estimate of `Q(tau <= T)`, the complement.
    pub ruin_probability: f64,
    pub stderr: f64,
    pub paths_surviving: u64,
    pub num_paths: usize,
}

/// Estimates the probability that the contract matures with a positive
/// account value. Plain (non-antithetic) sampling so the binomial standard
/// error is exact.
pub fn ruin_probability(
    spec: &ContractSpec,
    market: &MarketParams,
    grid: TimeGrid,
    num_paths: usize,
    seed: u64,
) -> Result<RuinProbability> {
    if num_paths < 1000 {
        return Err(Error::InvalidInput(format!(
            "ruin probability needs at least 1000 paths, got {num_paths}"
        )));
    }
    let paths = PathSet::generate(market, spec.fee_rate, grid, num_paths, seed, false)?;
    let outcomes = path_outcomes(spec, market.rate, &paths);
    let surviving = outcomes.iter().filter(|o| o.w_terminal > 0.0).count() as u64;
    let p = surviving as f64 / num_paths as f64;
    Ok(RuinProbability {
        survival_probability: p,
        ruin_probability: 1.0 - p,
        stderr: (p * (1.0 - p) / num_paths as f64).sqrt(),
        paths_surviving: surviving,
        num_paths,
    })
}
