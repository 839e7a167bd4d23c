//! Independent ground truth for the Monte Carlo engine.
//!
//! Two oracles, neither of which touches the simulation code path:
//!
//! * closed forms for `sigma = 0`, where the account follows a linear ODE
//!   and every quantity integrates exactly;
//! * a recombining two-point lattice solved by backward dynamic programming
//!   on a quantized account grid, for the optimal-stopping problem at desk
//!   scale.

use serde::{Deserialize, Serialize};

use crate::account::step_account;
use crate::contract::{annuity_factor, validate, ContractSpec, MarketParams};
use crate::error::{Error, Result};

/// Exact valuation of the deterministic (`sigma = 0`) contract.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicSolution {
    /// First time the account hits zero; infinite if it survives forever.
    pub trigger_time: f64,
    /// Account value at maturity (zero if triggered before `T`).
    pub w_terminal: f64,
    /// Policyholder value `V0`.
    pub v0: f64,
    /// Insurer rider value `U0`.
    pub u0: f64,
    /// Discounted fee income up to the capped trigger time.
    pub fee_present_value: f64,
    /// Discounted guarantee payoff at the capped trigger time.
    pub guarantee_present_value: f64,
}

/// Closed-form valuation for `sigma = 0`.
///
/// With `m = r - alpha` the account solves `W' = m W - G`, so
/// `W_t = (P - G/m) e^{mt} + G/m` (linear `P - Gt` when `m = 0`), truncated
/// at zero. The fee integral reduces to exponentials.
pub fn deterministic_value(
    spec: &ContractSpec,
    market: &MarketParams,
) -> Result<DeterministicSolution> {
    if market.sigma != 0.0 {
        return Err(Error::InvalidInput(format!(
            "deterministic oracle requires sigma = 0, got {}",
            market.sigma
        )));
    }
    validate(spec, market)?;

    let p = spec.premium;
    let g = spec.annual_withdrawal();
    let r = market.rate;
    let alpha = spec.fee_rate;
    let m = r - alpha;
    let maturity = spec.maturity();

    let trigger_time = if m == 0.0 {
        p / g
    } else {
        let denom = g - m * p;
        if denom <= 0.0 {
            // The account grows at least as fast as it is drained.
            f64::INFINITY
        } else {
            (g / denom).ln() / m
        }
    };

    let w_at = |t: f64| -> f64 {
        if t >= trigger_time {
            return 0.0;
        }
        if m == 0.0 {
            (p - g * t).max(0.0)
        } else {
            ((p - g / m) * (m * t).exp() + g / m).max(0.0)
        }
    };

    let tau_bar = trigger_time.min(maturity);
    let w_terminal = w_at(maturity);

    // integral_0^tau_bar alpha W_s e^{-rs} ds in closed form.
    let fee_present_value = if alpha == 0.0 {
        0.0
    } else if m == 0.0 {
        // W_s = P - G s.
        let linear = (1.0 - (-r * tau_bar).exp() * (1.0 + r * tau_bar)) / (r * r);
        alpha * (p * annuity_factor(r, tau_bar) - g * linear)
    } else {
        (p - g / m) * (-(-alpha * tau_bar).exp_m1()) + alpha * (g / m) * annuity_factor(r, tau_bar)
    };

    let guarantee_present_value = (-r * tau_bar).exp() * g * annuity_factor(r, maturity - tau_bar);

    let v0 = g * annuity_factor(r, maturity) + (-r * maturity).exp() * w_terminal;
    let u0 = guarantee_present_value - fee_present_value;

    Ok(DeterministicSolution {
        trigger_time,
        w_terminal,
        v0,
        u0,
        fee_present_value,
        guarantee_present_value,
    })
}

/// Parameters of the recombining two-point lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub steps_per_year: u32,
    pub num_steps: usize,
    pub dt: f64,
    pub up: f64,
    pub down: f64,
    /// Risk-neutral probability of the up branch.
    pub q: f64,
}

impl TreeModel {
    pub fn new(market: &MarketParams, steps_per_year: u32, maturity: f64) -> Result<TreeModel> {
        if steps_per_year == 0 || maturity <= 0.0 || maturity.is_nan() {
            return Err(Error::InvalidInput("invalid lattice dimensions".into()));
        }
        let exact = steps_per_year as f64 * maturity;
        let num_steps = exact.round();
        if (exact - num_steps).abs() > 1e-9 * exact.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "maturity {maturity} is not a whole number of lattice steps"
            )));
        }
        let dt = 1.0 / steps_per_year as f64;
        let up = (market.sigma * dt.sqrt()).exp();
        let down = 1.0 / up;
        let q = ((market.rate * dt).exp() - down) / (up - down);
        if !(q > 0.0 && q < 1.0) || !q.is_finite() {
            return Err(Error::TreeProbability { q });
        }
        Ok(TreeModel {
            steps_per_year,
            num_steps: num_steps as usize,
            dt,
            up,
            down,
            q,
        })
    }
}

/// Dynamic-programming valuation on the lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeValuation {
    pub model: TreeModel,
    /// Policyholder value under the requested exercise regime.
    pub v0: f64,
    /// Insurer value under the same regime.
    pub u0: f64,
    /// Surrender-option value `U0 - U0_nolapse` (zero without lapses).
    pub l0: f64,
    pub v0_nolapse: f64,
    pub u0_nolapse: f64,
    /// Per decision date: smallest account value at which the lattice policy
    /// surrenders, at grid resolution. `None` when it never surrenders.
    pub exercise_boundary: Vec<(f64, Option<f64>)>,
}

/// Values the contract by backward induction.
///
/// The value function depends on time and the account alone (the account is
/// Markov by itself), so the state space is a per-step account grid of
/// `w_points` values on `[0, P u^k]` with linear interpolation, rather than a
/// per-node lattice. Monotonicity of the policyholder value in the account is
/// enforced after every step to keep interpolation artifacts out.
///
/// The account transition reuses the simulator's step function with the
/// two-point branch factors `u e^{-alpha dt}` and `d e^{-alpha dt}`, and the
/// cashflow conventions mirror the Monte Carlo estimators exactly: the
/// withdrawal stream is valued as per-step slices of the continuous annuity
/// (which telescope to `G a(T)`), and an exhausted account is worth the
/// closed-form remaining guarantee `G a(T - t)` to both sides.
pub fn tree_value(
    spec: &ContractSpec,
    market: &MarketParams,
    steps_per_year: u32,
    with_lapse: bool,
    w_points: usize,
) -> Result<TreeValuation> {
    validate(spec, market)?;
    if w_points < 2 {
        return Err(Error::InvalidInput("need at least two grid points".into()));
    }
    let model = TreeModel::new(market, steps_per_year, spec.maturity())?;
    let n = model.num_steps;
    let p = spec.premium;
    let g = spec.annual_withdrawal();
    let rate = market.rate;
    let g_dt = g * model.dt;
    let fee_mult = (spec.fee_rate * model.dt).exp_m1();
    let ef = (-spec.fee_rate * model.dt).exp();
    let factor_up = model.up * ef;
    let factor_down = model.down * ef;
    let disc = (-rate * model.dt).exp();
    let q = model.q;
    // One step's worth of the continuously paid withdrawal stream.
    let annuity_slice = g * annuity_factor(rate, model.dt);

    let w_max = |k: usize| p * model.up.powi(k as i32);
    let grid = |k: usize| -> Vec<f64> {
        let top = w_max(k);
        (0..w_points)
            .map(|i| top * i as f64 / (w_points - 1) as f64)
            .collect()
    };

    // Terminal payoffs: the remaining account, no charge at maturity.
    let mut v_nl: Vec<f64> = grid(n);
    let mut u_nl = vec![0.0f64; w_points];
    let mut v_lp = v_nl.clone();
    let mut u_lp = u_nl.clone();
    let mut boundary: Vec<(f64, Option<f64>)> = Vec::with_capacity(n);

    for k in (0..n).rev() {
        let states = grid(k);
        let next_top = w_max(k + 1);
        let next_h = next_top / (w_points - 1) as f64;
        let interp = |arr: &[f64], w: f64| -> f64 {
            let pos = (w / next_h).min((w_points - 1) as f64);
            let i = pos as usize;
            if i >= w_points - 1 {
                return arr[w_points - 1];
            }
            let frac = pos - i as f64;
            arr[i] + frac * (arr[i + 1] - arr[i])
        };

        let t = k as f64 * model.dt;
        let charge = spec.cdsc.charge_at(t);
        // Exhausted account: the guarantee pays the remaining annuity, no
        // fees, no surrender (proceeds would be nothing).
        let at_zero = g * annuity_factor(rate, spec.maturity() - t);
        let mut v_nl_new = vec![0.0f64; w_points];
        let mut u_nl_new = vec![0.0f64; w_points];
        let mut v_lp_new = vec![0.0f64; w_points];
        let mut u_lp_new = vec![0.0f64; w_points];
        let mut first_exercise: Option<f64> = None;

        for (i, &w) in states.iter().enumerate() {
            if i == 0 {
                v_nl_new[0] = at_zero;
                u_nl_new[0] = at_zero;
                v_lp_new[0] = at_zero;
                u_lp_new[0] = at_zero;
                continue;
            }
            let up = step_account(w, factor_up, g_dt, fee_mult);
            let down = step_account(w, factor_down, g_dt, fee_mult);
            // The policyholder receives the withdrawal stream every step;
            // the insurer's side nets the fee ledger, with the guarantee
            // valued in closed form at the zero boundary.
            let cont_v_nl = annuity_slice
                + disc * (q * interp(&v_nl, up.w_after) + (1.0 - q) * interp(&v_nl, down.w_after));
            let cont_u_nl = disc
                * (q * (interp(&u_nl, up.w_after) - up.fee)
                    + (1.0 - q) * (interp(&u_nl, down.w_after) - down.fee));
            v_nl_new[i] = cont_v_nl;
            u_nl_new[i] = cont_u_nl;

            if with_lapse {
                let cont_v_lp = annuity_slice
                    + disc
                        * (q * interp(&v_lp, up.w_after) + (1.0 - q) * interp(&v_lp, down.w_after));
                let cont_u_lp = disc
                    * (q * (interp(&u_lp, up.w_after) - up.fee)
                        + (1.0 - q) * (interp(&u_lp, down.w_after) - down.fee));
                // Surrender is only open before the trigger (w > 0).
                let proceeds = w * (1.0 - charge);
                if charge < 1.0 && proceeds > cont_v_lp {
                    v_lp_new[i] = proceeds;
                    u_lp_new[i] = -w * charge;
                    if first_exercise.is_none() {
                        first_exercise = Some(w);
                    }
                } else {
                    v_lp_new[i] = cont_v_lp;
                    u_lp_new[i] = cont_u_lp;
                }
            }
        }

        // Isotonic clamp: more account cannot be worth less.
        for i in 1..w_points {
            if v_nl_new[i] < v_nl_new[i - 1] {
                v_nl_new[i] = v_nl_new[i - 1];
            }
            if with_lapse && v_lp_new[i] < v_lp_new[i - 1] {
                v_lp_new[i] = v_lp_new[i - 1];
            }
        }

        v_nl = v_nl_new;
        u_nl = u_nl_new;
        if with_lapse {
            v_lp = v_lp_new;
            u_lp = u_lp_new;
            boundary.push((t, first_exercise));
        }
    }
    boundary.reverse();

    // At step zero the grid spans [0, P]; the initial state is its top point.
    let v0_nolapse = v_nl[w_points - 1];
    let u0_nolapse = u_nl[w_points - 1];
    let (v0, u0) = if with_lapse {
        (v_lp[w_points - 1], u_lp[w_points - 1])
    } else {
        (v0_nolapse, u0_nolapse)
    };

    Ok(TreeValuation {
        model,
        v0,
        u0,
        l0: u0 - u0_nolapse,
        v0_nolapse,
        u0_nolapse,
        exercise_boundary: boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::CdscSchedule;
    use approx::assert_abs_diff_eq;

    fn spec(fee_rate: f64, withdrawal_rate: f64) -> ContractSpec {
        ContractSpec {
            premium: 100.0,
            withdrawal_rate,
            fee_rate,
            cdsc: CdscSchedule::zero(),
        }
    }

    fn market(rate: f64, sigma: f64) -> MarketParams {
        MarketParams {
            rate,
            sigma,
            mu: 0.0,
        }
    }

    #[test]
    fn deterministic_no_fee_case() {
        let sol = deterministic_value(&spec(0.0, 0.1), &market(0.05, 0.0)).unwrap();
        assert_abs_diff_eq!(sol.trigger_time, 2.0f64.ln() / 0.05, epsilon = 1e-12);
        assert!(sol.trigger_time > 10.0);
        assert_abs_diff_eq!(sol.w_terminal, 35.12787292998718, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.v0, 100.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.u0, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_heavy_fee_case() {
        let sol = deterministic_value(&spec(0.10, 0.1), &market(0.05, 0.0)).unwrap();
        assert_abs_diff_eq!(sol.trigger_time, 1.5f64.ln() / 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.w_terminal, 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(sol.v0, 78.69386805747332, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.guarantee_present_value, 12.027, epsilon = 5e-4);
        assert_abs_diff_eq!(sol.fee_present_value, 33.333, epsilon = 5e-4);
        assert_abs_diff_eq!(sol.u0, -21.306, epsilon = 5e-4);
        // The two closed forms must satisfy the decomposition exactly.
        assert_abs_diff_eq!(sol.v0, 100.0 + sol.u0, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_fee_equal_to_rate_depletes_linearly() {
        let sol = deterministic_value(&spec(0.05, 0.1), &market(0.05, 0.0)).unwrap();
        assert_abs_diff_eq!(sol.trigger_time, 10.0, epsilon = 1e-12);
        assert_eq!(sol.w_terminal, 0.0);
        assert_abs_diff_eq!(sol.v0, 100.0 + sol.u0, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_oracle_rejects_volatility() {
        assert!(deterministic_value(&spec(0.0, 0.1), &market(0.05, 0.2)).is_err());
    }

    #[test]
    fn lattice_rejects_degenerate_probability() {
        // sigma too small for the step size pushes q past 1.
        let err = TreeModel::new(&market(0.05, 0.001), 12, 2.0).unwrap_err();
        assert!(matches!(err, Error::TreeProbability { .. }));
        let ok = TreeModel::new(&market(0.05, 0.2), 12, 2.0).unwrap();
        assert!(ok.q > 0.0 && ok.q < 1.0);
    }

    #[test]
    fn lattice_approaches_deterministic_oracle_as_volatility_vanishes() {
        // Small sigma, step size chosen to keep q inside (0, 1).
        let tree = tree_value(&spec(0.02, 0.5), &market(0.05, 0.01), 52, false, 801).unwrap();
        let det = deterministic_value(&spec(0.02, 0.5), &market(0.05, 0.0)).unwrap();
        assert_abs_diff_eq!(tree.v0, det.v0, epsilon = 0.1);
        assert_abs_diff_eq!(tree.u0, det.u0, epsilon = 0.1);
    }

    #[test]
    fn lattice_decomposition_residual_is_discretization_sized_and_shrinks() {
        // The closed-form annuity and guarantee conventions (shared with the
        // Monte Carlo estimators) differ from the discrete cashflow stream
        // by O(G dt), so v = w + u holds up to that envelope and tightens
        // linearly as the grid refines.
        let residual = |n: u32| {
            let tree = tree_value(&spec(0.03, 0.5), &market(0.05, 0.2), n, false, 801).unwrap();
            assert_eq!(tree.l0, 0.0);
            tree.v0 - (100.0 + tree.u0)
        };
        let coarse = residual(12);
        let fine = residual(96);
        let g_dt = |n: f64| 50.0 / n;
        assert!(
            coarse.abs() <= 1.2 * g_dt(12.0),
            "coarse residual {coarse} beyond the O(G dt) envelope"
        );
        assert!(fine.abs() <= 1.2 * g_dt(96.0));
        assert!(
            fine.abs() <= 0.3 * coarse.abs(),
            "residual must shrink ~linearly: {coarse} -> {fine}"
        );
    }

    #[test]
    fn full_charge_schedule_makes_lapse_worthless() {
        let mut contract = spec(0.03, 0.5);
        contract.cdsc = CdscSchedule::no_lapse(contract.maturity());
        let tree = tree_value(&contract, &market(0.05, 0.2), 12, true, 401).unwrap();
        assert_eq!(tree.v0, tree.v0_nolapse);
        assert_eq!(tree.l0, 0.0);
        assert!(tree.exercise_boundary.iter().all(|(_, b)| b.is_none()));
    }

    #[test]
    fn lapse_option_never_hurts() {
        let mut contract = spec(0.05, 0.5);
        contract.cdsc = CdscSchedule::new(vec![
            crate::contract::CdscStep {
                until_year: 1.0,
                charge: 0.04,
            },
            crate::contract::CdscStep {
                until_year: 2.0,
                charge: 0.02,
            },
        ])
        .unwrap();
        let tree = tree_value(&contract, &market(0.05, 0.2), 12, true, 401).unwrap();
        assert!(tree.v0 >= tree.v0_nolapse - 1e-12);
        assert!(tree.l0 >= -1e-12);
        // The two routes to L (insurer difference vs policyholder
        // difference) agree up to the O(G dt) convention mismatch.
        assert_abs_diff_eq!(
            tree.l0,
            tree.v0 - tree.v0_nolapse,
            epsilon = 0.5 * 50.0 / 12.0
        );
    }

    #[test]
    fn oracle_is_bit_deterministic() {
        let a = tree_value(&spec(0.03, 0.5), &market(0.05, 0.25), 12, true, 401).unwrap();
        let b = tree_value(&spec(0.03, 0.5), &market(0.05, 0.25), 12, true, 401).unwrap();
        assert_eq!(a, b);
    }
}
