//! Early surrender: least-squares Monte Carlo policy fitting, out-of-sample
//! pricing of the lapse contract, the surrender-option value `L`, and the
//! extended decomposition `V = W + U_nolapse + L`.
//!
//! Surrender is an optimal stopping problem over times before the trigger
//! plus maturity. The regression state is the account value alone (the
//! contract value is Markov in `W` under static withdrawals), with a basis
//! of low-order polynomials plus a kink feature below the remaining
//! guarantee, where the payoff bends.
//!
//! Fitting and pricing must use different seeds: pricing a policy on the
//! paths it was fit on would leak foresight.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::account::{walk_pair, WalkConsts};
use crate::contract::{annuity_factor, validate, ContractSpec, MarketParams};
use crate::error::{Error, Result};
use crate::paths::{PathSet, SimSettings, TimeGrid};
use crate::stats::MeanStderr;
use crate::valuation::Estimate;

/// Largest fit cross-section we are willing to hold in memory, in matrix
/// entries. Beyond this, thin the exercise dates or the fit paths.
const MAX_FIT_ENTRIES: usize = 60_000_000;

const MAX_DEGREE: u8 = 3;

/// Regression basis: monomials `1, x, ..., x^degree` of the premium-scaled
/// account, optionally joined by `x * 1{w < G (T - t)}`, a local feature for
/// the payoff kink where the guarantee dominates the account.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub degree: u8,
    pub kink_feature: bool,
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec {
            degree: 3,
            kink_feature: true,
        }
    }
}

impl BasisSpec {
    fn max_features(&self) -> usize {
        self.degree as usize + 1 + usize::from(self.kink_feature)
    }

    /// Fills the first `count` features at `(w, t)`.
    fn fill(&self, count: usize, w: f64, scale: f64, kink_threshold: f64, out: &mut [f64]) {
        let x = w / scale;
        let mut value = 1.0;
        for (i, slot) in out.iter_mut().enumerate().take(count) {
            if i <= self.degree as usize {
                *slot = value;
                value *= x;
            } else {
                *slot = if w < kink_threshold { x } else { 0.0 };
            }
        }
    }
}

/// Exercise rule at one date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DateRule {
    /// No regression could be fit (empty or degenerate cross-section) or the
    /// charge forfeits everything; holding is forced.
    NeverExercise,
    /// Fitted continuation value: surrender when the charged proceeds exceed
    /// it. `n_features` counts the leading features actually used; the
    /// ladder drops trailing features when the cross-section cannot identify
    /// them. The regression is only trusted on the account range it saw:
    /// states outside `[w_lo, w_hi]` are clamped before evaluation, which
    /// stops the polynomial from extrapolating wildly.
    Regression {
        n_features: usize,
        coeffs: Vec<f64>,
        n_regressed: usize,
        w_lo: f64,
        w_hi: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyDate {
    pub step: usize,
    pub time: f64,
    pub charge: f64,
    pub rule: DateRule,
    /// Closed-form lower bound on the continuation value, linear in the
    /// account: holding to maturity is worth at least the annuity stream
    /// plus the discounted *untruncated* account expectation. Surrender is
    /// never taken below this bound, whatever the regression says: it
    /// protects the sparse tails of the cross-section from a misfit
    /// polynomial.
    pub lb_intercept: f64,
    pub lb_slope: f64,
}

impl PolicyDate {
    /// Fitted continuation value at account `w`; infinite when exercise is
    /// forbidden so the comparison can never fire.
    fn continuation(&self, basis: &BasisSpec, scale: f64, kink_threshold: f64, w: f64) -> f64 {
        match &self.rule {
            DateRule::NeverExercise => f64::INFINITY,
            DateRule::Regression {
                n_features,
                coeffs,
                w_lo,
                w_hi,
                ..
            } => {
                let clamped = w.clamp(*w_lo, *w_hi);
                let mut feats = [0.0f64; 8];
                basis.fill(*n_features, clamped, scale, kink_threshold, &mut feats);
                coeffs.iter().zip(&feats).map(|(c, f)| c * f).sum()
            }
        }
    }

    fn exercises(&self, basis: &BasisSpec, scale: f64, kink_threshold: f64, w: f64) -> bool {
        if w <= 0.0 || self.charge >= 1.0 {
            return false;
        }
        let proceeds = w * (1.0 - self.charge);
        proceeds > self.lb_intercept + self.lb_slope * w
            && proceeds > self.continuation(basis, scale, kink_threshold, w)
    }
}

/// A fitted stopping rule: per-date continuation regressions plus the data
/// needed to replay them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingPolicy {
    pub grid: TimeGrid,
    pub basis: BasisSpec,
    /// Premium used as the feature scale.
    pub scale: f64,
    /// Annual withdrawal, fixing the kink threshold `G (T - t)`.
    pub annual_withdrawal: f64,
    /// Riskless rate and fee rate the policy was fit under.
    pub rate: f64,
    pub fee_rate: f64,
    pub fit_seed: u64,
    pub fit_paths: usize,
    pub dates: Vec<PolicyDate>,
    pub warnings: Vec<String>,
}

impl StoppingPolicy {
    fn kink_threshold(&self, t: f64) -> f64 {
        self.annual_withdrawal * (self.grid.maturity() - t)
    }
}

/// Fits a surrender policy by backward induction over the exercise dates
/// (every `exercise_stride`-th grid step, starting at time zero).
///
/// At each date the realized continuation payoff (future withdrawals plus
/// charged surrender or maturity proceeds, discounted) is regressed on the
/// basis over the cross-section of paths that are not triggered and whose
/// proceeds are positive. Cross-sections that cannot identify the full basis
/// fall back to fewer features, down to a plain mean; an empty cross-section
/// disables the date.
pub fn fit_policy(
    spec: &ContractSpec,
    market: &MarketParams,
    fit_sim: &SimSettings,
    exercise_stride: usize,
    basis: &BasisSpec,
) -> Result<StoppingPolicy> {
    let mut warnings = validate(spec, market)?.warnings;
    if basis.degree == 0 || basis.degree > MAX_DEGREE {
        return Err(Error::InvalidInput(format!(
            "basis degree must lie in 1..={MAX_DEGREE}, got {}",
            basis.degree
        )));
    }
    if exercise_stride == 0 {
        return Err(Error::InvalidInput(
            "exercise stride must be positive".into(),
        ));
    }
    if fit_sim.num_paths < 10_000 {
        return Err(Error::InvalidInput(format!(
            "policy fitting needs at least 10000 paths, got {}",
            fit_sim.num_paths
        )));
    }
    if spec.cdsc.initial_charge() == 0.0 {
        warnings.push(
            "zero initial surrender charge: the fitted policy prices a non-marketable \
             contract with no unique fair fee"
                .to_string(),
        );
    }

    let grid = fit_sim.grid;
    let n = grid.num_steps();
    let steps: Vec<usize> = (0..n).step_by(exercise_stride).collect();
    let n_dates = steps.len();
    let m = fit_sim.num_paths;
    if n_dates * m > MAX_FIT_ENTRIES {
        return Err(Error::InvalidInput(format!(
            "fit cross-section of {n_dates} dates x {m} paths is too large; raise the \
             exercise stride or lower the fit path count"
        )));
    }

    let paths = PathSet::generate(
        market,
        spec.fee_rate,
        grid,
        m,
        fit_sim.seed,
        fit_sim.antithetic,
    )?;
    let consts = WalkConsts::new(spec, market.rate, &grid);
    let slots = if fit_sim.antithetic { 2 } else { 1 };

    // step -> date index lookup.
    let mut date_of_step: Vec<Option<u32>> = vec![None; n + 1];
    for (d, &k) in steps.iter().enumerate() {
        date_of_step[k] = Some(d as u32);
    }

    // states[path * n_dates + d] = account value at exercise date d.
    let mut states = vec![0.0f64; m * n_dates];
    let mut terminal = vec![0.0f64; m];
    states
        .par_chunks_mut(slots * n_dates)
        .zip(terminal.par_chunks_mut(slots))
        .enumerate()
        .for_each(|(pair, (rows, term))| {
            // Date zero is never visited by the walker; the state there is
            // the premium itself.
            for slot in 0..slots {
                if !steps.is_empty() && steps[0] == 0 {
                    rows[slot * n_dates] = spec.premium;
                }
            }
            let (outcomes, n_slots) = walk_pair(
                &paths,
                &consts,
                pair,
                spec.premium,
                &mut |slot, k, w, _fee_pv, _disc| {
                    if let Some(d) = date_of_step[k] {
                        rows[slot * n_dates + d as usize] = w;
                    }
                },
            );
            for slot in 0..n_slots {
                term[slot] = outcomes[slot].w_terminal;
            }
        });

    // Backward induction state: current stopping time and payoff per path.
    let maturity = grid.maturity();
    let rate = market.rate;
    let g = spec.annual_withdrawal();
    let mut eta = vec![maturity; m];
    let mut payoff = terminal;
    let n_feats_max = basis.max_features();
    let mut dates: Vec<PolicyDate> = Vec::with_capacity(n_dates);

    for (d, &k) in steps.iter().enumerate().rev() {
        let t = grid.time(k);
        let charge = spec.cdsc.charge_at(t);
        let (lb_intercept, lb_slope) =
            continuation_lower_bound(g, rate, spec.fee_rate, maturity - t);
        let never = |rule_time: f64| PolicyDate {
            step: k,
            time: rule_time,
            charge,
            rule: DateRule::NeverExercise,
            lb_intercept,
            lb_slope,
        };
        if charge >= 1.0 {
            dates.push(never(t));
            continue;
        }
        let kink_threshold = g * (maturity - t);
        let eligible: Vec<usize> = (0..m).filter(|&i| states[i * n_dates + d] > 0.0).collect();
        if eligible.is_empty() {
            dates.push(never(t));
            continue;
        }

        // Realized continuation payoff discounted to this date.
        let targets: Vec<f64> = eligible
            .iter()
            .map(|&i| {
                let dt_eta = eta[i] - t;
                g * annuity_factor(rate, dt_eta) + (-rate * dt_eta).exp() * payoff[i]
            })
            .collect();

        let mut rule = DateRule::NeverExercise;
        for n_feats in (1..=n_feats_max).rev() {
            if eligible.len() < 3 * n_feats {
                continue;
            }
            if let Some(coeffs) = regress(
                basis,
                n_feats,
                spec.premium,
                kink_threshold,
                &eligible,
                &states,
                n_dates,
                d,
                &targets,
            ) {
                let (w_lo, w_hi) =
                    eligible
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                            let w = states[i * n_dates + d];
                            (lo.min(w), hi.max(w))
                        });
                rule = DateRule::Regression {
                    n_features: n_feats,
                    coeffs,
                    n_regressed: eligible.len(),
                    w_lo,
                    w_hi,
                };
                break;
            }
        }
        if matches!(rule, DateRule::NeverExercise) {
            warnings.push(format!(
                "degenerate regression cross-section at t = {t}; date disabled"
            ));
        }

        let date = PolicyDate {
            step: k,
            time: t,
            charge,
            rule,
            lb_intercept,
            lb_slope,
        };
        for &i in &eligible {
            let w = states[i * n_dates + d];
            if date.exercises(basis, spec.premium, kink_threshold, w) {
                eta[i] = t;
                payoff[i] = w * (1.0 - charge);
            }
        }
        dates.push(date);
    }
    dates.reverse();

    Ok(StoppingPolicy {
        grid,
        basis: *basis,
        scale: spec.premium,
        annual_withdrawal: g,
        rate,
        fee_rate: spec.fee_rate,
        fit_seed: fit_sim.seed,
        fit_paths: m,
        dates,
        warnings,
    })
}

/// Linear-in-`w` lower bound on the value of never surrendering: the annuity
/// stream plus the discounted expectation of the *untruncated* account,
/// `E[W_T | W_t = w] >= w e^{m h} - G integral e^{m (h - s)} ds` with
/// `m = r - alpha`. Dropping the truncation at zero only lowers the value.
fn continuation_lower_bound(g: f64, rate: f64, fee_rate: f64, horizon: f64) -> (f64, f64) {
    let m = rate - fee_rate;
    let growth_integral = if m.abs() < 1e-12 {
        horizon
    } else {
        (m * horizon).exp_m1() / m
    };
    let intercept =
        g * annuity_factor(rate, horizon) - (-rate * horizon).exp() * g * growth_integral;
    let slope = (-fee_rate * horizon).exp();
    (intercept, slope)
}

/// Least squares via the normal equations with partial pivoting; `None` when
/// the cross-section cannot identify the requested features.
#[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
fn regress(
    basis: &BasisSpec,
    n_feats: usize,
    scale: f64,
    kink_threshold: f64,
    eligible: &[usize],
    states: &[f64],
    n_dates: usize,
    date: usize,
    targets: &[f64],
) -> Option<Vec<f64>> {
    let mut xtx = [[0.0f64; 8]; 8];
    let mut xty = [0.0f64; 8];
    let mut feats = [0.0f64; 8];
    for (row, &i) in eligible.iter().enumerate() {
        let w = states[i * n_dates + date];
        basis.fill(n_feats, w, scale, kink_threshold, &mut feats);
        for a in 0..n_feats {
            for b in a..n_feats {
                xtx[a][b] += feats[a] * feats[b];
            }
            xty[a] += feats[a] * targets[row];
        }
    }
    for a in 0..n_feats {
        for b in 0..a {
            xtx[a][b] = xtx[b][a];
        }
    }

    // Gaussian elimination with partial pivoting on the augmented system.
    let tol = 1e-10 * (0..n_feats).map(|i| xtx[i][i].abs()).fold(0.0, f64::max);
    for col in 0..n_feats {
        let (pivot_row, pivot) = (col..n_feats)
            .map(|r| (r, xtx[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if pivot <= tol || !pivot.is_finite() {
            return None;
        }
        xtx.swap(pivot_row, col);
        xty.swap(pivot_row, col);
        for r in (col + 1)..n_feats {
            let factor = xtx[r][col] / xtx[col][col];
            for c in col..n_feats {
                xtx[r][c] -= factor * xtx[col][c];
            }
            xty[r] -= factor * xty[col];
        }
    }
    let mut coeffs = vec![0.0f64; n_feats];
    for row in (0..n_feats).rev() {
        let mut rhs = xty[row];
        for c in (row + 1)..n_feats {
            rhs -= xtx[row][c] * coeffs[c];
        }
        coeffs[row] = rhs / xtx[row][row];
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return None;
    }
    Some(coeffs)
}

/// Joint valuation of the lapse contract, the no-lapse contract, and the
/// surrender option on one out-of-sample path set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LapseReport {
    pub v0_lapse: Estimate,
    pub u0_lapse: Estimate,
    /// Surrender-option value from its own representation (avoided fees
    /// minus forfeited guarantee minus the charge).
    pub l0_direct: Estimate,
    /// Surrender-option value as `V0_lapse - V0_nolapse` on the same paths.
    pub l0_via_difference: Estimate,
    pub v0_nolapse: Estimate,
    pub u0_nolapse: Estimate,
    /// `V0 - (W0 + U0)` in the lapse model.
    pub residual_insurer: Estimate,
    /// `V0 - (W0 + U0_nolapse + L0)`.
    pub residual_decomposition: Estimate,
    /// `L0_direct - (V0_lapse - V0_nolapse)`.
    pub residual_option_value: Estimate,
    /// Fraction of paths that surrendered before maturity.
    pub surrender_fraction: f64,
    pub num_paths: usize,
    pub seed: u64,
    pub fit_seed: u64,
}

#[derive(Clone, Copy, Default)]
struct LapseState {
    surrendered: bool,
    eta_step: usize,
    w_eta: f64,
    fee_pv_eta: f64,
}

/// Prices the contract under a fitted surrender policy on fresh paths.
///
/// The withdrawal stream and trigger guarantee are valued in closed form as
/// in the no-lapse estimators; the same walk also carries the no-lapse
/// continuation of every path, so all five values and the decomposition
/// residuals share one set of draws.
pub fn price_with_lapse(
    spec: &ContractSpec,
    market: &MarketParams,
    sim: &SimSettings,
    policy: &StoppingPolicy,
) -> Result<LapseReport> {
    validate(spec, market)?;
    if sim.seed == policy.fit_seed {
        return Err(Error::SeedCollision(sim.seed));
    }
    if sim.grid != policy.grid {
        return Err(Error::InvalidInput(
            "pricing grid differs from the grid the policy was fit on".into(),
        ));
    }
    if policy.scale != spec.premium
        || policy.annual_withdrawal != spec.annual_withdrawal()
        || policy.fee_rate != spec.fee_rate
        || policy.rate != market.rate
    {
        return Err(Error::InvalidInput(
            "policy was fit for a different contract or market".into(),
        ));
    }

    let grid = sim.grid;
    let n = grid.num_steps();
    let m = sim.num_paths;
    let paths = PathSet::generate(market, spec.fee_rate, grid, m, sim.seed, sim.antithetic)?;
    let consts = WalkConsts::new(spec, market.rate, &grid);
    let slots = if sim.antithetic { 2 } else { 1 };
    let pairs = m / slots;

    let mut date_of_step: Vec<Option<u32>> = vec![None; n + 1];
    for (d, date) in policy.dates.iter().enumerate() {
        date_of_step[date.step] = Some(d as u32);
    }
    // A possible decision at time zero applies to every path identically.
    let exercise_at_zero = policy
        .dates
        .first()
        .filter(|d| d.step == 0)
        .is_some_and(|d| {
            d.exercises(
                &policy.basis,
                policy.scale,
                policy.kink_threshold(0.0),
                spec.premium,
            )
        });

    #[derive(Clone, Copy, Default)]
    struct PathRow {
        v_l: f64,
        u_l: f64,
        l_dir: f64,
        v_nl: f64,
        u_nl: f64,
        surrendered: bool,
    }

    let rate = market.rate;
    let g = spec.annual_withdrawal();
    let maturity = grid.maturity();
    let annuity_total = g * annuity_factor(rate, maturity);
    let disc_t = (-rate * maturity).exp();

    let rows: Vec<PathRow> = (0..pairs)
        .into_par_iter()
        .flat_map_iter(|pair| {
            let mut lapse = [LapseState::default(); 2];
            if exercise_at_zero {
                for state in &mut lapse {
                    state.surrendered = true;
                    state.w_eta = spec.premium;
                }
            }
            let (outcomes, n_slots) = walk_pair(
                &paths,
                &consts,
                pair,
                spec.premium,
                &mut |slot, k, w, fee_pv, _disc| {
                    if lapse[slot].surrendered || w <= 0.0 {
                        return;
                    }
                    if let Some(d) = date_of_step[k] {
                        let date = &policy.dates[d as usize];
                        if date.exercises(
                            &policy.basis,
                            policy.scale,
                            policy.kink_threshold(date.time),
                            w,
                        ) {
                            lapse[slot] = LapseState {
                                surrendered: true,
                                eta_step: k,
                                w_eta: w,
                                fee_pv_eta: fee_pv,
                            };
                        }
                    }
                },
            );
            (0..n_slots)
                .map(|slot| {
                    let o = outcomes[slot];
                    let tau_bar = o.tau_bar(&grid);
                    let guarantee =
                        (-rate * tau_bar).exp() * g * annuity_factor(rate, maturity - tau_bar);
                    let v_nl = annuity_total + disc_t * o.w_terminal;
                    let u_nl = guarantee - o.fee_pv;
                    let state = lapse[slot];
                    if state.surrendered {
                        let t_eta = grid.time(state.eta_step);
                        let charge = spec.cdsc.charge_at(t_eta);
                        let disc_eta = (-rate * t_eta).exp();
                        let proceeds = state.w_eta * (1.0 - charge);
                        let charge_pv = disc_eta * state.w_eta * charge;
                        PathRow {
                            v_l: g * annuity_factor(rate, t_eta) + disc_eta * proceeds,
                            u_l: -state.fee_pv_eta - charge_pv,
                            l_dir: (o.fee_pv - state.fee_pv_eta) - guarantee - charge_pv,
                            v_nl,
                            u_nl,
                            surrendered: true,
                        }
                    } else {
                        PathRow {
                            v_l: v_nl,
                            u_l: u_nl,
                            l_dir: 0.0,
                            v_nl,
                            u_nl,
                            surrendered: false,
                        }
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let premium = spec.premium;
    let collect = |f: &dyn Fn(&PathRow) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    let v_l = collect(&|r| r.v_l);
    let u_l = collect(&|r| r.u_l);
    let l_dir = collect(&|r| r.l_dir);
    let v_nl = collect(&|r| r.v_nl);
    let u_nl = collect(&|r| r.u_nl);
    let l_via = collect(&|r| r.v_l - r.v_nl);
    let res_insurer = collect(&|r| r.v_l - (premium + r.u_l));
    let res_decomp = collect(&|r| r.v_l - (premium + r.u_nl + r.l_dir));
    let res_lv = collect(&|r| r.l_dir - (r.v_l - r.v_nl));
    let surrendered = rows.iter().filter(|r| r.surrendered).count();

    let a = sim.antithetic;
    Ok(LapseReport {
        v0_lapse: MeanStderr::from_paths(&v_l, a).into(),
        u0_lapse: MeanStderr::from_paths(&u_l, a).into(),
        l0_direct: MeanStderr::from_paths(&l_dir, a).into(),
        l0_via_difference: MeanStderr::from_paths(&l_via, a).into(),
        v0_nolapse: MeanStderr::from_paths(&v_nl, a).into(),
        u0_nolapse: MeanStderr::from_paths(&u_nl, a).into(),
        residual_insurer: MeanStderr::from_paths(&res_insurer, a).into(),
        residual_decomposition: MeanStderr::from_paths(&res_decomp, a).into(),
        residual_option_value: MeanStderr::from_paths(&res_lv, a).into(),
        surrender_fraction: surrendered as f64 / m as f64,
        num_paths: m,
        seed: sim.seed,
        fit_seed: policy.fit_seed,
    })
}

/// Critical account value per exercise date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExerciseBoundary {
    pub points: Vec<BoundaryPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub step: usize,
    pub time: f64,
    /// Smallest account value at which the policy surrenders; `None` when it
    /// never does below `w_max`.
    pub critical_w: Option<f64>,
}

impl ExerciseBoundary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,time,critical_w\n");
        for p in &self.points {
            match p.critical_w {
                Some(w) => out.push_str(&format!("{},{},{}\n", p.step, p.time, w)),
                None => out.push_str(&format!("{},{},\n", p.step, p.time)),
            }
        }
        out
    }
}

/// Finds, for each date, the smallest account value at which the fitted rule
/// prefers surrender, by a scan over `[0, w_max]` refined with bisection.
pub fn exercise_boundary(policy: &StoppingPolicy, w_max: f64) -> ExerciseBoundary {
    const SCAN: usize = 1024;
    let points = policy
        .dates
        .iter()
        .map(|date| {
            let threshold = policy.kink_threshold(date.time);
            let fires =
                |w: f64| -> bool { date.exercises(&policy.basis, policy.scale, threshold, w) };
            let mut critical = None;
            let mut prev = 0.0f64;
            for i in 1..=SCAN {
                let w = w_max * i as f64 / SCAN as f64;
                if fires(w) {
                    // Refine within (prev, w].
                    let (mut lo, mut hi) = (prev, w);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if fires(mid) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    critical = Some(hi);
                    break;
                }
                prev = w;
            }
            BoundaryPoint {
                step: date.step,
                time: date.time,
                critical_w: critical,
            }
        })
        .collect();
    ExerciseBoundary { points }
}
