//! Contract and market parameters, the term-certain annuity, and the
//! contingent deferred sales charge (CDSC) schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A GMWB contract: premium, guaranteed withdrawal rate, rider fee rate, and
/// the surrender-charge schedule.
///
/// The maturity is implied: `T = 1 / g`, so that withdrawals at the annual
/// rate `G = g * P` return exactly the premium over the life of the contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    /// Initial premium `P`, paid at time zero.
    pub premium: f64,
    /// Guaranteed withdrawal rate `g` as a fraction of premium per year.
    pub withdrawal_rate: f64,
    /// Rider fee rate `alpha` per year, deducted proportionally from the
    /// account while it is positive.
    pub fee_rate: f64,
    /// Surrender-charge schedule. Irrelevant for no-lapse valuation.
    pub cdsc: CdscSchedule,
}

impl ContractSpec {
    /// Contract maturity `T = 1 / g` in years.
    pub fn maturity(&self) -> f64 {
        1.0 / self.withdrawal_rate
    }

    /// Guaranteed annual withdrawal amount `G = g * P`.
    pub fn annual_withdrawal(&self) -> f64 {
        self.withdrawal_rate * self.premium
    }

    /// Same contract with a different fee rate. Used by the fair-fee solver,
    /// which sweeps `alpha` while holding everything else fixed.
    pub fn with_fee(&self, fee_rate: f64) -> ContractSpec {
        ContractSpec {
            fee_rate,
            ..self.clone()
        }
    }

    /// Surrender charge applicable at time `s`.
    ///
    /// Errors if `s` lies outside `[0, T]`.
    pub fn cdsc_at(&self, s: f64) -> Result<f64> {
        let t = self.maturity();
        if !(0.0..=t).contains(&s) {
            return Err(Error::InvalidInput(format!(
                "surrender time {s} outside contract term [0, {t}]"
            )));
        }
        Ok(self.cdsc.charge_at(s))
    }
}

/// Market parameters for the single risky asset and the money market account.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Continuously compounded riskless rate per year. Must be positive.
    pub rate: f64,
    /// Volatility per square-root year.
    pub sigma: f64,
    /// Real-world drift per year. Stored for completeness; risk-neutral
    /// pricing never reads it.
    #[serde(default)]
    pub mu: f64,
}

/// One segment of a CDSC schedule: `charge` applies to surrenders at any time
/// strictly before `until_year` (and at or after the previous breakpoint).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdscStep {
    pub until_year: f64,
    pub charge: f64,
}

/// Piecewise-constant, right-continuous, non-increasing surrender-charge
/// schedule. Times at or beyond the last breakpoint carry no charge, which
/// gives `k(T) = 0` whenever the schedule expires by maturity.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CdscSchedule {
    steps: Vec<CdscStep>,
}

impl CdscSchedule {
    /// Builds a schedule from segments, enforcing ordering and monotonicity.
    pub fn new(steps: Vec<CdscStep>) -> Result<Self> {
        let schedule = CdscSchedule { steps };
        let errors = schedule.violations();
        if errors.is_empty() {
            Ok(schedule)
        } else {
            Err(Error::Validation(errors))
        }
    }

    /// Schedule with no surrender charges at any time.
    pub fn zero() -> Self {
        CdscSchedule { steps: Vec::new() }
    }

    /// Full charge before maturity: surrendering forfeits everything, which
    /// recovers the no-lapse model.
    pub fn no_lapse(maturity: f64) -> Self {
        CdscSchedule {
            steps: vec![CdscStep {
                until_year: maturity,
                charge: 1.0,
            }],
        }
    }

    /// The marketplace-standard eight-year schedule: 8% in year one,
    /// declining by one point per year, nothing from year nine on.
    pub fn standard_eight_year() -> Self {
        let steps = (1..=8)
            .map(|y| CdscStep {
                until_year: y as f64,
                charge: (9 - y) as f64 / 100.0,
            })
            .collect();
        CdscSchedule { steps }
    }

    /// Right-continuous lookup of the charge applicable at time `s`.
    pub fn charge_at(&self, s: f64) -> f64 {
        for step in &self.steps {
            if s < step.until_year {
                return step.charge;
            }
        }
        0.0
    }

    /// Charge at time zero; a schedule with `k(0) = 0` admits no unique fair
    /// fee once lapses are allowed.
    pub fn initial_charge(&self) -> f64 {
        self.charge_at(0.0)
    }

    pub fn steps(&self) -> &[CdscStep] {
        &self.steps
    }

    /// Uniformly shifts every charge up by `bump`, clamped to `[0, 1]`.
    /// Raising charges pointwise can only discourage surrender.
    pub fn raised_by(&self, bump: f64) -> Result<Self> {
        CdscSchedule::new(
            self.steps
                .iter()
                .map(|s| CdscStep {
                    until_year: s.until_year,
                    charge: (s.charge + bump).clamp(0.0, 1.0),
                })
                .collect(),
        )
    }

    fn violations(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let mut prev_until = 0.0;
        let mut prev_charge = f64::INFINITY;
        for (i, step) in self.steps.iter().enumerate() {
            if !step.until_year.is_finite() || step.until_year <= prev_until {
                errors.push(format!(
                    "CDSC breakpoint {i}: until_year {} must be finite and increasing",
                    step.until_year
                ));
            }
            if !(0.0..=1.0).contains(&step.charge) {
                errors.push(format!(
                    "CDSC breakpoint {i}: charge {} outside [0, 1]",
                    step.charge
                ));
            }
            if step.charge > prev_charge {
                errors.push(format!(
                    "CDSC must be non-increasing: charge rises to {} at breakpoint {i}",
                    step.charge
                ));
            }
            prev_until = step.until_year;
            prev_charge = step.charge;
        }
        errors
    }
}

/// Present value of a continuously paid unit-rate annuity over `horizon`
/// years: `(1 - exp(-r h)) / r`.
///
/// Rejects `rate <= 0` and negative horizons.
pub fn annuity(rate: f64, horizon: f64) -> Result<f64> {
    if rate <= 0.0 || !rate.is_finite() {
        return Err(Error::InvalidInput(format!(
            "annuity requires a positive rate, got {rate}"
        )));
    }
    if horizon < 0.0 || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!(
            "annuity requires a non-negative horizon, got {horizon}"
        )));
    }
    Ok(annuity_factor(rate, horizon))
}

/// Unchecked annuity factor for internal use after inputs are validated.
#[inline]
pub(crate) fn annuity_factor(rate: f64, horizon: f64) -> f64 {
    -(-rate * horizon).exp_m1() / rate
}

/// Non-fatal observations produced by [`validate`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationWarnings {
    pub warnings: Vec<String>,
}

/// Checks every contract and market invariant, aggregating all violations
/// into a single error rather than stopping at the first.
///
/// A zero initial surrender charge is reported as a warning, not an error:
/// such a contract is non-marketable under lapses but the degenerate case is
/// still worth pricing.
pub fn validate(spec: &ContractSpec, market: &MarketParams) -> Result<ValidationWarnings> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();

    // NaNs fail the is_finite clause, so plain comparisons suffice.
    if spec.premium <= 0.0 || !spec.premium.is_finite() {
        errors.push(format!("premium must be positive, got {}", spec.premium));
    }
    if spec.withdrawal_rate <= 0.0 || spec.withdrawal_rate > 1.0 || spec.withdrawal_rate.is_nan() {
        errors.push(format!(
            "withdrawal rate must lie in (0, 1], got {}",
            spec.withdrawal_rate
        ));
    }
    if spec.fee_rate < 0.0 || !spec.fee_rate.is_finite() {
        errors.push(format!(
            "fee rate must be non-negative, got {}",
            spec.fee_rate
        ));
    }
    if market.rate <= 0.0 || !market.rate.is_finite() {
        errors.push(format!(
            "riskless rate must be positive, got {}",
            market.rate
        ));
    }
    if market.sigma < 0.0 || !market.sigma.is_finite() {
        errors.push(format!(
            "volatility must be non-negative, got {}",
            market.sigma
        ));
    }

    if spec.withdrawal_rate > 0.0 && spec.premium > 0.0 {
        let maturity = spec.maturity();
        if !maturity.is_finite() {
            errors.push(format!("maturity 1/g = {maturity} must be finite"));
        } else {
            // G * T should reconstruct P exactly up to representable precision.
            let recovered = spec.annual_withdrawal() * maturity;
            if (recovered - spec.premium).abs() > 8.0 * f64::EPSILON * spec.premium {
                errors.push(format!(
                    "withdrawals G*T = {recovered} do not reconstruct the premium {}",
                    spec.premium
                ));
            }

            errors.extend(spec.cdsc.violations());
            if spec.cdsc.charge_at(maturity) != 0.0 {
                errors.push("surrender charge must vanish at maturity".to_string());
            }
            if spec.cdsc.initial_charge() == 0.0 {
                warnings.push(
                    "initial surrender charge is zero: no unique fair fee exists once \
                     lapses are allowed (non-marketable contract)"
                        .to_string(),
                );
            }
            for step in spec.cdsc.steps() {
                if step.until_year.fract() != 0.0 {
                    warnings.push(format!(
                        "CDSC breakpoint at non-integer year {}; marketplace schedules \
                         break at policy anniversaries",
                        step.until_year
                    ));
                }
            }
        }
    }

    if errors.is_empty() {
        Ok(ValidationWarnings { warnings })
    } else {
        Err(Error::Validation(errors))
    }
}
