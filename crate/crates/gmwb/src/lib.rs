//! Pricing engine for variable annuities with a guaranteed minimum withdrawal
//! benefit (GMWB) rider.
//!
//! The contract invests a single premium `P` in a fund tracking a risky asset
//! under geometric Brownian motion. The rider guarantees withdrawals at the
//! annual rate `G = g * P` until the premium is recovered at maturity
//! `T = 1/g`, regardless of account performance, in exchange for a
//! proportional fee `alpha` deducted from the account while it is positive.
//!
//! The crate prices the contract from both sides of the trade:
//!
//! * [`valuation`]: policyholder value `V0`, insurer rider value `U0` under
//!   no lapses, and the decomposition `V = W + U`;
//! * [`fair_fee`]: the unique fee rate making `V0 = P`, found by bracketing
//!   bisection on common random numbers;
//! * [`surrender`]: optimal early surrender by least-squares Monte Carlo,
//!   the surrender-option value `L`, and the extended decomposition
//!   `V = W + U_nolapse + L`;
//! * [`oracle`]: independent ground truth: closed forms for `sigma = 0` and
//!   a dynamic-programming lattice for the optimal-stopping problem.
//!
//! All simulation is driven by counter-based random numbers keyed on
//! `(seed, path, step)`, so results are bit-reproducible regardless of thread
//! count and common random numbers are available across fee rates.

pub mod account;
pub mod contract;
pub mod error;
pub mod fair_fee;
pub mod oracle;
pub mod paths;
pub mod rng;
pub mod stats;
pub mod surrender;
pub mod valuation;

pub use account::{AccountPath, RuinProbability, TriggerTimes};
pub use contract::{annuity, validate, CdscSchedule, CdscStep, ContractSpec, MarketParams};
pub use error::{Error, Result};
pub use fair_fee::FeeSolveResult;
pub use paths::{PathSet, SimSettings, TimeGrid};
pub use surrender::{BasisSpec, LapseReport, StoppingPolicy};
pub use valuation::{Estimate, ValuationReport, ValueSurface};
