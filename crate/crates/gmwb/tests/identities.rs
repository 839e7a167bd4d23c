//! Cross-module identities: thread invariance, oracle agreement, variance
//! reduction, and the lapse-model fair fee.

use gmwb::{
    fair_fee, oracle, surrender, valuation, BasisSpec, CdscSchedule, CdscStep, ContractSpec,
    MarketParams, PathSet, SimSettings, TimeGrid,
};

fn contract(fee_rate: f64, withdrawal_rate: f64, cdsc: CdscSchedule) -> ContractSpec {
    ContractSpec {
        premium: 100.0,
        withdrawal_rate,
        fee_rate,
        cdsc,
    }
}

fn market(sigma: f64) -> MarketParams {
    MarketParams {
        rate: 0.05,
        sigma,
        mu: 0.0,
    }
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let spec = contract(0.02, 0.1, CdscSchedule::zero());
    let m = market(0.25);
    let sim = SimSettings::new(TimeGrid::new(12, 10.0).unwrap(), 20_000, 9, true);

    let run = || valuation::decompose(&spec, &m, &sim).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    let quad = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(single, quad);

    let solve = || {
        fair_fee::solve_fair_fee(&spec, &m, &sim, 0.05, 40)
            .unwrap()
            .alpha_star
    };
    let a = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(solve);
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(solve);
    assert_eq!(a, b);
}

#[test]
fn lattice_and_monte_carlo_agree_across_a_parameter_grid() {
    // 3 x 3 grid of (sigma, alpha) on a short contract: the two engines
    // discretize the same mechanics and must agree inside Monte Carlo noise
    // plus an interpolation allowance plus the O(G dt) envelope of their
    // trigger-window quadrature difference.
    let grid = TimeGrid::new(12, 2.0).unwrap();
    // One right-endpoint-vs-integral window for V (withdrawals), two for U
    // (withdrawals and the guarantee window).
    let quadrature = 0.5 * 50.0 * grid.dt() * (1.0 - (-0.05f64 * 2.0).exp());
    let quadrature_u = 2.0 * quadrature;
    for sigma in [0.1, 0.2, 0.3] {
        for alpha in [0.0, 0.02, 0.05] {
            let spec = contract(alpha, 0.5, CdscSchedule::zero());
            let m = market(sigma);
            let sim = SimSettings::new(grid, 100_000, 33, true);
            let mc = valuation::decompose(&spec, &m, &sim).unwrap();
            let tree = oracle::tree_value(&spec, &m, 12, false, 401).unwrap();
            let tol = 3.0 * mc.v0.stderr + 0.05 + quadrature;
            assert!(
                (mc.v0.value - tree.v0).abs() <= tol,
                "sigma {sigma} alpha {alpha}: mc {} vs tree {} (tol {tol})",
                mc.v0.value,
                tree.v0
            );
            let tol_u = 3.0 * mc.u0_nolapse.stderr + 0.05 + quadrature_u;
            assert!(
                (mc.u0_nolapse.value - tree.u0).abs() <= tol_u,
                "sigma {sigma} alpha {alpha}: mc u {} vs tree u {} (tol {tol_u})",
                mc.u0_nolapse.value,
                tree.u0
            );
        }
    }
}

#[test]
fn antithetic_pairing_reduces_variance_on_a_fixed_budget() {
    let m = market(0.25);
    let grid = TimeGrid::new(12, 1.0).unwrap();
    let budget = 100_000;

    let terminal = |antithetic: bool| -> Vec<f64> {
        let paths = PathSet::generate(&m, 0.0, grid, budget, 77, antithetic).unwrap();
        (0..budget)
            .map(|j| {
                let mut z = 1.0;
                for k in 0..grid.num_steps() {
                    z *= paths.growth_factor(j, k);
                }
                z
            })
            .collect()
    };

    let variance_of_mean = |values: &[f64], paired: bool| -> f64 {
        let units: Vec<f64> = if paired {
            values
                .chunks_exact(2)
                .map(|p| 0.5 * (p[0] + p[1]))
                .collect()
        } else {
            values.to_vec()
        };
        let n = units.len() as f64;
        let mean = units.iter().sum::<f64>() / n;
        units.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0) / n
    };

    let plain = variance_of_mean(&terminal(false), false);
    let paired = variance_of_mean(&terminal(true), true);
    assert!(
        paired < plain,
        "antithetic variance {paired} not below plain {plain}"
    );
}

#[test]
fn lapse_model_fair_fee_solves_with_a_warning() {
    let cdsc = CdscSchedule::new(vec![
        CdscStep {
            until_year: 1.0,
            charge: 0.05,
        },
        CdscStep {
            until_year: 2.0,
            charge: 0.03,
        },
    ])
    .unwrap();
    let spec = contract(0.0, 0.5, cdsc.clone());
    let m = market(0.3);
    let grid = TimeGrid::new(12, 2.0).unwrap();
    let sim = SimSettings::new(grid, 30_000, 5, false);
    let fit = SimSettings::new(grid, 15_000, 6, false);
    let result = fair_fee::solve_fair_fee_with_lapse(
        &spec,
        &m,
        &sim,
        &fit,
        1,
        &BasisSpec::default(),
        0.05,
        40,
    )
    .unwrap();
    assert!(result.converged);
    assert!(result
        .warning
        .as_deref()
        .unwrap_or("")
        .contains("uniqueness"));
    assert!(result.alpha_star > 0.0);

    // The no-lapse fair fee cannot exceed the lapse-model fee by more than
    // noise: the surrender option only adds policyholder value.
    let nolapse = fair_fee::solve_fair_fee(&spec, &m, &sim, 0.05, 40).unwrap();
    assert!(nolapse.alpha_star <= result.alpha_star + 5e-3);

    // Zero initial charge is refused outright.
    let free = contract(0.0, 0.5, CdscSchedule::zero());
    assert!(fair_fee::solve_fair_fee_with_lapse(
        &free,
        &m,
        &sim,
        &fit,
        1,
        &BasisSpec::default(),
        0.05,
        40
    )
    .is_err());
}

#[test]
fn surface_moneyness_flags_follow_the_sign_of_the_rider_value() {
    let spec = contract(0.05, 0.1, CdscSchedule::zero());
    let m = market(0.2);
    let sim = SimSettings::new(TimeGrid::new(12, 10.0).unwrap(), 20_000, 21, false);
    let surface = valuation::value_surface(&spec, &m, &sim, &[5.0], &[1.0, 300.0]).unwrap();
    // Tiny account: the guarantee dominates, deeply in the money.
    assert_eq!(surface.points[0].moneyness, "ITM");
    assert!(surface.points[0].u.value > 0.0);
    // Huge account: fees dominate the worthless guarantee.
    assert_eq!(surface.points[1].moneyness, "OTM");
    assert!(surface.points[1].u.value < 0.0);
}

#[test]
fn policy_fit_is_reproducible_and_out_of_sample_pricing_is_deterministic() {
    let spec = contract(
        0.05,
        0.5,
        CdscSchedule::new(vec![
            CdscStep {
                until_year: 1.0,
                charge: 0.04,
            },
            CdscStep {
                until_year: 2.0,
                charge: 0.02,
            },
        ])
        .unwrap(),
    );
    let m = market(0.2);
    let grid = TimeGrid::new(12, 2.0).unwrap();
    let fit = SimSettings::new(grid, 12_000, 3, false);
    let price = SimSettings::new(grid, 24_000, 4, true);
    let p1 = surrender::fit_policy(&spec, &m, &fit, 1, &BasisSpec::default()).unwrap();
    let p2 = surrender::fit_policy(&spec, &m, &fit, 1, &BasisSpec::default()).unwrap();
    assert_eq!(p1, p2);
    let r1 = surrender::price_with_lapse(&spec, &m, &price, &p1).unwrap();
    let r2 = surrender::price_with_lapse(&spec, &m, &price, &p2).unwrap();
    assert_eq!(r1, r2);
}
