//! Oracle-agreement checks behind the `verify` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bargaining::{nbs_solve, DisagreementPoint, DisagreementSource};
use crate::model::{cp_utility, MarketParams};
use crate::oracle::{brute_cp_best_response, brute_nbs, brute_sp_price, cp_grid, nbs_demand_grid, nbs_price_grid, sp_grid};
use crate::spne::{cp_best_response, sp_equilibrium_price};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Draws a random valid parameter set.
pub fn random_params<R: Rng>(rng: &mut R) -> MarketParams {
    let zeta = rng.gen_range(0.2..2.0);
    let big_n = rng.gen_range(20.0..300.0);
    MarketParams {
        alpha: rng.gen_range(0.5..3.0),
        gamma: rng.gen_range(0.05..5.0),
        zeta,
        kappa_u: rng.gen_range(0.3..1.5) / zeta,
        kappa_cp: rng.gen_range(2.8..20.0) / zeta,
        kappa_sp: rng.gen_range(2.0..20.0),
        nu1: rng.gen_range(0.0..3.0),
        nu2: rng.gen_range(0.0..20.0),
        big_d: rng.gen_range(10.0..100.0),
        big_n,
        n_hat: big_n * rng.gen_range(0.1..0.95),
        ..Default::default()
    }
}

fn report(name: &'static str, failures: usize, total: usize, worst: f64) -> CheckReport {
    CheckReport {
        name,
        passed: failures == 0,
        detail: format!("{failures} of {total} cases failed; worst gap {worst:.3e}"),
    }
}

/// CP best response against a 10^4-point grid over bits.
pub fn check_cp_oracle(seed: u64, draws: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..draws {
        let params = random_params(&mut rng);
        let d = rng.gen_range(0.01..1.0) * params.max_served_demand();
        let p = rng.gen_range(0.0..1.2) * params.min_quality_price();
        let grid = cp_grid(d, &params, 10_000).expect("nonempty bit range");
        let oracle = brute_cp_best_response(d, p, &params, &grid);
        let mine = cp_best_response(d, p, &params);
        let u_mine = mine.b.map(|b| cp_utility(d, b, p, &params).unwrap_or(f64::NAN));
        let gap = match (u_mine, oracle.utility) {
            (Some(a), Some(o)) => o - a,
            _ => 0.0,
        };
        worst = worst.max(gap);
        if gap > 1e-6 || mine.z != oracle.z {
            failures += 1;
        }
    }
    report("cp best response vs grid", failures, draws, worst)
}

/// SP pricing against a refined price grid mapped through the CP response.
pub fn check_sp_oracle(seed: u64, draws: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5350);
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..draws {
        let params = random_params(&mut rng);
        let d = rng.gen_range(0.01..1.0) * params.max_served_demand();
        let grid = sp_grid(&params, 10_000).expect("positive extraction price").with_refine(12);
        let oracle = brute_sp_price(d, &params, &grid);
        let mine = sp_equilibrium_price(d, &params);
        let rel = (oracle.u_sp - mine.u_sp) / mine.u_sp.abs().max(1.0);
        worst = worst.max(rel);
        if rel > 1e-6 || oracle.y != mine.y {
            failures += 1;
        }
    }
    report("sp pricing vs grid", failures, draws, worst)
}

/// Zero CP utility at the extraction price and minimum quality.
pub fn check_zero_extraction(seed: u64, draws: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a45);
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..draws {
        let params = random_params(&mut rng);
        let d = rng.gen_range(1e-6..=1.0) * params.max_served_demand();
        let u = cp_utility(d, params.zeta * d, params.min_quality_price(), &params).unwrap_or(f64::NAN);
        let scaled = u.abs() / d.max(1.0);
        worst = worst.max(scaled);
        if !(scaled <= 1e-12) {
            failures += 1;
        }
    }
    report("zero cp utility at extraction price", failures, draws, worst)
}

/// Bargaining solution against a 500x500 Nash-product grid.
pub fn check_nbs_oracle(seed: u64, draws: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4e42);
    let (mut failures, mut worst, mut total) = (0, 0.0f64, 0);
    while total < draws {
        let params = random_params(&mut rng);
        let dp = DisagreementPoint {
            d_cp: rng.gen_range(0.0..10.0),
            d_sp: rng.gen_range(0.0..1.0) * crate::spne::no_sponsoring_payoff(0.0, &params).max(0.0),
            source: DisagreementSource::StableOutcome,
        };
        let w = [0.1, 0.5, 0.9][total % 3];
        let Ok(sol) = nbs_solve(&params, w, &dp) else { continue };
        if !sol.agreed {
            continue;
        }
        total += 1;
        let Ok(dg) = nbs_demand_grid(&params, 500).map(|g| g.with_refine(10)) else { continue };
        let Ok(pg) = nbs_price_grid(&params, &dp, &dg, 500) else {
            failures += 1;
            continue;
        };
        let oracle = brute_nbs(&params, w, &dp, &dg, &pg);
        let mine = (sol.u_cp - dp.d_cp).powf(w) * (sol.u_sp - dp.d_sp).powf(1.0 - w);
        let gap = match oracle.nash_product {
            Some(o) => (o - mine) / mine.abs().max(1.0),
            None => f64::INFINITY,
        };
        worst = worst.max(gap);
        let d_ok = oracle.d.map_or(false, |d| (d - sol.d_star).abs() <= dg.step());
        if gap > 1e-6 || !d_ok {
            failures += 1;
        }
    }
    report("bargaining solution vs grid", failures, total, worst)
}

/// Runs every check.
pub fn run_all(seed: u64, draws: usize) -> Vec<CheckReport> {
    vec![
        check_cp_oracle(seed, draws),
        check_sp_oracle(seed, draws),
        check_zero_extraction(seed, draws),
        check_nbs_oracle(seed, (draws / 20).max(3)),
    ]
}
