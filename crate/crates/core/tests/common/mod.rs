#![allow(dead_code)]
//! Shared strategies for the property tests.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qsd::verify::random_params;
use qsd::MarketParams;

pub fn params() -> impl Strategy<Value = MarketParams> {
    any::<u64>().prop_map(|seed| random_params(&mut ChaCha8Rng::seed_from_u64(seed)))
}

pub fn matched_params() -> impl Strategy<Value = MarketParams> {
    params().prop_map(|p| MarketParams { kappa_u: 1.0 / p.zeta, ..p })
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
