use proptest::prelude::*;

use qsd::dynamics::{
    classify_outcome, long_sighted_cp_ranking, min_quality_optimal_demand, min_quality_sp_payoff, simulate,
    stable_point_payoffs, OutcomeKind, SimulationMode, DEFAULT_HORIZON,
};
use qsd::model::demand_update;
use qsd::spne::spne_epoch;
use qsd::MarketParams;

mod common;
use common::{matched_params, params, rel_close};

const MODES: [SimulationMode; 3] =
    [SimulationMode::BothShortSighted, SimulationMode::LongSightedSP, SimulationMode::LongSightedCP];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn over_provisioned_never_sponsors(p in params(), k in 1.01f64..4.0, fd in 0.01f64..1.0) {
        let p = MarketParams { kappa_u: k / p.zeta, ..p };
        let d0 = fd * p.max_served_demand();
        for mode in MODES {
            let traj = simulate(d0, &p, mode, DEFAULT_HORIZON).unwrap();
            let o = classify_outcome(&traj, &p, 1e-8).unwrap();
            prop_assert!(!o.kind.is_sponsoring());
        }
    }

    #[test]
    fn trajectories_follow_their_decisions(p in params(), fd in 0.01f64..1.0) {
        let d0 = fd * p.max_served_demand();
        let traj = simulate(d0, &p, SimulationMode::BothShortSighted, 500).unwrap();
        for t in 0..traj.decisions.len().min(traj.demands.len() - 1) {
            let d = traj.demands[t];
            let dec = traj.decisions[t];
            prop_assert_eq!(dec, spne_epoch(d, &p));
            if let Some(b) = dec.b {
                prop_assert!(rel_close(traj.demands[t + 1], demand_update(d, b, &p).unwrap(), 1e-12));
            }
        }
    }

    #[test]
    fn min_quality_demand_maximizes_sp_payoff(p in matched_params(), f in 0.0f64..1.0) {
        let d = min_quality_optimal_demand(&p);
        let other = f * p.max_served_demand();
        let best = min_quality_sp_payoff(d, &p);
        prop_assert!(best >= min_quality_sp_payoff(other, &p) - 1e-9 * best.abs().max(1.0));
    }

    #[test]
    fn cp_ranking_is_ordered(p in params()) {
        let ranked = long_sighted_cp_ranking(&p);
        for pair in ranked.windows(2) {
            prop_assert!(pair[0].u_cp >= pair[1].u_cp - 1e-9 * pair[1].u_cp.abs().max(1.0));
        }
        for r in &ranked {
            if r.outcome.kind == OutcomeKind::MinQualitySponsoring {
                prop_assert!(r.u_cp.abs() <= 1e-9 * p.big_n);
            }
            let (u_cp, _) = stable_point_payoffs(&r.outcome, &p).unwrap();
            prop_assert!(rel_close(u_cp, r.u_cp, 1e-12));
        }
    }

    #[test]
    fn stable_sponsoring_tails_are_flat(p in params(), fd in 0.01f64..1.0) {
        let d0 = fd * p.max_served_demand();
        for mode in MODES {
            let traj = simulate(d0, &p, mode, DEFAULT_HORIZON).unwrap();
            if let Ok(o) = classify_outcome(&traj, &p, 1e-8) {
                if o.kind.is_sponsoring() {
                    let n = traj.demands.len();
                    for w in traj.demands[n - 51..].windows(2) {
                        prop_assert!((w[1] - w[0]).abs() < 1e-8 * w[0]);
                    }
                }
            }
        }
    }
}

#[test]
fn long_sighted_modes_agree_on_matched_defaults() {
    let p = MarketParams::default();
    let sp = simulate(1.0, &p, SimulationMode::LongSightedSP, DEFAULT_HORIZON).unwrap();
    let cp = simulate(1.0, &p, SimulationMode::LongSightedCP, DEFAULT_HORIZON).unwrap();
    let a = classify_outcome(&sp, &p, 1e-8).unwrap();
    let b = classify_outcome(&cp, &p, 1e-8).unwrap();
    assert_eq!(a.code(), b.code());
}
