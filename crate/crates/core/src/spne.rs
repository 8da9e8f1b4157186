//! Per-epoch equilibrium by backward induction: the CP's best response to a
//! price and the SP's choice among the candidate prices.

use crate::model::{sp_utility, EpochDecision, MarketParams, ModelVariant};

/// Region of the CP's piecewise best response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpRegion {
    MaxBits,
    Interior,
    MinQuality,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpResponse {
    pub z: bool,
    pub b: Option<f64>,
    pub region: CpRegion,
}

impl CpResponse {
    fn exit() -> Self {
        CpResponse { z: false, b: None, region: CpRegion::Exit }
    }

    fn join(region: CpRegion, b: f64) -> Self {
        CpResponse { z: true, b: Some(b), region }
    }
}

/// The three prices the SP can play in equilibrium, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceCandidate {
    PriceMaxBits,
    PriceInterior,
    PriceMinQuality,
}

impl PriceCandidate {
    pub fn as_str(self) -> &'static str {
        match self {
            PriceCandidate::PriceMaxBits => "max_bits",
            PriceCandidate::PriceInterior => "interior",
            PriceCandidate::PriceMinQuality => "min_quality",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpDecision {
    pub y: bool,
    pub p: Option<f64>,
    pub chosen_candidate: Option<PriceCandidate>,
    /// Achieved SP payoff, or the no-sponsoring baseline when `y` is false.
    pub u_sp: f64,
}

/// CP's optimal sponsored bits at price `p`.
///
/// Boundaries are compared exactly and ties go to the lower-price region.
/// A CP that is indifferent (zero utility) joins.
pub fn cp_best_response(d: f64, p: f64, params: &MarketParams) -> CpResponse {
    if d <= 0.0 || d > params.max_served_demand() {
        return CpResponse::exit();
    }
    let alpha = params.alpha;
    if p <= alpha * d / params.n_hat {
        CpResponse::join(CpRegion::MaxBits, params.n_hat)
    } else if p <= alpha / params.zeta {
        CpResponse::join(CpRegion::Interior, alpha * d / p)
    } else if p <= params.min_quality_price() {
        CpResponse::join(CpRegion::MinQuality, params.zeta * d)
    } else {
        CpResponse::exit()
    }
}

/// Candidate equilibrium prices at demand `d`.
///
/// The interior candidate is kept only when `nu1 > 0` and it lies in
/// `[alpha d / n_hat, alpha / zeta]`.
pub fn sp_candidate_prices(d: f64, params: &MarketParams) -> Vec<(PriceCandidate, f64)> {
    let alpha = params.alpha;
    let p_max = alpha * d / params.n_hat;
    let mut out = vec![(PriceCandidate::PriceMaxBits, p_max)];
    if params.nu1 > 0.0 {
        let p_int = alpha * (params.nu1 * d + params.nu2 * params.big_d) / (params.nu1 * params.big_n);
        if p_max <= p_int && p_int <= alpha / params.zeta {
            out.push((PriceCandidate::PriceInterior, p_int));
        }
    }
    out.push((PriceCandidate::PriceMinQuality, params.min_quality_price()));
    out
}

/// SP payoff when it does not offer sponsorship.
pub fn no_sponsoring_payoff(d: f64, params: &MarketParams) -> f64 {
    let pool = match params.variant {
        ModelVariant::Base => params.big_d,
        ModelVariant::AugmentedBestEffort => params.big_d + d,
    };
    if params.nu2 == 0.0 {
        return 0.0;
    }
    params.nu2 * pool * (params.kappa_sp * params.big_n / pool).ln()
}

/// SP's equilibrium decision at demand `d`.
///
/// Candidates are scored with the CP's best response; equal payoffs keep
/// the earlier candidate. The SP offers when the best payoff is at least
/// the no-sponsoring baseline. Candidates that would fill the whole frame
/// (`b >= big_n`) are skipped.
pub fn sp_equilibrium_price(d: f64, params: &MarketParams) -> SpDecision {
    let baseline = no_sponsoring_payoff(d, params);
    let decline = SpDecision { y: false, p: None, chosen_candidate: None, u_sp: baseline };
    if d <= 0.0 || d > params.max_served_demand() {
        return decline;
    }
    let mut best: Option<(PriceCandidate, f64, f64)> = None;
    for (label, p) in sp_candidate_prices(d, params) {
        let resp = cp_best_response(d, p, params);
        let Some(b) = resp.b else { continue };
        let Ok(u) = sp_utility(d, b, p, params) else { continue };
        if best.map_or(true, |(_, _, bu)| u > bu) {
            best = Some((label, p, u));
        }
    }
    match best {
        Some((label, p, u)) if u >= baseline => SpDecision {
            y: true,
            p: Some(p),
            chosen_candidate: Some(label),
            u_sp: u,
        },
        _ => decline,
    }
}

/// Full equilibrium tuple `(y, p, z, b)` for one epoch.
pub fn spne_epoch(d: f64, params: &MarketParams) -> EpochDecision {
    let sp = sp_equilibrium_price(d, params);
    let Some(p) = sp.p else {
        return EpochDecision::none();
    };
    let cp = cp_best_response(d, p, params);
    EpochDecision { y: true, p: Some(p), z: cp.z, b: cp.b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cp_utility;

    fn base() -> MarketParams {
        MarketParams {
            alpha: 1.0,
            zeta: 0.3,
            kappa_cp: 10.0,
            kappa_sp: 10.0,
            nu1: 1.0,
            nu2: 1.0,
            big_d: 50.0,
            big_n: 100.0,
            n_hat: 25.0,
            ..Default::default()
        }
    }

    #[test]
    fn zero_demand_exits() {
        assert_eq!(cp_best_response(0.0, 1.0, &base()).region, CpRegion::Exit);
    }

    #[test]
    fn excess_demand_exits() {
        let p = base();
        assert_eq!(cp_best_response(84.0, 0.1, &p).region, CpRegion::Exit);
    }

    #[test]
    fn max_bits_region() {
        let r = cp_best_response(10.0, 0.2, &base());
        assert_eq!(r.region, CpRegion::MaxBits);
        assert_eq!(r.b, Some(25.0));
    }

    #[test]
    fn interior_region() {
        let r = cp_best_response(10.0, 1.0, &base());
        assert_eq!(r.region, CpRegion::Interior);
        assert_eq!(r.b, Some(10.0));
    }

    #[test]
    fn min_quality_region() {
        let r = cp_best_response(10.0, 3.5, &base());
        assert_eq!(r.region, CpRegion::MinQuality);
        assert!((r.b.unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn price_above_extraction_exits() {
        let r = cp_best_response(10.0, 3.7, &base());
        assert_eq!(r.region, CpRegion::Exit);
        assert!(cp_utility(10.0, 3.0, 3.7, &base()).unwrap() < 0.0);
    }

    #[test]
    fn extraction_price_joins_when_indifferent() {
        let p = base();
        let r = cp_best_response(10.0, p.min_quality_price(), &p);
        assert!(r.z);
        assert_eq!(r.region, CpRegion::MinQuality);
    }

    #[test]
    fn boundary_prices_take_lower_region() {
        let p = base();
        assert_eq!(cp_best_response(10.0, 0.4, &p).region, CpRegion::MaxBits);
        assert_eq!(cp_best_response(10.0, 1.0 / 0.3, &p).region, CpRegion::Interior);
    }

    #[test]
    fn candidates_include_feasible_interior() {
        let c = sp_candidate_prices(10.0, &base());
        assert_eq!(c.len(), 3);
        assert_eq!(c[0], (PriceCandidate::PriceMaxBits, 0.4));
        assert_eq!(c[1].0, PriceCandidate::PriceInterior);
        assert!((c[1].1 - 0.6).abs() < 1e-15);
        assert_eq!(c[2].0, PriceCandidate::PriceMinQuality);
        assert!((c[2].1 - 3.0f64.ln() / 0.3).abs() < 1e-15);
    }

    #[test]
    fn candidates_drop_infeasible_interior() {
        let p = MarketParams { nu2: 10.0, ..base() };
        let c = sp_candidate_prices(10.0, &p);
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|(l, _)| *l != PriceCandidate::PriceInterior));
    }

    #[test]
    fn zero_nu1_drops_interior() {
        let p = MarketParams { nu1: 0.0, ..base() };
        assert_eq!(sp_candidate_prices(10.0, &p).len(), 2);
    }

    #[test]
    fn baseline_values() {
        let p = base();
        assert!((no_sponsoring_payoff(0.0, &p) - 50.0 * 20.0f64.ln()).abs() < 1e-12);
        let aug = MarketParams { variant: ModelVariant::AugmentedBestEffort, ..p };
        assert_eq!(no_sponsoring_payoff(0.0, &aug), no_sponsoring_payoff(0.0, &p));
        let silent = MarketParams { nu2: 0.0, ..p };
        assert_eq!(no_sponsoring_payoff(3.0, &silent), 0.0);
    }

    #[test]
    fn sp_declines_outside_served_range() {
        let p = base();
        assert!(!sp_equilibrium_price(0.0, &p).y);
        assert!(!sp_equilibrium_price(90.0, &p).y);
    }

    #[test]
    fn sp_declines_with_heavy_best_effort_weight() {
        let p = MarketParams { nu2: 50.0, ..base() };
        let s = sp_equilibrium_price(10.0, &p);
        assert!(!s.y);
        assert_eq!(s.u_sp, no_sponsoring_payoff(10.0, &p));
    }

    #[test]
    fn sp_payoff_matches_chosen_candidate() {
        let p = base();
        let s = sp_equilibrium_price(10.0, &p);
        assert!(s.y);
        let price = s.p.unwrap();
        let b = cp_best_response(10.0, price, &p).b.unwrap();
        assert_eq!(s.u_sp, sp_utility(10.0, b, price, &p).unwrap());
        assert!(s.u_sp >= no_sponsoring_payoff(10.0, &p));
    }

    #[test]
    fn epoch_tuple_is_consistent() {
        let p = base();
        assert_eq!(spne_epoch(0.0, &p), EpochDecision::none());
        for d in [0.5, 5.0, 10.0, 40.0, 83.0] {
            let e = spne_epoch(d, &p);
            assert!(e.is_consistent(d, &p), "{d}: {e:?}");
        }
    }
}
