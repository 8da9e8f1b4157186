//! Repeated play, asymptotic outcome classification and long-sighted
//! equilibrium selection.

mod simulate;

pub use simulate::{
    classify_outcome, classify_with, epoch_payoffs, simulate, simulate_with, write_trajectory_csv,
    ClassifyOptions, SimOptions, STILL_TOL, DEFAULT_HORIZON, DEFAULT_LAMBDA, DEFAULT_TOL, DEFAULT_WINDOW,
    MATCH_TOL,
};

use crate::error::{Error, Result};
use crate::model::{cp_utility, sp_utility, MarketParams, QualityRegime, MATCHED_QUALITY_TOL};
use crate::spne::{no_sponsoring_payoff, sp_equilibrium_price, PriceCandidate};

/// Asymptotic market outcome, numbered as in the phase diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutcomeKind {
    Unstable,
    NoSponsoring,
    MaxBitSponsoring,
    MinQualitySponsoring,
    InteriorStable,
}

impl OutcomeKind {
    pub fn code(self) -> u8 {
        match self {
            OutcomeKind::Unstable => 0,
            OutcomeKind::NoSponsoring => 1,
            OutcomeKind::MaxBitSponsoring => 2,
            OutcomeKind::MinQualitySponsoring => 3,
            OutcomeKind::InteriorStable => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => OutcomeKind::Unstable,
            1 => OutcomeKind::NoSponsoring,
            2 => OutcomeKind::MaxBitSponsoring,
            3 => OutcomeKind::MinQualitySponsoring,
            4 => OutcomeKind::InteriorStable,
            _ => return None,
        })
    }

    pub fn is_sponsoring(self) -> bool {
        matches!(
            self,
            OutcomeKind::MaxBitSponsoring | OutcomeKind::MinQualitySponsoring | OutcomeKind::InteriorStable
        )
    }
}

/// The asymptotic `(d, y, p, z, b)` tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableTuple {
    pub d: f64,
    pub y: bool,
    pub p: Option<f64>,
    pub z: bool,
    pub b: Option<f64>,
}

impl StableTuple {
    fn sponsored(d: f64, p: f64, b: f64) -> Self {
        StableTuple { d, y: true, p: Some(p), z: true, b: Some(b) }
    }

    fn idle(d: f64) -> Self {
        StableTuple { d, y: false, p: None, z: false, b: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableOutcome {
    pub kind: OutcomeKind,
    /// Present for every kind except `Unstable`.
    pub tuple: Option<StableTuple>,
}

impl StableOutcome {
    pub fn unstable() -> Self {
        StableOutcome { kind: OutcomeKind::Unstable, tuple: None }
    }

    /// No sponsoring; `d` is the demand when the program ended.
    pub fn no_sponsoring(d: f64) -> Self {
        StableOutcome { kind: OutcomeKind::NoSponsoring, tuple: Some(StableTuple::idle(d)) }
    }

    pub fn code(&self) -> u8 {
        self.kind.code()
    }
}

/// How the two players look ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulationMode {
    BothShortSighted,
    LongSightedSP,
    LongSightedCP,
}

fn at_most_matched(params: &MarketParams) -> bool {
    params.kappa_u * params.zeta <= 1.0 + MATCHED_QUALITY_TOL
}

/// Maximum-bit stable point `(kappa_u n_hat, 1, alpha kappa_u, 1, n_hat)`,
/// available when `kappa_u <= 1 / zeta`.
pub fn max_bit_outcome(params: &MarketParams) -> Option<StableOutcome> {
    if !at_most_matched(params) {
        return None;
    }
    let t = StableTuple::sponsored(params.kappa_u * params.n_hat, params.alpha * params.kappa_u, params.n_hat);
    Some(StableOutcome { kind: OutcomeKind::MaxBitSponsoring, tuple: Some(t) })
}

/// Interior stable point with `b = N - nu2 D / (kappa_u nu1)`, available
/// when `nu1 > 0`, `0 < b <= n_hat` and `kappa_u <= 1 / zeta`.
pub fn interior_outcome(params: &MarketParams) -> Option<StableOutcome> {
    if !at_most_matched(params) || params.nu1 <= 0.0 {
        return None;
    }
    let b = params.big_n - params.nu2 * params.big_d / (params.kappa_u * params.nu1);
    if !(b > 0.0 && b <= params.n_hat) {
        return None;
    }
    let t = StableTuple::sponsored(params.kappa_u * b, params.alpha * params.kappa_u, b);
    Some(StableOutcome { kind: OutcomeKind::InteriorStable, tuple: Some(t) })
}

/// Minimum-quality stable point at demand `d`, available when
/// `kappa_u zeta == 1` and `0 < d <= n_hat / zeta`.
pub fn min_quality_outcome(d: f64, params: &MarketParams) -> Option<StableOutcome> {
    if params.quality_regime() != QualityRegime::Matched || !(d > 0.0 && d <= params.max_served_demand()) {
        return None;
    }
    let t = StableTuple::sponsored(d, params.min_quality_price(), params.zeta * d);
    Some(StableOutcome { kind: OutcomeKind::MinQualitySponsoring, tuple: Some(t) })
}

/// SP payoff along the minimum-quality stable manifold at demand `d`.
pub fn min_quality_sp_payoff(d: f64, params: &MarketParams) -> f64 {
    let a = params.alpha * (params.kappa_cp * params.zeta).ln();
    let s = params.nu1 * (params.kappa_sp * params.zeta).ln();
    let free = params.big_n - params.zeta * d;
    let rest = if params.nu2 == 0.0 {
        0.0
    } else {
        params.nu2 * params.big_d * (params.kappa_sp * free / params.big_d).ln()
    };
    (a + s) * d + rest
}

/// Demand maximizing [`min_quality_sp_payoff`] over `[0, n_hat / zeta]`.
///
/// The payoff is concave in `d`, so the unconstrained stationary point
/// `N / zeta - nu2 D / (alpha ln(kappa_cp zeta) + nu1 ln(kappa_sp zeta))` is
/// clamped to the interval. A nonpositive slope coefficient gives 0.
pub fn min_quality_optimal_demand(params: &MarketParams) -> f64 {
    let slope = params.alpha * (params.kappa_cp * params.zeta).ln()
        + params.nu1 * (params.kappa_sp * params.zeta).ln();
    if slope <= 0.0 {
        return 0.0;
    }
    let d = params.big_n / params.zeta - params.nu2 * params.big_d / slope;
    if d < 0.0 {
        0.0
    } else {
        d.min(params.max_served_demand())
    }
}

/// CP and SP per-epoch payoffs at a sponsoring stable point.
pub fn stable_point_payoffs(outcome: &StableOutcome, params: &MarketParams) -> Result<(f64, f64)> {
    if !outcome.kind.is_sponsoring() {
        return Err(Error::domain(format!("no stable payoffs for {:?}", outcome.kind)));
    }
    let t = outcome
        .tuple
        .ok_or_else(|| Error::domain("sponsoring outcome without a tuple"))?;
    let (Some(p), Some(b)) = (t.p, t.b) else {
        return Err(Error::domain("sponsoring tuple without price or bits"));
    };
    Ok((cp_utility(t.d, b, p, params)?, sp_utility(t.d, b, p, params)?))
}

/// Stable point a long-sighted SP steers toward.
pub fn long_sighted_sp_target(params: &MarketParams) -> StableOutcome {
    match params.quality_regime() {
        QualityRegime::OverProvisioned => StableOutcome::no_sponsoring(0.0),
        QualityRegime::Matched => {
            let d = min_quality_optimal_demand(params);
            let Some(o) = min_quality_outcome(d, params) else {
                return StableOutcome::no_sponsoring(0.0);
            };
            match stable_point_payoffs(&o, params) {
                Ok((_, u)) if u >= no_sponsoring_payoff(d, params) => o,
                _ => StableOutcome::no_sponsoring(0.0),
            }
        }
        QualityRegime::UnderProvisioned => {
            let mut best: Option<(StableOutcome, f64)> = None;
            for o in [max_bit_outcome(params), interior_outcome(params)].into_iter().flatten() {
                let Ok((_, u)) = stable_point_payoffs(&o, params) else { continue };
                let d = o.tuple.map_or(0.0, |t| t.d);
                if u >= no_sponsoring_payoff(d, params) && best.map_or(true, |(_, bu)| u > bu) {
                    best = Some((o, u));
                }
            }
            best.map_or(StableOutcome::no_sponsoring(0.0), |(o, _)| o)
        }
    }
}

/// A stable point together with the CP payoff it yields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedOutcome {
    pub outcome: StableOutcome,
    pub u_cp: f64,
}

/// Sponsoring stable points feasible under `params`, best for the CP first:
/// maximum-bit, then interior, then minimum-quality.
///
/// The minimum-quality point is listed at the demand a long-sighted SP
/// would pick (or `n_hat / zeta` if that is zero); the CP earns nothing
/// there at any demand.
pub fn long_sighted_cp_ranking(params: &MarketParams) -> Vec<RankedOutcome> {
    let d_mq = match min_quality_optimal_demand(params) {
        d if d > 0.0 => d,
        _ => params.max_served_demand(),
    };
    [max_bit_outcome(params), interior_outcome(params), min_quality_outcome(d_mq, params)]
        .into_iter()
        .flatten()
        .filter_map(|o| {
            let (u_cp, _) = stable_point_payoffs(&o, params).ok()?;
            Some(RankedOutcome { outcome: o, u_cp })
        })
        .collect()
}

/// Number of demand levels scanned for a minimum-quality point the
/// short-sighted SP supports.
const MIN_QUALITY_SCAN: usize = 2000;

/// Stable point a long-sighted CP steers toward, facing a short-sighted SP.
///
/// Walks the CP ranking and keeps the first point at which the SP's own
/// per-epoch pricing reproduces the point's price. For the minimum-quality
/// manifold the demand closest to `d0` with that property is used.
pub fn long_sighted_cp_target(params: &MarketParams, d0: f64) -> StableOutcome {
    for r in long_sighted_cp_ranking(params) {
        let o = r.outcome;
        let Some(t) = o.tuple else { continue };
        match o.kind {
            OutcomeKind::MaxBitSponsoring | OutcomeKind::InteriorStable => {
                let want = if o.kind == OutcomeKind::MaxBitSponsoring {
                    PriceCandidate::PriceMaxBits
                } else {
                    PriceCandidate::PriceInterior
                };
                let sp = sp_equilibrium_price(t.d, params);
                if sp.y && sp.chosen_candidate == Some(want) {
                    return o;
                }
            }
            OutcomeKind::MinQualitySponsoring => {
                let hi = params.max_served_demand();
                let lo = d0.min(hi);
                for i in 0..MIN_QUALITY_SCAN {
                    let d = lo + (hi - lo) * i as f64 / (MIN_QUALITY_SCAN - 1) as f64;
                    let sp = sp_equilibrium_price(d, params);
                    if sp.y && sp.chosen_candidate == Some(PriceCandidate::PriceMinQuality) {
                        if let Some(found) = min_quality_outcome(d, params) {
                            return found;
                        }
                    }
                }
            }
            _ => {}
        }
    }
    StableOutcome::no_sponsoring(0.0)
}
