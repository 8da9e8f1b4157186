//! Nash bargaining between a long-sighted CP and SP on the stable manifold
//! `b = d / kappa_u`.

use crate::dynamics::{
    classify_with, epoch_payoffs, simulate_with, stable_point_payoffs, ClassifyOptions, OutcomeKind, SimOptions,
    SimulationMode, StableOutcome,
};
use crate::error::{Error, Result};
use crate::model::{ad_utility, user_satisfaction, MarketParams};
use crate::spne::no_sponsoring_payoff;

/// Default CP bargaining power.
pub const DEFAULT_W: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisagreementSource {
    /// Payoffs at the stable point the myopic game settles into.
    StableOutcome,
    /// Average payoffs over the second half of an unstable run.
    TimeAverage,
}

/// Payoffs each player falls back to when bargaining fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisagreementPoint {
    pub d_cp: f64,
    pub d_sp: f64,
    pub source: DisagreementSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BargainingSolution {
    pub d_star: f64,
    /// Price per bit; absent without agreement. Negative means the SP pays.
    pub p_star: Option<f64>,
    /// Resulting payoffs; the disagreement payoffs when there is no deal.
    pub u_cp: f64,
    pub u_sp: f64,
    pub u_excess: f64,
    /// Bargaining power above which money flows from SP to CP.
    pub w_threshold: Option<f64>,
    pub agreed: bool,
}

/// Disagreement payoffs from myopic play starting at `d0`.
///
/// A stable run pays the stable-point payoffs (or the no-sponsoring
/// payoffs at the demand where sponsorship ended). An unstable run pays
/// the average over epochs `[horizon / 2, horizon)`.
pub fn disagreement_payoffs(params: &MarketParams, d0: f64, opts: &SimOptions, classify: &ClassifyOptions) -> Result<DisagreementPoint> {
    disagreement_with_outcome(params, d0, opts, classify).map(|(dp, _)| dp)
}

/// [`disagreement_payoffs`] together with the myopic outcome behind it.
pub fn disagreement_with_outcome(
    params: &MarketParams,
    d0: f64,
    opts: &SimOptions,
    classify: &ClassifyOptions,
) -> Result<(DisagreementPoint, StableOutcome)> {
    let traj = simulate_with(d0, params, SimulationMode::BothShortSighted, opts)?;
    let outcome = classify_with(&traj, params, classify)?;
    let stable = |d_cp, d_sp| DisagreementPoint { d_cp, d_sp, source: DisagreementSource::StableOutcome };
    let dp = match outcome.kind {
        OutcomeKind::NoSponsoring => {
            let d = outcome.tuple.map_or(0.0, |t| t.d);
            stable(0.0, no_sponsoring_payoff(d, params))
        }
        OutcomeKind::Unstable => {
            let start = traj.len() / 2;
            let mut sum = (0.0, 0.0);
            for t in start..traj.len() {
                let (c, s) = epoch_payoffs(traj.demands[t], &traj.decisions[t], params)?;
                sum.0 += c;
                sum.1 += s;
            }
            let n = (traj.len() - start).max(1) as f64;
            DisagreementPoint { d_cp: sum.0 / n, d_sp: sum.1 / n, source: DisagreementSource::TimeAverage }
        }
        _ => {
            let (c, s) = stable_point_payoffs(&outcome, params)?;
            stable(c, s)
        }
    };
    Ok((dp, outcome))
}

fn weighted_ln(weight: f64, x: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * x.ln()
    }
}

/// Joint surplus over disagreement at stable demand `d`; price-free.
pub fn excess_profit(d: f64, params: &MarketParams, dp: &DisagreementPoint) -> Result<f64> {
    let b = d / params.kappa_u;
    if d < 0.0 || b >= params.big_n {
        return Err(Error::domain(format!("excess_profit: need 0 <= d/kappa_u < N (d={d})")));
    }
    let free = params.big_n - b;
    let u = weighted_ln(params.alpha * d, params.kappa_cp / params.kappa_u)
        + weighted_ln(params.nu1 * d, params.kappa_sp / params.kappa_u)
        + weighted_ln(params.nu2 * params.big_d, params.kappa_sp * free / params.big_d);
    Ok(u - dp.d_cp - dp.d_sp)
}

/// Maximizer of [`excess_profit`] over `[0, n_hat kappa_u]`.
pub fn optimal_bargaining_demand(params: &MarketParams) -> f64 {
    let slope = params.alpha * (params.kappa_cp / params.kappa_u).ln()
        + params.nu1 * (params.kappa_sp / params.kappa_u).ln();
    let hi = (params.n_hat * params.kappa_u).min(params.big_n * params.kappa_u * (1.0 - 1e-12));
    if slope <= 0.0 {
        return 0.0;
    }
    let d = params.kappa_u * params.big_n - params.nu2 * params.big_d / slope;
    d.clamp(0.0, hi)
}

/// Nash bargaining solution with CP power `w`.
pub fn nbs_solve(params: &MarketParams, w: f64, dp: &DisagreementPoint) -> Result<BargainingSolution> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::domain(format!("bargaining power must lie in [0, 1] (got {w})")));
    }
    let d = optimal_bargaining_demand(params);
    let u_excess = excess_profit(d, params, dp)?;
    if !(u_excess > 0.0 && d > 0.0) {
        return Ok(BargainingSolution {
            d_star: d,
            p_star: None,
            u_cp: dp.d_cp,
            u_sp: dp.d_sp,
            u_excess,
            w_threshold: None,
            agreed: false,
        });
    }
    let b = d / params.kappa_u;
    let u_ad = ad_utility(d, b, params)?;
    let u_s = user_satisfaction(d, b, params)?;
    let p = (params.kappa_u / d) * ((u_ad - dp.d_cp) - w * u_excess);
    Ok(BargainingSolution {
        d_star: d,
        p_star: Some(p),
        u_cp: u_ad - p * b,
        u_sp: p * b + u_s,
        u_excess,
        w_threshold: Some((u_ad - dp.d_cp) / u_excess),
        agreed: true,
    })
}

/// Relative gain `(after - before) / after` in percent.
///
/// Equal values give 0 even when both are zero.
pub fn percent_increase(u_before: f64, u_after: f64) -> Result<f64> {
    if u_before == u_after {
        return Ok(0.0);
    }
    if u_after == 0.0 {
        return Err(Error::domain("percent_increase: utility after bargaining is zero"));
    }
    Ok((u_after - u_before) / u_after * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_dp() -> DisagreementPoint {
        DisagreementPoint { d_cp: 0.0, d_sp: 0.0, source: DisagreementSource::StableOutcome }
    }

    #[test]
    fn excess_at_zero_demand() {
        let p = MarketParams::default();
        let dp = DisagreementPoint { d_cp: 1.0, d_sp: 2.0, ..zero_dp() };
        let want = 50.0 * 20.0f64.ln() - 3.0;
        assert!((excess_profit(0.0, &p, &dp).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn excess_with_zero_weights() {
        let p = MarketParams { alpha: 0.0, nu1: 0.0, nu2: 0.0, ..Default::default() };
        let dp = DisagreementPoint { d_cp: 1.5, d_sp: 2.5, ..zero_dp() };
        for d in [0.0, 5.0, 50.0] {
            assert_eq!(excess_profit(d, &p, &dp).unwrap(), -4.0);
        }
    }

    #[test]
    fn excess_rejects_full_frame() {
        let p = MarketParams::default();
        let d = p.big_n * p.kappa_u;
        assert!(excess_profit(d, &p, &zero_dp()).is_err());
    }

    #[test]
    fn threshold_power_gives_zero_price() {
        let p = MarketParams { nu2: 1.0, ..Default::default() };
        let s = nbs_solve(&p, 0.5, &zero_dp()).unwrap();
        assert!(s.agreed);
        let wt = s.w_threshold.unwrap();
        assert!((0.0..=1.0).contains(&wt));
        let at = nbs_solve(&p, wt, &zero_dp()).unwrap();
        assert!(at.p_star.unwrap().abs() < 1e-9);
    }

    #[test]
    fn full_power_leaves_sp_at_disagreement() {
        let p = MarketParams::default();
        let dp = DisagreementPoint { d_cp: 0.0, d_sp: 100.0, ..zero_dp() };
        let s = nbs_solve(&p, 1.0, &dp).unwrap();
        assert!(s.agreed);
        assert!((s.u_sp - dp.d_sp).abs() < 1e-9 * dp.d_sp);
    }

    #[test]
    fn rejects_power_outside_unit_interval() {
        let p = MarketParams::default();
        assert!(nbs_solve(&p, 1.5, &zero_dp()).is_err());
        assert!(nbs_solve(&p, -0.1, &zero_dp()).is_err());
    }

    #[test]
    fn huge_disagreement_means_no_deal() {
        let p = MarketParams::default();
        let dp = DisagreementPoint { d_cp: 1e9, d_sp: 0.0, ..zero_dp() };
        let s = nbs_solve(&p, 0.5, &dp).unwrap();
        assert!(!s.agreed);
        assert!(s.p_star.is_none());
        assert_eq!(s.u_cp, dp.d_cp);
    }

    #[test]
    fn percent_endpoints() {
        assert_eq!(percent_increase(0.0, 7.0).unwrap(), 100.0);
        assert_eq!(percent_increase(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(percent_increase(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(percent_increase(50.0, 100.0).unwrap(), 50.0);
        assert!(percent_increase(1.0, 0.0).is_err());
    }

    #[test]
    fn no_sponsoring_disagreement() {
        let p = MarketParams::default();
        let dp = disagreement_payoffs(&p, 1000.0, &SimOptions::default(), &ClassifyOptions::default()).unwrap();
        assert_eq!(dp.d_cp, 0.0);
        assert!((dp.d_sp - 50.0 * 20.0f64.ln()).abs() < 1e-12);
    }
}
