//! Market constants, the demand dynamics and the three utility functions.
//!
//! Demand and sponsored bits are continuous nonnegative reals and every
//! logarithm is natural.

use crate::error::{Error, Result};

/// Demands below this floor are treated as exactly zero.
pub const DEMAND_FLOOR: f64 = 1e-12;

/// Relative slack used when deciding whether `kappa_u * zeta == 1`.
pub const MATCHED_QUALITY_TOL: f64 = 1e-9;

/// Which no-sponsoring branch the end-user satisfaction uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelVariant {
    /// Best-effort demand is the fixed pool `D`.
    #[default]
    Base,
    /// The CP's own demand joins the best-effort pool (`D + d`) when it does
    /// not sponsor.
    AugmentedBestEffort,
}

impl ModelVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Base => "base",
            ModelVariant::AugmentedBestEffort => "augmented",
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "base" => Ok(ModelVariant::Base),
            "augmented" | "augmented_best_effort" => Ok(ModelVariant::AugmentedBestEffort),
            other => Err(format!("unknown model variant '{other}'")),
        }
    }
}

/// Relation between the CP's minimum quality `zeta` and the stable quality
/// `1 / kappa_u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityRegime {
    /// `zeta < 1 / kappa_u`
    UnderProvisioned,
    /// `zeta == 1 / kappa_u` (within [`MATCHED_QUALITY_TOL`])
    Matched,
    /// `zeta > 1 / kappa_u`
    OverProvisioned,
}

/// All constants of the market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Ad income per user per unit of log-quality.
    pub alpha: f64,
    /// Sensitivity of demand to satisfaction.
    pub gamma: f64,
    /// Minimum average quality (bits per frame per user) the CP sponsors.
    pub zeta: f64,
    /// Demand constant; `1 / kappa_u` is the stable quality.
    pub kappa_u: f64,
    pub kappa_cp: f64,
    pub kappa_sp: f64,
    /// Weight on satisfaction with sponsored content.
    pub nu1: f64,
    /// Weight on satisfaction with non-sponsored content.
    pub nu2: f64,
    /// Best-effort demand of all other content.
    pub big_d: f64,
    /// Total resources per frame.
    pub big_n: f64,
    /// Resources available for sponsoring.
    pub n_hat: f64,
    pub variant: ModelVariant,
}

impl Default for MarketParams {
    fn default() -> Self {
        MarketParams {
            alpha: 1.0,
            gamma: 0.5,
            zeta: 0.3,
            kappa_u: 1.0 / 0.3,
            kappa_cp: 10.0,
            kappa_sp: 10.0,
            nu1: 1.0,
            nu2: 1.0,
            big_d: 50.0,
            big_n: 100.0,
            n_hat: 25.0,
            variant: ModelVariant::Base,
        }
    }
}

impl MarketParams {
    /// Checks positivity, `kappa_cp * zeta > e` and `n_hat <= big_n`.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("zeta", self.zeta),
            ("kappa_u", self.kappa_u),
            ("kappa_cp", self.kappa_cp),
            ("kappa_sp", self.kappa_sp),
            ("big_d", self.big_d),
            ("big_n", self.big_n),
            ("n_hat", self.n_hat),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0 (got {v})")));
            }
        }
        for (name, v) in [("nu1", self.nu1), ("nu2", self.nu2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0 (got {v})")));
            }
        }
        if self.kappa_cp * self.zeta <= std::f64::consts::E {
            return Err(Error::invalid(format!(
                "kappa_cp * zeta must exceed e (got {})",
                self.kappa_cp * self.zeta
            )));
        }
        if self.n_hat > self.big_n {
            return Err(Error::invalid(format!(
                "n_hat <= big_n violated ({} > {})",
                self.n_hat, self.big_n
            )));
        }
        Ok(())
    }

    /// Largest demand the CP can serve at the minimum quality, `n_hat / zeta`.
    pub fn max_served_demand(&self) -> f64 {
        self.n_hat / self.zeta
    }

    /// Highest price at which the CP still joins, `alpha ln(kappa_cp zeta) / zeta`.
    pub fn min_quality_price(&self) -> f64 {
        self.alpha * (self.kappa_cp * self.zeta).ln() / self.zeta
    }

    pub fn stable_quality(&self) -> f64 {
        1.0 / self.kappa_u
    }

    pub fn quality_regime(&self) -> QualityRegime {
        let x = self.kappa_u * self.zeta;
        if (x - 1.0).abs() <= MATCHED_QUALITY_TOL {
            QualityRegime::Matched
        } else if x < 1.0 {
            QualityRegime::UnderProvisioned
        } else {
            QualityRegime::OverProvisioned
        }
    }
}

/// One epoch's strategic outcome.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpochDecision {
    /// SP offers sponsorship.
    pub y: bool,
    /// Price per sponsored bit, present iff `y`.
    pub p: Option<f64>,
    /// CP joins.
    pub z: bool,
    /// Sponsored bits per frame, present iff `z`.
    pub b: Option<f64>,
}

impl EpochDecision {
    /// Neither player participates.
    pub fn none() -> Self {
        EpochDecision::default()
    }

    /// Checks the flag/field consistency and `zeta d <= b <= n_hat`.
    pub fn is_consistent(&self, d: f64, params: &MarketParams) -> bool {
        if self.y != self.p.is_some() || self.z != self.b.is_some() || (self.z && !self.y) {
            return false;
        }
        match self.b {
            Some(b) => {
                let slack = 1e-12 * b.abs().max(1.0);
                params.zeta * d <= b + slack && b <= params.n_hat + slack
            }
            None => true,
        }
    }

    /// Both players participate.
    pub fn sponsored(&self) -> bool {
        self.y && self.z
    }
}

/// Demand path and decisions produced by repeated play.
///
/// `decisions[t]` is the decision taken against `demands[t]`. When
/// `terminated_at` is `Some(t)`, epoch `t` is the last recorded one and its
/// decision carries no sponsorship. When `stationary` is set, demand stopped
/// moving (up to rounding) and the run ended before its horizon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub demands: Vec<f64>,
    pub decisions: Vec<EpochDecision>,
    pub terminated_at: Option<usize>,
    pub stationary: bool,
    /// Number of epochs the run was asked for.
    pub horizon: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated_at.is_some()
    }
}

fn check_bits(d: f64, b: f64, what: &str) -> Result<()> {
    if d < 0.0 || !d.is_finite() {
        return Err(Error::domain(format!("{what}: demand must be finite and >= 0 (got {d})")));
    }
    if d > 0.0 && !(b > 0.0) {
        return Err(Error::domain(format!("{what}: bits must be > 0 when demand > 0 (got {b})")));
    }
    Ok(())
}

/// One step of the demand dynamics, `d (1 + gamma ln(kappa_u b / d))^+`.
///
/// Results below [`DEMAND_FLOOR`] snap to zero.
pub fn demand_update(d: f64, b: f64, params: &MarketParams) -> Result<f64> {
    check_bits(d, b, "demand_update")?;
    if d == 0.0 {
        return Ok(0.0);
    }
    let bracket = 1.0 + params.gamma * (params.kappa_u * b / d).ln();
    let next = d * bracket.max(0.0);
    Ok(if next < DEMAND_FLOOR { 0.0 } else { next })
}

/// Advertisement utility `alpha d ln(kappa_cp b / d)`; zero when `d == 0`.
pub fn ad_utility(d: f64, b: f64, params: &MarketParams) -> Result<f64> {
    check_bits(d, b, "ad_utility")?;
    if d == 0.0 {
        return Ok(0.0);
    }
    Ok(params.alpha * d * (params.kappa_cp * b / d).ln())
}

/// CP payoff for sponsoring `b` bits at price `p`.
pub fn cp_utility(d: f64, b: f64, p: f64, params: &MarketParams) -> Result<f64> {
    Ok(ad_utility(d, b, params)? - p * b)
}

/// End-user satisfaction as seen by the SP.
///
/// Uses the sponsoring branch when `d > 0` and `b > 0`; otherwise the
/// best-effort branch selected by `params.variant`.
pub fn user_satisfaction(d: f64, b: f64, params: &MarketParams) -> Result<f64> {
    if !(b < params.big_n) {
        return Err(Error::domain(format!(
            "user_satisfaction: bits must be < big_n ({b} >= {})",
            params.big_n
        )));
    }
    if d < 0.0 || b < 0.0 {
        return Err(Error::domain(format!(
            "user_satisfaction: negative argument (d={d}, b={b})"
        )));
    }
    let free = params.big_n - b;
    if d > 0.0 && b > 0.0 {
        let sponsored = params.nu1 * d * (params.kappa_sp * b / d).ln();
        let best_effort = weighted_log(params.nu2 * params.big_d, params.kappa_sp * free / params.big_d);
        return Ok(sponsored + best_effort);
    }
    let pool = match params.variant {
        ModelVariant::Base => params.big_d,
        ModelVariant::AugmentedBestEffort => params.big_d + d,
    };
    Ok(weighted_log(params.nu2 * pool, params.kappa_sp * free / pool))
}

/// SP payoff `p b + u_s(b)`.
pub fn sp_utility(d: f64, b: f64, p: f64, params: &MarketParams) -> Result<f64> {
    Ok(p * b + user_satisfaction(d, b, params)?)
}

// 0 * ln(x) is taken as 0 so that a zero weight never produces NaN.
fn weighted_log(weight: f64, x: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * x.ln()
    }
}
