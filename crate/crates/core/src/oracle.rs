//! Brute-force grid searches used to cross-check every closed-form optimum.
//!
//! Each search evaluates the objective on a grid, breaks ties toward the
//! lowest index and can optionally zoom in around the best points for a
//! fixed number of rounds. The achieved objective is always reported so
//! callers compare payoffs rather than argument positions.

use rayon::prelude::*;

use crate::bargaining::DisagreementPoint;
use crate::error::{Error, Result};
use crate::model::{ad_utility, cp_utility, sp_utility, user_satisfaction, MarketParams};
use crate::spne::{cp_best_response, no_sponsoring_payoff};

/// Points per zoom round.
const ZOOM_POINTS: usize = 21;
/// Local maxima of the coarse grid that get refined.
const MAX_STARTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Logarithmic,
}

impl std::str::FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "linear" | "lin" => Ok(Scale::Linear),
            "log" | "logarithmic" => Ok(Scale::Logarithmic),
            other => Err(format!("unknown scale '{other}'")),
        }
    }
}

/// A one-dimensional evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
    /// Zoom rounds applied after the coarse pass; zero disables zooming.
    pub refine: usize,
}

impl GridSpec {
    pub fn new(points: usize, lo: f64, hi: f64, scale: Scale) -> Result<Self> {
        let g = GridSpec { points, lo, hi, scale, refine: 0 };
        g.validate()?;
        Ok(g)
    }

    pub fn linear(points: usize, lo: f64, hi: f64) -> Result<Self> {
        GridSpec::new(points, lo, hi, Scale::Linear)
    }

    pub fn with_refine(mut self, rounds: usize) -> Self {
        self.refine = rounds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::domain(format!("grid needs at least 2 points (got {})", self.points)));
        }
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::domain(format!("grid needs lo < hi (got {} .. {})", self.lo, self.hi)));
        }
        if self.scale == Scale::Logarithmic && self.lo <= 0.0 {
            return Err(Error::domain("logarithmic grid needs lo > 0"));
        }
        Ok(())
    }

    /// Grid values from `lo` to `hi`, both endpoints included exactly.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.lo;
                }
                if i == n - 1 {
                    return self.hi;
                }
                let t = i as f64 / last;
                match self.scale {
                    Scale::Linear => self.lo + t * (self.hi - self.lo),
                    Scale::Logarithmic => (self.lo.ln() + t * (self.hi.ln() - self.lo.ln())).exp(),
                }
            })
            .collect()
    }

    /// Largest spacing between neighbouring coarse points.
    pub fn step(&self) -> f64 {
        let v = self.values();
        v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

fn argmax(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

fn local_maxima(values: &[Option<f64>]) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    for i in 0..n {
        let Some(v) = values[i] else { continue };
        let left_ok = i == 0 || values[i - 1].map_or(true, |l| v >= l);
        let right_ok = i + 1 == n || values[i + 1].map_or(true, |r| v >= r);
        if left_ok && right_ok {
            out.push(i);
        }
    }
    out.sort_by(|&a, &b| {
        let (va, vb) = (values[a].unwrap(), values[b].unwrap());
        vb.partial_cmp(&va).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    out.truncate(MAX_STARTS);
    out.sort_unstable();
    out
}

/// Maximizes `f` over `grid`; `None` marks infeasible points.
///
/// Returns the maximizer and the achieved value, or `None` when no grid
/// point is feasible.
pub fn maximize_1d<F>(grid: &GridSpec, f: F) -> Option<(f64, f64)>
where
    F: Fn(f64) -> Option<f64> + Sync,
{
    let xs = grid.values();
    let vals: Vec<Option<f64>> = xs.par_iter().map(|&x| f(x).filter(|v| !v.is_nan())).collect();
    let coarse = argmax(&vals)?;
    let mut best = (xs[coarse], vals[coarse].unwrap());
    if grid.refine == 0 {
        return Some(best);
    }
    for start in local_maxima(&vals) {
        let mut lo = xs[start.saturating_sub(1)];
        let mut hi = xs[(start + 1).min(xs.len() - 1)];
        let mut local = (xs[start], vals[start].unwrap());
        for _ in 0..grid.refine {
            let step = (hi - lo) / (ZOOM_POINTS - 1) as f64;
            if !(step > 0.0) {
                break;
            }
            let zs: Vec<f64> = (0..ZOOM_POINTS).map(|i| lo + i as f64 * step).collect();
            let zv: Vec<Option<f64>> = zs.iter().map(|&x| f(x).filter(|v| !v.is_nan())).collect();
            let Some(k) = argmax(&zv) else { break };
            if zv[k].unwrap() > local.1 {
                local = (zs[k], zv[k].unwrap());
            }
            lo = zs[k.saturating_sub(1)].max(grid.lo);
            hi = zs[(k + 1).min(ZOOM_POINTS - 1)].min(grid.hi);
        }
        if local.1 > best.1 {
            best = local;
        }
    }
    Some(best)
}

/// Result of the CP oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpOracle {
    pub z: bool,
    pub b: Option<f64>,
    /// Best CP utility found; `None` when no bit level is feasible.
    pub utility: Option<f64>,
}

/// Default grid for the CP oracle at demand `d`: `[zeta d, n_hat]`.
pub fn cp_grid(d: f64, params: &MarketParams, points: usize) -> Result<GridSpec> {
    GridSpec::linear(points, params.zeta * d, params.n_hat)
}

/// Grid maximization of the CP utility over bits within `[zeta d, n_hat]`.
pub fn brute_cp_best_response(d: f64, p: f64, params: &MarketParams, grid: &GridSpec) -> CpOracle {
    let none = CpOracle { z: false, b: None, utility: None };
    if d <= 0.0 || d > params.max_served_demand() {
        return none;
    }
    let lo = params.zeta * d;
    let hi = params.n_hat;
    let best = maximize_1d(grid, |b| {
        if b < lo || b > hi {
            return None;
        }
        cp_utility(d, b, p, params).ok()
    });
    match best {
        Some((b, u)) if u >= 0.0 => CpOracle { z: true, b: Some(b), utility: Some(u) },
        Some((_, u)) => CpOracle { z: false, b: None, utility: Some(u) },
        None => none,
    }
}

/// Result of the SP oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpOracle {
    pub y: bool,
    pub p: Option<f64>,
    /// Best SP payoff found over the grid, or the baseline when it wins.
    pub u_sp: f64,
}

/// Default grid for the SP oracle: `(0, alpha ln(kappa_cp zeta) / zeta]`.
pub fn sp_grid(params: &MarketParams, points: usize) -> Result<GridSpec> {
    let hi = params.min_quality_price();
    GridSpec::linear(points, hi / points as f64, hi)
}

/// Grid maximization of the SP payoff over prices, each mapped through the
/// CP's best response.
pub fn brute_sp_price(d: f64, params: &MarketParams, grid: &GridSpec) -> SpOracle {
    let baseline = no_sponsoring_payoff(d, params);
    let decline = SpOracle { y: false, p: None, u_sp: baseline };
    if d <= 0.0 {
        return decline;
    }
    let best = maximize_1d(grid, |p| {
        let b = cp_best_response(d, p, params).b?;
        sp_utility(d, b, p, params).ok()
    });
    match best {
        Some((p, u)) if u >= baseline => SpOracle { y: true, p: Some(p), u_sp: u },
        _ => decline,
    }
}

/// Result of the bargaining oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbsOracle {
    pub agreed: bool,
    pub d: Option<f64>,
    pub p: Option<f64>,
    pub nash_product: Option<f64>,
    pub u_cp: Option<f64>,
    pub u_sp: Option<f64>,
}

impl NbsOracle {
    fn none() -> Self {
        NbsOracle { agreed: false, d: None, p: None, nash_product: None, u_cp: None, u_sp: None }
    }
}

/// Payoffs on the stable manifold `b = d / kappa_u`, from model utilities.
pub fn manifold_payoffs(d: f64, p: f64, params: &MarketParams) -> Option<(f64, f64)> {
    let b = d / params.kappa_u;
    let u_ad = ad_utility(d, b, params).ok()?;
    let u_s = user_satisfaction(d, b, params).ok()?;
    Some((u_ad - p * b, p * b + u_s))
}

fn nash_product(d: f64, p: f64, w: f64, params: &MarketParams, dp: &DisagreementPoint) -> Option<f64> {
    let (u_cp, u_sp) = manifold_payoffs(d, p, params)?;
    let (gc, gs) = (u_cp - dp.d_cp, u_sp - dp.d_sp);
    if gc < 0.0 || gs < 0.0 {
        return None;
    }
    Some(gc.powf(w) * gs.powf(1.0 - w))
}

/// Default demand grid for the bargaining oracle: `[0, n_hat kappa_u]`,
/// capped below the point where the frame would be full.
pub fn nbs_demand_grid(params: &MarketParams, points: usize) -> Result<GridSpec> {
    let cap = (params.n_hat * params.kappa_u).min(params.big_n * params.kappa_u * (1.0 - 1e-9));
    GridSpec::linear(points, 0.0, cap)
}

/// Default price grid for the bargaining oracle.
///
/// Spans the prices that keep both players at or above their disagreement
/// payoffs, taken over the twentieth of the demand grid with the largest
/// joint surplus (which does not depend on price). Bands at tiny demands
/// are extremely wide and would otherwise make the grid too coarse near
/// the optimum.
pub fn nbs_price_grid(params: &MarketParams, dp: &DisagreementPoint, d_grid: &GridSpec, points: usize) -> Result<GridSpec> {
    let bands: Vec<(f64, f64, f64)> = d_grid
        .values()
        .into_iter()
        .filter(|&d| d > 0.0)
        .filter_map(|d| {
            let b = d / params.kappa_u;
            let u_ad = ad_utility(d, b, params).ok()?;
            let u_s = user_satisfaction(d, b, params).ok()?;
            let surplus = u_ad + u_s - dp.d_cp - dp.d_sp;
            let p_hi = (u_ad - dp.d_cp) / b;
            let p_lo = (dp.d_sp - u_s) / b;
            (p_lo <= p_hi).then_some((surplus, p_lo, p_hi))
        })
        .collect();
    let mut bands = bands;
    bands.sort_by(|a, b| b.0.total_cmp(&a.0));
    let keep = (d_grid.points / 20).max(2);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(_, p_lo, p_hi) in bands.iter().take(keep) {
        lo = lo.min(p_lo);
        hi = hi.max(p_hi);
    }
    if !(lo < hi) {
        return Err(Error::domain("no price keeps both players above disagreement"));
    }
    GridSpec::linear(points, lo, hi)
}

/// Repeatedly regrids the box one coarse step around `(ds[i], ps[j])`.
fn zoom_2d<F>(ds: &[f64], ps: &[f64], i: usize, j: usize, rounds: usize, d_grid: &GridSpec, f: F) -> (f64, f64, f64)
where
    F: Fn(f64, f64) -> Option<f64>,
{
    let mut best = (ds[i], ps[j], f(ds[i], ps[j]).unwrap_or(f64::NEG_INFINITY));
    let (mut dlo, mut dhi) = (ds[i.saturating_sub(1)], ds[(i + 1).min(ds.len() - 1)]);
    let (mut plo, mut phi) = (ps[j.saturating_sub(1)], ps[(j + 1).min(ps.len() - 1)]);
    for _ in 0..rounds {
        let sd = (dhi - dlo) / (ZOOM_POINTS - 1) as f64;
        let sp = (phi - plo) / (ZOOM_POINTS - 1) as f64;
        for a in 0..ZOOM_POINTS {
            let d = dlo + a as f64 * sd;
            for c in 0..ZOOM_POINTS {
                let p = plo + c as f64 * sp;
                if let Some(v) = f(d, p) {
                    if v > best.2 {
                        best = (d, p, v);
                    }
                }
            }
        }
        dlo = (best.0 - sd).max(d_grid.lo);
        dhi = (best.0 + sd).min(d_grid.hi);
        plo = best.1 - sp;
        phi = best.1 + sp;
    }
    best
}

/// Grid maximization of the Nash product over `(d, p)` on the stable
/// manifold, subject to both players beating their disagreement payoffs.
pub fn brute_nbs(params: &MarketParams, w: f64, dp: &DisagreementPoint, d_grid: &GridSpec, p_grid: &GridSpec) -> NbsOracle {
    let ds = d_grid.values();
    let ps = p_grid.values();
    let rows: Vec<Option<(usize, f64)>> = ds
        .par_iter()
        .map(|&d| {
            let vals: Vec<Option<f64>> = ps.iter().map(|&p| nash_product(d, p, w, params, dp)).collect();
            argmax(&vals).map(|j| (j, vals[j].unwrap()))
        })
        .collect();
    let row_best: Vec<Option<f64>> = rows.iter().map(|r| r.map(|(_, v)| v)).collect();
    let Some(first) = argmax(&row_best) else {
        return NbsOracle::none();
    };
    let mut best = (ds[first], ps[rows[first].unwrap().0], row_best[first].unwrap());
    let refine = d_grid.refine.max(p_grid.refine);
    if refine > 0 {
        for i in local_maxima(&row_best) {
            let j = rows[i].unwrap().0;
            let local = zoom_2d(&ds, &ps, i, j, refine, d_grid, |d, p| nash_product(d, p, w, params, dp));
            if local.2 > best.2 {
                best = local;
            }
        }
    }
    let (d, p, v) = best;
    let (u_cp, u_sp) = manifold_payoffs(d, p, params).unwrap_or((f64::NAN, f64::NAN));
    NbsOracle {
        agreed: true,
        d: Some(d),
        p: Some(p),
        nash_product: Some(v),
        u_cp: Some(u_cp),
        u_sp: Some(u_sp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bargaining::DisagreementSource;

    fn base() -> MarketParams {
        MarketParams::default()
    }

    #[test]
    fn grid_rejects_bad_specs() {
        assert!(GridSpec::linear(1, 0.0, 1.0).is_err());
        assert!(GridSpec::linear(5, 1.0, 1.0).is_err());
        assert!(GridSpec::new(5, 0.0, 1.0, Scale::Logarithmic).is_err());
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = GridSpec::new(7, 50.0, 200.0, Scale::Logarithmic).unwrap();
        let v = g.values();
        assert_eq!(v[0], 50.0);
        assert_eq!(v[6], 200.0);
        let g = GridSpec::new(3, 50.0, 200.0, Scale::Logarithmic).unwrap();
        assert!((g.values()[1] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[Some(1.0), Some(2.0), Some(2.0), None]), Some(1));
        assert_eq!(argmax(&[None, None]), None);
    }

    #[test]
    fn zoom_finds_smooth_peak() {
        let g = GridSpec::linear(11, 0.0, 1.0).unwrap().with_refine(12);
        let (x, v) = maximize_1d(&g, |x| Some(-(x - 0.123456789f64).powi(2))).unwrap();
        assert!((x - 0.123456789).abs() < 1e-9);
        assert!(v <= 0.0);
    }

    #[test]
    fn cp_oracle_infeasible_demand() {
        let p = base();
        let g = GridSpec::linear(100, 1.0, 25.0).unwrap();
        assert!(!brute_cp_best_response(100.0, 0.5, &p, &g).z);
    }

    #[test]
    fn cp_oracle_zero_price_takes_all_bits() {
        let p = base();
        let g = cp_grid(10.0, &p, 1000).unwrap();
        let r = brute_cp_best_response(10.0, 0.0, &p, &g);
        assert_eq!(r.b, Some(25.0));
    }

    #[test]
    fn sp_oracle_declines_heavy_best_effort() {
        let p = MarketParams { nu2: 50.0, ..base() };
        let g = sp_grid(&p, 2000).unwrap();
        assert!(!brute_sp_price(10.0, &p, &g).y);
    }

    #[test]
    fn nbs_oracle_empty_region() {
        let p = base();
        let dp = DisagreementPoint { d_cp: 1e6, d_sp: 1e6, source: DisagreementSource::StableOutcome };
        let dg = nbs_demand_grid(&p, 50).unwrap();
        let pg = GridSpec::linear(50, -10.0, 10.0).unwrap();
        assert!(!brute_nbs(&p, 0.5, &dp, &dg, &pg).agreed);
    }
}
