use std::io::Write;

use super::{
    interior_outcome, long_sighted_cp_target, long_sighted_sp_target, max_bit_outcome, min_quality_outcome,
    OutcomeKind, SimulationMode, StableOutcome,
};
use crate::error::{Error, Result};
use crate::fmt::opt_g12;
use crate::model::{cp_utility, demand_update, sp_utility, EpochDecision, MarketParams, Trajectory};
use crate::spne::{cp_best_response, no_sponsoring_payoff, sp_equilibrium_price, spne_epoch};

pub const DEFAULT_HORIZON: usize = 20_000;
pub const DEFAULT_LAMBDA: f64 = 0.2;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_WINDOW: usize = 50;
/// Relative tolerance for matching a converged state to a stable tuple.
pub const MATCH_TOL: f64 = 1e-6;

/// Steering targets are kept this far (relative) below `n_hat / zeta` so
/// rounding never pushes demand past what the CP can serve.
const CAPACITY_MARGIN: f64 = 1e-9;
/// Relative demand change treated as no change when deciding to stop early.
pub const STILL_TOL: f64 = 1e-13;
/// Relative gap below which the steering player jumps straight to its target.
const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub horizon: usize,
    /// Fraction of the remaining demand gap a steering player closes per epoch.
    pub lambda: f64,
    /// Number of exactly repeated epochs after which a run stops early.
    pub window: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { horizon: DEFAULT_HORIZON, lambda: DEFAULT_LAMBDA, window: DEFAULT_WINDOW }
    }
}

/// Per-epoch decision rule; depends only on the current demand.
enum Policy {
    Myopic,
    Idle,
    SteerSp { target_d: f64, min_quality: bool },
    SteerCp { target_d: f64 },
}

impl Policy {
    fn new(d0: f64, params: &MarketParams, mode: SimulationMode) -> Policy {
        let target = match mode {
            SimulationMode::BothShortSighted => return Policy::Myopic,
            SimulationMode::LongSightedSP => long_sighted_sp_target(params),
            SimulationMode::LongSightedCP => long_sighted_cp_target(params, d0),
        };
        let Some(t) = target.tuple.filter(|_| target.kind.is_sponsoring()) else {
            return Policy::Idle;
        };
        let target_d = t.d.min(params.max_served_demand() * (1.0 - CAPACITY_MARGIN));
        match mode {
            SimulationMode::LongSightedSP => Policy::SteerSp {
                target_d,
                min_quality: target.kind == OutcomeKind::MinQualitySponsoring,
            },
            _ => Policy::SteerCp { target_d },
        }
    }

    fn decide(&self, d: f64, params: &MarketParams, lambda: f64) -> EpochDecision {
        match *self {
            Policy::Myopic => spne_epoch(d, params),
            Policy::Idle => EpochDecision::none(),
            Policy::SteerSp { target_d, min_quality } => {
                if d <= 0.0 || d > params.max_served_demand() {
                    return EpochDecision::none();
                }
                let (desired, b) = planned_bits(d, target_d, params, lambda);
                let p = if min_quality && desired <= d * (1.0 + 1e-12) {
                    params.min_quality_price()
                } else if b >= params.n_hat {
                    params.alpha * d / params.n_hat
                } else if b <= params.zeta * d {
                    params.alpha / params.zeta
                } else {
                    params.alpha * d / b
                };
                let cp = cp_best_response(d, p, params);
                EpochDecision { y: true, p: Some(p), z: cp.z, b: cp.b }
            }
            Policy::SteerCp { target_d } => {
                let sp = sp_equilibrium_price(d, params);
                let Some(p) = sp.p else {
                    return EpochDecision::none();
                };
                let (_, b) = planned_bits(d, target_d, params, lambda);
                EpochDecision { y: true, p: Some(p), z: true, b: Some(b) }
            }
        }
    }
}

/// Bits that move demand a fraction `lambda` of the way to `target`.
///
/// Inverts the demand update for the desired next demand and clamps the
/// result to `[zeta d, n_hat]`.
fn planned_bits(d: f64, target: f64, params: &MarketParams, lambda: f64) -> (f64, f64) {
    let desired = if (target - d).abs() <= SNAP_TOL * target {
        target
    } else {
        d + lambda * (target - d)
    };
    let x = (desired / d - 1.0) / params.gamma;
    let raw = (d / params.kappa_u) * x.exp();
    let b = if raw.is_finite() { raw } else { params.n_hat };
    (desired, b.min(params.n_hat).max(params.zeta * d))
}

/// Simulates repeated play with the default options.
pub fn simulate(d0: f64, params: &MarketParams, mode: SimulationMode, horizon: usize) -> Result<Trajectory> {
    simulate_with(d0, params, mode, &SimOptions { horizon, ..Default::default() })
}

/// Simulates repeated play from `d0`.
///
/// The run ends when either player leaves (the program never resumes),
/// when the horizon is reached, or once demand has stayed within
/// [`STILL_TOL`] (relative) for more than `opts.window` epochs. Every policy
/// depends on demand alone, so such a run would repeat itself forever.
pub fn simulate_with(d0: f64, params: &MarketParams, mode: SimulationMode, opts: &SimOptions) -> Result<Trajectory> {
    params.validate()?;
    if !(d0 > 0.0 && d0.is_finite()) {
        return Err(Error::domain(format!("initial demand must be > 0 (got {d0})")));
    }
    if opts.horizon == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    if !(opts.lambda > 0.0 && opts.lambda <= 1.0) {
        return Err(Error::domain(format!("lambda must lie in (0, 1] (got {})", opts.lambda)));
    }
    let policy = Policy::new(d0, params, mode);
    let mut traj = Trajectory { horizon: opts.horizon, ..Default::default() };
    let mut d = d0;
    let mut repeats = 0usize;
    for t in 0..opts.horizon {
        let dec = policy.decide(d, params, opts.lambda);
        traj.demands.push(d);
        traj.decisions.push(dec);
        let Some(b) = dec.b.filter(|_| dec.sponsored()) else {
            traj.terminated_at = Some(t);
            break;
        };
        let next = demand_update(d, b, params)?;
        if (next - d).abs() <= STILL_TOL * d {
            repeats += 1;
            if repeats > opts.window {
                traj.stationary = true;
                break;
            }
        } else {
            repeats = 0;
        }
        d = next;
    }
    Ok(traj)
}

/// CP and SP payoffs for one recorded epoch.
pub fn epoch_payoffs(d: f64, dec: &EpochDecision, params: &MarketParams) -> Result<(f64, f64)> {
    match (dec.sponsored(), dec.p, dec.b) {
        (true, Some(p), Some(b)) => Ok((cp_utility(d, b, p, params)?, sp_utility(d, b, p, params)?)),
        _ => Ok((0.0, no_sponsoring_payoff(d, params))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Relative bound on `|d_{t+1} - d_t|` over the trailing window.
    pub tol: f64,
    pub window: usize,
    /// Relative tolerance for matching a stable tuple.
    pub match_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { tol: DEFAULT_TOL, window: DEFAULT_WINDOW, match_tol: MATCH_TOL }
    }
}

/// Classifies a trajectory with convergence tolerance `tol`.
pub fn classify_outcome(traj: &Trajectory, params: &MarketParams, tol: f64) -> Result<StableOutcome> {
    classify_with(traj, params, &ClassifyOptions { tol, ..Default::default() })
}

fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * y.abs()
}

/// Classifies a trajectory.
///
/// Terminated runs are no-sponsoring. Otherwise the last `window` demand
/// steps must each be below `tol d_t`; the final state is then matched to
/// the stable tuples. When several tuples coincide the lowest outcome code
/// wins. A converged state matching nothing is an error.
pub fn classify_with(traj: &Trajectory, params: &MarketParams, opts: &ClassifyOptions) -> Result<StableOutcome> {
    if let Some(t) = traj.terminated_at {
        return Ok(StableOutcome::no_sponsoring(traj.demands[t]));
    }
    let n = traj.demands.len();
    if n < opts.window + 1 {
        return Ok(StableOutcome::unstable());
    }
    let tail = &traj.demands[n - opts.window - 1..];
    let converged = tail.windows(2).all(|w| (w[1] - w[0]).abs() < opts.tol * w[0]);
    if !converged {
        return Ok(StableOutcome::unstable());
    }
    let d = traj.demands[n - 1];
    let last = traj.decisions[n - 1];
    let ambiguous = Error::ClassificationAmbiguous { demand: d, price: last.p, bits: last.b };
    let (Some(p), Some(b)) = (last.p, last.b) else {
        return Err(ambiguous);
    };
    let m = opts.match_tol;
    let candidates = [max_bit_outcome(params), min_quality_outcome(d, params), interior_outcome(params)];
    for o in candidates.into_iter().flatten() {
        let t = o.tuple.expect("sponsoring outcomes carry a tuple");
        let (tp, tb) = (t.p.unwrap(), t.b.unwrap());
        if rel_close(d, t.d, m) && rel_close(p, tp, m) && rel_close(b, tb, m) {
            return Ok(o);
        }
    }
    Err(ambiguous)
}

/// Writes `epoch,d,y,p,z,b` rows; absent values are left empty.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "d", "y", "p", "z", "b"])?;
    for (t, (d, dec)) in traj.demands.iter().zip(&traj.decisions).enumerate() {
        w.write_record([
            t.to_string(),
            crate::fmt::g12(*d),
            u8::from(dec.y).to_string(),
            opt_g12(dec.p),
            u8::from(dec.z).to_string(),
            opt_g12(dec.b),
        ])?;
    }
    w.flush()?;
    Ok(())
}
