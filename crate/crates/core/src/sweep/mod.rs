//! Config-driven batch runs over parameter grids, written as CSV.

mod config;

pub use config::{load_config, parse_config, parse_settings, Axis, AxisName, Regime, SweepConfig, MAX_AXES};

use std::io::Write;

use rayon::prelude::*;

use crate::bargaining::{
    disagreement_with_outcome, nbs_solve, percent_increase, BargainingSolution, DisagreementPoint, DisagreementSource,
};
use crate::dynamics::{classify_with, simulate_with, ClassifyOptions, SimOptions, SimulationMode, StableOutcome};
use crate::error::Result;
use crate::fmt::{g12, opt_g12};

/// Bargaining results at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BargainRecord {
    /// Where myopic play settles; it sets the disagreement payoffs.
    pub disagreement_outcome: StableOutcome,
    pub dp: DisagreementPoint,
    pub solution: BargainingSolution,
    pub cp_increase: Option<f64>,
    pub sp_increase: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointResult {
    Outcome(StableOutcome),
    Bargain(BargainRecord),
}

/// One grid point and what was computed there.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub point: Vec<f64>,
    pub result: Result<PointResult>,
}

impl SweepConfig {
    pub fn sim_options(&self) -> SimOptions {
        SimOptions { horizon: self.horizon, lambda: self.lambda, window: self.window }
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions { tol: self.tol, window: self.window, ..Default::default() }
    }
}

fn run_point(cfg: &SweepConfig, point: &[f64]) -> Result<PointResult> {
    let (params, w) = cfg.params_at(point);
    params.validate()?;
    let mode = match cfg.regime {
        Regime::ShortShort => SimulationMode::BothShortSighted,
        Regime::LongSP => SimulationMode::LongSightedSP,
        Regime::LongCP => SimulationMode::LongSightedCP,
        Regime::Bargaining | Regime::PriceVsCapacity => {
            let (dp, outcome) = disagreement_with_outcome(&params, cfg.d0, &cfg.sim_options(), &cfg.classify_options())?;
            let solution = nbs_solve(&params, w, &dp)?;
            return Ok(PointResult::Bargain(BargainRecord {
                disagreement_outcome: outcome,
                dp,
                solution,
                cp_increase: percent_increase(dp.d_cp, solution.u_cp).ok(),
                sp_increase: percent_increase(dp.d_sp, solution.u_sp).ok(),
            }));
        }
    };
    let traj = simulate_with(cfg.d0, &params, mode, &cfg.sim_options())?;
    Ok(PointResult::Outcome(classify_with(&traj, &params, &cfg.classify_options())?))
}

/// Evaluates every grid point in parallel; records come back in row-major
/// grid order whatever the thread count.
pub fn run_sweep(cfg: &SweepConfig) -> Vec<SweepRecord> {
    cfg.points()
        .into_par_iter()
        .map(|point| {
            let result = run_point(cfg, &point);
            SweepRecord { point, result }
        })
        .collect()
}

/// Column names for a config's CSV output.
pub fn header(cfg: &SweepConfig) -> Vec<String> {
    let mut h: Vec<String> = cfg.axes.iter().map(|a| a.name.as_str().to_string()).collect();
    let tail: &[&str] = match cfg.regime {
        Regime::ShortShort | Regime::LongSP | Regime::LongCP => &["outcome", "d", "p", "b"],
        Regime::Bargaining => &[
            "disagreement_outcome",
            "dp_source",
            "d_cp",
            "d_sp",
            "agreed",
            "d_star",
            "p_star",
            "u_cp",
            "u_sp",
            "u_excess",
            "w_threshold",
            "cp_increase",
            "sp_increase",
        ],
        Regime::PriceVsCapacity => &["agreed", "d_star", "p_star", "w_threshold"],
    };
    h.extend(tail.iter().map(|s| s.to_string()));
    h.push("error".into());
    h
}

fn result_fields(cfg: &SweepConfig, result: &Result<PointResult>) -> Vec<String> {
    let width = header(cfg).len() - cfg.axes.len() - 1;
    match result {
        Err(e) => {
            let mut v = vec![String::new(); width];
            v.push(e.to_string());
            v
        }
        Ok(PointResult::Outcome(o)) => {
            let t = o.tuple;
            vec![
                o.code().to_string(),
                opt_g12(t.map(|t| t.d)),
                opt_g12(t.and_then(|t| t.p)),
                opt_g12(t.and_then(|t| t.b)),
                String::new(),
            ]
        }
        Ok(PointResult::Bargain(r)) => {
            let s = &r.solution;
            let agreed = u8::from(s.agreed).to_string();
            let mut v = if cfg.regime == Regime::PriceVsCapacity {
                vec![agreed, g12(s.d_star), opt_g12(s.p_star), opt_g12(s.w_threshold)]
            } else {
                let source = match r.dp.source {
                    DisagreementSource::StableOutcome => "stable",
                    DisagreementSource::TimeAverage => "time_average",
                };
                vec![
                    r.disagreement_outcome.code().to_string(),
                    source.to_string(),
                    g12(r.dp.d_cp),
                    g12(r.dp.d_sp),
                    agreed,
                    g12(s.d_star),
                    opt_g12(s.p_star),
                    g12(s.u_cp),
                    g12(s.u_sp),
                    g12(s.u_excess),
                    opt_g12(s.w_threshold),
                    opt_g12(r.cp_increase),
                    opt_g12(r.sp_increase),
                ]
            };
            v.push(String::new());
            v
        }
    }
}

/// Writes records as CSV with a header row.
pub fn write_sweep_csv<W: Write>(cfg: &SweepConfig, records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(cfg))?;
    for r in records {
        let mut row: Vec<String> = r.point.iter().map(|&v| g12(v)).collect();
        row.extend(result_fields(cfg, &r.result));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> SweepConfig {
        parse_config(text).unwrap()
    }

    #[test]
    fn invalid_points_get_error_markers() {
        let c = cfg("axes.zeta.lo = 0.1\naxes.zeta.hi = 0.3\naxes.zeta.points = 2\n");
        let recs = run_sweep(&c);
        assert!(recs[0].result.is_err());
        assert!(recs[1].result.is_ok());
        let mut buf = Vec::new();
        write_sweep_csv(&c, &recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "zeta,outcome,d,p,b,error");
        assert!(lines[1].starts_with("0.1,,,,,"));
        assert!(lines[1].contains("kappa_cp * zeta"));
    }

    #[test]
    fn output_independent_of_thread_count() {
        let c = cfg("axes.nu2.lo = 0\naxes.nu2.hi = 20\naxes.nu2.points = 6\n\
                     axes.gamma.lo = 0.1\naxes.gamma.hi = 3\naxes.gamma.points = 4\n");
        let render = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let recs = pool.install(|| run_sweep(&c));
            let mut buf = Vec::new();
            write_sweep_csv(&c, &recs, &mut buf).unwrap();
            buf
        };
        assert_eq!(render(1), render(4));
    }

    #[test]
    fn bargaining_columns() {
        let c = cfg("regime = bargaining\naxes.nu2.lo = 1\naxes.nu2.hi = 2\naxes.nu2.points = 2\n");
        let recs = run_sweep(&c);
        assert!(recs.iter().all(|r| matches!(r.result, Ok(PointResult::Bargain(_)))));
        assert_eq!(header(&c).len(), 1 + 13 + 1);
    }
}
