//! Line-oriented `key = value` sweep configuration.
//!
//! ```text
//! # comments start with '#'
//! regime = short_short
//! base.kappa_u_zeta = 1
//! axes.gamma.lo = 0.1
//! axes.gamma.hi = 5
//! axes.gamma.points = 10
//! axes.big_n.scale = log
//! ```

use std::collections::HashMap;
use std::path::Path;

use crate::bargaining::DEFAULT_W;
use crate::dynamics::{DEFAULT_HORIZON, DEFAULT_LAMBDA, DEFAULT_TOL, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::model::MarketParams;
use crate::oracle::{GridSpec, Scale};

pub const MAX_AXES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    ShortShort,
    LongSP,
    LongCP,
    Bargaining,
    PriceVsCapacity,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::ShortShort => "short_short",
            Regime::LongSP => "long_sp",
            Regime::LongCP => "long_cp",
            Regime::Bargaining => "bargaining",
            Regime::PriceVsCapacity => "price_vs_capacity",
        }
    }

    fn parse(s: &str) -> Option<Regime> {
        Some(match s {
            "short_short" => Regime::ShortShort,
            "long_sp" => Regime::LongSP,
            "long_cp" => Regime::LongCP,
            "bargaining" => Regime::Bargaining,
            "price_vs_capacity" => Regime::PriceVsCapacity,
            _ => return None,
        })
    }

    pub fn is_bargaining(self) -> bool {
        matches!(self, Regime::Bargaining | Regime::PriceVsCapacity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisName {
    Gamma,
    Nu2,
    BigN,
    NHat,
    Zeta,
    KappaU,
    W,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Gamma => "gamma",
            AxisName::Nu2 => "nu2",
            AxisName::BigN => "big_n",
            AxisName::NHat => "n_hat",
            AxisName::Zeta => "zeta",
            AxisName::KappaU => "kappa_u",
            AxisName::W => "w",
        }
    }

    fn parse(s: &str) -> Option<AxisName> {
        Some(match s {
            "gamma" => AxisName::Gamma,
            "nu2" => AxisName::Nu2,
            "big_n" => AxisName::BigN,
            "n_hat" => AxisName::NHat,
            "zeta" => AxisName::Zeta,
            "kappa_u" => AxisName::KappaU,
            "w" => AxisName::W,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub name: AxisName,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: MarketParams,
    /// When set, every grid point uses `kappa_u = kappa_u_zeta / zeta`.
    pub kappa_u_zeta: Option<f64>,
    /// Swept axes in order of first appearance; the last varies fastest.
    pub axes: Vec<Axis>,
    pub regime: Regime,
    pub d0: f64,
    pub horizon: usize,
    pub tol: f64,
    pub seed: u64,
    pub w: f64,
    pub lambda: f64,
    pub window: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            base: MarketParams::default(),
            kappa_u_zeta: None,
            axes: Vec::new(),
            regime: Regime::ShortShort,
            d0: 1.0,
            horizon: DEFAULT_HORIZON,
            tol: DEFAULT_TOL,
            seed: 0,
            w: DEFAULT_W,
            lambda: DEFAULT_LAMBDA,
            window: DEFAULT_WINDOW,
        }
    }
}

impl SweepConfig {
    /// Market parameters at one grid point (axis values in axis order).
    pub fn params_at(&self, point: &[f64]) -> (MarketParams, f64) {
        let mut p = self.base;
        let mut w = self.w;
        for (axis, &v) in self.axes.iter().zip(point) {
            match axis.name {
                AxisName::Gamma => p.gamma = v,
                AxisName::Nu2 => p.nu2 = v,
                AxisName::BigN => p.big_n = v,
                AxisName::NHat => p.n_hat = v,
                AxisName::Zeta => p.zeta = v,
                AxisName::KappaU => p.kappa_u = v,
                AxisName::W => w = v,
            }
        }
        if let Some(c) = self.kappa_u_zeta {
            p.kappa_u = c / p.zeta;
        }
        (p, w)
    }

    /// All grid points in row-major order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &self.axes {
            let vals = axis.grid.values();
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// Reads and parses a sweep configuration; at least one axis is required.
pub fn load_config(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parses a sweep configuration; at least one axis is required.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let cfg = parse_settings(text)?;
    if cfg.axes.is_empty() {
        return Err(Error::Config { line: 0, message: "no axes configured".into() });
    }
    Ok(cfg)
}

#[derive(Default)]
struct AxisDraft {
    line: usize,
    lo: Option<f64>,
    hi: Option<f64>,
    points: Option<usize>,
    scale: Option<Scale>,
}

/// Parses configuration text without requiring axes.
pub fn parse_settings(text: &str) -> Result<SweepConfig> {
    let mut cfg = SweepConfig::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut drafts: Vec<(AxisName, AxisDraft)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Config { line, message };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(err(format!("duplicate key '{key}' (first set on line {first})")));
        }
        let num = || value.parse::<f64>().map_err(|_| err(format!("'{key}' expects a number, got '{value}'")));
        let count = || value.parse::<usize>().map_err(|_| err(format!("'{key}' expects a count, got '{value}'")));
        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["regime"] => {
                cfg.regime = Regime::parse(value).ok_or_else(|| err(format!("unknown regime '{value}'")))?;
            }
            ["d0"] => cfg.d0 = num()?,
            ["horizon"] => cfg.horizon = count()?,
            ["tol"] => cfg.tol = num()?,
            ["seed"] => cfg.seed = value.parse().map_err(|_| err(format!("'seed' expects a count, got '{value}'")))?,
            ["w"] => cfg.w = num()?,
            ["lambda"] => cfg.lambda = num()?,
            ["window"] => cfg.window = count()?,
            ["base", field] => {
                let b = &mut cfg.base;
                match *field {
                    "alpha" => b.alpha = num()?,
                    "gamma" => b.gamma = num()?,
                    "zeta" => b.zeta = num()?,
                    "kappa_u" => b.kappa_u = num()?,
                    "kappa_cp" => b.kappa_cp = num()?,
                    "kappa_sp" => b.kappa_sp = num()?,
                    "nu1" => b.nu1 = num()?,
                    "nu2" => b.nu2 = num()?,
                    "big_d" => b.big_d = num()?,
                    "big_n" => b.big_n = num()?,
                    "n_hat" => b.n_hat = num()?,
                    "kappa_u_zeta" => cfg.kappa_u_zeta = Some(num()?),
                    "variant" => b.variant = value.parse().map_err(err)?,
                    other => return Err(err(format!("unknown key 'base.{other}'"))),
                }
            }
            ["axes", name, field] => {
                let axis = AxisName::parse(name).ok_or_else(|| err(format!("unknown axis '{name}'")))?;
                let pos = match drafts.iter().position(|(n, _)| *n == axis) {
                    Some(i) => i,
                    None => {
                        drafts.push((axis, AxisDraft { line, ..Default::default() }));
                        drafts.len() - 1
                    }
                };
                let d = &mut drafts[pos].1;
                match *field {
                    "lo" => d.lo = Some(num()?),
                    "hi" => d.hi = Some(num()?),
                    "points" => d.points = Some(count()?),
                    "scale" => d.scale = Some(value.parse().map_err(err)?),
                    other => return Err(err(format!("unknown axis field '{other}'"))),
                }
            }
            _ => return Err(err(format!("unknown key '{key}'"))),
        }
    }
    if drafts.len() > MAX_AXES {
        return Err(Error::Config {
            line: drafts[MAX_AXES].1.line,
            message: format!("at most {MAX_AXES} axes are supported"),
        });
    }
    for (name, d) in drafts {
        let err = |message: String| Error::Config { line: d.line, message };
        let missing = |f: &str| err(format!("axis '{}' is missing '{f}'", name.as_str()));
        let lo = d.lo.ok_or_else(|| missing("lo"))?;
        let hi = d.hi.ok_or_else(|| missing("hi"))?;
        let points = d.points.ok_or_else(|| missing("points"))?;
        let scale = d.scale.unwrap_or(Scale::Linear);
        let grid = if points == 1 && lo == hi {
            GridSpec { points: 1, lo, hi, scale, refine: 0 }
        } else {
            GridSpec::new(points, lo, hi, scale).map_err(|e| err(format!("axis '{}': {e}", name.as_str())))?
        };
        cfg.axes.push(Axis { name, grid });
    }
    check_consistency(&cfg)?;
    Ok(cfg)
}

fn check_consistency(cfg: &SweepConfig) -> Result<()> {
    let err = |message: String| Err(Error::Config { line: 0, message });
    let has = |n: AxisName| cfg.axes.iter().any(|a| a.name == n);
    if cfg.kappa_u_zeta.is_some() && has(AxisName::KappaU) {
        return err("base.kappa_u_zeta conflicts with a kappa_u axis".into());
    }
    if has(AxisName::W) && !cfg.regime.is_bargaining() {
        return err(format!("axis 'w' needs a bargaining regime, not '{}'", cfg.regime.as_str()));
    }
    if cfg.regime == Regime::PriceVsCapacity && !cfg.axes.is_empty() && !has(AxisName::NHat) {
        return err("regime 'price_vs_capacity' needs an n_hat axis".into());
    }
    if !(cfg.d0 > 0.0) {
        return err(format!("d0 must be > 0 (got {})", cfg.d0));
    }
    if cfg.horizon == 0 {
        return err("horizon must be at least 1".into());
    }
    if !(cfg.tol > 0.0) {
        return err(format!("tol must be > 0 (got {})", cfg.tol));
    }
    if !(0.0..=1.0).contains(&cfg.w) {
        return err(format!("w must lie in [0, 1] (got {})", cfg.w));
    }
    if !(cfg.lambda > 0.0 && cfg.lambda <= 1.0) {
        return err(format!("lambda must lie in (0, 1] (got {})", cfg.lambda));
    }
    if let Some(c) = cfg.kappa_u_zeta {
        if !(c > 0.0) {
            return err(format!("base.kappa_u_zeta must be > 0 (got {c})"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "axes.gamma.lo = 0.1\naxes.gamma.hi = 1\naxes.gamma.points = 4\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.base, MarketParams::default());
        assert_eq!(c.regime, Regime::ShortShort);
        assert_eq!(c.d0, 1.0);
        assert_eq!(c.axes.len(), 1);
        assert_eq!(c.points().len(), 4);
    }

    #[test]
    fn empty_axes_rejected() {
        assert!(matches!(parse_config("regime = long_sp\n"), Err(Error::Config { .. })));
    }

    #[test]
    fn duplicate_key_names_line() {
        let text = format!("{MINIMAL}d0 = 2\nd0 = 3\n");
        match parse_config(&text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 5);
                assert!(message.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        match parse_config(&format!("{MINIMAL}base.omega = 1\n")) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("base.omega"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn axis_missing_field() {
        assert!(parse_config("axes.nu2.lo = 0\naxes.nu2.points = 3\n").is_err());
    }

    #[test]
    fn row_major_order() {
        let text = "axes.nu2.lo = 0\naxes.nu2.hi = 1\naxes.nu2.points = 2\n\
                    axes.gamma.lo = 1\naxes.gamma.hi = 3\naxes.gamma.points = 3\n";
        let c = parse_config(text).unwrap();
        let pts = c.points();
        assert_eq!(pts[0], vec![0.0, 1.0]);
        assert_eq!(pts[1], vec![0.0, 2.0]);
        assert_eq!(pts[3], vec![1.0, 1.0]);
    }

    #[test]
    fn product_override_tracks_zeta_axis() {
        let text = "base.kappa_u_zeta = 0.5\naxes.zeta.lo = 0.3\naxes.zeta.hi = 0.6\naxes.zeta.points = 2\n";
        let c = parse_config(text).unwrap();
        let (p, _) = c.params_at(&[0.6]);
        assert!((p.kappa_u * p.zeta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn w_axis_needs_bargaining() {
        let text = "axes.w.lo = 0\naxes.w.hi = 1\naxes.w.points = 3\n";
        assert!(parse_config(text).is_err());
        assert!(parse_config(&format!("regime = bargaining\n{text}")).is_ok());
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!("# header\n\n{MINIMAL}regime = long_cp # trailing\n");
        assert_eq!(parse_config(&text).unwrap().regime, Regime::LongCP);
    }

    #[test]
    fn variant_parsed() {
        let c = parse_config(&format!("{MINIMAL}base.variant = augmented\n")).unwrap();
        assert_eq!(c.base.variant, crate::model::ModelVariant::AugmentedBestEffort);
        assert!(parse_config(&format!("{MINIMAL}base.variant = other\n")).is_err());
    }
}
