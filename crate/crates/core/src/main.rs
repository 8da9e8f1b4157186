use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qsd::bargaining::{disagreement_with_outcome, nbs_solve, percent_increase};
use qsd::dynamics::{classify_with, simulate_with, write_trajectory_csv, SimulationMode};
use qsd::fmt::{g12, opt_g12};
use qsd::spne::{cp_best_response, sp_equilibrium_price};
use qsd::sweep::{load_config, parse_settings, run_sweep, write_sweep_csv, SweepConfig};
use qsd::{Error, ModelVariant};

#[derive(Parser)]
#[command(name = "qsd", version, about = "Quality-sponsored data equilibrium solver and market simulator")]
struct Cli {
    /// Configuration file (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; defaults to stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized checks; overrides the config value
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium of a single epoch at demand `d`
    Epoch {
        #[arg(long)]
        d: f64,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Simulate one trajectory and write it as CSV
    Simulate {
        #[arg(long, value_enum, default_value_t = Mode::Short)]
        mode: Mode,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Run the sweep described by --config
    Sweep,
    /// Nash bargaining solution for one parameter set
    Bargain {
        /// CP bargaining power
        #[arg(long)]
        w: Option<f64>,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Check every closed form against its brute-force oracle
    Verify {
        /// Random draws per check
        #[arg(long, default_value_t = 1000)]
        draws: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Short,
    LongSp,
    LongCp,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    d0: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    kappa_u: Option<f64>,
    /// Sets kappa_u to this value divided by zeta
    #[arg(long)]
    kappa_u_zeta: Option<f64>,
    #[arg(long)]
    kappa_cp: Option<f64>,
    #[arg(long)]
    kappa_sp: Option<f64>,
    #[arg(long)]
    nu1: Option<f64>,
    #[arg(long)]
    nu2: Option<f64>,
    #[arg(long)]
    big_d: Option<f64>,
    #[arg(long)]
    big_n: Option<f64>,
    #[arg(long)]
    n_hat: Option<f64>,
    /// base or augmented
    #[arg(long)]
    variant: Option<String>,
}

impl ParamArgs {
    fn apply(&self, cfg: &mut SweepConfig) -> Result<(), Error> {
        let b = &mut cfg.base;
        let pairs = [
            (&mut b.alpha, self.alpha),
            (&mut b.gamma, self.gamma),
            (&mut b.zeta, self.zeta),
            (&mut b.kappa_cp, self.kappa_cp),
            (&mut b.kappa_sp, self.kappa_sp),
            (&mut b.nu1, self.nu1),
            (&mut b.nu2, self.nu2),
            (&mut b.big_d, self.big_d),
            (&mut b.big_n, self.big_n),
            (&mut b.n_hat, self.n_hat),
        ];
        for (slot, v) in pairs {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(v) = &self.variant {
            b.variant = v.parse::<ModelVariant>().map_err(|m| Error::Config { line: 0, message: m })?;
        }
        if let Some(k) = self.kappa_u {
            b.kappa_u = k;
            cfg.kappa_u_zeta = None;
        }
        if let Some(c) = self.kappa_u_zeta {
            cfg.kappa_u_zeta = Some(c);
        }
        if let Some(c) = cfg.kappa_u_zeta {
            cfg.base.kappa_u = c / cfg.base.zeta;
        }
        cfg.base.validate()
    }
}

impl RunArgs {
    fn apply(&self, cfg: &mut SweepConfig) {
        if let Some(d0) = self.d0 {
            cfg.d0 = d0;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
    }
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ClassificationAmbiguous { .. } => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn settings(cli: &Cli) -> Result<SweepConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => parse_settings(&std::fs::read_to_string(path).map_err(Error::from)?)?,
        None => SweepConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: 1, message: e.to_string() })?;
    }
    let mut cfg = settings(&cli)?;
    let mut out = output(&cli.out)?;
    match &cli.command {
        Command::Epoch { d, params } => {
            params.apply(&mut cfg)?;
            let p = &cfg.base;
            let sp = sp_equilibrium_price(*d, p);
            let cp = sp.p.map(|price| cp_best_response(*d, price, p));
            writeln!(out, "d,y,p,z,b,candidate,region,u_sp")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                g12(*d),
                u8::from(sp.y),
                opt_g12(sp.p),
                u8::from(cp.map_or(false, |c| c.z)),
                opt_g12(cp.and_then(|c| c.b)),
                sp.chosen_candidate.map_or("", |c| c.as_str()),
                cp.map_or(String::new(), |c| format!("{:?}", c.region)),
                g12(sp.u_sp),
            )?;
        }
        Command::Simulate { mode, run, params } => {
            params.apply(&mut cfg)?;
            run.apply(&mut cfg);
            let mode = match mode {
                Mode::Short => SimulationMode::BothShortSighted,
                Mode::LongSp => SimulationMode::LongSightedSP,
                Mode::LongCp => SimulationMode::LongSightedCP,
            };
            let traj = simulate_with(cfg.d0, &cfg.base, mode, &cfg.sim_options())?;
            write_trajectory_csv(&traj, &mut out)?;
            let outcome = classify_with(&traj, &cfg.base, &cfg.classify_options())?;
            eprintln!("outcome {} ({:?})", outcome.code(), outcome.kind);
        }
        Command::Sweep => {
            let Some(path) = &cli.config else {
                return Err(Failure { code: 1, message: "sweep needs --config".into() });
            };
            let mut cfg = load_config(path)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let records = run_sweep(&cfg);
            write_sweep_csv(&cfg, &records, &mut out)?;
            let violations = records
                .iter()
                .filter(|r| matches!(r.result, Err(Error::ClassificationAmbiguous { .. })))
                .count();
            if violations > 0 {
                out.flush()?;
                return Err(Failure { code: 2, message: format!("{violations} grid points matched no stable outcome") });
            }
        }
        Command::Bargain { w, run, params } => {
            params.apply(&mut cfg)?;
            run.apply(&mut cfg);
            let w = w.unwrap_or(cfg.w);
            let (dp, outcome) = disagreement_with_outcome(&cfg.base, cfg.d0, &cfg.sim_options(), &cfg.classify_options())?;
            let s = nbs_solve(&cfg.base, w, &dp)?;
            writeln!(out, "disagreement_outcome,d_cp,d_sp,agreed,d_star,p_star,u_cp,u_sp,u_excess,w_threshold,cp_increase,sp_increase")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                outcome.code(),
                g12(dp.d_cp),
                g12(dp.d_sp),
                u8::from(s.agreed),
                g12(s.d_star),
                opt_g12(s.p_star),
                g12(s.u_cp),
                g12(s.u_sp),
                g12(s.u_excess),
                opt_g12(s.w_threshold),
                opt_g12(percent_increase(dp.d_cp, s.u_cp).ok()),
                opt_g12(percent_increase(dp.d_sp, s.u_sp).ok()),
            )?;
        }
        Command::Verify { draws } => {
            let reports = qsd::verify::run_all(cfg.seed, *draws);
            for r in &reports {
                writeln!(out, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail)?;
            }
            out.flush()?;
            if reports.iter().any(|r| !r.passed) {
                return Err(Failure { code: 2, message: "verification failed".into() });
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
