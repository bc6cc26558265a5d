//! `klein` command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use klein_core::amplitudes::{barrier_amplitudes, MatchingCoefficients};
use klein_core::config::{Method, RunConfig};
use klein_core::io::write_run;
use klein_core::mre::{mre_transmission_terms, series_terms, transmitted_shift, MreBranch};
use klein_core::numerics::{Complex64, I};
use klein_core::potentials::{barrier_momentum, momentum_slope, BarrierSpec, DispersionRegime, Regime};
use klein_core::scenarios::{builtin, run as run_scenario, ScenarioConfig, ScenarioRun, BUILTINS};
use klein_core::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Largest field magnitude, relative to the peak, tolerated outside the light cone.
pub const CAUSALITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "klein", version, about = "Wave packets on Klein-Gordon barriers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a built-in scenario or a TOML config and write CSV output.
    Scenario {
        /// Scenario name or config file.
        target: String,
        #[arg(long, env = "KLEIN_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Print stationary amplitudes and, optionally, a multiple-reflections table.
    Amps(AmpsArgs),
    /// Evolve a config with the finite-difference solver only.
    Oracle {
        /// Scenario name or config file.
        target: String,
        #[arg(long, env = "KLEIN_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// List the built-in scenarios.
    List,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ShapeArg {
    Rectangular,
    SmoothTanh,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegimeArg {
    KleinGordon,
    Schrodinger,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BranchArg {
    Convergent,
    Divergent,
}

#[derive(Debug, clap::Args)]
struct AmpsArgs {
    /// Momentum P outside the barrier.
    #[arg(long = "P", allow_negative_numbers = true)]
    p: f64,
    /// Barrier height W (negative for a well).
    #[arg(long = "W", allow_negative_numbers = true)]
    w: f64,
    #[arg(long = "M", default_value_t = 1.0)]
    m: f64,
    #[arg(long, value_enum, default_value = "rectangular")]
    shape: ShapeArg,
    /// Steepness b of a smooth barrier.
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, value_enum, default_value = "klein-gordon")]
    regime: RegimeArg,
    /// Expansion branch to tabulate.
    #[arg(long, value_enum)]
    mre: Option<BranchArg>,
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    /// Pole shift for the divergent branch of a rectangular barrier.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// A built-in name, or otherwise a config file.
fn resolve(target: &str) -> klein_core::Result<ScenarioConfig> {
    let path = Path::new(target);
    if path.is_file() {
        return ScenarioConfig::from_config(&RunConfig::load(path)?);
    }
    if BUILTINS.contains(&target) {
        return builtin(target);
    }
    if path.extension().is_some() || target.contains(std::path::MAIN_SEPARATOR) {
        return Err(Error::Config(format!("no such config file: {target}")));
    }
    Err(Error::UnknownScenario(target.to_string()))
}

fn execute(cfg: &ScenarioConfig, out: &Path) -> klein_core::Result<ScenarioRun> {
    let run = run_scenario(cfg)?;
    let files = write_run(out, &run)?;
    info!("wrote {} files to {}", files.len(), out.display());
    Ok(run)
}

fn print_summary(run: &ScenarioRun) {
    for (k, v) in &run.summary {
        println!("{k:>28} = {v:.6e}");
    }
}

fn cmd_scenario(target: &str, out: &Path) -> klein_core::Result<()> {
    let cfg = resolve(target)?;
    let run = execute(&cfg, out)?;
    println!("{}: {} snapshots in {}", cfg.name(), run.snapshots.len(), out.display());
    print_summary(&run);
    Ok(())
}

fn cmd_oracle(target: &str, out: &Path) -> klein_core::Result<()> {
    let mut cfg = resolve(target)?;
    cfg.method = Method::Oracle;
    cfg.source.method = Method::Oracle;
    let run = execute(&cfg, out)?;
    print_summary(&run);
    let drift = run.metric("oracle_charge_drift").unwrap_or(f64::NAN);
    let leak = run.metric("oracle_causality_leakage").unwrap_or(f64::NAN);
    println!("charge drift: {drift:.3e}");
    let verdict = if leak <= CAUSALITY_TOLERANCE { "PASS" } else { "FAIL" };
    println!("causality: {verdict} (field beyond light cone {leak:.3e} of peak)");
    Ok(())
}

fn cmd_amps(a: &AmpsArgs) -> klein_core::Result<()> {
    let regime = match a.regime {
        RegimeArg::KleinGordon => DispersionRegime::new(Regime::KleinGordon, a.m)?,
        RegimeArg::Schrodinger => DispersionRegime::new(Regime::Schrodinger, a.m)?,
    };
    let barrier = match (a.shape, a.b) {
        (ShapeArg::Rectangular, _) => BarrierSpec::rectangular(a.w)?,
        (ShapeArg::SmoothTanh, Some(b)) => BarrierSpec::smooth(a.w, b)?,
        (ShapeArg::SmoothTanh, None) => {
            return Err(Error::Config("a smooth barrier needs --b".into()));
        }
    };
    let p = a.p;
    let q = barrier_momentum(p, &barrier, &regime);
    let amps = barrier_amplitudes(p, q, &barrier, &regime)?;
    let show = |z: Complex64| format!("{:+.12e} {:+.12e}i  |.| = {:.12e}", z.re, z.im, z.norm());
    println!("P  = {p}");
    println!("Q  = {:+.12e} {:+.12e}i", q.re, q.im);
    println!("T  = {}", show(amps.t));
    println!("R  = {}", show(amps.r));
    println!("B+ = {}", show(amps.b_plus));
    println!("B- = {}", show(amps.b_minus));

    let Some(branch) = a.mre else { return Ok(()) };
    let branch = match branch {
        BranchArg::Convergent => MreBranch::Convergent,
        BranchArg::Divergent => MreBranch::Divergent,
    };
    let terms: Vec<Complex64> = match barrier.steepness() {
        None => mre_transmission_terms(p, q, branch, a.n_max, a.delta)?.into_iter().map(|t| t.t_n).collect(),
        Some(_) => {
            let m = MatchingCoefficients::for_barrier(p, q, &barrier, &regime, 0.0)?;
            series_terms(&m, branch, p, a.n_max)?
        }
    };
    // packet shifts only make sense for a propagating interior wave
    let slope = (q.im == 0.0 && q.re > 0.0).then(|| momentum_slope(p, &barrier, &regime).re);
    println!(
        "{:>4} {:>22} {:>22} {:>22} {:>22} {:>14} {:>14}",
        "n", "re T_n", "im T_n", "re X_n", "im X_n", "x_n", "|sum - T|"
    );
    let mut sum = Complex64::new(0.0, 0.0);
    for (n, t_n) in terms.iter().enumerate() {
        sum += t_n;
        let (x_w, x_n) = match slope {
            Some(s) => {
                let x_n = transmitted_shift(n, s, branch);
                (t_n * (I * p * x_n).exp(), format!("{x_n:14.6}"))
            }
            None => (Complex64::new(f64::NAN, f64::NAN), format!("{:>14}", "-")),
        };
        println!(
            "{n:>4} {:>+22.12e} {:>+22.12e} {:>+22.12e} {:>+22.12e} {x_n} {:>14.6e}",
            t_n.re,
            t_n.im,
            x_w.re,
            x_w.im,
            (sum - amps.t).norm()
        );
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Scenario { target, out } => cmd_scenario(target, out),
        Command::Oracle { target, out } => cmd_oracle(target, out),
        Command::Amps(a) => cmd_amps(a),
        Command::List => {
            BUILTINS.iter().for_each(|n| println!("{n}"));
            Ok(())
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
