//! `smdi`: key-rate sweeps, intensity optimization, maximum distance, Monte
//! Carlo validation and the attack report from a flat `key = value` config.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 bad configuration or
//! arguments, 3 a validation or attack check that did not pass.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use smdi::config::{parse_config, RunConfig};
use smdi::optimizer::IntensityRange;
use smdi::report;
use smdi::{ChannelParams, Error, Mode};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "smdi",
    version,
    about = "One-sided MDI-QKD key rates with weak coherent pulses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file; unset keys take the reference values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides `mode` from the config.
    #[arg(long)]
    mode: Option<Mode>,
}

#[derive(Subcommand)]
enum Command {
    /// Key rate against distance for every trust level, written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Overrides `out` from the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Rate-maximizing signal intensity per trust level.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        distance: f64,
        #[arg(long, default_value_t = 0.01)]
        mu_min: f64,
        #[arg(long, default_value_t = 1.0)]
        mu_max: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Largest distance with a positive key rate per trust level.
    Maxdist {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1)]
        tol_km: f64,
    },
    /// Monte Carlo simulation against the closed-form gains and error rates.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Compare against a model with this misalignment instead of the
        /// simulated one (the check should then fail).
        #[arg(long)]
        model_e_d: Option<f64>,
    },
    /// Demonstrates that the dimension attack reproduces honest statistics.
    AttackReport,
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(mode) = common.mode {
        cfg.mode = mode;
    }
    Ok(cfg)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ConfigParse { .. } | Error::ConfigValue { .. } => EXIT_CONFIG,
        Error::Domain { .. } | Error::DegenerateIntensities { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<u8, Error> {
    let rows = report::run_sweep(cfg, out)?;
    eprintln!("wrote {rows} rows to {}", out.display());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Sweep { common, out } => {
            let cfg = load(&common)?;
            let out = out.unwrap_or_else(|| cfg.out.clone());
            sweep(&cfg, &out)
        }
        Command::Optimize {
            common,
            distance,
            mu_min,
            mu_max,
            tol,
        } => {
            let cfg = load(&common)?;
            let range = IntensityRange::new(mu_min, mu_max)?;
            print!("{}", report::run_optimize(&cfg, distance, range, tol)?.text);
            Ok(0)
        }
        Command::Maxdist { common, tol_km } => {
            let cfg = load(&common)?;
            print!("{}", report::run_maxdist(&cfg, tol_km)?.text);
            Ok(0)
        }
        Command::Validate { common, model_e_d } => {
            let cfg = load(&common)?;
            let model = model_e_d
                .map(|e_d| {
                    let c = cfg.channel;
                    ChannelParams::new(c.eta_d.value(), e_d, c.p_d.value(), c.f, c.alpha)
                })
                .transpose()?;
            let outcome = report::run_validate(&cfg, model)?;
            println!("{}", outcome.text);
            Ok(if outcome.pass { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::AttackReport => {
            let (text, pass) = report::run_attack_report();
            println!("{text}");
            Ok(if pass { 0 } else { EXIT_CHECK_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
