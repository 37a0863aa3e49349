//! CSV schemas and the text reports behind the command-line front end.
//!
//! Key-rate CSV: `distance_km,eta_s,mode,mu,nu,rate,flags`, rates with 17
//! significant digits, rows ordered by trust level (descending) then distance.
//! Pair-statistics CSV: `basis,i,j,gain,qber`, gains and error rates with 17
//! significant digits so that a table survives a round trip exactly.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::attack::attack_indistinguishability_report;
use crate::config::{RunConfig, SignalChoice};
use crate::decoy::{IntensitySet, PairStatistics};
use crate::error::{Error, Result};
use crate::keyrate::{KeyRatePoint, TrustedSourceModel};
use crate::model::{Basis, BasisStatistics, ChannelParams};
use crate::montecarlo::{cross_validate, ValidationRow};
use crate::numerics::Probability;
use crate::optimizer::{
    distance_grid, max_distance, optimize_signal_intensity, rate_vs_distance, IntensityRange,
    MaxDistance, OptimizedIntensity, SweepGrid,
};

pub const KEY_RATE_HEADER: [&str; 7] =
    ["distance_km", "eta_s", "mode", "mu", "nu", "rate", "flags"];
pub const PAIR_STATS_HEADER: [&str; 5] = ["basis", "i", "j", "gain", "qber"];

/// Optimizer tolerance used when `mu_signal = auto`.
pub const AUTO_SIGNAL_TOL: f64 = 1e-4;

/// 17 significant digits, scientific notation.
pub fn sci17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sorts by trust level descending, then distance ascending.
pub fn sort_points(points: &mut [KeyRatePoint]) {
    points.sort_by(|a, b| {
        b.eta_s
            .value()
            .partial_cmp(&a.eta_s.value())
            .unwrap_or(Ordering::Equal)
            .then(
                a.distance_km
                    .partial_cmp(&b.distance_km)
                    .unwrap_or(Ordering::Equal),
            )
    });
}

pub fn write_key_rate_csv<W: Write>(out: W, points: &[KeyRatePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(KEY_RATE_HEADER)?;
    for p in points {
        w.write_record([
            p.distance_km.to_string(),
            p.eta_s.value().to_string(),
            p.mode.to_string(),
            p.mu.to_string(),
            p.nu.to_string(),
            sci17(p.rate),
            p.flags.label(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// One parsed row of a key-rate CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateRow {
    pub distance_km: f64,
    pub eta_s: f64,
    pub mode: String,
    pub mu: f64,
    pub nu: f64,
    pub rate: f64,
    pub flags: String,
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, what: &str) -> Result<T> {
    record
        .get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Table(format!("bad {what} in row {:?}", record)))
}

pub fn read_key_rate_csv<R: Read>(input: R) -> Result<Vec<KeyRateRow>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(KEY_RATE_HEADER) {
        return Err(Error::Table(format!(
            "unexpected header {:?}",
            r.headers()?
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(KeyRateRow {
                distance_km: field(&rec, 0, "distance_km")?,
                eta_s: field(&rec, 1, "eta_s")?,
                mode: field(&rec, 2, "mode")?,
                mu: field(&rec, 3, "mu")?,
                nu: field(&rec, 4, "nu")?,
                rate: field(&rec, 5, "rate")?,
                flags: rec.get(6).unwrap_or("").to_string(),
            })
        })
        .collect()
}

pub fn write_pair_statistics_csv<W: Write>(out: W, stats: &PairStatistics) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PAIR_STATS_HEADER)?;
    for basis in Basis::ALL {
        for i in 0..3 {
            for j in 0..3 {
                let s = stats.get(basis, i, j);
                w.write_record([
                    basis.pair_label().to_string(),
                    i.to_string(),
                    j.to_string(),
                    sci17(s.gain.value()),
                    sci17(s.qber.value()),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads a complete 2 x 3 x 3 table; missing or repeated cells are errors.
pub fn read_pair_statistics_csv<R: Read>(input: R) -> Result<PairStatistics> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(PAIR_STATS_HEADER) {
        return Err(Error::Table(format!(
            "unexpected header {:?}",
            r.headers()?
        )));
    }
    let mut cells: [[[Option<BasisStatistics>; 3]; 3]; 2] = Default::default();
    for rec in r.records() {
        let rec = rec?;
        let basis = match rec.get(0) {
            Some("ZZ") => Basis::Z,
            Some("XX") => Basis::X,
            other => return Err(Error::Table(format!("unknown basis {other:?}"))),
        };
        let i: usize = field(&rec, 1, "i")?;
        let j: usize = field(&rec, 2, "j")?;
        if i > 2 || j > 2 {
            return Err(Error::Table(format!(
                "intensity index out of range in {rec:?}"
            )));
        }
        let gain = Probability::new(field(&rec, 3, "gain")?)?;
        let qber = Probability::new(field(&rec, 4, "qber")?)?;
        let slot = &mut cells[basis.index()][i][j];
        if slot.is_some() {
            return Err(Error::Table(format!(
                "duplicate cell {} {i} {j}",
                basis.pair_label()
            )));
        }
        *slot = Some(BasisStatistics::new(gain, qber));
    }
    PairStatistics::from_fn(|basis, i, j| {
        cells[basis.index()][i][j]
            .ok_or_else(|| Error::Table(format!("missing cell {} {i} {j}", basis.pair_label())))
    })
}

/// Signal intensity for each trust level, optimizing at 0 km for `auto`.
pub fn resolve_signals(config: &RunConfig) -> Result<Vec<f64>> {
    match &config.mu_signal {
        SignalChoice::List(v) => Ok(v.clone()),
        SignalChoice::Auto => config
            .eta_s_list
            .iter()
            .map(|&eta_s| {
                let opt = optimize_signal_intensity(
                    &config.channel,
                    0.0,
                    TrustedSourceModel { eta_s },
                    config.mode,
                    auto_range(config)?,
                    AUTO_SIGNAL_TOL,
                )?;
                Ok(opt.mu)
            })
            .collect(),
    }
}

fn auto_range(config: &RunConfig) -> Result<IntensityRange> {
    IntensityRange::new(config.mu_decoy * 1.5, 1.0)?.with_decoy(config.mu_decoy)
}

/// All sweep points of `config`, in CSV order.
pub fn sweep_points(config: &RunConfig) -> Result<Vec<KeyRatePoint>> {
    config.validate()?;
    let signals = resolve_signals(config)?;
    let mut grid = SweepGrid::new(
        distance_grid(config.l_min, config.l_max, config.l_step)?,
        IntensityRange::default(),
        config.eta_s_list.clone(),
        config.mode,
    )?;
    grid.weak_decoy = config.mu_decoy;
    let mut points = rate_vs_distance(&config.channel, &grid, &signals)?;
    sort_points(&mut points);
    Ok(points)
}

/// Writes the sweep CSV to `path`. The file appears only once complete; a
/// failed run leaves nothing behind.
pub fn run_sweep(config: &RunConfig, path: &Path) -> Result<usize> {
    let points = sweep_points(config)?;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    write_key_rate_csv(&mut tmp, &points).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(points.len())
}

pub struct OptimizeOutcome {
    pub results: Vec<(Probability, OptimizedIntensity)>,
    pub text: String,
}

pub fn run_optimize(
    config: &RunConfig,
    distance_km: f64,
    range: IntensityRange,
    tol: f64,
) -> Result<OptimizeOutcome> {
    let range = range.with_decoy(config.mu_decoy)?;
    let mut text = format!(
        "signal intensity optimization at {distance_km} km ({} mode, range [{}, {}])\n",
        config.mode, range.lo, range.hi
    );
    let _ = writeln!(text, "{:>8} {:>12} {:>24} flags", "eta_s", "mu*", "rate");
    let mut results = Vec::new();
    for &eta_s in &config.eta_s_list {
        let opt = optimize_signal_intensity(
            &config.channel,
            distance_km,
            TrustedSourceModel { eta_s },
            config.mode,
            range,
            tol,
        )?;
        let _ = write!(
            text,
            "{:>8} {:>12.6} {:>24}",
            eta_s.value(),
            opt.mu,
            sci17(opt.rate)
        );
        text.push_str(if opt.flat { " flat\n" } else { "\n" });
        results.push((eta_s, opt));
    }
    Ok(OptimizeOutcome { results, text })
}

pub struct MaxDistanceOutcome {
    pub results: Vec<(Probability, f64, MaxDistance)>,
    pub text: String,
}

pub fn run_maxdist(config: &RunConfig, tol_km: f64) -> Result<MaxDistanceOutcome> {
    let signals = resolve_signals(config)?;
    let mut text = format!(
        "maximum secure distance ({} mode, tolerance {tol_km} km)\n",
        config.mode
    );
    let _ = writeln!(text, "{:>8} {:>8} {:>14}", "eta_s", "mu", "distance_km");
    let mut results = Vec::new();
    for (&eta_s, &mu) in config.eta_s_list.iter().zip(&signals) {
        let set = IntensitySet::new(config.mu_decoy, mu)?;
        let md = max_distance(
            &config.channel,
            &set,
            TrustedSourceModel { eta_s },
            config.mode,
            tol_km,
        )?;
        let _ = writeln!(
            text,
            "{:>8} {:>8} {:>14.3}{}",
            eta_s.value(),
            mu,
            md.distance_km,
            if md.no_positive_region {
                "  (no positive rate)"
            } else {
                ""
            }
        );
        results.push((eta_s, mu, md));
    }
    Ok(MaxDistanceOutcome { results, text })
}

pub struct ValidateOutcome {
    pub rows: Vec<ValidationRow>,
    pub pass: bool,
    pub text: String,
}

/// Monte Carlo cross-validation at the first trust level's signal intensity.
/// `model_override` replaces the channel used for the closed forms only.
pub fn run_validate(
    config: &RunConfig,
    model_override: Option<ChannelParams>,
) -> Result<ValidateOutcome> {
    let mu = resolve_signals(config)?[0];
    let model = model_override.unwrap_or(config.channel);
    let rows = cross_validate(
        &config.channel,
        &model,
        mu,
        config.mc_trials,
        config.mc_seed,
    )?;
    let mut text = format!(
        "Monte Carlo vs closed form: mu = nu = {mu}, {} pulse pairs per configuration, seed {}\n",
        config.mc_trials, config.mc_seed
    );
    let _ = writeln!(
        text,
        "{:>7} {:>5} {:>13} {:>13} {:>7} {:>13} {:>13} {:>7}  result",
        "L_km", "basis", "Q_model", "Q_mc", "z_Q", "E_model", "E_mc", "z_E"
    );
    for r in &rows {
        let _ = writeln!(
            text,
            "{:>7} {:>5} {:>13.6e} {:>13.6e} {:>7.2} {:>13.6e} {:>13.6e} {:>7.2}  {}",
            r.distance_km,
            r.basis.pair_label(),
            r.model_gain,
            r.gain,
            r.gain_z(),
            r.model_qber,
            r.qber,
            r.qber_z(),
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    let pass = passed == rows.len();
    let _ = write!(
        text,
        "{passed}/{} configurations agree within 3 standard errors: {}",
        rows.len(),
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(ValidateOutcome { rows, pass, text })
}

/// Text of the 16-pair attack table and its verdict.
pub fn run_attack_report() -> (String, bool) {
    let report = attack_indistinguishability_report();
    (report.to_string(), report.pass())
}
