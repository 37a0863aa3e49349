//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, lists are comma separated. Unset
//! keys take the reference channel (`ChannelParams::default()`) and the
//! reference sweep: trust levels 1, 0.95, 0.9, 0.85 with signals 0.45, 0.3,
//! 0.1, 0.05, weak decoy 0.01, 0..200 km in 1 km steps.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::keyrate::Mode;
use crate::model::ChannelParams;
use crate::numerics::Probability;
use crate::optimizer::DEFAULT_WEAK_DECOY;

pub const KEYS: [&str; 15] = [
    "eta_d",
    "e_d",
    "p_d",
    "f",
    "alpha",
    "mu_signal",
    "mu_decoy",
    "eta_s_list",
    "mode",
    "l_min",
    "l_max",
    "l_step",
    "mc_trials",
    "mc_seed",
    "out",
];

/// Signal intensity per trust level, or optimized at zero distance.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalChoice {
    List(Vec<f64>),
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub channel: ChannelParams,
    pub mu_signal: SignalChoice,
    pub mu_decoy: f64,
    pub eta_s_list: Vec<Probability>,
    pub mode: Mode,
    pub l_min: f64,
    pub l_max: f64,
    pub l_step: f64,
    pub mc_trials: u64,
    pub mc_seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            channel: ChannelParams::default(),
            mu_signal: SignalChoice::List(vec![0.45, 0.3, 0.1, 0.05]),
            mu_decoy: DEFAULT_WEAK_DECOY,
            eta_s_list: [1.0, 0.95, 0.9, 0.85].map(Probability::saturating).to_vec(),
            mode: Mode::Asymptotic,
            l_min: 0.0,
            l_max: 200.0,
            l_step: 1.0,
            mc_trials: 10_000_000,
            mc_seed: 20_180_116,
            out: PathBuf::from("keyrate.csv"),
        }
    }
}

fn value_error(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigValue {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| value_error(key, format!("`{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(value_error(key, "must be finite"));
    }
    Ok(v)
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

fn parse_u64(key: &str, raw: &str) -> Result<u64> {
    // accept 1e7-style literals for trial counts
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(v);
    }
    let f = parse_f64(key, raw)?;
    if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(value_error(
            key,
            format!("`{raw}` is not a non-negative integer"),
        ))
    }
}

fn probability(key: &'static str, v: f64) -> Result<Probability> {
    Probability::named(key, v)
        .map_err(|_| value_error(key, format!("{v} is not a probability in [0, 1]")))
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = HashSet::new();
    let (mut eta_d, mut e_d, mut p_d) = (
        cfg.channel.eta_d.value(),
        cfg.channel.e_d.value(),
        cfg.channel.p_d.value(),
    );
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigParse {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(Error::ConfigParse {
                line: line_no,
                message: format!("unknown key `{key}`"),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::ConfigParse {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
        match key {
            "eta_d" => eta_d = parse_f64(key, value)?,
            "e_d" => e_d = parse_f64(key, value)?,
            "p_d" => p_d = parse_f64(key, value)?,
            "f" => cfg.channel.f = parse_f64(key, value)?,
            "alpha" => cfg.channel.alpha = parse_f64(key, value)?,
            "mu_signal" => {
                cfg.mu_signal = if value == "auto" {
                    SignalChoice::Auto
                } else {
                    SignalChoice::List(parse_list(key, value)?)
                }
            }
            "mu_decoy" => cfg.mu_decoy = parse_f64(key, value)?,
            "eta_s_list" => {
                cfg.eta_s_list = parse_list(key, value)?
                    .into_iter()
                    .map(|v| probability("eta_s_list", v))
                    .collect::<Result<_>>()?
            }
            "mode" => cfg.mode = value.parse().map_err(|m: String| value_error(key, m))?,
            "l_min" => cfg.l_min = parse_f64(key, value)?,
            "l_max" => cfg.l_max = parse_f64(key, value)?,
            "l_step" => cfg.l_step = parse_f64(key, value)?,
            "mc_trials" => cfg.mc_trials = parse_u64(key, value)?,
            "mc_seed" => cfg.mc_seed = parse_u64(key, value)?,
            "out" => {
                if value.is_empty() {
                    return Err(value_error(key, "empty path"));
                }
                cfg.out = PathBuf::from(value)
            }
            _ => unreachable!(),
        }
    }
    cfg.channel.eta_d = probability("eta_d", eta_d)?;
    cfg.channel.e_d = probability("e_d", e_d)?;
    cfg.channel.p_d = probability("p_d", p_d)?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.channel.f >= 1.0) {
            return Err(value_error(
                "f",
                "error-correction inefficiency must be >= 1",
            ));
        }
        if !(self.channel.alpha > 0.0) {
            return Err(value_error("alpha", "fiber loss must be > 0"));
        }
        if !(self.mu_decoy > 0.0) {
            return Err(value_error("mu_decoy", "weak decoy must be > 0"));
        }
        if self.eta_s_list.is_empty() {
            return Err(value_error("eta_s_list", "need at least one trust level"));
        }
        if let SignalChoice::List(mus) = &self.mu_signal {
            if mus.len() != self.eta_s_list.len() {
                return Err(value_error(
                    "mu_signal",
                    format!(
                        "{} signal intensities for {} trust levels",
                        mus.len(),
                        self.eta_s_list.len()
                    ),
                ));
            }
            if let Some(mu) = mus.iter().find(|&&mu| !(mu > self.mu_decoy)) {
                return Err(value_error(
                    "mu_signal",
                    format!("signal {mu} must exceed the decoy {}", self.mu_decoy),
                ));
            }
        }
        if !(self.l_min >= 0.0) {
            return Err(value_error("l_min", "must be >= 0"));
        }
        if !(self.l_max >= self.l_min) {
            return Err(value_error("l_max", "must be >= l_min"));
        }
        if !(self.l_step > 0.0) {
            return Err(value_error("l_step", "must be > 0"));
        }
        if self.mc_trials == 0 {
            return Err(value_error("mc_trials", "must be >= 1"));
        }
        Ok(())
    }

    /// Serializes every key; `parse_config(cfg.to_text())` reproduces `cfg`.
    pub fn to_text(&self) -> String {
        let join = |v: &mut dyn Iterator<Item = f64>| {
            v.map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        };
        let mut s = String::new();
        let c = &self.channel;
        let _ = writeln!(s, "eta_d = {}", c.eta_d);
        let _ = writeln!(s, "e_d = {}", c.e_d);
        let _ = writeln!(s, "p_d = {}", c.p_d);
        let _ = writeln!(s, "f = {}", c.f);
        let _ = writeln!(s, "alpha = {}", c.alpha);
        let signal = match &self.mu_signal {
            SignalChoice::Auto => "auto".to_string(),
            SignalChoice::List(v) => join(&mut v.iter().copied()),
        };
        let _ = writeln!(s, "mu_signal = {signal}");
        let _ = writeln!(s, "mu_decoy = {}", self.mu_decoy);
        let _ = writeln!(
            s,
            "eta_s_list = {}",
            join(&mut self.eta_s_list.iter().map(|p| p.value()))
        );
        let _ = writeln!(s, "mode = {}", self.mode);
        let _ = writeln!(s, "l_min = {}", self.l_min);
        let _ = writeln!(s, "l_max = {}", self.l_max);
        let _ = writeln!(s, "l_step = {}", self.l_step);
        let _ = writeln!(s, "mc_trials = {}", self.mc_trials);
        let _ = writeln!(s, "mc_seed = {}", self.mc_seed);
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.channel.eta_d.value(), 0.40);
        assert_eq!(cfg.channel.e_d.value(), 0.015);
        assert_eq!(cfg.channel.p_d.value(), 3e-6);
        assert_eq!(cfg.channel.f, 1.16);
        assert_eq!(cfg.channel.alpha, 0.2);
    }

    #[test]
    fn comments_and_overrides() {
        let cfg = parse_config(
            "# reference run\n\
             mode = two-decoy   # bounds\n\
             eta_s_list = 1, 0.9\n\
             mu_signal = 0.4,0.12\n\
             mc_trials = 1e6\n",
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::TwoDecoy);
        assert_eq!(cfg.eta_s_list.len(), 2);
        assert_eq!(cfg.mu_signal, SignalChoice::List(vec![0.4, 0.12]));
        assert_eq!(cfg.mc_trials, 1_000_000);
    }

    #[test]
    fn out_of_range_probability_names_key() {
        match parse_config("eta_d = 1.5") {
            Err(Error::ConfigValue { key, .. }) => assert_eq!(key, "eta_d"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        match parse_config("f = 1.2\n\nnot a pair\n") {
            Err(Error::ConfigParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("e_d = 0.01\ncolour = blue") {
            Err(Error::ConfigParse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("colour"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_config("f = 1.2\nf = 1.3"),
            Err(Error::ConfigParse { line: 2, .. })
        ));
    }

    #[test]
    fn cross_field_validation() {
        assert!(matches!(
            parse_config("mu_signal = 0.4"),
            Err(Error::ConfigValue { key, .. }) if key == "mu_signal"
        ));
        assert!(parse_config("mu_signal = 0.4, 0.3, 0.005, 0.2").is_err());
        assert!(parse_config("l_max = -1").is_err());
        assert!(parse_config("mode = finite").is_err());
        assert!(parse_config("f = 0.5").is_err());
        assert!(parse_config("mc_trials = 0").is_err());
        assert_eq!(
            parse_config("mu_signal = auto").unwrap().mu_signal,
            SignalChoice::Auto
        );
    }

    #[test]
    fn round_trip() {
        let text = "eta_d = 0.35\np_d = 1e-7\nmu_signal = auto\neta_s_list = 0.97\nl_step = 0.5\nout = /tmp/x y.csv\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
        let d = RunConfig::default();
        assert_eq!(parse_config(&d.to_text()).unwrap(), d);
    }
}
