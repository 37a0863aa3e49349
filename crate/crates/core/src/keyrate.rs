//! Secret key rates: the single-photon rate `1 - h(e1) - h(e2)`, the GLLP-style
//! decoy rate, and the source-trust adjustment for Alice's uncharacterized
//! encoder.

use std::fmt;
use std::str::FromStr;

use bitflags::bitflags;

use crate::decoy::{
    asymptotic_estimates, observe, two_decoy_estimates, EstimateFlags, IntensitySet,
};
use crate::error::{Error, Result};
use crate::model::{arm_transmittance, gain_qber_zz, ChannelParams};
use crate::numerics::{binary_entropy, Probability};

/// Probability that Alice's encoder emits the intended BB84 state; otherwise
/// the emission carries a 50% error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustedSourceModel {
    pub eta_s: Probability,
}

impl TrustedSourceModel {
    pub fn new(eta_s: f64) -> Result<Self> {
        Ok(TrustedSourceModel {
            eta_s: Probability::named("eta_s", eta_s)?,
        })
    }

    /// `eta_s = 1`: both encoders trusted, plain MDI-QKD.
    pub fn full() -> Self {
        TrustedSourceModel {
            eta_s: Probability::ONE,
        }
    }
}

/// `eta_s * e + (1 - eta_s) / 2`.
pub fn apply_source_trust(e: Probability, trust: TrustedSourceModel) -> Probability {
    let s = trust.eta_s.value();
    if s == 1.0 {
        return e;
    }
    Probability::saturating(s * e.value() + 0.5 * (1.0 - s))
}

/// `Q11 (1 - H(e11)) - Q f H(E)`, signed.
pub fn secret_key_rate(
    q11_zz: Probability,
    e11_xx: Probability,
    q_sig_zz: Probability,
    e_sig_zz: Probability,
    f: f64,
) -> Result<f64> {
    if !(f >= 1.0 && f.is_finite()) {
        return Err(Error::domain("f", f, "must be finite and >= 1"));
    }
    Ok(q11_zz.value() * (1.0 - binary_entropy(e11_xx))
        - q_sig_zz.value() * f * binary_entropy(e_sig_zz))
}

/// Asymptotic key fraction with single photons: `1 - h(e1) - h(e2)`.
pub fn single_photon_rate(e1: Probability, e2: Probability) -> f64 {
    1.0 - binary_entropy(e1) - binary_entropy(e2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Asymptotic,
    TwoDecoy,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Asymptotic => "asymptotic",
            Mode::TwoDecoy => "two-decoy",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "asymptotic" => Ok(Mode::Asymptotic),
            "two-decoy" => Ok(Mode::TwoDecoy),
            other => Err(format!(
                "unknown mode `{other}` (expected asymptotic or two-decoy)"
            )),
        }
    }
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct RateFlags: u8 {
        /// The formula value was negative and the rate was floored to 0.
        const FLOORED = 1;
        /// The signal gain is zero.
        const EMPTY_SIGNAL = 1 << 1;
        /// Decoy bounds certified no single-photon yield.
        const NO_CERTIFIED_SIGNAL = 1 << 2;
        /// A decoy bound left [0, 1] and was clamped.
        const BOUND_CLAMPED = 1 << 3;
        /// The phase-error bound exceeded 1/2 and was capped there.
        const PHASE_ERROR_CAPPED = 1 << 4;
    }
}

impl RateFlags {
    const NAMES: [(RateFlags, &'static str); 5] = [
        (RateFlags::FLOORED, "floored"),
        (RateFlags::EMPTY_SIGNAL, "empty-signal"),
        (RateFlags::NO_CERTIFIED_SIGNAL, "no-certified-signal"),
        (RateFlags::BOUND_CLAMPED, "bound-clamped"),
        (RateFlags::PHASE_ERROR_CAPPED, "phase-error-capped"),
    ];

    /// `;`-separated flag names, empty when no flag is set.
    pub fn label(self) -> String {
        Self::NAMES
            .iter()
            .filter(|(flag, _)| self.contains(*flag))
            .map(|(_, name)| *name)
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// One evaluated point of a rate-vs-distance curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRatePoint {
    pub distance_km: f64,
    pub mu: f64,
    pub nu: f64,
    pub eta_s: Probability,
    pub mode: Mode,
    /// Secret bits per pulse pair, floored at zero.
    pub rate: f64,
    /// Formula value before flooring.
    pub signed_rate: f64,
    pub flags: RateFlags,
}

/// Full pipeline at one distance with signal `mu = nu = intensities.mu2`:
/// single-photon estimates, trust adjustment of `E_ZZ` and `e11_XX`, key rate,
/// floor at zero. The key comes from the Z basis; X only bounds the phase error.
pub fn rate_at(
    channel: &ChannelParams,
    distance_km: f64,
    intensities: &IntensitySet,
    trust: TrustedSourceModel,
    mode: Mode,
) -> Result<KeyRatePoint> {
    channel.validate()?;
    intensities.validate()?;
    let mu = intensities.signal();
    let arms = arm_transmittance(channel, distance_km)?;
    let signal = gain_qber_zz(mu, mu, &arms, channel)?;

    let mut flags = RateFlags::empty();
    let estimates = match mode {
        Mode::Asymptotic => asymptotic_estimates(channel, distance_km, mu, mu)?,
        Mode::TwoDecoy => {
            let table = observe(channel, distance_km, intensities)?;
            two_decoy_estimates(&table, intensities)?
        }
    };
    if estimates.flags.contains(EstimateFlags::NO_CERTIFIED_SIGNAL) {
        flags |= RateFlags::NO_CERTIFIED_SIGNAL;
    }
    if estimates
        .flags
        .intersects(EstimateFlags::Y11_CLAMPED | EstimateFlags::E11_CLAMPED)
    {
        flags |= RateFlags::BOUND_CLAMPED;
    }
    if signal.is_empty() {
        flags |= RateFlags::EMPTY_SIGNAL;
    }

    let mut e11 = estimates.e11;
    if e11.value() > 0.5 {
        e11 = Probability::HALF;
        flags |= RateFlags::PHASE_ERROR_CAPPED;
    }
    let e11 = apply_source_trust(e11, trust);
    let e_sig = apply_source_trust(signal.qber, trust);

    let signed_rate = if flags.contains(RateFlags::NO_CERTIFIED_SIGNAL) {
        0.0
    } else {
        secret_key_rate(estimates.q11_zz, e11, signal.gain, e_sig, channel.f)?
    };
    let rate = if signed_rate > 0.0 {
        signed_rate
    } else {
        if signed_rate < 0.0 {
            flags |= RateFlags::FLOORED;
        }
        0.0
    };
    Ok(KeyRatePoint {
        distance_km,
        mu,
        nu: mu,
        eta_s: trust.eta_s,
        mode,
        rate,
        signed_rate,
        flags,
    })
}
