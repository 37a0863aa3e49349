//! Closed-form channel statistics for the honest (no eavesdropper) setting.
//!
//! Alice and Bob each send a phase-randomized weak coherent pulse through a
//! fiber arm of total efficiency `eta` to the relay. Gains `Q` and error rates
//! `E` are the average over uniformly random bits in a fixed basis.
//!
//! The expressions are regrouped so that every subtraction of nearly equal
//! terms goes through `expm1`/`ln_1p` or the `I0 - 1` series tail.

use crate::error::{Error, Result};
use crate::numerics::{bessel_i0_minus_one, Probability};

/// Preparation/measurement basis. The key comes from `Z`; `X` is used for
/// phase-error estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];

    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }

    /// Label of the matched-basis pair, `"ZZ"` or `"XX"`.
    pub fn pair_label(self) -> &'static str {
        match self {
            Basis::Z => "ZZ",
            Basis::X => "XX",
        }
    }
}

/// Gain and error rate in the matched basis pair `basis`.
pub fn gain_qber(
    basis: Basis,
    mu: f64,
    nu: f64,
    arms: &ArmEfficiencies,
    params: &ChannelParams,
) -> Result<BasisStatistics> {
    match basis {
        Basis::Z => gain_qber_zz(mu, nu, arms, params),
        Basis::X => gain_qber_xx(mu, nu, arms, params),
    }
}

/// Error rate reported for a basis with no successful events.
pub const E0: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Detector efficiency.
    pub eta_d: Probability,
    /// Misalignment error probability.
    pub e_d: Probability,
    /// Dark count probability per detector per gate.
    pub p_d: Probability,
    /// Error-correction inefficiency, `>= 1`.
    pub f: f64,
    /// Fiber loss in dB/km, `> 0`.
    pub alpha: f64,
}

impl ChannelParams {
    pub fn new(eta_d: f64, e_d: f64, p_d: f64, f: f64, alpha: f64) -> Result<Self> {
        let params = ChannelParams {
            eta_d: Probability::named("eta_d", eta_d)?,
            e_d: Probability::named("e_d", e_d)?,
            p_d: Probability::named("p_d", p_d)?,
            f,
            alpha,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f >= 1.0 && self.f.is_finite()) {
            return Err(Error::domain("f", self.f, "must be finite and >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain("alpha", self.alpha, "must be finite and > 0"));
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    /// Detector efficiency 40%, misalignment 1.5%, dark counts 3e-6,
    /// error correction 1.16 and 0.2 dB/km fiber.
    fn default() -> Self {
        ChannelParams {
            eta_d: Probability::saturating(0.40),
            e_d: Probability::saturating(0.015),
            p_d: Probability::saturating(3e-6),
            f: 1.16,
            alpha: 0.2,
        }
    }
}

/// Total efficiency (fiber and detector) of each arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmEfficiencies {
    pub eta_a: Probability,
    pub eta_b: Probability,
}

impl ArmEfficiencies {
    pub fn new(eta_a: f64, eta_b: f64) -> Result<Self> {
        Ok(ArmEfficiencies {
            eta_a: Probability::named("eta_a", eta_a)?,
            eta_b: Probability::named("eta_b", eta_b)?,
        })
    }

    pub fn symmetric(eta: Probability) -> Self {
        ArmEfficiencies {
            eta_a: eta,
            eta_b: eta,
        }
    }

    pub fn swapped(self) -> Self {
        ArmEfficiencies {
            eta_a: self.eta_b,
            eta_b: self.eta_a,
        }
    }
}

/// Gain and error rate of one basis at one intensity pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisStatistics {
    pub gain: Probability,
    pub qber: Probability,
}

impl BasisStatistics {
    /// Builds a table entry, reporting `E0` when the gain is zero.
    pub fn new(gain: Probability, qber: Probability) -> Self {
        if gain.value() == 0.0 {
            BasisStatistics {
                gain,
                qber: Probability::HALF,
            }
        } else {
            BasisStatistics { gain, qber }
        }
    }

    /// No successful events: the error rate is the `E0` placeholder.
    pub fn is_empty(&self) -> bool {
        self.gain.value() == 0.0
    }

    /// `E * Q`, the probability of an erroneous announced event.
    pub fn error_gain(&self) -> f64 {
        self.gain.value() * self.qber.value()
    }
}

/// Z-basis gain split into correct and false Bell-state announcements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZBasisComponents {
    pub correct: f64,
    pub erroneous: f64,
}

/// Single-photon quantities of the honest channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonTruth {
    pub y11: Probability,
    pub e11: Probability,
    pub q11_zz: Probability,
}

/// Arm efficiencies at total Alice-Bob distance `distance_km`; the relay sits
/// at the midpoint, so each arm loses `alpha * L / 2` dB.
pub fn arm_transmittance(params: &ChannelParams, distance_km: f64) -> Result<ArmEfficiencies> {
    if !(distance_km >= 0.0 && distance_km.is_finite()) {
        return Err(Error::domain(
            "distance_km",
            distance_km,
            "must be finite and non-negative",
        ));
    }
    let eta = params.eta_d.value() * 10f64.powf(-params.alpha * distance_km / 20.0);
    Ok(ArmEfficiencies::symmetric(Probability::saturating(eta)))
}

fn check_intensities(mu: f64, nu: f64) -> Result<()> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::domain(
            "mu",
            mu,
            "intensity must be finite and non-negative",
        ));
    }
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::domain(
            "nu",
            nu,
            "intensity must be finite and non-negative",
        ));
    }
    Ok(())
}

/// `1 - (1 - p_d) e^{-t}` evaluated without cancellation.
fn no_click_complement(ln_keep: f64, t: f64) -> f64 {
    -(ln_keep - t).exp_m1()
}

struct Shared {
    /// `mu eta_a + nu eta_b`
    omega: f64,
    /// `sqrt(mu nu eta_a eta_b) / 2`
    x: f64,
    /// `ln(1 - p_d)`
    ln_keep: f64,
}

impl Shared {
    fn new(mu: f64, nu: f64, arms: &ArmEfficiencies, params: &ChannelParams) -> Self {
        let ma = mu * arms.eta_a.value();
        let nb = nu * arms.eta_b.value();
        Shared {
            omega: ma + nb,
            x: 0.5 * (ma * nb).sqrt(),
            ln_keep: (-params.p_d.value()).ln_1p(),
        }
    }
}

/// X-basis gain and error rate.
pub fn gain_qber_xx(
    mu: f64,
    nu: f64,
    arms: &ArmEfficiencies,
    params: &ChannelParams,
) -> Result<BasisStatistics> {
    check_intensities(mu, nu)?;
    let s = Shared::new(mu, nu, arms, params);
    let y = (s.ln_keep - 0.25 * s.omega).exp();
    let one_minus_y = no_click_complement(s.ln_keep, 0.25 * s.omega);
    let a = bessel_i0_minus_one(s.x)?;
    let b = bessel_i0_minus_one(2.0 * s.x)?;
    // 1 + 2y^2 - 4y I0(x) + I0(2x) = 2(1-y)^2 + (I0(2x)-1) - 4y (I0(x)-1)
    let bracket = 2.0 * one_minus_y * one_minus_y + b - 4.0 * y * a;
    let gain = 2.0 * y * y * bracket;
    if gain <= 0.0 {
        return Ok(BasisStatistics::new(Probability::ZERO, Probability::HALF));
    }
    let interference = 2.0 * y * y * b;
    let e_d = params.e_d.value();
    let qber = E0 - (E0 - e_d) * interference / gain;
    Ok(BasisStatistics::new(
        Probability::saturating(gain),
        Probability::saturating(qber),
    ))
}

/// Correct (`Q_C`) and false (`Q_E`) Z-basis gain contributions.
pub fn zz_components(
    mu: f64,
    nu: f64,
    arms: &ArmEfficiencies,
    params: &ChannelParams,
) -> Result<ZBasisComponents> {
    check_intensities(mu, nu)?;
    let s = Shared::new(mu, nu, arms, params);
    let p_d = params.p_d.value();
    let keep2 = (1.0 - p_d) * (1.0 - p_d);
    let prefactor = 2.0 * keep2 * (-0.5 * s.omega).exp();
    let fa = no_click_complement(s.ln_keep, 0.5 * mu * arms.eta_a.value());
    let fb = no_click_complement(s.ln_keep, 0.5 * nu * arms.eta_b.value());
    let correct = prefactor * (fa * fb);
    // I0(2x) - (1-p_d) e^{-omega/2} = (I0(2x) - 1) + (1 - (1-p_d) e^{-omega/2})
    let bracket = bessel_i0_minus_one(2.0 * s.x)? + no_click_complement(s.ln_keep, 0.5 * s.omega);
    let erroneous = p_d * prefactor * bracket;
    Ok(ZBasisComponents {
        correct: correct.max(0.0),
        erroneous: erroneous.max(0.0),
    })
}

/// Z-basis gain and error rate.
pub fn gain_qber_zz(
    mu: f64,
    nu: f64,
    arms: &ArmEfficiencies,
    params: &ChannelParams,
) -> Result<BasisStatistics> {
    let c = zz_components(mu, nu, arms, params)?;
    let gain = c.correct + c.erroneous;
    if gain <= 0.0 {
        return Ok(BasisStatistics::new(Probability::ZERO, Probability::HALF));
    }
    let e_d = params.e_d.value();
    let share = c.correct / gain;
    let qber = e_d * share + (1.0 - e_d) * (1.0 - share);
    Ok(BasisStatistics::new(
        Probability::saturating(gain),
        Probability::saturating(qber),
    ))
}

/// Single-photon yield and X-basis error rate of the honest channel, plus the
/// Z-basis single-photon gain `mu nu e^{-mu-nu} Y11`.
pub fn single_photon_truth(
    mu: f64,
    nu: f64,
    arms: &ArmEfficiencies,
    params: &ChannelParams,
) -> Result<SinglePhotonTruth> {
    check_intensities(mu, nu)?;
    let ea = arms.eta_a.value();
    let eb = arms.eta_b.value();
    let p_d = params.p_d.value();
    let keep2 = (1.0 - p_d) * (1.0 - p_d);
    let both = ea * eb;
    let y11 = keep2
        * (0.5 * both
            + (2.0 * ea + 2.0 * eb - 3.0 * both) * p_d
            + 4.0 * ((1.0 - ea) * (1.0 - eb)) * (p_d * p_d));
    let signal = keep2 * (0.5 * both);
    let e11 = if y11 > 0.0 {
        let share = signal / y11;
        params.e_d.value() * share + E0 * (1.0 - share)
    } else {
        E0
    };
    let q11 = (mu * nu) * (-mu - nu).exp() * y11;
    Ok(SinglePhotonTruth {
        y11: Probability::saturating(y11),
        e11: Probability::saturating(e11),
        q11_zz: Probability::saturating(q11),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(e_d: f64, p_d: f64) -> ChannelParams {
        ChannelParams::new(0.4, e_d, p_d, 1.16, 0.2).unwrap()
    }

    fn close(got: f64, want: f64, rel: f64) -> bool {
        ((got - want) / want).abs() <= rel
    }

    #[test]
    fn transmittance_reference_points() {
        let p = ChannelParams::default();
        assert_eq!(arm_transmittance(&p, 0.0).unwrap().eta_a.value(), 0.4);
        let at100 = arm_transmittance(&p, 100.0).unwrap();
        assert!(close(at100.eta_a.value(), 0.04, 1e-15));
        assert_eq!(at100.eta_a, at100.eta_b);
        assert!(close(
            arm_transmittance(&p, 200.0).unwrap().eta_b.value(),
            0.004,
            1e-15
        ));
        assert!(arm_transmittance(&p, -1.0).is_err());
    }

    #[test]
    fn vacuum_without_dark_counts_is_silent() {
        let p = params(0.015, 0.0);
        let arms = arm_transmittance(&p, 0.0).unwrap();
        let xx = gain_qber_xx(0.0, 0.0, &arms, &p).unwrap();
        let zz = gain_qber_zz(0.0, 0.0, &arms, &p).unwrap();
        assert_eq!(xx.gain.value(), 0.0);
        assert_eq!(zz.gain.value(), 0.0);
        assert!(xx.is_empty() && zz.is_empty());
        assert_eq!(xx.qber.value(), E0);
    }

    #[test]
    fn table_values_at_zero_distance() {
        // tests/oracles/transcription.py, 50 digits
        let p = ChannelParams::default();
        let arms = arm_transmittance(&p, 0.0).unwrap();
        let xx = gain_qber_xx(0.45, 0.45, &arms, &p).unwrap();
        assert!(close(xx.gain.value(), 0.025_937_446_883_598_429, 1e-12));
        assert!(close(xx.qber.value(), 0.246_467_719_233_276_59, 1e-12));
        let zz = gain_qber_zz(0.45, 0.45, &arms, &p).unwrap();
        assert!(close(zz.gain.value(), 0.012_376_678_059_647_877, 1e-12));
        assert!(close(zz.qber.value(), 0.015_067_890_565_271_954, 1e-12));
    }

    #[test]
    fn fully_misaligned_x_basis_is_random() {
        let p = params(0.5, 3e-6);
        let arms = arm_transmittance(&p, 30.0).unwrap();
        for mu in [0.01, 0.1, 0.45, 1.3] {
            let s = gain_qber_xx(mu, mu, &arms, &p).unwrap();
            assert!(s.gain.value() > 0.0);
            assert_eq!(s.qber.value(), 0.5);
        }
    }

    #[test]
    fn no_dark_counts_z_basis_error_is_misalignment() {
        let p = params(0.015, 0.0);
        let arms = arm_transmittance(&p, 40.0).unwrap();
        let c = zz_components(0.3, 0.3, &arms, &p).unwrap();
        assert_eq!(c.erroneous, 0.0);
        assert_eq!(
            gain_qber_zz(0.3, 0.3, &arms, &p).unwrap().qber.value(),
            0.015
        );
    }

    #[test]
    fn single_photon_limits() {
        let p = params(0.015, 0.0);
        let arms = ArmEfficiencies::new(0.3, 0.07).unwrap();
        let t = single_photon_truth(0.2, 0.4, &arms, &p).unwrap();
        assert_eq!(t.y11.value(), 0.3 * 0.07 / 2.0);
        assert_eq!(t.e11.value(), 0.015);

        let p = params(0.015, 1e-3);
        let dark = ArmEfficiencies::new(0.0, 0.0).unwrap();
        let t = single_photon_truth(0.2, 0.4, &dark, &p).unwrap();
        let want = (1.0 - 1e-3f64).powi(2) * 4.0 * 1e-6;
        assert!(close(t.y11.value(), want, 1e-14));
        assert_eq!(t.e11.value(), E0);
    }

    #[test]
    fn single_photon_truth_at_fifty_km() {
        let p = ChannelParams::default();
        let arms = arm_transmittance(&p, 50.0).unwrap();
        let t = single_photon_truth(0.45, 0.45, &arms, &p).unwrap();
        assert!(close(t.y11.value(), 0.008_001_325_912_574_009, 1e-12));
        assert!(close(t.e11.value(), 0.015_083_279_642_743_615, 1e-12));
        assert!(close(t.q11_zz.value(), 0.000_658_752_011_634_142_84, 1e-12));
        let q = 0.45 * 0.45 * (-0.9f64).exp() * t.y11.value();
        assert_eq!(t.q11_zz.value(), q);
    }

    #[test]
    fn rejects_negative_intensity() {
        let p = ChannelParams::default();
        let arms = arm_transmittance(&p, 0.0).unwrap();
        assert!(gain_qber_xx(-0.1, 0.1, &arms, &p).is_err());
        assert!(gain_qber_zz(0.1, -0.1, &arms, &p).is_err());
        assert!(single_photon_truth(f64::NAN, 0.1, &arms, &p).is_err());
    }

    #[test]
    fn channel_params_validation() {
        assert!(ChannelParams::new(1.5, 0.015, 3e-6, 1.16, 0.2).is_err());
        assert!(ChannelParams::new(0.4, 0.015, 3e-6, 0.9, 0.2).is_err());
        assert!(ChannelParams::new(0.4, 0.015, 3e-6, 1.16, 0.0).is_err());
        assert!(ChannelParams::new(0.4, 0.015, 3e-6, 1.0, 0.2).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn channel() -> impl Strategy<Value = ChannelParams> {
            (0.0..=1.0f64, 0.0..=0.5f64, 0.0..1e-2f64).prop_map(|(eta_d, e_d, p_d)| {
                ChannelParams::new(eta_d, e_d, p_d, 1.16, 0.2).unwrap()
            })
        }

        proptest! {
            #[test]
            fn outputs_are_probabilities(
                p in channel(), ea in 0.0..=1.0f64, eb in 0.0..=1.0f64,
                mu in 0.0..2.0f64, nu in 0.0..2.0f64,
            ) {
                let arms = ArmEfficiencies::new(ea, eb).unwrap();
                let c = zz_components(mu, nu, &arms, &p).unwrap();
                prop_assert!(c.correct >= 0.0 && c.erroneous >= 0.0);
                for s in [gain_qber_xx(mu, nu, &arms, &p).unwrap(), gain_qber_zz(mu, nu, &arms, &p).unwrap()] {
                    prop_assert!((0.0..=1.0).contains(&s.gain.value()));
                    prop_assert!((0.0..=1.0).contains(&s.qber.value()));
                    prop_assert!(s.error_gain() <= s.gain.value());
                }
                let t = single_photon_truth(mu, nu, &arms, &p).unwrap();
                prop_assert!(t.e11.value() <= 0.5 + 1e-15);
            }

            #[test]
            fn arm_swap_symmetry(
                p in channel(), ea in 0.0..=1.0f64, eb in 0.0..=1.0f64,
                mu in 0.0..2.0f64, nu in 0.0..2.0f64,
            ) {
                let arms = ArmEfficiencies::new(ea, eb).unwrap();
                let sw = arms.swapped();
                prop_assert_eq!(gain_qber_xx(mu, nu, &arms, &p).unwrap(), gain_qber_xx(nu, mu, &sw, &p).unwrap());
                prop_assert_eq!(gain_qber_zz(mu, nu, &arms, &p).unwrap(), gain_qber_zz(nu, mu, &sw, &p).unwrap());
                prop_assert_eq!(single_photon_truth(mu, nu, &arms, &p).unwrap(), single_photon_truth(nu, mu, &sw, &p).unwrap());
            }

            #[test]
            fn gains_fall_with_distance(mu in 0.001..1.5f64, l in 0.0..300.0f64, dl in 0.0..50.0f64) {
                let p = ChannelParams::default();
                let near = arm_transmittance(&p, l).unwrap();
                let far = arm_transmittance(&p, l + dl).unwrap();
                prop_assert!(gain_qber_zz(mu, mu, &far, &p).unwrap().gain <= gain_qber_zz(mu, mu, &near, &p).unwrap().gain);
                prop_assert!(gain_qber_xx(mu, mu, &far, &p).unwrap().gain <= gain_qber_xx(mu, mu, &near, &p).unwrap().gain);
            }

            #[test]
            fn dark_count_free_identities(e_d in 0.0..=0.5f64, ea in 0.0..=1.0f64, eb in 0.0..=1.0f64, mu in 0.001..2.0f64, nu in 0.001..2.0f64) {
                let p = ChannelParams::new(0.4, e_d, 0.0, 1.16, 0.2).unwrap();
                let arms = ArmEfficiencies::new(ea, eb).unwrap();
                let zz = gain_qber_zz(mu, nu, &arms, &p).unwrap();
                if !zz.is_empty() {
                    prop_assert_eq!(zz.qber.value(), e_d);
                }
                let t = single_photon_truth(mu, nu, &arms, &p).unwrap();
                prop_assert_eq!(t.y11.value(), ea * eb / 2.0);
                if t.y11.value() > 0.0 {
                    prop_assert_eq!(t.e11.value(), e_d);
                }
            }
        }
    }
}
