//! Special functions and entropy primitives.
//!
//! `bessel_i0` switches from the power series to the large-argument
//! asymptotic expansion at |x| = 15; both sides agree to ~1e-15 at the seam.

use std::fmt;

use crate::error::{Error, Result};

/// Largest |x| accepted by [`bessel_i0`]; e^x overflows shortly after 709.
pub const BESSEL_I0_MAX_ARG: f64 = 700.0;

/// Argument at which [`bessel_i0`] switches from series to asymptotic form.
pub const BESSEL_I0_SERIES_LIMIT: f64 = 15.0;

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);
    pub const HALF: Probability = Probability(0.5);

    pub fn new(value: f64) -> Result<Self> {
        Self::named("probability", value)
    }

    /// Like [`Probability::new`] but reports `name` in the domain error.
    pub fn named(name: &'static str, value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(name, value, "must lie in [0, 1]"))
        }
    }

    /// Clamps `value` into `[0, 1]`. NaN maps to zero.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Probability(0.0)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(
            "x",
            x,
            "bessel_i0 requires a finite argument",
        ));
    }
    let ax = x.abs();
    if ax > BESSEL_I0_MAX_ARG {
        return Err(Error::domain(
            "x",
            x,
            "bessel_i0 argument overflows (|x| > 700)",
        ));
    }
    if ax <= BESSEL_I0_SERIES_LIMIT {
        Ok(i0_series(ax))
    } else {
        Ok(i0_asymptotic(ax))
    }
}

/// `I0(x) - 1` without the cancellation of subtracting one from a value near one.
pub fn bessel_i0_minus_one(x: f64) -> Result<f64> {
    let v = bessel_i0(x)?;
    if x.abs() <= BESSEL_I0_SERIES_LIMIT {
        Ok(i0_series_tail(x.abs()))
    } else {
        Ok(v - 1.0)
    }
}

/// sum_k (x/2)^{2k} / (k!)^2; every term is positive so there is no cancellation.
fn i0_series(ax: f64) -> f64 {
    1.0 + i0_series_tail(ax)
}

/// The series above without its k = 0 term.
fn i0_series_tail(ax: f64) -> f64 {
    let q = 0.25 * ax * ax;
    if q == 0.0 {
        return 0.0;
    }
    let mut term = q;
    let mut sum = q;
    let mut k = 2.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term <= (1.0 + sum) * f64::EPSILON * 0.25 {
            return sum;
        }
        k += 1.0;
    }
}

/// e^x / sqrt(2 pi x) * sum_k prod_{j<=k} (2j-1)^2 / (8 x j), truncated at the smallest term.
fn i0_asymptotic(ax: f64) -> f64 {
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for j in 1..200 {
        let odd = (2 * j - 1) as f64;
        let next = term * odd * odd / (8.0 * ax * j as f64);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term < sum * f64::EPSILON * 0.25 {
            break;
        }
    }
    // split the exponential so e^x / sqrt(x) does not overflow before the division
    let half = (0.5 * ax).exp();
    half * (half / (2.0 * std::f64::consts::PI * ax).sqrt()) * sum
}

/// Binary Shannon entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: Probability) -> f64 {
    let p = p.value();
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// (1/pi) * int_0^pi exp(x cos t - |x|) dt by the trapezoid rule; exponentially
    /// convergent for periodic integrands. Returns the value scaled by exp(-|x|).
    fn i0_scaled_quadrature(x: f64) -> f64 {
        let n = 4000;
        let h = std::f64::consts::PI / n as f64;
        let ax = x.abs();
        let mut acc = 0.5 * ((x - ax).exp() + (-x - ax).exp());
        for i in 1..n {
            acc += (x * (i as f64 * h).cos() - ax).exp();
        }
        acc * h / std::f64::consts::PI
    }

    #[test]
    fn zero_is_one() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
    }

    #[test]
    fn frozen_series_values() {
        // 50-digit power-series evaluation, tests/oracles/transcription.py
        let cases = [
            (1.0, 1.266_065_877_752_008_3),
            (5.0, 27.239_871_823_604_447),
            (15.0, 339_649.373_297_913_9),
            (30.0, 781_672_297_823.977_5),
            (100.0, 1.073_751_707_131_073_8e42),
        ];
        for (x, want) in cases {
            let got = bessel_i0(x).unwrap();
            assert!(
                ((got - want) / want).abs() <= 1e-12,
                "I0({x}) = {got}, want {want}"
            );
            assert_eq!(bessel_i0(-x).unwrap(), got);
        }
    }

    #[test]
    fn agrees_with_quadrature_over_grid() {
        let mut x = -40.0;
        while x <= 40.0 {
            let got = bessel_i0(x).unwrap() * (-x.abs()).exp();
            let want = i0_scaled_quadrature(x);
            assert!(
                ((got - want) / want).abs() <= 1e-10,
                "x = {x}: {got} vs {want}"
            );
            x += 0.37;
        }
    }

    #[test]
    fn seam_is_continuous() {
        let lim = BESSEL_I0_SERIES_LIMIT;
        let s = i0_series(lim);
        let a = i0_asymptotic(lim);
        assert!(((s - a) / s).abs() <= 1e-12, "series {s} vs asymptotic {a}");
        let below = bessel_i0(lim).unwrap();
        let above = bessel_i0(lim + 1e-9).unwrap();
        assert!(above >= below);
        assert!(((above - below) / below).abs() < 1e-8);
    }

    #[test]
    fn minus_one_keeps_small_arguments() {
        let x: f64 = 2e-6;
        let got = bessel_i0_minus_one(x).unwrap();
        let want = 0.25 * x * x + x.powi(4) / 64.0;
        assert!(((got - want) / want).abs() < 1e-14);
        assert_eq!(bessel_i0_minus_one(0.0).unwrap(), 0.0);
        let big = bessel_i0_minus_one(20.0).unwrap();
        assert_eq!(big, bessel_i0(20.0).unwrap() - 1.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(bessel_i0(f64::NAN).is_err());
        assert!(bessel_i0(f64::INFINITY).is_err());
        assert!(bessel_i0(700.5).is_err());
        assert!(bessel_i0(-701.0).is_err());
        assert!(bessel_i0(700.0).unwrap().is_finite());
    }

    #[test]
    fn entropy_endpoints_and_peak() {
        assert_eq!(binary_entropy(Probability::ZERO), 0.0);
        assert_eq!(binary_entropy(Probability::ONE), 0.0);
        assert_eq!(binary_entropy(Probability::HALF), 1.0);
    }

    #[test]
    fn entropy_eleven_percent_threshold() {
        let h = binary_entropy(Probability::new(0.11).unwrap());
        // mpmath, 50 digits
        assert!((h - 0.499_915_958_164_527_996).abs() < 1e-15);
        let margin = 1.0 - 2.0 * h;
        assert!(margin > 0.0 && margin < 1e-3);
    }

    #[test]
    fn entropy_matches_natural_log_oracle() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let oracle = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln()) / std::f64::consts::LN_2;
            let got = binary_entropy(Probability::new(p).unwrap());
            assert!(((got - oracle) / oracle).abs() <= 1e-10);
        }
    }

    #[test]
    fn probability_rejects_out_of_range() {
        assert!(Probability::new(-1e-12).is_err());
        assert!(Probability::new(1.0 + 1e-12).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert_eq!(Probability::saturating(1.5).value(), 1.0);
        assert_eq!(Probability::saturating(-0.1).value(), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn i0_even_and_at_least_one(x in -700.0..700.0f64) {
                let v = bessel_i0(x).unwrap();
                prop_assert_eq!(v, bessel_i0(-x).unwrap());
                prop_assert!(v >= 1.0);
            }

            #[test]
            fn i0_monotone_on_positive_axis(a in 0.0..600.0f64, d in 1e-6..50.0f64) {
                prop_assert!(bessel_i0(a + d).unwrap() >= bessel_i0(a).unwrap());
            }

            #[test]
            fn entropy_symmetric(p in 0.0..=1.0f64) {
                let h1 = binary_entropy(Probability::new(p).unwrap());
                let h2 = binary_entropy(Probability::new(1.0 - p).unwrap());
                prop_assert!((h1 - h2).abs() <= 1e-14);
            }

            #[test]
            fn entropy_concave(p in 0.0..=1.0f64, q in 0.0..=1.0f64) {
                let mid = binary_entropy(Probability::new(0.5 * (p + q)).unwrap());
                let avg = 0.5 * (binary_entropy(Probability::new(p).unwrap())
                    + binary_entropy(Probability::new(q).unwrap()));
                prop_assert!(mid >= avg - 1e-14);
            }
        }
    }
}
