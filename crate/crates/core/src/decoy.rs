//! Single-photon parameter estimation.
//!
//! Two routes: the infinite-decoy limit, where the single-photon quantities are
//! known exactly, and the vacuum + weak decoy scheme, which bounds them from the
//! gains and error rates observed at three intensities per side. The bounds
//! only ever see a [`PairStatistics`] table, so simulated, analytic and
//! measured data go through the same code.

use bitflags::bitflags;

use crate::error::{Error, Result};
use crate::model::{
    arm_transmittance, gain_qber, single_photon_truth, Basis, BasisStatistics, ChannelParams,
};
use crate::numerics::Probability;

/// Vacuum, weak decoy and signal intensity, shared by Alice and Bob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensitySet {
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl IntensitySet {
    /// Vacuum plus weak decoy `mu1` and signal `mu2`.
    pub fn new(mu1: f64, mu2: f64) -> Result<Self> {
        let set = IntensitySet { mu0: 0.0, mu1, mu2 };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu0 != 0.0 {
            return Err(Error::domain(
                "mu0",
                self.mu0,
                "vacuum decoy must be exactly 0",
            ));
        }
        if !(self.mu1 > 0.0 && self.mu1.is_finite()) {
            return Err(Error::domain(
                "mu1",
                self.mu1,
                "weak decoy must be positive",
            ));
        }
        if !self.mu2.is_finite() {
            return Err(Error::domain("mu2", self.mu2, "signal must be finite"));
        }
        if self.mu2 <= self.mu1 {
            return Err(Error::DegenerateIntensities {
                signal: self.mu2,
                decoy: self.mu1,
            });
        }
        Ok(())
    }

    pub fn levels(&self) -> [f64; 3] {
        [self.mu0, self.mu1, self.mu2]
    }

    pub fn signal(&self) -> f64 {
        self.mu2
    }
}

/// Gains and error rates for all nine intensity pairs in both matched bases.
///
/// Indexed by `(basis, i, j)` with `i` Alice's and `j` Bob's intensity level.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStatistics {
    entries: [[[BasisStatistics; 3]; 3]; 2],
}

impl PairStatistics {
    pub fn from_fn<F>(mut f: F) -> Result<Self>
    where
        F: FnMut(Basis, usize, usize) -> Result<BasisStatistics>,
    {
        let empty = BasisStatistics::new(Probability::ZERO, Probability::HALF);
        let mut entries = [[[empty; 3]; 3]; 2];
        for basis in Basis::ALL {
            for (i, row) in entries[basis.index()].iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell = f(basis, i, j)?;
                }
            }
        }
        Ok(PairStatistics { entries })
    }

    pub fn get(&self, basis: Basis, i: usize, j: usize) -> BasisStatistics {
        self.entries[basis.index()][i][j]
    }

    pub fn set(&mut self, basis: Basis, i: usize, j: usize, stats: BasisStatistics) {
        self.entries[basis.index()][i][j] = stats;
    }

    fn gain(&self, basis: Basis, i: usize, j: usize) -> f64 {
        self.get(basis, i, j).gain.value()
    }

    fn error_gain(&self, basis: Basis, i: usize, j: usize) -> f64 {
        self.get(basis, i, j).error_gain()
    }
}

/// Full statistics table from the closed-form channel model.
pub fn observe(
    channel: &ChannelParams,
    distance_km: f64,
    intensities: &IntensitySet,
) -> Result<PairStatistics> {
    intensities.validate()?;
    let arms = arm_transmittance(channel, distance_km)?;
    let levels = intensities.levels();
    PairStatistics::from_fn(|basis, i, j| gain_qber(basis, levels[i], levels[j], &arms, channel))
}

/// A bound clamped into `[0, 1]`; `raw` keeps the unclamped formula value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub value: Probability,
    pub raw: f64,
    pub clamped: bool,
}

impl Bound {
    fn clamp(raw: f64) -> Self {
        let value = Probability::saturating(raw);
        Bound {
            value,
            raw,
            clamped: value.value() != raw,
        }
    }
}

/// Lower bound on the single-photon yield in `basis` from the vacuum + weak
/// decoy scheme. Negative values clamp to zero with `clamped` set.
pub fn y11_lower_two_decoy(
    stats: &PairStatistics,
    intensities: &IntensitySet,
    basis: Basis,
) -> Result<Bound> {
    intensities.validate()?;
    let (m1, m2) = (intensities.mu1, intensities.mu2);
    let q = |i, j| stats.gain(basis, i, j);
    let e1 = m1.exp();
    let e2 = m2.exp();
    let weak = e1 * e1 * q(1, 1) + q(0, 0) - e1 * q(1, 0) - e1 * q(0, 1);
    let strong = e2 * e2 * q(2, 2) + q(0, 0) - e2 * q(2, 0) - e2 * q(0, 2);
    let raw = (m2.powi(3) * weak - m1.powi(3) * strong) / (m2 * m2 * m1 * m1 * (m2 - m1));
    Ok(Bound::clamp(raw))
}

/// Upper bound on the single-photon X-basis error rate at the weak decoy pair,
/// given a (lower bound on the) single-photon X-basis yield.
pub fn e11_upper_two_decoy(
    stats: &PairStatistics,
    intensities: &IntensitySet,
    y11_xx: Probability,
) -> Result<Bound> {
    intensities.validate()?;
    if y11_xx.value() <= 0.0 {
        return Err(Error::EstimationFailure(
            "no single-photon signal certified in the X basis",
        ));
    }
    let m1 = intensities.mu1;
    let e1 = m1.exp();
    let eq = |i, j| stats.error_gain(Basis::X, i, j);
    let numerator = eq(0, 0) + e1 * e1 * eq(1, 1) - e1 * eq(1, 0) - e1 * eq(0, 1);
    Ok(Bound::clamp(numerator / (m1 * m1 * y11_xx.value())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateMode {
    /// Infinite-decoy limit: the true single-photon values.
    Exact,
    /// Vacuum + weak decoy: `y11` is a lower bound, `e11` an upper bound.
    TwoDecoyBound,
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct EstimateFlags: u8 {
        const Y11_CLAMPED = 1;
        const E11_CLAMPED = 1 << 1;
        /// The yield bound is zero; nothing can be distilled from this point.
        const NO_CERTIFIED_SIGNAL = 1 << 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonEstimates {
    pub y11: Probability,
    pub e11: Probability,
    pub q11_zz: Probability,
    pub mode: EstimateMode,
    pub flags: EstimateFlags,
}

/// Single-photon values in the infinite-decoy limit.
pub fn asymptotic_estimates(
    channel: &ChannelParams,
    distance_km: f64,
    mu: f64,
    nu: f64,
) -> Result<SinglePhotonEstimates> {
    let arms = arm_transmittance(channel, distance_km)?;
    let truth = single_photon_truth(mu, nu, &arms, channel)?;
    Ok(SinglePhotonEstimates {
        y11: truth.y11,
        e11: truth.e11,
        q11_zz: truth.q11_zz,
        mode: EstimateMode::Exact,
        flags: EstimateFlags::empty(),
    })
}

/// Two-decoy estimates: `y11` bounds the Z-basis yield, `q11_zz` the signal's
/// single-photon Z gain, `e11` the X-basis phase error.
///
/// A vanishing X-basis yield bound is not an error here; it sets
/// `NO_CERTIFIED_SIGNAL` and reports `e11 = 1/2`.
pub fn two_decoy_estimates(
    stats: &PairStatistics,
    intensities: &IntensitySet,
) -> Result<SinglePhotonEstimates> {
    let mut flags = EstimateFlags::empty();
    let y_zz = y11_lower_two_decoy(stats, intensities, Basis::Z)?;
    let y_xx = y11_lower_two_decoy(stats, intensities, Basis::X)?;
    if y_zz.clamped || y_xx.clamped {
        flags |= EstimateFlags::Y11_CLAMPED;
    }
    let e11 = if y_xx.value.value() > 0.0 {
        let b = e11_upper_two_decoy(stats, intensities, y_xx.value)?;
        if b.clamped {
            flags |= EstimateFlags::E11_CLAMPED;
        }
        b.value
    } else {
        flags |= EstimateFlags::NO_CERTIFIED_SIGNAL;
        Probability::HALF
    };
    if y_zz.value.value() <= 0.0 {
        flags |= EstimateFlags::NO_CERTIFIED_SIGNAL;
    }
    let mu = intensities.signal();
    let q11 = mu * mu * (-2.0 * mu).exp() * y_zz.value.value();
    Ok(SinglePhotonEstimates {
        y11: y_zz.value,
        e11,
        q11_zz: Probability::saturating(q11),
        mode: EstimateMode::TwoDecoyBound,
        flags,
    })
}
