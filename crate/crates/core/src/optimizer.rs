//! Signal-intensity optimization, maximum-distance search and rate-vs-distance
//! sweeps. Everything here is deterministic: coarse grids plus golden-section
//! refinement, bisection, and ordered parallel collection.

use rayon::prelude::*;

use crate::decoy::IntensitySet;
use crate::error::{Error, Result};
use crate::keyrate::{rate_at, KeyRatePoint, Mode, TrustedSourceModel};
use crate::model::ChannelParams;
use crate::numerics::Probability;

/// Weak decoy intensity used by the sweeps.
pub const DEFAULT_WEAK_DECOY: f64 = 0.01;

/// Number of points in the default coarse scan of an [`IntensityRange`].
pub const COARSE_POINTS: usize = 21;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Search interval for the signal intensity, scanned at `step` before
/// refinement, with the weak decoy held at `weak_decoy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub weak_decoy: f64,
}

impl IntensityRange {
    /// `[lo, hi]` with a 21-point coarse scan.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        Self::with_step(lo, hi, (hi - lo) / (COARSE_POINTS - 1) as f64)
    }

    pub fn with_step(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let r = IntensityRange {
            lo,
            hi,
            step,
            weak_decoy: DEFAULT_WEAK_DECOY,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_decoy(self, weak_decoy: f64) -> Result<Self> {
        let r = IntensityRange { weak_decoy, ..self };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.lo < self.hi && self.hi <= 2.0) {
            return Err(Error::domain(
                "intensity_range",
                self.lo,
                "need 0 < lo < hi <= 2",
            ));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::domain("step", self.step, "must be positive"));
        }
        if !(self.weak_decoy > 0.0 && self.weak_decoy.is_finite()) {
            return Err(Error::domain(
                "weak_decoy",
                self.weak_decoy,
                "must be positive",
            ));
        }
        Ok(())
    }

    /// Scan points from `lo` to `hi` inclusive.
    pub fn coarse_points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        let mut pts: Vec<f64> = (0..=n).map(|i| self.lo + i as f64 * self.step).collect();
        if let Some(last) = pts.last_mut() {
            if (self.hi - *last).abs() <= 1e-9 * self.step {
                *last = self.hi;
            } else {
                pts.push(self.hi);
            }
        }
        pts
    }
}

impl Default for IntensityRange {
    fn default() -> Self {
        IntensityRange {
            lo: 0.01,
            hi: 1.0,
            step: (1.0 - 0.01) / (COARSE_POINTS - 1) as f64,
            weak_decoy: DEFAULT_WEAK_DECOY,
        }
    }
}

/// Distances, trust levels and mode of a rate-vs-distance sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub distances_km: Vec<f64>,
    pub intensity_range: IntensityRange,
    pub eta_s_values: Vec<Probability>,
    pub mode: Mode,
    pub weak_decoy: f64,
}

impl SweepGrid {
    pub fn new(
        distances_km: Vec<f64>,
        intensity_range: IntensityRange,
        eta_s_values: Vec<Probability>,
        mode: Mode,
    ) -> Result<Self> {
        let grid = SweepGrid {
            distances_km,
            intensity_range,
            eta_s_values,
            mode,
            weak_decoy: DEFAULT_WEAK_DECOY,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.distances_km.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::domain(
                    "distances_km",
                    w[1],
                    "distances must be strictly increasing",
                ));
            }
        }
        if let Some(&d) = self.distances_km.first() {
            if !(d >= 0.0) {
                return Err(Error::domain("distances_km", d, "must be non-negative"));
            }
        }
        self.intensity_range.validate()
    }
}

/// `l_min, l_min + step, ...` up to and including `l_max` (within rounding).
pub fn distance_grid(l_min: f64, l_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(l_min >= 0.0 && l_max >= l_min && step > 0.0 && l_max.is_finite()) {
        return Err(Error::domain(
            "distance grid",
            step,
            "need 0 <= l_min <= l_max and step > 0",
        ));
    }
    let n = ((l_max - l_min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| l_min + i as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedIntensity {
    pub mu: f64,
    /// Floored rate at `mu`.
    pub rate: f64,
    /// Signed rate at `mu`.
    pub signed_rate: f64,
    /// No positive rate anywhere in the range.
    pub flat: bool,
}

/// Signed rate at signal intensity `mu`, or `-inf` where the intensity set is
/// invalid (signal not above the decoy).
fn signed_rate_for(
    channel: &ChannelParams,
    distance_km: f64,
    trust: TrustedSourceModel,
    mode: Mode,
    weak_decoy: f64,
    mu: f64,
) -> Result<f64> {
    match IntensitySet::new(weak_decoy, mu) {
        Ok(set) => Ok(rate_at(channel, distance_km, &set, trust, mode)?.signed_rate),
        Err(Error::DegenerateIntensities { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Maximizes the rate over `mu = nu` in `range`: coarse scan, then
/// golden-section refinement inside the bracket around the best scan point.
pub fn optimize_signal_intensity(
    channel: &ChannelParams,
    distance_km: f64,
    trust: TrustedSourceModel,
    mode: Mode,
    range: IntensityRange,
    tol: f64,
) -> Result<OptimizedIntensity> {
    range.validate()?;
    if !(tol > 0.0) {
        return Err(Error::domain("tol", tol, "must be positive"));
    }
    let objective =
        |mu: f64| signed_rate_for(channel, distance_km, trust, mode, range.weak_decoy, mu);

    let pts = range.coarse_points();
    let values = pts
        .iter()
        .map(|&mu| objective(mu))
        .collect::<Result<Vec<_>>>()?;
    let (best_idx, &best_val) =
        values
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| {
                if *v > *acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });

    let mut a = pts[best_idx.saturating_sub(1)];
    let mut b = pts[(best_idx + 1).min(pts.len() - 1)];
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = objective(d)?;
        }
    }
    let (mut mu, mut signed) = if fc >= fd { (c, fc) } else { (d, fd) };
    if best_val > signed {
        mu = pts[best_idx];
        signed = best_val;
    }
    Ok(OptimizedIntensity {
        mu,
        rate: signed.max(0.0),
        signed_rate: signed,
        flat: !(signed > 0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxDistance {
    pub distance_km: f64,
    /// The rate is not positive even at zero distance.
    pub no_positive_region: bool,
}

/// Upper end of the positive-rate region, located by bisection on the sign of
/// the rate to within `tol_km`. Assumes the rate falls monotonically with distance.
pub fn max_distance(
    channel: &ChannelParams,
    intensities: &IntensitySet,
    trust: TrustedSourceModel,
    mode: Mode,
    tol_km: f64,
) -> Result<MaxDistance> {
    if !(tol_km > 0.0) {
        return Err(Error::domain("tol_km", tol_km, "must be positive"));
    }
    let positive =
        |l: f64| -> Result<bool> { Ok(rate_at(channel, l, intensities, trust, mode)?.rate > 0.0) };
    if !positive(0.0)? {
        return Ok(MaxDistance {
            distance_km: 0.0,
            no_positive_region: true,
        });
    }
    let mut lo = 0.0;
    let mut hi = 64.0;
    while positive(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1.0e5 {
            return Err(Error::EstimationFailure(
                "rate stays positive beyond 100000 km",
            ));
        }
    }
    while hi - lo > tol_km {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MaxDistance {
        distance_km: lo,
        no_positive_region: false,
    })
}

/// One point per `(eta_s, distance)`; `signals[k]` is the signal intensity for
/// `grid.eta_s_values[k]`. Output order: trust levels in grid order, distances
/// ascending within each.
pub fn rate_vs_distance(
    channel: &ChannelParams,
    grid: &SweepGrid,
    signals: &[f64],
) -> Result<Vec<KeyRatePoint>> {
    grid.validate()?;
    if signals.len() != grid.eta_s_values.len() {
        return Err(Error::domain(
            "signals",
            signals.len() as f64,
            "need one signal intensity per eta_s value",
        ));
    }
    let curves = grid
        .eta_s_values
        .iter()
        .zip(signals)
        .map(|(&eta_s, &mu)| {
            Ok((
                TrustedSourceModel { eta_s },
                IntensitySet::new(grid.weak_decoy, mu)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = (0..curves.len())
        .flat_map(|k| grid.distances_km.iter().map(move |&l| (k, l)))
        .collect();
    jobs.par_iter()
        .map(|&(k, l)| {
            let (trust, set) = &curves[k];
            rate_at(channel, l, set, *trust, grid.mode)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_points_cover_range() {
        let r = IntensityRange::new(0.05, 1.05).unwrap();
        let pts = r.coarse_points();
        assert_eq!(pts.len(), COARSE_POINTS);
        assert_eq!(pts[0], 0.05);
        assert_eq!(*pts.last().unwrap(), 1.05);
        assert!(IntensityRange::new(0.0, 1.0).is_err());
        assert!(IntensityRange::new(0.5, 2.5).is_err());
    }

    #[test]
    fn distance_grid_includes_end() {
        let g = distance_grid(0.0, 200.0, 1.0).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g[200], 200.0);
        assert_eq!(distance_grid(0.0, 1.0, 0.3).unwrap().len(), 4);
        assert!(distance_grid(5.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn refinement_never_loses_to_scan() {
        let c = ChannelParams::default();
        let range = IntensityRange::default();
        for eta_s in [1.0, 0.9] {
            let t = TrustedSourceModel::new(eta_s).unwrap();
            let opt =
                optimize_signal_intensity(&c, 20.0, t, Mode::Asymptotic, range, 1e-4).unwrap();
            for mu in range.coarse_points() {
                let r =
                    signed_rate_for(&c, 20.0, t, Mode::Asymptotic, DEFAULT_WEAK_DECOY, mu).unwrap();
                assert!(opt.signed_rate >= r);
            }
        }
    }

    #[test]
    fn optimizer_matches_dense_scan() {
        let c = ChannelParams::default();
        let t = TrustedSourceModel::full();
        let opt = optimize_signal_intensity(
            &c,
            0.0,
            t,
            Mode::Asymptotic,
            IntensityRange::default(),
            1e-5,
        )
        .unwrap();
        let (best_mu, _) = (0..=9900)
            .map(|i| 0.01 + i as f64 * 1e-4)
            .map(|mu| {
                (
                    mu,
                    signed_rate_for(&c, 0.0, t, Mode::Asymptotic, DEFAULT_WEAK_DECOY, mu).unwrap(),
                )
            })
            .fold(
                (0.0, f64::NEG_INFINITY),
                |a, b| if b.1 > a.1 { b } else { a },
            );
        assert!((opt.mu - best_mu).abs() < 2e-4, "{} vs {}", opt.mu, best_mu);
    }

    #[test]
    fn flat_landscape_is_flagged() {
        let c = ChannelParams::new(0.4, 0.5, 3e-6, 1.16, 0.2).unwrap();
        let opt = optimize_signal_intensity(
            &c,
            0.0,
            TrustedSourceModel::full(),
            Mode::Asymptotic,
            IntensityRange::default(),
            1e-3,
        )
        .unwrap();
        assert!(opt.flat);
        assert_eq!(opt.rate, 0.0);
    }

    #[test]
    fn optimizer_is_deterministic() {
        let c = ChannelParams::default();
        let t = TrustedSourceModel::new(0.95).unwrap();
        let a =
            optimize_signal_intensity(&c, 30.0, t, Mode::TwoDecoy, IntensityRange::default(), 1e-4)
                .unwrap();
        let b =
            optimize_signal_intensity(&c, 30.0, t, Mode::TwoDecoy, IntensityRange::default(), 1e-4)
                .unwrap();
        assert_eq!(a.mu.to_bits(), b.mu.to_bits());
        assert_eq!(a.rate.to_bits(), b.rate.to_bits());
    }

    #[test]
    fn bisection_matches_linear_scan() {
        let c = ChannelParams::default();
        let cases = [
            (0.85, 0.05, Mode::Asymptotic),
            (0.85, 0.05, Mode::TwoDecoy),
            (0.9, 0.1, Mode::TwoDecoy),
        ];
        for (eta_s, mu, mode) in cases {
            let set = IntensitySet::new(DEFAULT_WEAK_DECOY, mu).unwrap();
            let t = TrustedSourceModel::new(eta_s).unwrap();
            let md = max_distance(&c, &set, t, mode, 0.01).unwrap();
            let mut scan = 0.0;
            let mut l = 0.0;
            while rate_at(&c, l, &set, t, mode).unwrap().rate > 0.0 {
                scan = l;
                l += 0.1;
            }
            assert!(
                md.distance_km >= scan - 0.01 && md.distance_km < scan + 0.1 + 0.01,
                "{eta_s} {mode}: bisection {} vs scan {scan}",
                md.distance_km
            );
        }
    }

    #[test]
    fn misaligned_channel_has_zero_reach() {
        let c = ChannelParams::new(0.4, 0.5, 3e-6, 1.16, 0.2).unwrap();
        let set = IntensitySet::new(0.01, 0.45).unwrap();
        let md = max_distance(&c, &set, TrustedSourceModel::full(), Mode::Asymptotic, 0.1).unwrap();
        assert_eq!(md.distance_km, 0.0);
        assert!(md.no_positive_region);
    }

    #[test]
    fn empty_grid_gives_no_points() {
        let grid = SweepGrid::new(
            vec![],
            IntensityRange::default(),
            vec![Probability::ONE],
            Mode::Asymptotic,
        )
        .unwrap();
        assert!(rate_vs_distance(&ChannelParams::default(), &grid, &[0.45])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn sweep_rejects_unsorted_distances() {
        let r = SweepGrid::new(
            vec![0.0, 10.0, 10.0],
            IntensityRange::default(),
            vec![Probability::ONE],
            Mode::Asymptotic,
        );
        assert!(r.is_err());
    }

    #[test]
    fn sweep_order_and_signal_mismatch() {
        let eta: Vec<Probability> = [1.0, 0.9]
            .iter()
            .map(|&v| Probability::new(v).unwrap())
            .collect();
        let grid = SweepGrid::new(
            vec![0.0, 50.0, 100.0],
            IntensityRange::default(),
            eta,
            Mode::Asymptotic,
        )
        .unwrap();
        let c = ChannelParams::default();
        assert!(rate_vs_distance(&c, &grid, &[0.45]).is_err());
        let pts = rate_vs_distance(&c, &grid, &[0.45, 0.1]).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0].eta_s.value(), 1.0);
        assert_eq!(pts[3].eta_s.value(), 0.9);
        assert_eq!(pts[4].distance_km, 50.0);
        assert_eq!(pts[4].mu, 0.1);
    }
}
