//! Pulse-level Monte Carlo of the relay, used as an independent check of the
//! closed-form model.
//!
//! Each trial draws a uniform relative phase between the two phase-randomized
//! coherent pulses. Conditioned on that phase the fields after the 50/50 beam
//! splitter and polarizing splitters are coherent, so each detector sees an
//! independent Poisson photon number. Detectors are threshold detectors with
//! independent dark counts. Misalignment flips the decoded bit relation of an
//! announced event with probability `e_d`.
//!
//! Detector layout: D1/D2 are H/V behind output port c, D3/D4 are H/V behind
//! output port d.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decoy::{IntensitySet, PairStatistics};
use crate::error::{Error, Result};
use crate::model::{
    arm_transmittance, gain_qber, ArmEfficiencies, Basis, BasisStatistics, ChannelParams,
};
use crate::numerics::Probability;

/// Trials per random stream.
pub const BLOCK_TRIALS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsePairSpec {
    pub intensity_a: f64,
    pub intensity_b: f64,
    pub basis_a: Basis,
    pub basis_b: Basis,
    pub bit_a: bool,
    pub bit_b: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Announcement {
    PsiPlus,
    PsiMinus,
    Failure,
}

impl Announcement {
    /// `psi-` for exactly {D1, D4} or {D2, D3}; `psi+` for exactly {D1, D2} or
    /// {D3, D4}; anything else fails.
    pub fn from_clicks(fired: [bool; 4]) -> Self {
        match fired {
            [true, false, false, true] | [false, true, true, false] => Announcement::PsiMinus,
            [true, true, false, false] | [false, false, true, true] => Announcement::PsiPlus,
            _ => Announcement::Failure,
        }
    }

    pub fn is_success(self) -> bool {
        self != Announcement::Failure
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickRecord {
    /// D1..D4.
    pub fired: [bool; 4],
    pub announcement: Announcement,
    /// Misalignment flipped the bit relation of this event.
    pub misaligned: bool,
}

impl ClickRecord {
    /// Whether Bob's post-processed bit disagrees with Alice's, for announced
    /// events in matched bases. Bob flips his bit on `psi-`, and on `psi+` in Z.
    pub fn sifted_error(&self, spec: &PulsePairSpec) -> Option<bool> {
        if !self.announcement.is_success() || spec.basis_a != spec.basis_b {
            return None;
        }
        let flip = match (spec.basis_b, self.announcement) {
            (Basis::Z, _) => true,
            (Basis::X, Announcement::PsiMinus) => true,
            (Basis::X, _) => false,
        };
        let bob = spec.bit_b ^ flip;
        Some((bob != spec.bit_a) ^ self.misaligned)
    }
}

/// (H, V) amplitude components of a BB84 polarization.
fn polarization(basis: Basis, bit: bool) -> (f64, f64) {
    match (basis, bit) {
        (Basis::Z, false) => (1.0, 0.0),
        (Basis::Z, true) => (0.0, 1.0),
        (Basis::X, false) => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        (Basis::X, true) => (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    }
}

/// One pulse pair through both arms and the relay.
pub fn simulate_pulse_pair<R: Rng + ?Sized>(
    spec: &PulsePairSpec,
    arms: &ArmEfficiencies,
    params: &ChannelParams,
    rng: &mut R,
) -> ClickRecord {
    let amp_a = (spec.intensity_a * arms.eta_a.value()).sqrt();
    let amp_b = (spec.intensity_b * arms.eta_b.value()).sqrt();
    let (ah, av) = polarization(spec.basis_a, spec.bit_a);
    let (bh, bv) = polarization(spec.basis_b, spec.bit_b);
    let (ah, av) = (amp_a * ah, amp_a * av);
    let (bh, bv) = (amp_b * bh, amp_b * bv);

    let cos = (rng.random::<f64>() * TAU).cos();
    // |a + b e^{i theta}|^2 / 2 at port c, |a - b e^{i theta}|^2 / 2 at port d
    let mean = |a: f64, b: f64, sign: f64| 0.5 * (a * a + b * b + sign * 2.0 * a * b * cos);
    let means = [
        mean(ah, bh, 1.0),
        mean(av, bv, 1.0),
        mean(ah, bh, -1.0),
        mean(av, bv, -1.0),
    ];

    let p_d = params.p_d.value();
    let mut fired = [false; 4];
    for (slot, m) in fired.iter_mut().zip(means) {
        let photon = rng.random::<f64>() < -(-m.max(0.0)).exp_m1();
        let dark = rng.random::<f64>() < p_d;
        *slot = photon || dark;
    }
    let announcement = Announcement::from_clicks(fired);
    let misaligned = rng.random::<f64>() < params.e_d.value();
    ClickRecord {
        fired,
        announcement,
        misaligned,
    }
}

/// Which bases the two parties use in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisSelection {
    /// Both always use this basis.
    Matched(Basis),
    /// Each party picks Z or X independently and uniformly.
    Uniform,
}

/// Intensities and basis choice of a batch of trials; bits are always uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialDistribution {
    pub intensity_a: f64,
    pub intensity_b: f64,
    pub bases: BasisSelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BasisCounts {
    pub trials: u64,
    /// Announced events.
    pub successes: u64,
    /// Sifted errors among announced events (matched bases only).
    pub errors: u64,
}

impl BasisCounts {
    pub fn gain(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Error rate among announced events; `1/2` when nothing was announced.
    pub fn qber(&self) -> f64 {
        if self.successes == 0 {
            0.5
        } else {
            self.errors as f64 / self.successes as f64
        }
    }

    pub fn gain_stderr(&self) -> f64 {
        stderr(self.gain(), self.trials)
    }

    pub fn qber_stderr(&self) -> f64 {
        stderr(self.qber(), self.successes)
    }

    pub fn to_basis_statistics(&self) -> BasisStatistics {
        BasisStatistics::new(
            Probability::saturating(self.gain()),
            Probability::saturating(self.qber()),
        )
    }

    fn merge(self, other: BasisCounts) -> BasisCounts {
        BasisCounts {
            trials: self.trials + other.trials,
            successes: self.successes + other.successes,
            errors: self.errors + other.errors,
        }
    }
}

/// `sqrt(p (1 - p) / n)`, zero for `n = 0`.
pub fn stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Counts per (Alice basis, Bob basis).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmpiricalStatistics {
    counts: [[BasisCounts; 2]; 2],
}

impl EmpiricalStatistics {
    pub fn get(&self, basis_a: Basis, basis_b: Basis) -> BasisCounts {
        self.counts[basis_a.index()][basis_b.index()]
    }

    pub fn matched(&self, basis: Basis) -> BasisCounts {
        self.get(basis, basis)
    }

    pub fn total_trials(&self) -> u64 {
        self.counts.iter().flatten().map(|c| c.trials).sum()
    }

    fn record(&mut self, spec: &PulsePairSpec, rec: &ClickRecord) {
        let c = &mut self.counts[spec.basis_a.index()][spec.basis_b.index()];
        c.trials += 1;
        if rec.announcement.is_success() {
            c.successes += 1;
            if rec.sifted_error(spec) == Some(true) {
                c.errors += 1;
            }
        }
    }

    fn merge(mut self, other: EmpiricalStatistics) -> EmpiricalStatistics {
        for a in 0..2 {
            for b in 0..2 {
                self.counts[a][b] = self.counts[a][b].merge(other.counts[a][b]);
            }
        }
        self
    }
}

/// Random stream for block `block` of `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

fn random_basis<R: Rng + ?Sized>(rng: &mut R) -> Basis {
    if rng.random::<bool>() {
        Basis::X
    } else {
        Basis::Z
    }
}

fn run_block(
    dist: &TrialDistribution,
    trials: u64,
    arms: &ArmEfficiencies,
    params: &ChannelParams,
    mut rng: ChaCha8Rng,
) -> EmpiricalStatistics {
    let mut stats = EmpiricalStatistics::default();
    for _ in 0..trials {
        let (basis_a, basis_b) = match dist.bases {
            BasisSelection::Matched(b) => (b, b),
            BasisSelection::Uniform => (random_basis(&mut rng), random_basis(&mut rng)),
        };
        let spec = PulsePairSpec {
            intensity_a: dist.intensity_a,
            intensity_b: dist.intensity_b,
            basis_a,
            basis_b,
            bit_a: rng.random(),
            bit_b: rng.random(),
        };
        let rec = simulate_pulse_pair(&spec, arms, params, &mut rng);
        stats.record(&spec, &rec);
    }
    stats
}

/// Runs `n_trials` pulse pairs split into blocks of [`BLOCK_TRIALS`], each
/// with its own stream derived from `(seed, block index)`. Blocks run in
/// parallel; the result depends only on the inputs.
pub fn estimate_statistics(
    dist: &TrialDistribution,
    n_trials: u64,
    arms: &ArmEfficiencies,
    params: &ChannelParams,
    seed: u64,
) -> Result<EmpiricalStatistics> {
    if n_trials == 0 {
        return Err(Error::domain("n_trials", 0.0, "need at least one trial"));
    }
    for (name, v) in [
        ("intensity_a", dist.intensity_a),
        ("intensity_b", dist.intensity_b),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::domain(
                name,
                v,
                "intensity must be finite and non-negative",
            ));
        }
    }
    let blocks = n_trials.div_ceil(BLOCK_TRIALS);
    Ok((0..blocks)
        .into_par_iter()
        .map(|block| {
            let start = block * BLOCK_TRIALS;
            let trials = BLOCK_TRIALS.min(n_trials - start);
            run_block(dist, trials, arms, params, block_rng(seed, block))
        })
        .reduce(EmpiricalStatistics::default, EmpiricalStatistics::merge))
}

/// SplitMix64 finalizer, used to derive independent per-cell seeds.
fn mix_seed(seed: u64, cell: u64) -> u64 {
    let mut z = seed ^ cell.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulated statistics table: `n_per_cell` trials for each of the nine
/// intensity pairs in each matched basis.
pub fn empirical_pair_statistics(
    channel: &ChannelParams,
    distance_km: f64,
    intensities: &IntensitySet,
    n_per_cell: u64,
    seed: u64,
) -> Result<PairStatistics> {
    intensities.validate()?;
    let arms = arm_transmittance(channel, distance_km)?;
    let levels = intensities.levels();
    PairStatistics::from_fn(|basis, i, j| {
        let cell = (basis.index() * 9 + i * 3 + j) as u64;
        let dist = TrialDistribution {
            intensity_a: levels[i],
            intensity_b: levels[j],
            bases: BasisSelection::Matched(basis),
        };
        let stats = estimate_statistics(&dist, n_per_cell, &arms, channel, mix_seed(seed, cell))?;
        Ok(stats.matched(basis).to_basis_statistics())
    })
}

/// Model-vs-simulation comparison at one distance and basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationRow {
    pub distance_km: f64,
    pub basis: Basis,
    pub model_gain: f64,
    pub gain: f64,
    pub gain_sigma: f64,
    pub model_qber: f64,
    pub qber: f64,
    pub qber_sigma: f64,
    pub successes: u64,
    pub pass: bool,
}

impl ValidationRow {
    pub fn gain_z(&self) -> f64 {
        z_score(self.gain, self.model_gain, self.gain_sigma)
    }

    pub fn qber_z(&self) -> f64 {
        z_score(self.qber, self.model_qber, self.qber_sigma)
    }
}

fn z_score(x: f64, mean: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        (x - mean) / sigma
    } else if x == mean {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Distances of the canonical cross-validation configurations.
pub const CANONICAL_DISTANCES_KM: [f64; 3] = [0.0, 50.0, 100.0];

/// Allowed deviation, in standard errors.
pub const AGREEMENT_SIGMAS: f64 = 3.0;

/// Simulates `n_trials` pairs at `mu = nu` in each matched basis at the
/// canonical distances and checks gain and error rate against the closed forms
/// of `model` (normally the same channel as `channel`). Standard errors use the
/// model values; the error-rate check is skipped when nothing was announced.
pub fn cross_validate(
    channel: &ChannelParams,
    model: &ChannelParams,
    mu: f64,
    n_trials: u64,
    seed: u64,
) -> Result<Vec<ValidationRow>> {
    let mut rows = Vec::new();
    for (k, &l) in CANONICAL_DISTANCES_KM.iter().enumerate() {
        let arms = arm_transmittance(channel, l)?;
        for basis in Basis::ALL {
            let dist = TrialDistribution {
                intensity_a: mu,
                intensity_b: mu,
                bases: BasisSelection::Matched(basis),
            };
            let cell = (2 * k + basis.index()) as u64;
            let counts =
                estimate_statistics(&dist, n_trials, &arms, channel, mix_seed(seed, cell))?
                    .matched(basis);
            let expect = gain_qber(basis, mu, mu, &arm_transmittance(model, l)?, model)?;
            let (mq, me) = (expect.gain.value(), expect.qber.value());
            let gain_sigma = stderr(mq, counts.trials);
            let qber_sigma = stderr(me, counts.successes);
            let gain_ok = (counts.gain() - mq).abs() <= AGREEMENT_SIGMAS * gain_sigma;
            let qber_ok = counts.successes == 0
                || (counts.qber() - me).abs() <= AGREEMENT_SIGMAS * qber_sigma;
            rows.push(ValidationRow {
                distance_km: l,
                basis,
                model_gain: mq,
                gain: counts.gain(),
                gain_sigma,
                model_qber: me,
                qber: counts.qber(),
                qber_sigma,
                successes: counts.successes,
                pass: gain_ok && qber_ok,
            });
        }
    }
    Ok(rows)
}
