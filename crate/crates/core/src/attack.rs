//! Dimension attack on an encoder whose output dimension is not fixed.
//!
//! If Alice's encoder may emit four mutually orthogonal states instead of BB84
//! qubits, the relay identifies her state exactly, measures Bob's photon in
//! Alice's basis and announces a Bell outcome drawn uniformly from the pair
//! that a genuine Bell measurement would produce. The announced statistics are
//! identical to the honest ones while the relay knows Alice's bit.
//!
//! Bell states: `phi± = (|00> ± |11>)/√2`, `psi± = (|01> ± |10>)/√2`, Alice's
//! qubit first.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Basis;

/// Normalization tolerance for states and distributions.
pub const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl QubitState {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(Error::domain(
                "|alpha|^2 + |beta|^2",
                norm,
                "state must be normalized",
            ));
        }
        Ok(QubitState { alpha, beta })
    }

    pub fn with_global_phase(self, phase: f64) -> Self {
        let w = Complex64::from_polar(1.0, phase);
        QubitState {
            alpha: self.alpha * w,
            beta: self.beta * w,
        }
    }

    fn inner(&self, other: &QubitState) -> Complex64 {
        self.alpha.conj() * other.alpha + self.beta.conj() * other.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bb84State {
    Zero,
    One,
    Plus,
    Minus,
}

impl Bb84State {
    pub const ALL: [Bb84State; 4] = [
        Bb84State::Zero,
        Bb84State::One,
        Bb84State::Plus,
        Bb84State::Minus,
    ];

    pub fn basis(self) -> Basis {
        match self {
            Bb84State::Zero | Bb84State::One => Basis::Z,
            Bb84State::Plus | Bb84State::Minus => Basis::X,
        }
    }

    pub fn bit(self) -> bool {
        matches!(self, Bb84State::One | Bb84State::Minus)
    }

    pub fn from_basis_bit(basis: Basis, bit: bool) -> Self {
        match (basis, bit) {
            (Basis::Z, false) => Bb84State::Zero,
            (Basis::Z, true) => Bb84State::One,
            (Basis::X, false) => Bb84State::Plus,
            (Basis::X, true) => Bb84State::Minus,
        }
    }

    pub fn qubit(self) -> QubitState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = match self {
            Bb84State::Zero => (1.0, 0.0),
            Bb84State::One => (0.0, 1.0),
            Bb84State::Plus => (h, h),
            Bb84State::Minus => (h, -h),
        };
        QubitState {
            alpha: Complex64::new(a, 0.0),
            beta: Complex64::new(b, 0.0),
        }
    }

    pub fn ket(self) -> &'static str {
        match self {
            Bb84State::Zero => "|0>",
            Bb84State::One => "|1>",
            Bb84State::Plus => "|+>",
            Bb84State::Minus => "|->",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];

    /// Amplitudes on |00>, |01>, |10>, |11>.
    pub fn amplitudes(self) -> [Complex64; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |v: f64| Complex64::new(v, 0.0);
        match self {
            BellState::PhiPlus => [c(h), c(0.0), c(0.0), c(h)],
            BellState::PhiMinus => [c(h), c(0.0), c(0.0), c(-h)],
            BellState::PsiPlus => [c(0.0), c(h), c(h), c(0.0)],
            BellState::PsiMinus => [c(0.0), c(h), c(-h), c(0.0)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BellState::PhiPlus => "phi+",
            BellState::PhiMinus => "phi-",
            BellState::PsiPlus => "psi+",
            BellState::PsiMinus => "psi-",
        }
    }
}

/// Probabilities of phi+, phi-, psi+, psi- (in that order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellOutcomeDistribution([f64; 4]);

impl BellOutcomeDistribution {
    pub fn new(probs: [f64; 4]) -> Result<Self> {
        if probs.iter().any(|p| !(*p >= -TOLERANCE)) {
            return Err(Error::InvalidDistribution(format!(
                "negative entry in {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(BellOutcomeDistribution(probs.map(|p| p.max(0.0))))
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.0
    }

    pub fn prob(&self, state: BellState) -> f64 {
        self.0[BellState::ALL.iter().position(|s| *s == state).unwrap()]
    }

    /// Half the L1 distance.
    pub fn total_variation(&self, other: &BellOutcomeDistribution) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(other.0)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Outcomes with non-zero probability.
    pub fn support(&self) -> Vec<BellState> {
        BellState::ALL
            .into_iter()
            .filter(|s| self.prob(*s) > TOLERANCE)
            .collect()
    }
}

/// Outcome distribution of a complete Bell measurement on `a ⊗ b`.
pub fn genuine_bsm_distribution(a: &QubitState, b: &QubitState) -> Result<BellOutcomeDistribution> {
    let a = QubitState::new(a.alpha, a.beta)?;
    let b = QubitState::new(b.alpha, b.beta)?;
    let product = [
        a.alpha * b.alpha,
        a.alpha * b.beta,
        a.beta * b.alpha,
        a.beta * b.beta,
    ];
    let probs = BellState::ALL.map(|bell| {
        bell.amplitudes()
            .iter()
            .zip(product)
            .map(|(x, y)| x.conj() * y)
            .sum::<Complex64>()
            .norm_sqr()
    });
    BellOutcomeDistribution::new(probs)
}

/// Relay behaviour under the attack. `split` is the probability given to the
/// first outcome of each Bell pair; the faithful attack uses 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackStrategy {
    pub split: f64,
}

impl Default for AttackStrategy {
    fn default() -> Self {
        AttackStrategy { split: 0.5 }
    }
}

/// The Bell pair announced when Bob's outcome matches (`same`) or opposes
/// Alice's state in her basis. Z: matching -> {phi+, phi-}, opposite ->
/// {psi+, psi-}. X: matching -> {phi+, psi+}, opposite -> {phi-, psi-}.
pub fn announced_pair(basis: Basis, same: bool) -> [BellState; 2] {
    use BellState::*;
    match (basis, same) {
        (Basis::Z, true) => [PhiPlus, PhiMinus],
        (Basis::Z, false) => [PsiPlus, PsiMinus],
        (Basis::X, true) => [PhiPlus, PsiPlus],
        (Basis::X, false) => [PhiMinus, PsiMinus],
    }
}

/// Probability that Bob's photon, measured in Alice's basis, agrees with
/// Alice's state (`M = +`), and disagrees (`M = -`).
pub fn relay_measurement(alice: Bb84State, bob: &QubitState) -> Result<(f64, f64)> {
    let bob = QubitState::new(bob.alpha, bob.beta)?;
    let same = alice.qubit().inner(&bob).norm_sqr();
    let opposite = Bb84State::from_basis_bit(alice.basis(), !alice.bit())
        .qubit()
        .inner(&bob)
        .norm_sqr();
    Ok((same, opposite))
}

pub fn attack_distribution(alice: Bb84State, bob: &QubitState) -> Result<BellOutcomeDistribution> {
    attack_distribution_with(alice, bob, AttackStrategy::default())
}

pub fn attack_distribution_with(
    alice: Bb84State,
    bob: &QubitState,
    strategy: AttackStrategy,
) -> Result<BellOutcomeDistribution> {
    let (same, opposite) = relay_measurement(alice, bob)?;
    let mut probs = [0.0; 4];
    for (weight, is_same) in [(same, true), (opposite, false)] {
        let [first, second] = announced_pair(alice.basis(), is_same);
        probs[index(first)] += weight * strategy.split;
        probs[index(second)] += weight * (1.0 - strategy.split);
    }
    BellOutcomeDistribution::new(probs)
}

fn index(state: BellState) -> usize {
    BellState::ALL.iter().position(|s| *s == state).unwrap()
}

/// Probability that the relay identifies Alice's state when her four states are
/// embedded as the four Bell states of a two-qubit space and the relay measures
/// in that same basis: the mean of `|<e_i|s_i>|^2`, which is 1 exactly when the
/// embedding is orthonormal.
pub fn embedding_discrimination_probability() -> f64 {
    let embed = |s: Bb84State| BellState::ALL[s as usize].amplitudes();
    let mut gram_error: f64 = 0.0;
    let mut success = 0.0;
    for s in Bb84State::ALL {
        for t in Bb84State::ALL {
            let overlap: Complex64 = embed(s)
                .iter()
                .zip(embed(t))
                .map(|(x, y)| x.conj() * y)
                .sum();
            if s == t {
                success += overlap.norm_sqr() / 4.0;
            } else {
                gram_error = gram_error.max(overlap.norm());
            }
        }
    }
    if gram_error > TOLERANCE {
        0.0
    } else {
        success
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackRow {
    pub alice: Bb84State,
    pub bob: Bb84State,
    pub genuine: BellOutcomeDistribution,
    pub attack: BellOutcomeDistribution,
    pub total_variation: f64,
    pub m_plus: f64,
    pub m_minus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub rows: Vec<AttackRow>,
    pub max_total_variation: f64,
    /// Probability the relay learns Alice's state.
    pub discrimination_probability: f64,
}

impl AttackReport {
    pub fn charlie_knows_alice_bit(&self) -> bool {
        (self.discrimination_probability - 1.0).abs() <= TOLERANCE
    }

    pub fn pass(&self) -> bool {
        self.max_total_variation <= TOLERANCE && self.charlie_knows_alice_bit()
    }
}

/// Compares genuine and attack distributions for all 16 BB84 input pairs.
pub fn attack_indistinguishability_report() -> AttackReport {
    attack_report_with(AttackStrategy::default())
}

pub fn attack_report_with(strategy: AttackStrategy) -> AttackReport {
    let mut rows = Vec::with_capacity(16);
    for alice in Bb84State::ALL {
        for bob in Bb84State::ALL {
            let b = bob.qubit();
            // BB84 states are normalized by construction
            let genuine = genuine_bsm_distribution(&alice.qubit(), &b).unwrap();
            let attack = attack_distribution_with(alice, &b, strategy).unwrap();
            let (m_plus, m_minus) = relay_measurement(alice, &b).unwrap();
            rows.push(AttackRow {
                alice,
                bob,
                total_variation: genuine.total_variation(&attack),
                genuine,
                attack,
                m_plus,
                m_minus,
            });
        }
    }
    let max_total_variation = rows.iter().map(|r| r.total_variation).fold(0.0, f64::max);
    AttackReport {
        rows,
        max_total_variation,
        discrimination_probability: embedding_discrimination_probability(),
    }
}

fn fraction(p: f64) -> String {
    for (v, s) in [
        (0.0, "0"),
        (0.25, "1/4"),
        (0.5, "1/2"),
        (0.75, "3/4"),
        (1.0, "1"),
    ] {
        if (p - v).abs() <= TOLERANCE {
            return s.to_string();
        }
    }
    format!("{p:.6}")
}

impl fmt::Display for AttackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<6} {:<6} {:<18} {:>6} {:>6} {:>10}",
            "Alice", "Bob", "Possible clicks", "M=+", "M=-", "TV"
        )?;
        for r in &self.rows {
            let support = r.genuine.support();
            let clicks = if support.len() == 4 {
                "All".to_string()
            } else {
                support
                    .iter()
                    .map(|s| s.name())
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            writeln!(
                f,
                "{:<6} {:<6} {:<18} {:>6} {:>6} {:>10.3e}",
                r.alice.ket(),
                r.bob.ket(),
                clicks,
                fraction(r.m_plus),
                fraction(r.m_minus),
                r.total_variation
            )?;
        }
        writeln!(f, "max total variation: {:.3e}", self.max_total_variation)?;
        writeln!(
            f,
            "relay identifies Alice's state with probability {}",
            fraction(self.discrimination_probability)
        )?;
        write!(f, "{}", if self.pass() { "PASS" } else { "FAIL" })
    }
}
