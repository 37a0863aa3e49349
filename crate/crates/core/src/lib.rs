//! Numerical toolkit for one-sided measurement-device-independent QKD with
//! weak coherent pulses: closed-form channel statistics, decoy-state
//! estimation, key rates with an uncharacterized-source trust model, intensity
//! optimization, a pulse-level Monte Carlo oracle, and an exact demonstration
//! of the dimension attack on an unrestricted encoder.

pub mod attack;
pub mod config;
pub mod decoy;
pub mod error;
pub mod keyrate;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod optimizer;
pub mod report;

pub use decoy::{IntensitySet, PairStatistics, SinglePhotonEstimates};
pub use error::{Error, Result};
pub use keyrate::{KeyRatePoint, Mode, TrustedSourceModel};
pub use model::{ArmEfficiencies, Basis, BasisStatistics, ChannelParams};
pub use numerics::Probability;
