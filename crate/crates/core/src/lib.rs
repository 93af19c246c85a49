//! Simulation of the Kirchhoff-law-Johnson-noise (KLJN) key exchange.
//!
//! * [`noise`]: seeded Gaussian generators and mean-square estimates.
//! * [`channel`]: one wire loop, its analytic levels and the bit decision.
//! * [`eavesdropper`]: a passive observer of the wire and her leak statistics.
//! * [`keyex`]: key sessions built from repeated rounds, and the rate model.
//! * [`ber`]: Monte-Carlo error rates of the decision rules.
//! * [`stats`], [`rng`]: shared statistics and seed derivation.

pub mod ber;
pub mod channel;
pub mod eavesdropper;
mod error;
pub mod keyex;
pub mod noise;
pub mod rng;
pub mod stats;

pub use ber::{measure_ber, BerPoint, BerTable};
pub use channel::{
    decide_level, generator_variance, loop_samples, run_round, simulate_round, ChannelConfig,
    DecisionRule, LevelClass, RoundOptions, RoundRecord, WireTrace,
};
pub use eavesdropper::{
    leak_report, observe, BitCase, Eavesdropper, EveObservation, EveVerdict, LeakStats,
};
pub use error::{Error, Result};
pub use keyex::{
    key_rate, run_session, run_session_with, verify_keys, BitSchedule, BitString, KeyMaterial,
    LinkModel, SessionConfig, SessionOutcome, SessionStats,
};
pub use noise::{gen_noise, mean_square, MsEstimate, NoiseSpec};
