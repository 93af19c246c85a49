//! Key sessions over one KLJN wire, plus the wire-length rate model.
//!
//! Each round both parties pick a uniform random bit. The round is kept only
//! when the measured level is MID; then Alice appends her own bit and Bob the
//! inverse of his, which is Alice's bit whenever the level was read correctly.
//! A round misread as MID therefore yields a mismatched bit, which
//! [`verify_keys`] exposes. There is no reconciliation or privacy
//! amplification.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ber::BerTable;
use crate::channel::{simulate_round, ChannelConfig, DecisionRule, LevelClass, RoundOptions};
use crate::error::{config, usage, Error, Result};
use crate::rng::{derive_seed, round_seed, stream_rng, STREAM_BIT_CHOICES};

pub const DEFAULT_KEY_LIFETIME_S: f64 = 300.0;

/// Ordered key bits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Hex, most significant bit first; a trailing partial byte is zero-padded.
    pub fn to_hex(&self) -> String {
        self.0
            .chunks(8)
            .map(|chunk| {
                let byte = chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i)));
                format!("{byte:02x}")
            })
            .collect()
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        BitString(bits)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(usage(format!("'{other}' is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString)
    }
}

/// Key bits with provenance. Carries no node identity.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyMaterial {
    pub bits: BitString,
    pub link_id: String,
    /// Simulation seconds at which the last round finished.
    pub created_at: f64,
    pub lifetime: f64,
    pub rounds_used: u64,
    /// Set when the round budget ran out before the target length.
    pub partial: bool,
}

/// Metadata of a [`KeyMaterial`] as written to reports (no key bits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyMetadata {
    pub link_id: String,
    pub length: usize,
    pub created_at: f64,
    pub lifetime: f64,
    pub rounds_used: u64,
    pub partial: bool,
}

impl KeyMaterial {
    pub fn metadata(&self) -> KeyMetadata {
        KeyMetadata {
            link_id: self.link_id.clone(),
            length: self.bits.len(),
            created_at: self.created_at,
            lifetime: self.lifetime,
            rounds_used: self.rounds_used,
            partial: self.partial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub channel: ChannelConfig,
    pub target_key_bits: usize,
    pub max_rounds: u64,
    pub decision_rule: DecisionRule,
    pub key_lifetime: f64,
    pub link_id: String,
}

impl SessionConfig {
    pub fn new(channel: ChannelConfig, target_key_bits: usize, max_rounds: u64) -> Result<Self> {
        let cfg = SessionConfig {
            channel,
            target_key_bits,
            max_rounds,
            decision_rule: DecisionRule::Combined,
            key_lifetime: DEFAULT_KEY_LIFETIME_S,
            link_id: "kljn-0".to_string(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_key_bits == 0 {
            return Err(config("target_key_bits must be at least 1"));
        }
        if self.max_rounds < self.target_key_bits as u64 {
            return Err(config(format!(
                "max_rounds ({}) must be at least target_key_bits ({})",
                self.max_rounds, self.target_key_bits
            )));
        }
        if !(self.key_lifetime.is_finite() && self.key_lifetime > 0.0) {
            return Err(config("key lifetime must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub rounds_total: u64,
    /// Rounds whose true bits differed.
    pub rounds_secure: u64,
    /// Rounds whose measured level differed from the true one.
    pub rounds_error: u64,
    /// Rounds the parties kept (measured MID).
    pub rounds_kept: u64,
    pub key_bits: usize,
    pub target_key_bits: usize,
    pub bit_period: f64,
    /// Key bits per second of wire time: bits / (rounds_total · τ).
    pub effective_key_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub alice_key: KeyMaterial,
    pub bob_key: KeyMaterial,
    pub stats: SessionStats,
}

/// Where each round's bit choices come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BitSchedule {
    /// Independent uniform bits from the session seed.
    Random,
    /// Fixed `(alice, bob)` choices, one per round; the session ends when they run out.
    Forced(Vec<(bool, bool)>),
}

pub fn run_session(cfg: &SessionConfig, seed: u64) -> Result<SessionOutcome> {
    run_session_with(cfg, &BitSchedule::Random, seed)
}

pub fn run_session_with(
    cfg: &SessionConfig,
    schedule: &BitSchedule,
    seed: u64,
) -> Result<SessionOutcome> {
    cfg.validate()?;
    let opts = RoundOptions {
        rule: cfg.decision_rule,
        retain_wire: false,
    };
    let mut bit_rng = stream_rng(derive_seed(seed, STREAM_BIT_CHOICES));
    let mut alice = BitString::new();
    let mut bob = BitString::new();
    let (mut total, mut secure, mut errors, mut kept) = (0u64, 0u64, 0u64, 0u64);

    while alice.len() < cfg.target_key_bits && total < cfg.max_rounds {
        let (a, b) = match schedule {
            BitSchedule::Random => (bit_rng.random::<bool>(), bit_rng.random::<bool>()),
            BitSchedule::Forced(list) => match list.get(total as usize) {
                Some(&pair) => pair,
                None => break,
            },
        };
        let record = simulate_round(&cfg.channel, a, b, round_seed(seed, total), opts);
        total += 1;
        secure += u64::from(record.secure);
        errors += u64::from(record.error);
        if record.decision == LevelClass::Mid {
            kept += 1;
            alice.push(a);
            bob.push(!b);
        }
    }

    let tau = cfg.channel.bit_period();
    let elapsed = total as f64 * tau;
    let partial = alice.len() < cfg.target_key_bits;
    let key = |bits: BitString| KeyMaterial {
        bits,
        link_id: cfg.link_id.clone(),
        created_at: elapsed,
        lifetime: cfg.key_lifetime,
        rounds_used: total,
        partial,
    };
    let key_bits = alice.len();
    Ok(SessionOutcome {
        alice_key: key(alice),
        bob_key: key(bob),
        stats: SessionStats {
            rounds_total: total,
            rounds_secure: secure,
            rounds_error: errors,
            rounds_kept: kept,
            key_bits,
            target_key_bits: cfg.target_key_bits,
            bit_period: tau,
            effective_key_rate: if total == 0 {
                0.0
            } else {
                key_bits as f64 / elapsed
            },
        },
    })
}

/// Indices at which the two keys differ.
pub fn verify_keys(alice: &BitString, bob: &BitString) -> Result<Vec<usize>> {
    if alice.len() != bob.len() {
        return Err(usage(format!(
            "keys differ in length ({} vs {})",
            alice.len(),
            bob.len()
        )));
    }
    Ok(alice
        .bits()
        .iter()
        .zip(bob.bits())
        .enumerate()
        .filter_map(|(i, (a, b))| (a != b).then_some(i))
        .collect())
}

/// Wire-length law for the usable noise bandwidth: B(L) = v_prop / (margin · L).
///
/// The margin keeps the shortest noise wavelength far longer than the wire,
/// which the quasi-static loop analysis requires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    /// Signal propagation speed in m/s.
    pub v_prop: f64,
    pub margin: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            v_prop: 2.0e8,
            margin: 100.0,
        }
    }
}

impl LinkModel {
    pub fn bandwidth(&self, wire_length: f64) -> Result<f64> {
        if !(wire_length.is_finite() && wire_length > 0.0) {
            return Err(usage(format!(
                "wire length must be positive, got {wire_length}"
            )));
        }
        if !(self.v_prop > 0.0 && self.margin > 0.0) {
            return Err(config("v_prop and margin must be positive"));
        }
        Ok(self.v_prop / (self.margin * wire_length))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRatePoint {
    pub wire_length: f64,
    pub b_kljn: f64,
    pub f_b: f64,
    pub error_rate: f64,
    /// f_B / 2: half the rounds are secure.
    pub ideal_key_rate: f64,
    pub key_rate: f64,
}

pub fn key_rate_breakdown(
    cfg: &ChannelConfig,
    wire_length: f64,
    link: &LinkModel,
    ber: &BerTable,
) -> Result<KeyRatePoint> {
    let b_kljn = link.bandwidth(wire_length)?;
    let f_b = b_kljn / cfg.gamma() as f64;
    let error_rate = ber.lookup(cfg.gamma());
    let ideal_key_rate = 0.5 * f_b;
    Ok(KeyRatePoint {
        wire_length,
        b_kljn,
        f_b,
        error_rate,
        ideal_key_rate,
        key_rate: ideal_key_rate * (1.0 - error_rate),
    })
}

/// Secure key bits per second on a wire of the given length.
pub fn key_rate(
    cfg: &ChannelConfig,
    wire_length: f64,
    link: &LinkModel,
    ber: &BerTable,
) -> Result<f64> {
    key_rate_breakdown(cfg, wire_length, link, ber).map(|p| p.key_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn session(gamma: u32, target: usize, max_rounds: u64) -> SessionConfig {
        SessionConfig::new(
            ChannelConfig::default().with_gamma(gamma).unwrap(),
            target,
            max_rounds,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let ch = ChannelConfig::default();
        assert!(SessionConfig::new(ch, 0, 10).is_err());
        assert!(SessionConfig::new(ch, 10, 9).is_err());
        assert!(SessionConfig::new(ch, 10, 10).is_ok());
    }

    #[test]
    fn forced_secure_round_uses_inverse_bit() {
        let cfg = session(1000, 1, 10);
        let out = run_session_with(&cfg, &BitSchedule::Forced(vec![(false, true)]), 3).unwrap();
        assert_eq!(out.alice_key.bits.to_string(), "0");
        assert_eq!(out.bob_key.bits.to_string(), "0");
        assert!(!out.alice_key.partial);
        assert_eq!(out.stats.rounds_secure, 1);
    }

    #[test]
    fn forced_insecure_rounds_are_discarded() {
        let cfg = session(1000, 4, 50);
        let out =
            run_session_with(&cfg, &BitSchedule::Forced(vec![(false, false); 50]), 3).unwrap();
        assert!(out.alice_key.bits.is_empty());
        assert_eq!(out.stats.rounds_secure, 0);
        assert_eq!(out.stats.rounds_total, 50);
        assert!(out.alice_key.partial && out.bob_key.partial);
        assert_eq!(out.stats.effective_key_rate, 0.0);
    }

    #[test]
    fn exhausted_budget_returns_flagged_partial_key() {
        let cfg = session(200, 100, 100);
        let out = run_session(&cfg, 11).unwrap();
        assert!(out.alice_key.partial);
        assert!(out.alice_key.bits.len() < 100);
        assert_eq!(out.alice_key.bits.len(), out.bob_key.bits.len());
        assert_eq!(out.stats.rounds_total, 100);
    }

    #[test]
    fn session_stats_accounting() {
        let cfg = session(200, 128, 10_000);
        let out = run_session(&cfg, 5).unwrap();
        let s = &out.stats;
        assert_eq!(s.key_bits, 128);
        assert!(s.rounds_secure <= s.rounds_total);
        assert_eq!(out.alice_key.rounds_used, s.rounds_total);
        let tau = cfg.channel.bit_period();
        assert!((s.effective_key_rate - 128.0 / (s.rounds_total as f64 * tau)).abs() < 1e-9);
        assert!((out.alice_key.created_at - s.rounds_total as f64 * tau).abs() < 1e-12);
        assert_eq!(out.alice_key.lifetime, DEFAULT_KEY_LIFETIME_S);
        assert_eq!(run_session(&cfg, 5).unwrap(), out);
    }

    #[test]
    fn verify_keys_cases() {
        let a: BitString = "0110".parse().unwrap();
        assert!(verify_keys(&a, &a).unwrap().is_empty());
        let x: BitString = "01".parse().unwrap();
        let y: BitString = "00".parse().unwrap();
        assert_eq!(verify_keys(&x, &y).unwrap(), vec![1]);
        assert!(verify_keys(&a, &x).is_err());
        assert!("012".parse::<BitString>().is_err());
    }

    #[test]
    fn hex_is_msb_first() {
        let k: BitString = "1000000011".parse().unwrap();
        assert_eq!(k.to_hex(), "80c0");
        assert_eq!(BitString::new().to_hex(), "");
    }

    #[test]
    fn worked_rate_example() {
        let cfg = ChannelConfig::default().with_gamma(200).unwrap();
        let p = key_rate_breakdown(
            &cfg,
            1000.0,
            &LinkModel::default(),
            &BerTable::ideal(DecisionRule::Combined),
        )
        .unwrap();
        // 2e8 / (100 * 1000) = 2 kHz; wavelength is then 100x the wire length.
        assert!((p.b_kljn - 2.0e3).abs() < 1e-9);
        assert!((p.f_b - 10.0).abs() < 1e-12);
        assert!((p.key_rate - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rate_discounts_errors_and_rejects_bad_lengths() {
        let cfg = ChannelConfig::default().with_gamma(200).unwrap();
        let ber = BerTable::from_points(DecisionRule::Voltage, vec![(200, 0.1)]).unwrap();
        let r = key_rate(&cfg, 1000.0, &LinkModel::default(), &ber).unwrap();
        assert!((r - 4.5).abs() < 1e-12);
        assert!(key_rate(&cfg, 0.0, &LinkModel::default(), &ber).is_err());
        assert!(key_rate(&cfg, -5.0, &LinkModel::default(), &ber).is_err());
    }

    #[test]
    fn huge_gamma_drives_rate_to_zero() {
        let ideal = BerTable::ideal(DecisionRule::Combined);
        let cfg = ChannelConfig::default().with_gamma(u32::MAX).unwrap();
        assert!(key_rate(&cfg, 1000.0, &LinkModel::default(), &ideal).unwrap() < 1e-3);
    }

    proptest! {
        #[test]
        fn rate_is_inverse_linear_and_monotone(len in 1.0f64..1e5, g in 2u32..5000) {
            let ideal = BerTable::ideal(DecisionRule::Combined);
            let cfg = ChannelConfig::default().with_gamma(g).unwrap();
            let link = LinkModel::default();
            let r1 = key_rate(&cfg, len, &link, &ideal).unwrap();
            let r2 = key_rate(&cfg, 2.0 * len, &link, &ideal).unwrap();
            prop_assert!((r1 / r2 - 2.0).abs() < 1e-9);
            let slower = key_rate(&cfg.with_gamma(g + 1).unwrap(), len, &link, &ideal).unwrap();
            prop_assert!(slower < r1);
        }

        #[test]
        fn error_free_rounds_give_equal_keys(seed in any::<u64>()) {
            // Rounds at large gamma are error-free, so every kept bit must agree.
            let cfg = session(2000, 16, 200);
            let out = run_session(&cfg, seed).unwrap();
            prop_assert_eq!(out.stats.rounds_error, 0);
            prop_assert_eq!(&out.alice_key.bits, &out.bob_key.bits);
        }
    }
}
