//! One KLJN wire between Alice and Bob.
//!
//! Each party connects either the low or the high resistor together with a
//! Johnson-like noise generator whose variance is proportional to the
//! resistance. The wire voltage and loop current follow from Kirchhoff's loop
//! law. Their mean squares over one bit period reveal the parallel and serial
//! resistance of the loop, which tells the parties (and anyone else) whether
//! the bits were 00, 11, or one of the indistinguishable 01/10 cases.
//!
//! Units are normalized: at `t_eff = 1` and the default bandwidth the product
//! `4·k·T·B` equals 1, so a generator's variance equals its resistance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Error, Result};
use crate::noise::{gen_noise, mean_square, MsEstimate, NoiseSpec};
use crate::rng::{derive_seed, STREAM_ALICE_NOISE, STREAM_BOB_NOISE};

/// Default channel noise bandwidth in hertz.
pub const DEFAULT_B_KLJN: f64 = 2.0e6;
/// Boltzmann constant in the simulator's normalized units.
pub const NORMALIZED_BOLTZMANN: f64 = 1.0 / (4.0 * DEFAULT_B_KLJN);
pub const DEFAULT_R_LOW: f64 = 1_000.0;
pub const DEFAULT_R_HIGH: f64 = 10_000.0;
pub const DEFAULT_GAMMA: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RawChannelConfig {
    r_low: f64,
    r_high: f64,
    t_eff: f64,
    b_kljn: f64,
    gamma: u32,
}

/// Resistor pair, temperature, bandwidth and statistics knob of a KLJN wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannelConfig", into = "RawChannelConfig")]
pub struct ChannelConfig {
    r_low: f64,
    r_high: f64,
    t_eff: f64,
    b_kljn: f64,
    gamma: u32,
}

impl TryFrom<RawChannelConfig> for ChannelConfig {
    type Error = Error;

    fn try_from(raw: RawChannelConfig) -> Result<Self> {
        ChannelConfig::new(raw.r_low, raw.r_high, raw.t_eff, raw.b_kljn, raw.gamma)
    }
}

impl From<ChannelConfig> for RawChannelConfig {
    fn from(c: ChannelConfig) -> Self {
        RawChannelConfig {
            r_low: c.r_low,
            r_high: c.r_high,
            t_eff: c.t_eff,
            b_kljn: c.b_kljn,
            gamma: c.gamma,
        }
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            r_low: DEFAULT_R_LOW,
            r_high: DEFAULT_R_HIGH,
            t_eff: 1.0,
            b_kljn: DEFAULT_B_KLJN,
            gamma: DEFAULT_GAMMA,
        }
    }
}

impl ChannelConfig {
    pub fn new(r_low: f64, r_high: f64, t_eff: f64, b_kljn: f64, gamma: u32) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(r_low) && positive(r_high) && r_low < r_high) {
            return Err(config(format!(
                "resistors must satisfy 0 < r_low < r_high, got r_low={r_low}, r_high={r_high}"
            )));
        }
        if !positive(t_eff) {
            return Err(config(format!("t_eff must be positive, got {t_eff}")));
        }
        if !positive(b_kljn) {
            return Err(config(format!("b_kljn must be positive, got {b_kljn}")));
        }
        if gamma < 2 {
            return Err(config(format!("gamma must be at least 2, got {gamma}")));
        }
        Ok(ChannelConfig {
            r_low,
            r_high,
            t_eff,
            b_kljn,
            gamma,
        })
    }

    pub fn with_gamma(self, gamma: u32) -> Result<Self> {
        ChannelConfig::new(self.r_low, self.r_high, self.t_eff, self.b_kljn, gamma)
    }

    pub fn with_t_eff(self, t_eff: f64) -> Result<Self> {
        ChannelConfig::new(self.r_low, self.r_high, t_eff, self.b_kljn, self.gamma)
    }

    pub fn with_b_kljn(self, b_kljn: f64) -> Result<Self> {
        ChannelConfig::new(self.r_low, self.r_high, self.t_eff, b_kljn, self.gamma)
    }

    pub fn r_low(&self) -> f64 {
        self.r_low
    }

    pub fn r_high(&self) -> f64 {
        self.r_high
    }

    pub fn t_eff(&self) -> f64 {
        self.t_eff
    }

    pub fn b_kljn(&self) -> f64 {
        self.b_kljn
    }

    pub fn gamma(&self) -> u32 {
        self.gamma
    }

    /// Samples per bit period: Nyquist sampling of `b_kljn` over `tau`.
    pub fn samples_per_bit(&self) -> usize {
        2 * self.gamma as usize
    }

    /// Effective bit bandwidth f_B = B_KLJN / γ.
    pub fn bit_rate(&self) -> f64 {
        self.b_kljn / self.gamma as f64
    }

    /// Bit-exchange period τ = 1 / f_B.
    pub fn bit_period(&self) -> f64 {
        self.gamma as f64 / self.b_kljn
    }

    /// 4·k·T·B, the variance per ohm of a generator.
    pub fn noise_scale(&self) -> f64 {
        4.0 * NORMALIZED_BOLTZMANN * self.t_eff * self.b_kljn
    }

    pub fn resistance(&self, bit: bool) -> f64 {
        if bit {
            self.r_high
        } else {
            self.r_low
        }
    }

    /// Expected mean squares of wire voltage and loop current for each level.
    pub fn levels(&self) -> AnalyticLevels {
        let scale = self.noise_scale();
        let pairs = [
            (self.r_low, self.r_low),
            (self.r_low, self.r_high),
            (self.r_high, self.r_high),
        ];
        let voltage = pairs.map(|(a, b)| scale * a * b / (a + b));
        let current = pairs.map(|(a, b)| scale / (a + b));
        AnalyticLevels { voltage, current }
    }
}

/// Analytic ⟨u²⟩ and ⟨i²⟩ indexed by [`LevelClass::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticLevels {
    pub voltage: [f64; 3],
    pub current: [f64; 3],
}

/// Generator variance 4·k·T·R·B for a resistor.
pub fn generator_variance(r: f64, cfg: &ChannelConfig) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(config(format!("resistance must be positive, got {r}")));
    }
    Ok(cfg.noise_scale() * r)
}

/// What the wire statistics can reveal: both low, one of each, both high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelClass {
    Low,
    Mid,
    High,
}

impl LevelClass {
    pub const ALL: [LevelClass; 3] = [LevelClass::Low, LevelClass::Mid, LevelClass::High];

    pub fn of_bits(alice: bool, bob: bool) -> LevelClass {
        match (alice, bob) {
            (false, false) => LevelClass::Low,
            (true, true) => LevelClass::High,
            _ => LevelClass::Mid,
        }
    }

    pub fn index(self) -> usize {
        match self {
            LevelClass::Low => 0,
            LevelClass::Mid => 1,
            LevelClass::High => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionRule {
    Voltage,
    Current,
    Combined,
}

impl DecisionRule {
    pub const ALL: [DecisionRule; 3] = [
        DecisionRule::Voltage,
        DecisionRule::Current,
        DecisionRule::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionRule::Voltage => "voltage",
            DecisionRule::Current => "current",
            DecisionRule::Combined => "combined",
        }
    }
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "voltage" => Ok(DecisionRule::Voltage),
            "current" => Ok(DecisionRule::Current),
            "combined" => Ok(DecisionRule::Combined),
            other => Err(usage(format!(
                "unknown decision rule '{other}' (expected voltage, current or combined)"
            ))),
        }
    }
}

/// Kirchhoff loop: wire voltage and loop current for each sample pair.
pub fn loop_samples(u_a: &[f64], u_b: &[f64], r_a: f64, r_b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if u_a.len() != u_b.len() {
        return Err(usage(format!(
            "generator sequences differ in length ({} vs {})",
            u_a.len(),
            u_b.len()
        )));
    }
    if !(r_a > 0.0 && r_b > 0.0) {
        return Err(usage("loop resistances must be positive"));
    }
    let total = r_a + r_b;
    let voltage = u_a
        .iter()
        .zip(u_b)
        .map(|(a, b)| (a * r_b + b * r_a) / total)
        .collect();
    let current = u_a.iter().zip(u_b).map(|(a, b)| (a - b) / total).collect();
    Ok((voltage, current))
}

/// Log density of a Gaussian approximating the mean square of `n` samples
/// with expectation `level`: variance 2·level²/n.
fn ms_log_likelihood(observed: f64, level: f64, n: usize) -> f64 {
    let var = 2.0 * level * level / n as f64;
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (observed - level).powi(2) / (2.0 * var)
}

/// Classifies one round's mean squares into a level.
pub fn decide_level(
    ms_v: MsEstimate,
    ms_i: MsEstimate,
    cfg: &ChannelConfig,
    rule: DecisionRule,
) -> LevelClass {
    let AnalyticLevels { voltage, current } = cfg.levels();
    match rule {
        DecisionRule::Voltage => {
            let x = ms_v.mean_square;
            if x < (voltage[0] * voltage[1]).sqrt() {
                LevelClass::Low
            } else if x < (voltage[1] * voltage[2]).sqrt() {
                LevelClass::Mid
            } else {
                LevelClass::High
            }
        }
        // Current levels fall as loop resistance rises: 00 carries the most.
        DecisionRule::Current => {
            let x = ms_i.mean_square;
            if x > (current[0] * current[1]).sqrt() {
                LevelClass::Low
            } else if x > (current[1] * current[2]).sqrt() {
                LevelClass::Mid
            } else {
                LevelClass::High
            }
        }
        DecisionRule::Combined => {
            let score = |c: LevelClass| {
                let k = c.index();
                ms_log_likelihood(ms_v.mean_square, voltage[k], ms_v.n)
                    + ms_log_likelihood(ms_i.mean_square, current[k], ms_i.n)
            };
            best_with_mid_ties(LevelClass::ALL.map(score))
        }
    }
}

/// Arg-max over `[low, mid, high]` scores; any tie involving MID goes to MID.
fn best_with_mid_ties(scores: [f64; 3]) -> LevelClass {
    let [low, mid, high] = scores;
    if low > mid && low >= high {
        LevelClass::Low
    } else if high > mid && high > low {
        LevelClass::High
    } else {
        LevelClass::Mid
    }
}

/// Public wire samples of one round: everything an observer of the line sees.
#[derive(Debug, Clone, PartialEq)]
pub struct WireTrace {
    pub voltage: Vec<f64>,
    pub current: Vec<f64>,
}

/// One bit-exchange period.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub alice_bit: bool,
    pub bob_bit: bool,
    pub ms_voltage: MsEstimate,
    pub ms_current: MsEstimate,
    pub decision: LevelClass,
    pub secure: bool,
    pub error: bool,
    /// Present only when the round ran with trace retention.
    pub wire: Option<WireTrace>,
}

impl RoundRecord {
    pub fn true_level(&self) -> LevelClass {
        LevelClass::of_bits(self.alice_bit, self.bob_bit)
    }

    /// Re-decides the level from the stored estimates under another rule.
    pub fn decision_under(&self, cfg: &ChannelConfig, rule: DecisionRule) -> LevelClass {
        decide_level(self.ms_voltage, self.ms_current, cfg, rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundOptions {
    pub rule: DecisionRule,
    pub retain_wire: bool,
}

impl Default for RoundOptions {
    fn default() -> Self {
        RoundOptions {
            rule: DecisionRule::Combined,
            retain_wire: false,
        }
    }
}

/// Runs one round with the combined decision rule and no trace retention.
pub fn run_round(cfg: &ChannelConfig, alice_bit: bool, bob_bit: bool, seed: u64) -> RoundRecord {
    simulate_round(cfg, alice_bit, bob_bit, seed, RoundOptions::default())
}

pub fn simulate_round(
    cfg: &ChannelConfig,
    alice_bit: bool,
    bob_bit: bool,
    seed: u64,
    opts: RoundOptions,
) -> RoundRecord {
    let n = cfg.samples_per_bit();
    let r_a = cfg.resistance(alice_bit);
    let r_b = cfg.resistance(bob_bit);
    let generator = |r: f64, stream: u64| {
        let spec = NoiseSpec {
            variance: cfg.noise_scale() * r,
            n_samples: n,
            seed: derive_seed(seed, stream),
        };
        gen_noise(&spec).expect("validated channel config yields a valid noise spec")
    };
    let u_a = generator(r_a, STREAM_ALICE_NOISE);
    let u_b = generator(r_b, STREAM_BOB_NOISE);
    let (voltage, current) =
        loop_samples(&u_a, &u_b, r_a, r_b).expect("generators have equal length");
    let ms_voltage = mean_square(&voltage).expect("n >= 4");
    let ms_current = mean_square(&current).expect("n >= 4");
    let decision = decide_level(ms_voltage, ms_current, cfg, opts.rule);
    RoundRecord {
        alice_bit,
        bob_bit,
        ms_voltage,
        ms_current,
        decision,
        secure: alice_bit != bob_bit,
        error: decision != LevelClass::of_bits(alice_bit, bob_bit),
        wire: opts.retain_wire.then_some(WireTrace { voltage, current }),
    }
}
