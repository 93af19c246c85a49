//! Passive eavesdropper on the public wire.
//!
//! Eve sees the wire voltage and loop current of every round and knows the
//! public channel parameters. She reads 00 and 11 rounds from the level
//! statistics like Alice and Bob do. For MID rounds she tries to tell 01
//! from 10 with the sign of the voltage-current cross product, offset by the
//! value it takes in the symmetric case. At equal temperatures that
//! statistic is symmetric about zero under both assignments, so her guesses
//! should be no better than a coin flip.
//!
//! The reported confidence is calibrated against a bank of reference rounds
//! Eve simulates herself for each MID assignment.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    decide_level, simulate_round, ChannelConfig, DecisionRule, LevelClass, RoundOptions,
    RoundRecord,
};
use crate::error::{usage, Result};
use crate::noise::MsEstimate;
use crate::rng::{derive_seed, round_seed, STREAM_EVE_CALIBRATION};
use crate::stats::{binomial_test, ks_two_sample, wilson_interval, KsOutcome};

pub const DEFAULT_CALIBRATION_ROUNDS: usize = 1000;

/// Eve's statistics of one round, computed from the public wire samples only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveObservation {
    pub ms_voltage: MsEstimate,
    pub ms_current: MsEstimate,
    /// Sample mean of wire voltage × loop current.
    pub mean_product: f64,
    pub round_index: u64,
}

/// Taps the retained wire trace of a round.
pub fn observe(round: &RoundRecord, round_index: u64) -> Result<EveObservation> {
    let wire = round
        .wire
        .as_ref()
        .ok_or_else(|| usage("round was simulated without wire sample retention"))?;
    observe_wire(&wire.voltage, &wire.current, round_index)
}

/// Builds an observation from raw wire samples.
pub fn observe_wire(voltage: &[f64], current: &[f64], round_index: u64) -> Result<EveObservation> {
    if voltage.is_empty() || voltage.len() != current.len() {
        return Err(usage(
            "wire voltage and current traces must be nonempty and equally long",
        ));
    }
    let n = voltage.len();
    let (mut sv, mut si, mut sp) = (0.0, 0.0, 0.0);
    for (v, i) in voltage.iter().zip(current) {
        sv += v * v;
        si += i * i;
        sp += v * i;
    }
    Ok(EveObservation {
        ms_voltage: MsEstimate {
            mean_square: sv / n as f64,
            n,
        },
        ms_current: MsEstimate {
            mean_square: si / n as f64,
            n,
        },
        mean_product: sp / n as f64,
        round_index,
    })
}

/// Resistor assignment `(alice, bob)` written as two bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BitCase {
    #[serde(rename = "00")]
    Case00,
    #[serde(rename = "01")]
    Case01,
    #[serde(rename = "10")]
    Case10,
    #[serde(rename = "11")]
    Case11,
}

impl BitCase {
    pub const ALL: [BitCase; 4] = [
        BitCase::Case00,
        BitCase::Case01,
        BitCase::Case10,
        BitCase::Case11,
    ];

    pub fn of_bits(alice: bool, bob: bool) -> BitCase {
        match (alice, bob) {
            (false, false) => BitCase::Case00,
            (false, true) => BitCase::Case01,
            (true, false) => BitCase::Case10,
            (true, true) => BitCase::Case11,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BitCase::Case00 => "00",
            BitCase::Case01 => "01",
            BitCase::Case10 => "10",
            BitCase::Case11 => "11",
        }
    }

    pub fn is_secure(self) -> bool {
        matches!(self, BitCase::Case01 | BitCase::Case10)
    }
}

impl fmt::Display for BitCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveVerdict {
    pub guessed_case: BitCase,
    /// Eve's probability that the guess is right, in [0, 1].
    pub confidence: f64,
}

/// Expected ⟨u·i⟩ in a MID round when both generators share one temperature.
///
/// ⟨u·i⟩ = (R_B·σ_A² − R_A·σ_B²)/(R_A+R_B)², which vanishes for σ² ∝ R.
pub fn symmetric_product_expectation(cfg: &ChannelConfig) -> f64 {
    let (ra, rb) = (cfg.r_low(), cfg.r_high());
    let scale = cfg.noise_scale();
    (rb * scale * ra - ra * scale * rb) / (ra + rb).powi(2)
}

/// Sign-conditioned hit counts of the MID statistic on reference rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calibration {
    /// Reference 01 rounds with positive / non-positive statistic.
    pub case01_positive: u64,
    pub case01_other: u64,
    pub case10_positive: u64,
    pub case10_other: u64,
}

impl Calibration {
    fn accuracy_given_sign(&self, positive: bool) -> f64 {
        // Guess 01 on positive, 10 otherwise; Laplace-smoothed hit rate.
        let (hit, miss) = if positive {
            (self.case01_positive, self.case10_positive)
        } else {
            (self.case10_other, self.case01_other)
        };
        (hit as f64 + 1.0) / ((hit + miss) as f64 + 2.0)
    }
}

/// Eve with her calibration bank for one channel configuration.
#[derive(Debug, Clone)]
pub struct Eavesdropper {
    cfg: ChannelConfig,
    calibration: Calibration,
}

impl Eavesdropper {
    /// Simulates `reference_rounds` rounds of each MID assignment to calibrate
    /// the confidence of 01-vs-10 guesses.
    pub fn new(cfg: ChannelConfig, reference_rounds: usize, seed: u64) -> Self {
        let base = derive_seed(seed, STREAM_EVE_CALIBRATION);
        let opts = RoundOptions {
            rule: DecisionRule::Combined,
            retain_wire: true,
        };
        let offset = symmetric_product_expectation(&cfg);
        let positives = |alice: bool, stream: u64| -> u64 {
            let base = derive_seed(base, stream);
            (0..reference_rounds as u64)
                .into_par_iter()
                .map(|i| {
                    let r = simulate_round(&cfg, alice, !alice, round_seed(base, i), opts);
                    let obs = observe(&r, i).expect("trace retained");
                    u64::from(obs.mean_product - offset > 0.0)
                })
                .sum()
        };
        let p01 = positives(false, 1);
        let p10 = positives(true, 2);
        let n = reference_rounds as u64;
        Eavesdropper {
            cfg,
            calibration: Calibration {
                case01_positive: p01,
                case01_other: n - p01,
                case10_positive: p10,
                case10_other: n - p10,
            },
        }
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn guess_case(&self, obs: &EveObservation) -> EveVerdict {
        let posterior = level_posterior(obs, &self.cfg);
        match decide_level(
            obs.ms_voltage,
            obs.ms_current,
            &self.cfg,
            DecisionRule::Combined,
        ) {
            LevelClass::Low => EveVerdict {
                guessed_case: BitCase::Case00,
                confidence: posterior[0],
            },
            LevelClass::High => EveVerdict {
                guessed_case: BitCase::Case11,
                confidence: posterior[2],
            },
            LevelClass::Mid => {
                let positive = obs.mean_product - symmetric_product_expectation(&self.cfg) > 0.0;
                EveVerdict {
                    guessed_case: if positive {
                        BitCase::Case01
                    } else {
                        BitCase::Case10
                    },
                    confidence: (posterior[1] * self.calibration.accuracy_given_sign(positive))
                        .clamp(0.0, 1.0),
                }
            }
        }
    }
}

/// Posterior over LOW/MID/HIGH from Gaussian-approximate likelihoods of both
/// mean squares, with the 1/4, 1/2, 1/4 prior of uniform bits.
fn level_posterior(obs: &EveObservation, cfg: &ChannelConfig) -> [f64; 3] {
    let levels = cfg.levels();
    let ll = |x: f64, level: f64, n: usize| {
        let var = 2.0 * level * level / n as f64;
        -0.5 * var.ln() - (x - level).powi(2) / (2.0 * var)
    };
    let prior = [0.25f64, 0.5, 0.25];
    let logs: [f64; 3] = std::array::from_fn(|k| {
        prior[k].ln()
            + ll(
                obs.ms_voltage.mean_square,
                levels.voltage[k],
                obs.ms_voltage.n,
            )
            + ll(
                obs.ms_current.mean_square,
                levels.current[k],
                obs.ms_current.n,
            )
    });
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = logs.map(|l| (l - max).exp());
    let total: f64 = w.iter().sum();
    w.map(|x| x / total)
}

/// Aggregate accuracy of Eve's guesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakStats {
    /// Fraction of correct guesses per true case; null when the case never occurred.
    pub accuracy_by_case: BTreeMap<String, Option<f64>>,
    pub n_by_case: BTreeMap<String, u64>,
    /// Accuracy on 01/10 rounds; null when there were none.
    pub secure_accuracy: Option<f64>,
    /// Wilson 95% interval of `secure_accuracy`.
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Exact two-sided binomial p-value of the secure hits against 1/2.
    pub secure_p_value: Option<f64>,
    /// Accuracy on 00/11 rounds.
    pub public_accuracy: Option<f64>,
    pub n_rounds: u64,
}

pub fn leak_report(rounds: &[(RoundRecord, EveVerdict)]) -> Result<LeakStats> {
    if rounds.is_empty() {
        return Err(usage("leak report needs at least one round"));
    }
    let mut hits: BTreeMap<BitCase, (u64, u64)> =
        BitCase::ALL.iter().map(|&c| (c, (0, 0))).collect();
    for (record, verdict) in rounds {
        let truth = BitCase::of_bits(record.alice_bit, record.bob_bit);
        let e = hits.get_mut(&truth).expect("all cases present");
        e.0 += u64::from(verdict.guessed_case == truth);
        e.1 += 1;
    }
    let ratio = |(h, n): (u64, u64)| (n > 0).then(|| h as f64 / n as f64);
    let sum = |secure: bool| {
        hits.iter()
            .filter(|(c, _)| c.is_secure() == secure)
            .fold((0, 0), |acc, (_, &(h, n))| (acc.0 + h, acc.1 + n))
    };
    let secure = sum(true);
    let public = sum(false);
    let ci = if secure.1 > 0 {
        Some(wilson_interval(secure.0, secure.1, 0.95)?)
    } else {
        None
    };
    let secure_p_value = if secure.1 > 0 {
        Some(binomial_test(secure.0, secure.1, 0.5)?)
    } else {
        None
    };
    Ok(LeakStats {
        accuracy_by_case: hits
            .iter()
            .map(|(c, &v)| (c.label().to_string(), ratio(v)))
            .collect(),
        n_by_case: hits
            .iter()
            .map(|(c, &(_, n))| (c.label().to_string(), n))
            .collect(),
        secure_accuracy: ratio(secure),
        ci_low: ci.map(|i| i.low),
        ci_high: ci.map(|i| i.high),
        secure_p_value,
        public_accuracy: ratio(public),
        n_rounds: rounds.len() as u64,
    })
}

/// Parameters of a batch of observed rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakExperiment {
    pub rounds: u64,
    /// Draw only 01/10 rounds (alternating assignment by a fair bit).
    pub secure_only: bool,
    pub calibration_rounds: usize,
}

/// Simulates rounds, lets Eve guess each one, and summarizes her accuracy.
pub fn run_leak_experiment(
    cfg: &ChannelConfig,
    exp: &LeakExperiment,
    seed: u64,
) -> Result<LeakStats> {
    if exp.rounds == 0 {
        return Err(usage("leak experiment needs at least one round"));
    }
    let eve = Eavesdropper::new(*cfg, exp.calibration_rounds, seed);
    let opts = RoundOptions {
        rule: DecisionRule::Combined,
        retain_wire: true,
    };
    let pairs: Vec<(RoundRecord, EveVerdict)> = (0..exp.rounds)
        .into_par_iter()
        .map(|i| {
            let s = round_seed(seed, i);
            let (a, b) = if exp.secure_only {
                let a = s & 1 == 1;
                (a, !a)
            } else {
                (s & 1 == 1, s & 2 == 2)
            };
            let mut record = simulate_round(cfg, a, b, s, opts);
            let verdict = eve.guess_case(&observe(&record, i).expect("trace retained"));
            record.wire = None;
            (record, verdict)
        })
        .collect();
    leak_report(&pairs)
}

/// KS comparisons of the public wire between the 01 and 10 assignments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidSymmetry {
    pub samples_per_case: usize,
    pub voltage: KsOutcome,
    pub current: KsOutcome,
    pub product: KsOutcome,
}

impl MidSymmetry {
    pub fn any_rejects(&self, alpha: f64) -> bool {
        self.voltage.rejects(alpha) || self.current.rejects(alpha) || self.product.rejects(alpha)
    }
}

/// Collects `samples_per_case` wire samples from 01 rounds and from 10 rounds
/// and runs two-sample KS tests on voltage, current and their product.
pub fn mid_symmetry_test(
    cfg: &ChannelConfig,
    samples_per_case: usize,
    seed: u64,
) -> Result<MidSymmetry> {
    if samples_per_case == 0 {
        return Err(usage("symmetry test needs samples"));
    }
    let per_round = cfg.samples_per_bit();
    let rounds = samples_per_case.div_ceil(per_round) as u64;
    let opts = RoundOptions {
        rule: DecisionRule::Combined,
        retain_wire: true,
    };
    let collect = |alice: bool, stream: u64| {
        let base = derive_seed(seed, stream);
        let mut v = Vec::with_capacity(samples_per_case);
        let mut i = Vec::with_capacity(samples_per_case);
        for r in 0..rounds {
            let rec = simulate_round(cfg, alice, !alice, round_seed(base, r), opts);
            let wire = rec.wire.expect("trace retained");
            v.extend(wire.voltage);
            i.extend(wire.current);
        }
        v.truncate(samples_per_case);
        i.truncate(samples_per_case);
        let p: Vec<f64> = v.iter().zip(&i).map(|(a, b)| a * b).collect();
        (v, i, p)
    };
    let (v01, i01, p01) = collect(false, 1);
    let (v10, i10, p10) = collect(true, 2);
    Ok(MidSymmetry {
        samples_per_case,
        voltage: ks_two_sample(&v01, &v10)?,
        current: ks_two_sample(&i01, &i10)?,
        product: ks_two_sample(&p01, &p10)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::run_round;

    fn cfg(gamma: u32) -> ChannelConfig {
        ChannelConfig::default().with_gamma(gamma).unwrap()
    }

    fn retained(c: &ChannelConfig, a: bool, b: bool, seed: u64) -> RoundRecord {
        simulate_round(
            c,
            a,
            b,
            seed,
            RoundOptions {
                rule: DecisionRule::Combined,
                retain_wire: true,
            },
        )
    }

    #[test]
    fn observation_requires_retained_samples() {
        let r = run_round(&cfg(10), false, true, 1);
        assert!(matches!(observe(&r, 0), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn eve_sees_the_same_estimates_as_the_parties() {
        let c = cfg(50);
        for (s, (a, b)) in [(false, false), (false, true), (true, false), (true, true)]
            .into_iter()
            .enumerate()
        {
            let r = retained(&c, a, b, s as u64);
            let o = observe(&r, 7).unwrap();
            assert_eq!(o.ms_voltage, r.ms_voltage);
            assert_eq!(o.ms_current, r.ms_current);
            assert_eq!(o.round_index, 7);
        }
    }

    #[test]
    fn low_round_reads_near_analytic_level() {
        let c = cfg(10_000);
        let r = retained(&c, false, false, 4);
        let o = observe(&r, 0).unwrap();
        let low = c.levels().voltage[0];
        assert!((o.ms_voltage.mean_square / low - 1.0).abs() < 0.05);
        let eve = Eavesdropper::new(c, 10, 1);
        let v = eve.guess_case(&o);
        assert_eq!(v.guessed_case, BitCase::Case00);
        assert!(v.confidence > 0.99);
    }

    #[test]
    fn public_cases_from_on_level_observations() {
        let c = cfg(200);
        let eve = Eavesdropper::new(c, 10, 1);
        let l = c.levels();
        let obs = |k: usize| EveObservation {
            ms_voltage: MsEstimate {
                mean_square: l.voltage[k],
                n: 400,
            },
            ms_current: MsEstimate {
                mean_square: l.current[k],
                n: 400,
            },
            mean_product: 0.0,
            round_index: 0,
        };
        assert_eq!(eve.guess_case(&obs(0)).guessed_case, BitCase::Case00);
        assert_eq!(eve.guess_case(&obs(2)).guessed_case, BitCase::Case11);
        let mid = eve.guess_case(&obs(1));
        assert!(mid.guessed_case.is_secure());
        assert!((0.0..=1.0).contains(&mid.confidence));
    }

    #[test]
    fn secure_round_classified_mid() {
        let c = cfg(1000);
        let eve = Eavesdropper::new(c, 10, 2);
        for s in 0..20 {
            let r = retained(&c, s % 2 == 0, s % 2 == 1, s);
            assert!(eve
                .guess_case(&observe(&r, s).unwrap())
                .guessed_case
                .is_secure());
        }
    }

    #[test]
    fn symmetric_offset_is_zero_at_equal_temperature() {
        assert_eq!(symmetric_product_expectation(&cfg(10)), 0.0);
    }

    #[test]
    fn mid_confidence_is_near_coin_flip() {
        let eve = Eavesdropper::new(cfg(200), DEFAULT_CALIBRATION_ROUNDS, 3);
        let cal = eve.calibration();
        assert_eq!(cal.case01_positive + cal.case01_other, 1000);
        for positive in [true, false] {
            let acc = cal.accuracy_given_sign(positive);
            assert!((acc - 0.5).abs() < 0.06, "{acc}");
        }
    }

    #[test]
    fn leak_report_strata() {
        let c = cfg(200);
        let eve = Eavesdropper::new(c, 10, 0);
        let rounds: Vec<_> = (0..40u64)
            .map(|s| {
                let r = retained(&c, s % 2 == 0, s % 2 == 0, s);
                let v = eve.guess_case(&observe(&r, s).unwrap());
                (r, v)
            })
            .collect();
        let stats = leak_report(&rounds).unwrap();
        assert_eq!(stats.secure_accuracy, None);
        assert_eq!(stats.ci_low, None);
        assert_eq!(stats.accuracy_by_case["01"], None);
        assert_eq!(stats.n_by_case["00"], 20);
        assert_eq!(stats.public_accuracy, Some(1.0));
        assert_eq!(stats.n_rounds, 40);
        assert!(leak_report(&[]).is_err());
    }

    #[test]
    fn mixed_rounds_public_accuracy_at_gamma_200() {
        let exp = LeakExperiment {
            rounds: 10_000,
            secure_only: false,
            calibration_rounds: 200,
        };
        let stats = run_leak_experiment(&cfg(200), &exp, 17).unwrap();
        assert!(stats.public_accuracy.unwrap() >= 0.99);
        for case in ["00", "01", "10", "11"] {
            assert!(stats.n_by_case[case] > 2000, "{case}");
        }
    }
}
