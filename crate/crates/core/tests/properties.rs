use kljn_core::eavesdropper::{run_leak_experiment, LeakExperiment};
use kljn_core::stats::binomial_test;
use kljn_core::{
    measure_ber, run_session, verify_keys, ChannelConfig, DecisionRule, SessionConfig,
};

fn error_rate(gamma: u32, rule: DecisionRule, trials: u64) -> f64 {
    let cfg = ChannelConfig::default().with_gamma(gamma).unwrap();
    measure_ber(&cfg, trials, 5)
        .unwrap()
        .iter()
        .find(|p| p.rule == rule)
        .unwrap()
        .error_rate
}

#[test]
fn single_statistic_error_rates_fall_strictly_with_gamma() {
    for rule in [DecisionRule::Voltage, DecisionRule::Current] {
        let e: Vec<f64> = [10, 50, 200]
            .iter()
            .map(|&g| error_rate(g, rule, 100_000))
            .collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{rule}: {e:?}");
    }
    // The combined rule is already error-free in 10^5 trials from gamma = 50 on.
    let c: Vec<f64> = [10, 50, 200]
        .iter()
        .map(|&g| error_rate(g, DecisionRule::Combined, 100_000))
        .collect();
    assert!(c[0] > c[1] && c[1] >= c[2], "{c:?}");
}

#[test]
fn error_rate_near_reference_values_at_gamma_10() {
    // Independent Monte-Carlo reference (10^5 trials): voltage and current
    // both near 0.145, combined near 0.007.
    let v = error_rate(10, DecisionRule::Voltage, 100_000);
    let c = error_rate(10, DecisionRule::Current, 100_000);
    let m = error_rate(10, DecisionRule::Combined, 100_000);
    assert!((v - 0.146).abs() < 0.006, "{v}");
    assert!((c - 0.145).abs() < 0.006, "{c}");
    assert!((m - 0.0072).abs() < 0.0015, "{m}");
}

#[test]
fn session_keys_agree_and_look_balanced() {
    let cfg = SessionConfig::new(ChannelConfig::default(), 4096, 1_000_000).unwrap();
    let out = run_session(&cfg, 12).unwrap();
    assert_eq!(out.alice_key.bits.len(), 4096);
    assert!(!out.alice_key.partial);
    assert!(verify_keys(&out.alice_key.bits, &out.bob_key.bits)
        .unwrap()
        .is_empty());
    let ones = out.alice_key.bits.count_ones() as u64;
    assert!(
        binomial_test(ones, 4096, 0.5).unwrap() > 0.01,
        "{ones} ones"
    );
}

#[test]
fn sessions_are_reproducible_from_the_seed() {
    let cfg = SessionConfig::new(ChannelConfig::default(), 256, 100_000).unwrap();
    let a = run_session(&cfg, 3).unwrap();
    let b = run_session(&cfg, 3).unwrap();
    let c = run_session(&cfg, 4).unwrap();
    assert_eq!(a.alice_key.bits, b.alice_key.bits);
    assert_eq!(a.stats, b.stats);
    assert_ne!(a.alice_key.bits, c.alice_key.bits);
}

#[test]
fn eve_reads_public_rounds_but_not_secure_ones() {
    let exp = LeakExperiment {
        rounds: 10_000,
        secure_only: false,
        calibration_rounds: 500,
    };
    let stats = run_leak_experiment(&ChannelConfig::default(), &exp, 8).unwrap();
    assert!(stats.public_accuracy.unwrap() >= 0.99, "{stats:?}");
    let (lo, hi) = (stats.ci_low.unwrap(), stats.ci_high.unwrap());
    assert!(lo <= 0.5 && 0.5 <= hi, "{stats:?}");
    assert_eq!(stats.n_rounds, 10_000);
}
