//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fail.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use kljn_core::eavesdropper::{mid_symmetry_test, run_leak_experiment, LeakExperiment};
use kljn_core::rng::derive_seed;
use kljn_core::{
    gen_noise, loop_samples, mean_square, measure_ber, run_session, ChannelConfig, DecisionRule,
    NoiseSpec, SessionConfig,
};
use kljn_vanet::scenario::Defaults;
use kljn_vanet::topology::{LinkSpec, NodeKind, NodeSpec, Technology};
use kljn_vanet::{build_topology, run_scenario, Scenario, ScenarioDoc, SimTime, Simulation};

/// Relative tolerance on the analytic mean-square levels.
const LEVEL_TOLERANCE: f64 = 0.01;
const LEVEL_SAMPLES: usize = 1_000_000;
/// Eve's 01-vs-10 accuracy must stay inside this band.
const COIN_FLIP_BAND: (f64, f64) = (0.48, 0.52);
const KS_ALPHA: f64 = 0.01;
const SECURE_FRACTION_BAND: (f64, f64) = (0.48, 0.52);
/// Exact 95% central interval of the mean rounds per 128-bit key over 10
/// sessions: the total is 1280 + NegBin(1280, 1/2) failures, whose interval
/// [2462, 2661] was computed with an independent oracle before the build.
const MEAN_ROUNDS_INTERVAL: (f64, f64) = (246.2, 266.1);
const BER_GAMMAS: [u32; 4] = [10, 50, 200, 1000];
const BER_TRIALS: u64 = 100_000;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(elapsed: Duration, budget: Option<Duration>) -> Result<(), String> {
    match budget {
        Some(b) if elapsed > b => Err(format!(
            "took {:.1} s, budget {} s",
            elapsed.as_secs_f64(),
            b.as_secs()
        )),
        _ => Ok(()),
    }
}

fn ac1_level_formula() -> Outcome {
    let cfg = ChannelConfig::default();
    let mut worst: f64 = 0.0;
    for (k, (a, b)) in [(false, false), (false, true), (true, false), (true, true)]
        .into_iter()
        .enumerate()
    {
        let (ra, rb) = (cfg.resistance(a), cfg.resistance(b));
        let noise = |r: f64, stream: u64| {
            let spec = NoiseSpec::new(
                cfg.noise_scale() * r,
                LEVEL_SAMPLES,
                derive_seed(17, stream),
            )
            .unwrap();
            gen_noise(&spec).unwrap()
        };
        let (u, i) = loop_samples(
            &noise(ra, 2 * k as u64),
            &noise(rb, 2 * k as u64 + 1),
            ra,
            rb,
        )
        .unwrap();
        let want_u = cfg.noise_scale() * ra * rb / (ra + rb);
        let want_i = cfg.noise_scale() / (ra + rb);
        let eu = (mean_square(&u).unwrap().mean_square / want_u - 1.0).abs();
        let ei = (mean_square(&i).unwrap().mean_square / want_i - 1.0).abs();
        worst = worst.max(eu).max(ei);
    }
    check(
        worst < LEVEL_TOLERANCE,
        format!("worst relative deviation {worst:.5} (tolerance {LEVEL_TOLERANCE})"),
    )
}

fn ac2_indistinguishability() -> Outcome {
    let cfg = ChannelConfig::default();
    let exp = LeakExperiment {
        rounds: 10_000,
        secure_only: true,
        calibration_rounds: 1000,
    };
    let stats = run_leak_experiment(&cfg, &exp, 2024).map_err(|e| e.to_string())?;
    let acc = stats.secure_accuracy.ok_or("no secure rounds")?;
    let sym = mid_symmetry_test(&cfg, 10_000 * cfg.samples_per_bit() / 2, 2024)
        .map_err(|e| e.to_string())?;
    let ok = (COIN_FLIP_BAND.0..=COIN_FLIP_BAND.1).contains(&acc) && !sym.any_rejects(KS_ALPHA);
    check(
        ok,
        format!(
            "accuracy {acc:.4}; KS p-values voltage {:.3}, current {:.3}, product {:.3}",
            sym.voltage.p_value, sym.current.p_value, sym.product.p_value
        ),
    )
}

fn ac3_secure_bit_economics() -> Outcome {
    let channel = ChannelConfig::default();
    // About 10^4 rounds in one session.
    let big = SessionConfig::new(channel, 5000, 1_000_000).map_err(|e| e.to_string())?;
    let s = run_session(&big, 31).map_err(|e| e.to_string())?.stats;
    let fraction = s.rounds_secure as f64 / s.rounds_total as f64;

    let cfg = SessionConfig::new(channel, 128, 100_000).map_err(|e| e.to_string())?;
    let mut total = 0u64;
    for seed in 0..10 {
        total += run_session(&cfg, 1000 + seed)
            .map_err(|e| e.to_string())?
            .stats
            .rounds_total;
    }
    let mean = total as f64 / 10.0;
    let ok = s.rounds_total >= 10_000
        && (SECURE_FRACTION_BAND.0..=SECURE_FRACTION_BAND.1).contains(&fraction)
        && (MEAN_ROUNDS_INTERVAL.0..=MEAN_ROUNDS_INTERVAL.1).contains(&mean);
    check(
        ok,
        format!(
            "secure fraction {fraction:.4} over {} rounds; mean rounds per 128-bit key {mean:.1} (interval {:?})",
            s.rounds_total, MEAN_ROUNDS_INTERVAL
        ),
    )
}

fn ac4_rate_constraint() -> Outcome {
    let base = ChannelConfig::default();
    let mut table = Vec::new();
    for g in BER_GAMMAS {
        let pts =
            measure_ber(&base.with_gamma(g).unwrap(), BER_TRIALS, 77).map_err(|e| e.to_string())?;
        table.push(pts);
    }
    let rate = |gi: usize, rule: DecisionRule| {
        table[gi]
            .iter()
            .find(|p| p.rule == rule)
            .expect("all rules")
            .error_rate
    };
    let mut problems = Vec::new();
    for rule in DecisionRule::ALL {
        for (gi, g) in BER_GAMMAS.iter().enumerate().skip(1) {
            if rate(gi, rule) > rate(gi - 1, rule) {
                problems.push(format!("{rule} rises at gamma {g}"));
            }
        }
    }
    for (gi, g) in BER_GAMMAS.iter().enumerate() {
        let best = rate(gi, DecisionRule::Voltage).min(rate(gi, DecisionRule::Current));
        let sigma = (best * (1.0 - best) / BER_TRIALS as f64).sqrt();
        if rate(gi, DecisionRule::Combined) > best + 2.0 * sigma {
            problems.push(format!("combined above min(voltage, current) at gamma {g}"));
        }
    }
    let summary: Vec<String> = BER_GAMMAS
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            format!(
                "g={g}: V {:.5} C {:.5} comb {:.5}",
                rate(gi, DecisionRule::Voltage),
                rate(gi, DecisionRule::Current),
                rate(gi, DecisionRule::Combined)
            )
        })
        .collect();
    let detail = format!(
        "{}{}",
        summary.join("; "),
        if problems.is_empty() {
            String::new()
        } else {
            format!(" [{}]", problems.join(", "))
        }
    );
    check(problems.is_empty(), detail)
}

fn gate_scenario(rate: u64) -> Scenario {
    let doc: ScenarioDoc = serde_json::from_value(serde_json::json!({
        "defaults": {"ber_trials": 0},
        "nodes": [
            {"id": "ca", "kind": "ca"},
            {"id": "rskp", "kind": "rskp", "ca": "ca"},
            {"id": "car", "kind": "vehicle", "ca": "ca"}
        ],
        "links": [
            {"id": "feed", "a": "ca", "b": "rskp", "technology": "wireline", "kljn": true, "wire_length_m": 1},
            {"id": "gate", "a": "rskp", "technology": "nfc", "nfc_rate_bps": rate, "nfc_range_m": 0.1}
        ]
    }))
    .unwrap();
    Scenario::from_doc(doc).unwrap()
}

fn ac5_nfc_arithmetic() -> Outcome {
    let mut got = Vec::new();
    for rate in [106_000, 424_000] {
        let s = gate_scenario(rate);
        let mut sim = Simulation::new(&s, 0).map_err(|e| e.to_string())?;
        let (ca, rskp, car) = (
            s.network.node("ca").unwrap(),
            s.network.node("rskp").unwrap(),
            s.network.node("car").unwrap(),
        );
        // 100 s at 5 kbit/s fills the buffer well past either demand.
        sim.replenish_link(ca, None, SimTime::from_secs(100.0).unwrap())
            .map_err(|e| e.to_string())?;
        got.push(sim.gate_handover(car, rskp, SimTime::from_secs(0.5).unwrap(), 0.05));
    }
    check(
        got == [53_000, 212_000],
        format!(
            "106 kbit/s x 0.5 s -> {}, 424 kbit/s x 0.5 s -> {}",
            got[0], got[1]
        ),
    )
}

fn ac6_conservation_and_determinism() -> Outcome {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/rush_hour_100.json");
    let s = Scenario::from_json_str(&std::fs::read_to_string(path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let a = run_scenario(&s, 100).map_err(|e| e.to_string())?;
    let b = run_scenario(&s, 100).map_err(|e| e.to_string())?;
    let every_event =
        a.timeline.iter().all(|e| e.totals.conserved()) && a.conservation_violations.is_empty();
    let identical = a.to_json() == b.to_json() && a.csv_string() == b.csv_string();
    check(
        every_event && identical && a.timeline.len() as u64 == a.events_processed,
        format!(
            "{} events, conserved at every event: {every_event}, byte-identical reruns: {identical}",
            a.events_processed
        ),
    )
}

fn ac7_link_legality() -> Outcome {
    let node = |id: &str, kind, ca: Option<&str>| NodeSpec {
        id: id.into(),
        kind,
        ca: ca.map(Into::into),
        region: None,
    };
    let nodes = vec![
        node("ca", NodeKind::Ca, None),
        node("rskp", NodeKind::Rskp, Some("ca")),
        node("car-1", NodeKind::Vehicle, Some("ca")),
        node("car-2", NodeKind::Vehicle, Some("ca")),
    ];
    let link = |id: &str, a: &str, b: Option<&str>, technology, kljn| LinkSpec {
        id: id.into(),
        a: a.into(),
        b: b.map(Into::into),
        technology,
        kljn,
        wire_length_m: (technology == Technology::Wireline).then_some(10.0),
        nfc_rate_bps: (technology == Technology::Nfc).then_some(106_000),
        nfc_range_m: (technology == Technology::Nfc).then_some(0.1),
        modulation: None,
    };
    let mut far_gate = link("gate-far", "rskp", None, Technology::Nfc, false);
    far_gate.nfc_range_m = Some(0.15);
    let cases = [
        (
            "kljn-on-wireless",
            link(
                "v2v-kljn",
                "car-1",
                Some("car-2"),
                Technology::Wireless,
                true,
            ),
        ),
        (
            "vehicle-minting-keys",
            link("car-wire", "ca", Some("car-1"), Technology::Wireline, true),
        ),
        ("nfc-beyond-10cm", far_gate),
    ];
    let legal = build_topology(
        &nodes,
        &[link("feed", "ca", Some("rskp"), Technology::Wireline, true)],
    )
    .is_ok();
    let mut failures = Vec::new();
    for (name, bad) in &cases {
        match build_topology(&nodes, std::slice::from_ref(bad)) {
            Ok(_) => failures.push(format!("{name} accepted")),
            Err(e) if !e.to_string().contains(&bad.id) => {
                failures.push(format!("{name}: '{e}' does not name {}", bad.id))
            }
            Err(_) => {}
        }
    }
    // The same rules hold for documents loaded from JSON.
    let loader_rejects = Scenario::from_doc(ScenarioDoc {
        defaults: Defaults::default(),
        nodes: nodes.clone(),
        links: vec![cases[0].1.clone()],
        events: vec![],
    })
    .is_err();
    check(
        legal && failures.is_empty() && loader_rejects,
        if failures.is_empty() {
            format!(
                "{} illegal topologies rejected with the offending link named",
                cases.len()
            )
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Option<u64>);
    let criteria: [Criterion; 7] = [
        ("AC1 level formula oracle", ac1_level_formula, Some(10)),
        (
            "AC2 second-law indistinguishability",
            ac2_indistinguishability,
            Some(60),
        ),
        (
            "AC3 secure-bit economics",
            ac3_secure_bit_economics,
            Some(60),
        ),
        (
            "AC4 rate constraint (BER vs gamma)",
            ac4_rate_constraint,
            Some(600),
        ),
        ("AC5 NFC arithmetic", ac5_nfc_arithmetic, None),
        (
            "AC6 conservation and determinism",
            ac6_conservation_and_determinism,
            Some(30),
        ),
        ("AC7 communication-table legality", ac7_link_legality, None),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let result =
            result.and_then(|d| within_budget(elapsed, budget.map(Duration::from_secs)).map(|_| d));
        match result {
            Ok(d) => println!("PASS {name}: {d} ({:.2} s)", elapsed.as_secs_f64()),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} ({:.2} s)", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
