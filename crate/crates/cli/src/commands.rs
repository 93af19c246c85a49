//! The five experiment commands as pure functions from resolved
//! parameters and a seed to report text.

use std::path::Path;

use kljn_core::eavesdropper::{run_leak_experiment, LeakExperiment};
use kljn_core::keyex::key_rate_breakdown;
use kljn_core::{measure_ber, run_session, verify_keys, BerTable, LinkModel, SessionConfig};
use kljn_vanet::{run_scenario, Scenario};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::experiment::{
    BerParams, Command, ExperimentSpec, KeyrateParams, LeakParams, SessionParams, SimParams,
};

pub const MIN_BER_TRIALS: u64 = 100;
pub const MIN_LEAK_ROUNDS: u64 = 1000;

/// Pretty JSON with sorted keys and a trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report serializes");
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

pub fn spec_of<P: Serialize>(
    command: Command,
    params: &P,
    seed: u64,
    out: Option<&Path>,
) -> ExperimentSpec {
    ExperimentSpec {
        command,
        parameters: serde_json::to_value(params).expect("parameters serialize"),
        seed,
        output_path: out.map(|p| p.display().to_string()),
    }
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// One row per (γ, rule): `gamma,rule,error_rate,ci_low,ci_high`.
pub fn cmd_ber(p: &BerParams, seed: u64) -> Result<String, CliError> {
    if p.gammas.is_empty() {
        return Err(usage("ber needs at least one gamma"));
    }
    if p.trials < MIN_BER_TRIALS {
        return Err(usage(format!(
            "ber needs at least {MIN_BER_TRIALS} trials, got {}",
            p.trials
        )));
    }
    let base = p.channel.config()?;
    let mut rows = Vec::new();
    for &g in &p.gammas {
        for point in measure_ber(&base.with_gamma(g)?, p.trials, seed)? {
            if p.rule.is_some_and(|r| r != point.rule) {
                continue;
            }
            rows.push(vec![
                g.to_string(),
                point.rule.to_string(),
                point.error_rate.to_string(),
                point.ci.low.to_string(),
                point.ci.high.to_string(),
            ]);
        }
    }
    Ok(csv_text(
        &["gamma", "rule", "error_rate", "ci_low", "ci_high"],
        rows,
    ))
}

/// Eavesdropper accuracy summary with the experiment embedded.
pub fn cmd_leak(p: &LeakParams, spec: &ExperimentSpec) -> Result<String, CliError> {
    if p.rounds < MIN_LEAK_ROUNDS {
        return Err(usage(format!(
            "leak needs at least {MIN_LEAK_ROUNDS} rounds, got {}",
            p.rounds
        )));
    }
    let exp = LeakExperiment {
        rounds: p.rounds,
        secure_only: p.secure_only,
        calibration_rounds: p.calibration_rounds,
    };
    let stats = run_leak_experiment(&p.channel.config()?, &exp, spec.seed)?;
    let mut v = serde_json::to_value(&stats).expect("stats serialize");
    v["experiment"] = serde_json::to_value(spec).expect("spec serializes");
    Ok(canonical_json(&v))
}

/// Key rate against wire length: `length,b_kljn,f_b,key_rate`, sorted by length.
pub fn cmd_keyrate(p: &KeyrateParams, seed: u64) -> Result<String, CliError> {
    if p.lengths.is_empty() {
        return Err(usage("keyrate needs at least one wire length"));
    }
    if let Some(bad) = p.lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(usage(format!("wire lengths must be positive, got {bad}")));
    }
    let cfg = p.channel.config()?;
    let ber = if p.ber_trials == 0 {
        BerTable::ideal(p.rule)
    } else {
        BerTable::measure(&cfg, p.rule, &[cfg.gamma()], p.ber_trials, seed)?
    };
    let link = LinkModel {
        v_prop: p.v_prop,
        margin: p.margin,
    };
    let mut lengths = p.lengths.clone();
    lengths.sort_by(f64::total_cmp);
    let rows = lengths
        .iter()
        .map(|&len| {
            let k = key_rate_breakdown(&cfg, len, &link, &ber)?;
            Ok(vec![
                len.to_string(),
                k.b_kljn.to_string(),
                k.f_b.to_string(),
                k.key_rate.to_string(),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(csv_text(&["length", "b_kljn", "f_b", "key_rate"], rows))
}

/// One key session between two parties.
pub fn cmd_session(p: &SessionParams, spec: &ExperimentSpec) -> Result<String, CliError> {
    let mut cfg = SessionConfig::new(p.channel.config()?, p.key_bits, p.max_rounds)?;
    cfg.decision_rule = p.rule;
    let out = run_session(&cfg, spec.seed)?;
    let mismatches = verify_keys(&out.alice_key.bits, &out.bob_key.bits)?;
    let mut v = json!({
        "experiment": spec,
        "stats": out.stats,
        "alice": out.alice_key.metadata(),
        "bob": out.bob_key.metadata(),
        "keys_match": mismatches.is_empty(),
        "mismatched_positions": mismatches,
    });
    if p.emit_keys {
        v["alice_key_hex"] = Value::from(out.alice_key.bits.to_hex());
        v["bob_key_hex"] = Value::from(out.bob_key.bits.to_hex());
    }
    Ok(canonical_json(&v))
}

/// Runs a scenario file; returns the JSON report and the CSV time series.
pub fn cmd_sim(p: &SimParams, spec: &ExperimentSpec) -> Result<(String, String), CliError> {
    if p.scenario.is_empty() {
        return Err(usage("sim needs a scenario file"));
    }
    let path = Path::new(&p.scenario);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let scenario = Scenario::from_json_str(&text)?;
    let report = run_scenario(&scenario, spec.seed)?;
    let json = canonical_json(&json!({ "experiment": spec, "report": report }));
    Ok((json, report.csv_string()))
}
