//! Scenario documents and their validating loader.
//!
//! A scenario is a JSON object with four sections: `defaults`, `nodes`,
//! `links` and `events`. Unknown fields are rejected. Loading checks the
//! topology against the communication table and resolves every node
//! reference in the event list, so a loaded [`Scenario`] can always run.

use serde::{Deserialize, Serialize};

use kljn_core::channel::{DEFAULT_B_KLJN, DEFAULT_GAMMA, DEFAULT_R_HIGH, DEFAULT_R_LOW};
use kljn_core::keyex::DEFAULT_KEY_LIFETIME_S;
use kljn_core::{ChannelConfig, DecisionRule, LinkModel};

use crate::error::ScenarioError;
use crate::time::SimTime;
use crate::topology::{build_topology, LinkSpec, Network, NodeKind, NodeSpec};

/// Scenario-wide parameters. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    /// Key bits consumed to sign one message.
    pub message_cost_bits: u64,
    pub key_lifetime_s: f64,
    /// Unit of round-robin sharing of a CA's KLJN capacity.
    pub block_bits: u64,
    pub vehicle_pool_capacity_bits: u64,
    /// Capacity of each RSKP/RSD key buffer.
    pub store_capacity_bits: u64,
    /// NFC payload bits spent per handover on securing the near-field channel.
    pub handover_overhead_bits: u64,
    /// Vehicle-to-reader distance when an event does not give one.
    pub gate_distance_m: f64,
    pub r_low: f64,
    pub r_high: f64,
    pub t_eff: f64,
    pub gamma: u32,
    pub decision_rule: DecisionRule,
    pub v_prop_m_per_s: f64,
    pub margin: f64,
    /// Monte-Carlo rounds for the error-rate discount; 0 treats the wire as error-free.
    pub ber_trials: u64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            message_cost_bits: 128,
            key_lifetime_s: DEFAULT_KEY_LIFETIME_S,
            block_bits: 128,
            vehicle_pool_capacity_bits: 1 << 20,
            store_capacity_bits: 1 << 24,
            handover_overhead_bits: 0,
            gate_distance_m: 0.05,
            r_low: DEFAULT_R_LOW,
            r_high: DEFAULT_R_HIGH,
            t_eff: 1.0,
            gamma: DEFAULT_GAMMA,
            decision_rule: DecisionRule::Combined,
            v_prop_m_per_s: 2.0e8,
            margin: 100.0,
            ber_trials: 10_000,
        }
    }
}

impl Defaults {
    pub fn channel(&self) -> Result<ChannelConfig, ScenarioError> {
        Ok(ChannelConfig::new(
            self.r_low,
            self.r_high,
            self.t_eff,
            DEFAULT_B_KLJN,
            self.gamma,
        )?)
    }

    pub fn link_model(&self) -> LinkModel {
        LinkModel {
            v_prop: self.v_prop_m_per_s,
            margin: self.margin,
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Defaults(m.to_string()));
        if self.block_bits == 0 {
            return bad("block_bits must be at least 1");
        }
        if !(self.key_lifetime_s.is_finite() && self.key_lifetime_s > 0.0) {
            return bad("key_lifetime_s must be positive");
        }
        if !(self.gate_distance_m.is_finite() && self.gate_distance_m >= 0.0) {
            return bad("gate_distance_m must be non-negative");
        }
        if !(self.v_prop_m_per_s > 0.0 && self.margin > 0.0) {
            return bad("v_prop_m_per_s and margin must be positive");
        }
        self.channel()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    /// A vehicle stops at an RSKP gate for `dwell_s` seconds.
    VehicleAtGate {
        time_s: f64,
        vehicle: String,
        rskp: String,
        dwell_s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distance_m: Option<f64>,
    },
    /// Top-up over the V2CA path through an RSD.
    KeyRequest {
        time_s: f64,
        vehicle: String,
        rsd: String,
        bits: u64,
    },
    MessageSend {
        time_s: f64,
        sender: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        receiver: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cost_bits: Option<u64>,
    },
    /// A CA runs its KLJN links for `duration_s`; bits land when it finishes.
    /// Without `peer` the CA's capacity is shared among all its KLJN peers.
    Replenish {
        time_s: f64,
        ca: String,
        duration_s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        peer: Option<String>,
    },
    /// Sweep of expired key material in every vehicle pool.
    KeyExpiry { time_s: f64 },
}

impl EventSpec {
    pub fn time_s(&self) -> f64 {
        match self {
            EventSpec::VehicleAtGate { time_s, .. }
            | EventSpec::KeyRequest { time_s, .. }
            | EventSpec::MessageSend { time_s, .. }
            | EventSpec::Replenish { time_s, .. }
            | EventSpec::KeyExpiry { time_s } => *time_s,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            EventSpec::VehicleAtGate { .. } => "vehicle_at_gate",
            EventSpec::KeyRequest { .. } => "key_request",
            EventSpec::MessageSend { .. } => "message_send",
            EventSpec::Replenish { .. } => "replenish",
            EventSpec::KeyExpiry { .. } => "key_expiry",
        }
    }
}

/// The on-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub defaults: Defaults,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

/// Event with resolved node indices and integer time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    VehicleAtGate {
        vehicle: usize,
        rskp: usize,
        dwell: SimTime,
        distance_m: f64,
    },
    KeyRequest {
        vehicle: usize,
        rsd: usize,
        bits: u64,
    },
    MessageSend {
        sender: usize,
        receiver: Option<usize>,
        cost_bits: u64,
    },
    Replenish {
        ca: usize,
        duration: SimTime,
        peer: Option<usize>,
    },
    KeyExpiry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedEvent {
    pub time: SimTime,
    pub event: Event,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub network: Network,
    pub events: Vec<TimedEvent>,
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        Scenario::from_doc(serde_json::from_str(text)?)
    }

    pub fn from_doc(doc: ScenarioDoc) -> Result<Self, ScenarioError> {
        doc.defaults.validate()?;
        let network = build_topology(&doc.nodes, &doc.links)?;
        let events = doc
            .events
            .iter()
            .enumerate()
            .map(|(i, e)| resolve_event(i, e, &doc.defaults, &network))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Scenario {
            doc,
            network,
            events,
        })
    }

    pub fn defaults(&self) -> &Defaults {
        &self.doc.defaults
    }
}

fn resolve_event(
    index: usize,
    spec: &EventSpec,
    defaults: &Defaults,
    net: &Network,
) -> Result<TimedEvent, ScenarioError> {
    let fail = |reason: String| ScenarioError::Event {
        index,
        kind: spec.kind_name().to_string(),
        reason,
    };
    let node_of = |id: &str, kinds: &[NodeKind]| -> Result<usize, ScenarioError> {
        let n = net
            .node(id)
            .ok_or_else(|| fail(format!("unknown node '{id}'")))?;
        let kind = net.nodes()[n].kind;
        if !kinds.contains(&kind) {
            return Err(fail(format!("node '{id}' is a {kind}")));
        }
        Ok(n)
    };
    let secs = |what: &str, s: f64| {
        SimTime::from_secs(s).ok_or_else(|| {
            fail(format!(
                "{what} must be a non-negative number of seconds, got {s}"
            ))
        })
    };
    let time = secs("time_s", spec.time_s())?;

    let event = match spec {
        EventSpec::VehicleAtGate {
            vehicle,
            rskp,
            dwell_s,
            distance_m,
            ..
        } => {
            let vehicle = node_of(vehicle, &[NodeKind::Vehicle])?;
            let rskp_ix = node_of(rskp, &[NodeKind::Rskp])?;
            if net.gate(rskp_ix).is_none() {
                return Err(fail(format!("RSKP '{rskp}' has no NFC gate link")));
            }
            let distance_m = distance_m.unwrap_or(defaults.gate_distance_m);
            if !(distance_m.is_finite() && distance_m >= 0.0) {
                return Err(fail(format!(
                    "distance_m must be non-negative, got {distance_m}"
                )));
            }
            Event::VehicleAtGate {
                vehicle,
                rskp: rskp_ix,
                dwell: secs("dwell_s", *dwell_s)?,
                distance_m,
            }
        }
        EventSpec::KeyRequest {
            vehicle, rsd, bits, ..
        } => {
            let vehicle = node_of(vehicle, &[NodeKind::Vehicle])?;
            let rsd_ix = node_of(rsd, &[NodeKind::Rsd])?;
            if net.kljn_feed(rsd_ix).is_none() {
                return Err(fail(format!(
                    "RSD '{rsd}' has no KLJN wireline leg to a CA"
                )));
            }
            Event::KeyRequest {
                vehicle,
                rsd: rsd_ix,
                bits: *bits,
            }
        }
        EventSpec::MessageSend {
            sender,
            receiver,
            cost_bits,
            ..
        } => Event::MessageSend {
            sender: node_of(sender, &[NodeKind::Vehicle])?,
            receiver: receiver
                .as_deref()
                .map(|r| node_of(r, &[NodeKind::Vehicle, NodeKind::Rsd]))
                .transpose()?,
            cost_bits: cost_bits.unwrap_or(defaults.message_cost_bits),
        },
        EventSpec::Replenish {
            ca,
            duration_s,
            peer,
            ..
        } => {
            let ca_ix = node_of(ca, &[NodeKind::Ca])?;
            let peer = match peer {
                Some(p) => {
                    let p_ix = node_of(p, &[NodeKind::Rsd, NodeKind::Rskp])?;
                    let fed_by_ca = net
                        .kljn_feed(p_ix)
                        .and_then(|l| net.links()[l].kljn_endpoints(net.nodes()))
                        .is_some_and(|(c, _)| c == ca_ix);
                    if !fed_by_ca {
                        return Err(fail(format!("no KLJN link between '{ca}' and '{p}'")));
                    }
                    Some(p_ix)
                }
                None => None,
            };
            Event::Replenish {
                ca: ca_ix,
                duration: secs("duration_s", *duration_s)?,
                peer,
            }
        }
        EventSpec::KeyExpiry { .. } => Event::KeyExpiry,
    };
    Ok(TimedEvent { time, event })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "nodes": [
            {"id": "ca", "kind": "ca"},
            {"id": "rskp", "kind": "rskp", "ca": "ca"},
            {"id": "v", "kind": "vehicle", "ca": "ca"}
        ]
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let s = Scenario::from_json_str(MINIMAL).unwrap();
        assert_eq!(s.defaults().message_cost_bits, 128);
        assert_eq!(s.defaults().key_lifetime_s, 300.0);
        assert!(s.events.is_empty());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace(r#""kind": "ca"}"#, r#""kind": "ca", "colour": "red"}"#);
        assert!(matches!(
            Scenario::from_json_str(&text),
            Err(ScenarioError::Json(_))
        ));
        let bad_event = r#"{"nodes": [], "events": [{"kind": "key_expiry", "time_s": 1, "x": 2}]}"#;
        assert!(Scenario::from_json_str(bad_event).is_err());
    }

    #[test]
    fn events_are_resolved_and_checked() {
        let text = r#"{
            "nodes": [
                {"id": "ca", "kind": "ca"},
                {"id": "rskp", "kind": "rskp", "ca": "ca"},
                {"id": "v", "kind": "vehicle", "ca": "ca"}
            ],
            "links": [
                {"id": "feed", "a": "ca", "b": "rskp", "technology": "wireline", "kljn": true, "wire_length_m": 1000},
                {"id": "gate", "a": "rskp", "technology": "nfc", "nfc_rate_bps": 106000, "nfc_range_m": 0.1}
            ],
            "events": [
                {"kind": "replenish", "time_s": 0, "ca": "ca", "duration_s": 2},
                {"kind": "vehicle_at_gate", "time_s": 3, "vehicle": "v", "rskp": "rskp", "dwell_s": 0.5},
                {"kind": "message_send", "time_s": 4, "sender": "v"}
            ]
        }"#;
        let s = Scenario::from_json_str(text).unwrap();
        assert_eq!(s.events.len(), 3);
        assert_eq!(s.events[1].time, SimTime::from_micros(3_000_000));
        assert!(matches!(
            s.events[2].event,
            Event::MessageSend { cost_bits: 128, .. }
        ));

        let wrong_kind = text.replace(r#""sender": "v""#, r#""sender": "rskp""#);
        let err = Scenario::from_json_str(&wrong_kind)
            .unwrap_err()
            .to_string();
        assert!(err.contains("event #2"), "{err}");
        let negative = text.replace(r#""time_s": 3"#, r#""time_s": -3"#);
        assert!(Scenario::from_json_str(&negative).is_err());
    }
}
