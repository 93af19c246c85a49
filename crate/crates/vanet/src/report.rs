//! Simulation report: totals, per-node balances over time, anomalies and
//! link usage, with JSON and CSV writers.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::scenario::Defaults;
use crate::time::SimTime;

/// Bit counters of the whole network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    /// Minted on KLJN links and credited to RSD/RSKP buffers.
    pub provisioned: u64,
    /// Moved from infrastructure buffers into vehicle pools.
    pub delivered: u64,
    pub consumed: u64,
    pub expired: u64,
    /// Sitting in RSD/RSKP buffers.
    pub buffered: u64,
    /// Sitting in vehicle pools.
    pub held: u64,
    /// Always 0: replenishment is credited when the exchange finishes.
    pub in_transit: u64,
}

impl Totals {
    /// Both halves of the conservation identity.
    pub fn conserved(&self) -> bool {
        self.provisioned == self.delivered + self.in_transit + self.buffered
            && self.delivered == self.held + self.consumed + self.expired
    }
}

/// One processed event and the balances it changed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelineEntry {
    pub seq: u64,
    pub time_s: SimTime,
    pub event: &'static str,
    pub subject: String,
    /// Bits moved by the event.
    pub bits: u64,
    pub totals: Totals,
    /// New balance of every node whose store changed.
    pub balances: BTreeMap<String, u64>,
}

/// A message that found too few key bits in the sender's pool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Starvation {
    pub time_s: SimTime,
    pub node: String,
    pub needed_bits: u64,
    pub available_bits: u64,
}

/// Non-fatal anomaly, e.g. a gate with an empty buffer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub time_s: SimTime,
    pub kind: &'static str,
    pub node: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkUsage {
    pub id: String,
    pub kind: String,
    /// Key bits per second for KLJN links, NFC rate for gates, absent otherwise.
    pub rate_bps: Option<f64>,
    pub bits: u64,
    pub busy_s: f64,
    /// `busy_s` over the simulated horizon.
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub defaults: Defaults,
    /// Error rate used to discount KLJN key rates.
    pub error_rate: f64,
    pub horizon_s: SimTime,
    pub events_processed: u64,
    pub totals: Totals,
    /// Events after which the conservation identity failed; empty in a sound run.
    pub conservation_violations: Vec<u64>,
    pub starvation_count: u64,
    pub starvation: Vec<Starvation>,
    pub log: Vec<LogEntry>,
    pub links: Vec<LinkUsage>,
    pub final_balances: BTreeMap<String, u64>,
    pub timeline: Vec<TimelineEntry>,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Wide CSV: one row per event, one balance column per keyed node.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let nodes: Vec<&String> = self.final_balances.keys().collect();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "seq",
            "time_s",
            "event",
            "subject",
            "bits",
            "provisioned",
            "delivered",
            "consumed",
            "expired",
            "buffered",
            "held",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(nodes.iter().map(|n| format!("balance:{n}")));
        w.write_record(&header)?;

        let mut current: BTreeMap<&str, u64> = nodes.iter().map(|n| (n.as_str(), 0)).collect();
        for e in &self.timeline {
            for (n, v) in &e.balances {
                current.insert(n.as_str(), *v);
            }
            let t = e.totals;
            let mut row = vec![
                e.seq.to_string(),
                e.time_s.to_string(),
                e.event.to_string(),
                e.subject.clone(),
                e.bits.to_string(),
                t.provisioned.to_string(),
                t.delivered.to_string(),
                t.consumed.to_string(),
                t.expired.to_string(),
                t.buffered.to_string(),
                t.held.to_string(),
            ];
            row.extend(current.values().map(u64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
