//! Discrete-event loop over a validated [`Scenario`].
//!
//! CAs mint key bits on their KLJN wirelines into RSD and RSKP buffers,
//! RSKP gates hand bits to vehicles over NFC, RSDs relay top-ups on the
//! V2CA path, and vehicles spend bits to sign messages. The loop is single
//! threaded; the seed only feeds the Monte-Carlo error-rate estimate that
//! discounts KLJN key rates, which is computed before the first event.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use kljn_core::keyex::key_rate;
use kljn_core::BerTable;

use crate::error::{ScenarioError, SimError};
use crate::pool::{Handover, KeyBlock, KeyStore};
use crate::report::{LinkUsage, LogEntry, SimReport, Starvation, TimelineEntry, Totals};
use crate::scenario::{Event, Scenario};
use crate::time::SimTime;
use crate::topology::NodeKind;

/// Splits `duration_s` of one CA's exchange time among peers with the given
/// key rates, round-robin in blocks of `block_bits` starting at peer `start`.
/// A block costs `block_bits / rate` seconds on its wire; time too short for
/// the next whole block goes to that peer as a partial block. Peers with a
/// zero rate are skipped. Returns the bits per peer and the peer at which
/// the next cycle should start: the one whose block was cut short.
pub fn share_kljn_capacity(
    rates_bps: &[f64],
    duration_s: f64,
    block_bits: u64,
    start: usize,
) -> (Vec<u64>, usize) {
    const EPS: f64 = 1e-9;
    let n = rates_bps.len();
    let mut bits = vec![0u64; n];
    let live: Vec<usize> = (0..n)
        .map(|k| (start + k) % n.max(1))
        .filter(|&i| rates_bps[i] > 0.0 && rates_bps[i].is_finite())
        .collect();
    if live.is_empty() || duration_s <= 0.0 || block_bits == 0 {
        return (bits, start);
    }
    let block = block_bits as f64;
    let cost = |i: usize| block / rates_bps[i];
    let cycle: f64 = live.iter().map(|&i| cost(i)).sum();

    let full_cycles = ((duration_s / cycle) * (1.0 + EPS)).floor();
    for &i in &live {
        bits[i] = full_cycles as u64 * block_bits;
    }
    let mut left = (duration_s - full_cycles * cycle).max(0.0);
    for (k, &i) in live.iter().enumerate() {
        if left + EPS * duration_s >= cost(i) {
            bits[i] += block_bits;
            left = (left - cost(i)).max(0.0);
        } else {
            bits[i] += ((left * rates_bps[i]) * (1.0 + EPS))
                .floor()
                .min(block - 1.0) as u64;
            return (bits, live[k]);
        }
    }
    (bits, live[0])
}

#[derive(Debug, Clone)]
enum Queued {
    Scenario(Event),
    /// Bits minted by a finished replenishment, per (peer, link).
    ReplenishDone {
        ca: usize,
        grants: Vec<(usize, usize, u64)>,
    },
}

#[derive(Debug, Clone, Default)]
struct Usage {
    bits: u64,
    busy_s: f64,
}

pub struct Simulation {
    scenario: Scenario,
    seed: u64,
    error_rate: f64,
    /// Key rate per link; `Some` only on KLJN links.
    kljn_rate: Vec<Option<f64>>,
    stores: Vec<Option<KeyStore>>,
    now: SimTime,
    totals: Totals,
    usage: Vec<Usage>,
    ca_busy_until: Vec<SimTime>,
    ca_cursor: Vec<usize>,
    queue: BinaryHeap<Reverse<(SimTime, u8, u64)>>,
    pending: BTreeMap<u64, Queued>,
    next_seq: u64,
    touched: BTreeSet<usize>,
    starvation: Vec<Starvation>,
    log: Vec<LogEntry>,
    timeline: Vec<TimelineEntry>,
    violations: Vec<u64>,
}

impl Simulation {
    /// Prepares the network. When `ber_trials` is nonzero the error rate at
    /// the configured γ is measured by Monte Carlo with `seed`.
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self, ScenarioError> {
        let d = scenario.defaults();
        let cfg = d.channel()?;
        let ber = if d.ber_trials == 0 {
            BerTable::ideal(d.decision_rule)
        } else {
            BerTable::measure(&cfg, d.decision_rule, &[cfg.gamma()], d.ber_trials, seed)?
        };
        let error_rate = ber.lookup(cfg.gamma());
        let model = d.link_model();
        let net = &scenario.network;
        let kljn_rate = net
            .links()
            .iter()
            .map(|l| match (l.kljn, l.wire_length_m) {
                (true, Some(len)) => key_rate(&cfg, len, &model, &ber).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let stores = net
            .nodes()
            .iter()
            .map(|n| match n.kind {
                NodeKind::Ca => None,
                NodeKind::Vehicle => Some(KeyStore::with_capacity(d.vehicle_pool_capacity_bits)),
                NodeKind::Rsd | NodeKind::Rskp => {
                    Some(KeyStore::with_capacity(d.store_capacity_bits))
                }
            })
            .collect();
        let n_nodes = net.nodes().len();
        let mut sim = Simulation {
            scenario: scenario.clone(),
            seed,
            error_rate,
            kljn_rate,
            stores,
            now: SimTime::ZERO,
            totals: Totals::default(),
            usage: vec![Usage::default(); net.links().len()],
            ca_busy_until: vec![SimTime::ZERO; n_nodes],
            ca_cursor: vec![0; n_nodes],
            queue: BinaryHeap::new(),
            pending: BTreeMap::new(),
            next_seq: 0,
            touched: BTreeSet::new(),
            starvation: Vec::new(),
            log: Vec::new(),
            timeline: Vec::new(),
            violations: Vec::new(),
        };
        for e in &scenario.events {
            sim.schedule(e.time, 1, Queued::Scenario(e.event));
        }
        Ok(sim)
    }

    pub fn error_rate(&self) -> f64 {
        self.error_rate
    }

    /// Key bits per second of a KLJN link, by link id.
    pub fn key_rate_of(&self, link_id: &str) -> Option<f64> {
        let ix = self
            .scenario
            .network
            .links()
            .iter()
            .position(|l| l.id == link_id)?;
        self.kljn_rate[ix]
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn balance(&self, node_id: &str) -> Result<u64, SimError> {
        let ix = self.node_ix(node_id)?;
        Ok(self.stores[ix].as_ref().map_or(0, KeyStore::total))
    }

    /// Key blocks held by a node, oldest first.
    pub fn blocks(&self, node_id: &str) -> Result<Vec<KeyBlock>, SimError> {
        let ix = self.node_ix(node_id)?;
        Ok(self.stores[ix]
            .as_ref()
            .map(|s| s.blocks().cloned().collect())
            .unwrap_or_default())
    }

    fn node_ix(&self, id: &str) -> Result<usize, SimError> {
        self.scenario
            .network
            .node(id)
            .ok_or_else(|| SimError::UnknownNode(id.to_string()))
    }

    fn node_id(&self, ix: usize) -> String {
        self.scenario.network.nodes()[ix].id.clone()
    }

    fn schedule(&mut self, time: SimTime, class: u8, item: Queued) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse((time, class, seq)));
        self.pending.insert(seq, item);
    }

    fn store(&mut self, ix: usize) -> &mut KeyStore {
        self.touched.insert(ix);
        self.stores[ix].as_mut().expect("node kind has a key store")
    }

    fn note(&mut self, kind: &'static str, node: usize, detail: String) {
        self.log.push(LogEntry {
            time_s: self.now,
            kind,
            node: self.node_id(node),
            detail,
        });
    }

    /// Moves key bits from an RSKP buffer into a vehicle pool over the
    /// RSKP's NFC gate. Returns the bits delivered.
    pub fn gate_handover(
        &mut self,
        vehicle: usize,
        rskp: usize,
        dwell: SimTime,
        distance_m: f64,
    ) -> u64 {
        let Some(gate) = self.scenario.network.gate(rskp) else {
            self.note("no_gate", rskp, "RSKP has no NFC gate".into());
            return 0;
        };
        let nfc = self.scenario.network.links()[gate]
            .nfc
            .expect("gate links carry NFC parameters");
        if distance_m > nfc.range_m {
            let v = self.node_id(vehicle);
            self.note(
                "out_of_range",
                rskp,
                format!("vehicle '{v}' at {distance_m} m, range {} m", nfc.range_m),
            );
            return 0;
        }
        self.usage[gate].busy_s += dwell.as_secs();
        let pipe = (nfc.rate_bps as u128 * dwell.as_micros() as u128 / 1_000_000) as u64;
        let pipe = pipe.saturating_sub(self.scenario.defaults().handover_overhead_bits);
        let buffered = self.store(rskp).total();
        if buffered == 0 {
            let v = self.node_id(vehicle);
            self.note("gate_empty", rskp, format!("no key bits for vehicle '{v}'"));
            return 0;
        }
        let free = self.store(vehicle).free();
        let n = pipe.min(buffered).min(free);
        self.transfer(rskp, vehicle, n, Handover::Nfc { link: gate });
        self.usage[gate].bits += n;
        n
    }

    /// Top-up over the V2CA path: the RSD relays bits minted on its KLJN
    /// leg to the CA. Returns the bits delivered.
    pub fn key_request(&mut self, vehicle: usize, rsd: usize, bits: u64) -> u64 {
        let buffered = self.store(rsd).total();
        if buffered < bits {
            let v = self.node_id(vehicle);
            self.note(
                "relay_short",
                rsd,
                format!("vehicle '{v}' asked for {bits} bits, {buffered} buffered"),
            );
        }
        let free = self.store(vehicle).free();
        let n = bits.min(buffered).min(free);
        self.transfer(rsd, vehicle, n, Handover::V2ca { rsd });
        n
    }

    fn transfer(&mut self, from: usize, to: usize, bits: u64, handover: Handover) {
        let lifetime = SimTime::from_secs(self.scenario.defaults().key_lifetime_s)
            .expect("validated lifetime");
        let expires = self.now.saturating_add(lifetime);
        let now = self.now;
        let blocks = self.store(from).take(bits);
        for b in blocks {
            self.store(to).push(KeyBlock {
                handover: Some(handover),
                acquired_at: now,
                expires_at: Some(expires),
                ..b
            });
        }
        self.totals.delivered += bits;
        self.totals.buffered -= bits;
        self.totals.held += bits;
    }

    /// Signs one message. Returns false, and records starvation, when the
    /// sender's pool is short.
    pub fn message_send(&mut self, sender: usize, cost_bits: u64) -> bool {
        let available = self.store(sender).total();
        if available < cost_bits {
            self.starvation.push(Starvation {
                time_s: self.now,
                node: self.node_id(sender),
                needed_bits: cost_bits,
                available_bits: available,
            });
            return false;
        }
        self.store(sender).take(cost_bits);
        self.totals.held -= cost_bits;
        self.totals.consumed += cost_bits;
        true
    }

    /// Drops stale material from every vehicle pool.
    pub fn expire_keys(&mut self) -> u64 {
        let now = self.now;
        let mut removed = 0;
        for ix in 0..self.stores.len() {
            if self.scenario.network.nodes()[ix].kind != NodeKind::Vehicle {
                continue;
            }
            let gone = self.stores[ix].as_mut().map_or(0, |s| s.expire(now));
            if gone > 0 {
                self.touched.insert(ix);
                removed += gone;
            }
        }
        self.totals.held -= removed;
        self.totals.expired += removed;
        removed
    }

    /// Bits each peer would get if `ca` ran its KLJN links for `duration`.
    fn plan_replenish(
        &mut self,
        ca: usize,
        peer: Option<usize>,
        duration: SimTime,
    ) -> Vec<(usize, usize, u64)> {
        let net = &self.scenario.network;
        let links: Vec<usize> = match peer {
            Some(p) => net.kljn_feed(p).into_iter().collect(),
            None => net.kljn_links_of(ca),
        };
        let peers: Vec<usize> = links
            .iter()
            .map(|&l| {
                net.links()[l]
                    .kljn_endpoints(net.nodes())
                    .expect("KLJN link")
                    .1
            })
            .collect();
        let rates: Vec<f64> = links
            .iter()
            .map(|&l| self.kljn_rate[l].unwrap_or(0.0))
            .collect();
        let start = if peer.is_some() {
            0
        } else {
            self.ca_cursor[ca]
        };
        let (bits, next) = share_kljn_capacity(
            &rates,
            duration.as_secs(),
            self.scenario.defaults().block_bits,
            start,
        );
        if peer.is_none() {
            self.ca_cursor[ca] = next;
        }
        (0..links.len())
            .map(|k| (peers[k], links[k], bits[k]))
            .collect()
    }

    fn credit(&mut self, peer: usize, link: usize, bits: u64) -> u64 {
        let now = self.now;
        let store = self.store(peer);
        let n = bits.min(store.free());
        store.push(KeyBlock {
            bits: n,
            origin_link: link,
            handover: None,
            acquired_at: now,
            expires_at: None,
        });
        if n < bits {
            self.note(
                "buffer_full",
                peer,
                format!("{} minted bits did not fit", bits - n),
            );
        }
        self.totals.provisioned += n;
        self.totals.buffered += n;
        let u = &mut self.usage[link];
        u.bits += n;
        if let Some(rate) = self.kljn_rate[link].filter(|r| *r > 0.0) {
            u.busy_s += bits as f64 / rate;
        }
        n
    }

    /// Runs `ca`'s KLJN exchange for `duration` and credits the result at
    /// once. Without `peer`, the time is shared among all of its peers.
    pub fn replenish_link(
        &mut self,
        ca: usize,
        peer: Option<usize>,
        duration: SimTime,
    ) -> Result<u64, SimError> {
        let net = &self.scenario.network;
        if net.nodes().get(ca).map(|n| n.kind) != Some(NodeKind::Ca) {
            return Err(SimError::Usage(format!("node #{ca} is not a CA")));
        }
        if let Some(p) = peer {
            let ok = net
                .kljn_feed(p)
                .and_then(|l| net.links()[l].kljn_endpoints(net.nodes()))
                .is_some_and(|(c, _)| c == ca);
            if !ok {
                return Err(SimError::Usage(format!(
                    "no KLJN link between '{}' and '{}'",
                    self.node_id(ca),
                    self.node_id(p)
                )));
            }
        }
        let grants = self.plan_replenish(ca, peer, duration);
        Ok(grants
            .into_iter()
            .map(|(p, l, b)| self.credit(p, l, b))
            .sum())
    }

    fn record(&mut self, seq: u64, event: &'static str, subject: usize, bits: u64) {
        if !self.totals.conserved() {
            self.violations.push(seq);
        }
        let touched = std::mem::take(&mut self.touched);
        let balances = touched
            .into_iter()
            .filter_map(|ix| {
                self.stores[ix]
                    .as_ref()
                    .map(|s| (self.node_id(ix), s.total()))
            })
            .collect();
        self.timeline.push(TimelineEntry {
            seq,
            time_s: self.now,
            event,
            subject: if subject == usize::MAX {
                String::new()
            } else {
                self.node_id(subject)
            },
            bits,
            totals: self.totals,
            balances,
        });
    }

    fn step(&mut self, seq: u64, item: Queued) {
        match item {
            Queued::ReplenishDone { ca, grants } => {
                let bits = grants
                    .into_iter()
                    .map(|(p, l, b)| self.credit(p, l, b))
                    .sum();
                self.record(seq, "replenish_done", ca, bits);
            }
            Queued::Scenario(event) => match event {
                Event::VehicleAtGate {
                    vehicle,
                    rskp,
                    dwell,
                    distance_m,
                } => {
                    let n = self.gate_handover(vehicle, rskp, dwell, distance_m);
                    self.record(seq, "vehicle_at_gate", vehicle, n);
                }
                Event::KeyRequest { vehicle, rsd, bits } => {
                    let n = self.key_request(vehicle, rsd, bits);
                    self.record(seq, "key_request", vehicle, n);
                }
                Event::MessageSend {
                    sender, cost_bits, ..
                } => {
                    let sent = self.message_send(sender, cost_bits);
                    self.record(
                        seq,
                        "message_send",
                        sender,
                        if sent { cost_bits } else { 0 },
                    );
                }
                Event::Replenish { ca, duration, peer } => {
                    // One exchange unit per CA: overlapping requests queue up.
                    let start = self.now.max(self.ca_busy_until[ca]);
                    if start > self.now {
                        self.note(
                            "ca_busy",
                            ca,
                            format!("replenishment deferred to {start} s"),
                        );
                    }
                    let done = start.saturating_add(duration);
                    self.ca_busy_until[ca] = done;
                    let grants = self.plan_replenish(ca, peer, duration);
                    self.schedule(done, 0, Queued::ReplenishDone { ca, grants });
                    self.record(seq, "replenish", ca, 0);
                }
                Event::KeyExpiry => {
                    let n = self.expire_keys();
                    self.record(seq, "key_expiry", usize::MAX, n);
                }
            },
        }
    }

    /// Processes every event in (time, sequence) order; completions of
    /// replenishments run before scenario events at the same instant.
    pub fn run(mut self) -> SimReport {
        let mut processed = 0u64;
        while let Some(Reverse((time, _, seq))) = self.queue.pop() {
            let item = self.pending.remove(&seq).expect("queued item");
            self.now = time;
            self.step(seq, item);
            processed += 1;
        }
        let horizon = self.now.as_secs();
        let net = &self.scenario.network;
        let links = net
            .links()
            .iter()
            .enumerate()
            .map(|(i, l)| LinkUsage {
                id: l.id.clone(),
                kind: format!("{:?}", l.kind).to_lowercase(),
                rate_bps: self.kljn_rate[i].or(l.nfc.map(|n| n.rate_bps as f64)),
                bits: self.usage[i].bits,
                busy_s: self.usage[i].busy_s,
                utilization: if horizon > 0.0 {
                    self.usage[i].busy_s / horizon
                } else {
                    0.0
                },
            })
            .collect();
        let final_balances = net
            .nodes()
            .iter()
            .zip(&self.stores)
            .filter_map(|(n, s)| s.as_ref().map(|s| (n.id.clone(), s.total())))
            .collect();
        SimReport {
            seed: self.seed,
            defaults: self.scenario.doc.defaults.clone(),
            error_rate: self.error_rate,
            horizon_s: self.now,
            events_processed: processed,
            totals: self.totals,
            conservation_violations: self.violations,
            starvation_count: self.starvation.len() as u64,
            starvation: self.starvation,
            log: self.log,
            links,
            final_balances,
            timeline: self.timeline,
        }
    }
}

pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<SimReport, ScenarioError> {
    Ok(Simulation::new(scenario, seed)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_peer_gets_rate_times_duration() {
        let (bits, _) = share_kljn_capacity(&[5000.0], 2.0, 128, 0);
        assert_eq!(bits, vec![10_000]);
        let (bits, _) = share_kljn_capacity(&[5000.0], 0.0, 128, 0);
        assert_eq!(bits, vec![0]);
    }

    #[test]
    fn equal_peers_share_within_one_block() {
        for d in [0.01, 0.3, 1.0, 2.5, 7.77] {
            let (bits, _) = share_kljn_capacity(&[5000.0, 5000.0], d, 128, 0);
            assert!(bits[0].abs_diff(bits[1]) <= 128, "{d}: {bits:?}");
            let total: u64 = bits.iter().sum();
            assert!(total.abs_diff((5000.0 * d) as u64) <= 1, "{d}: {bits:?}");
        }
    }

    #[test]
    fn cursor_rotates_the_partial_block() {
        // 1.5 blocks of time: the first peer in turn gets the whole block.
        let (a, next) = share_kljn_capacity(&[128.0, 128.0], 1.5, 128, 0);
        assert_eq!(a, vec![128, 64]);
        assert_eq!(next, 1);
        let (b, next) = share_kljn_capacity(&[128.0, 128.0], 1.0, 128, 1);
        assert_eq!(b, vec![0, 128]);
        assert_eq!(next, 0);
    }

    #[test]
    fn zero_rate_peers_are_skipped() {
        let (bits, _) = share_kljn_capacity(&[0.0, 1000.0], 1.0, 128, 0);
        assert_eq!(bits, vec![0, 1000]);
        let (bits, _) = share_kljn_capacity(&[0.0], 1.0, 128, 0);
        assert_eq!(bits, vec![0]);
    }
}
