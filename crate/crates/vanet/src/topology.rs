//! Nodes, links and the communication-type table that decides which links
//! may exist.
//!
//! | link      | endpoints     | technology      | KLJN                 |
//! |-----------|---------------|-----------------|----------------------|
//! | V2V       | vehicle–vehicle | wireless      | no                   |
//! | V2RSD     | vehicle–RSD   | wireless        | no                   |
//! | V2CA      | RSD–CA leg    | wireline        | yes (wireline leg)   |
//! | CA2RSKP   | CA–RSKP       | wireline        | yes                  |
//! | RSKP2V    | RSKP–vehicle  | NFC             | no                   |
//!
//! A V2CA connection is the composite of a wireless V2RSD hop and the RSD–CA
//! wireline leg; only the wireline leg is declared as a link. Every legal
//! KLJN link has a CA at one end, so only CAs mint key material.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;

/// NFC data rates in bit/s.
pub const NFC_RATES: [u64; 3] = [106_000, 212_000, 424_000];
/// Upper bound of the near-field operating distance in metres.
pub const NFC_MAX_RANGE_M: f64 = 0.1;
/// NFC carrier frequency in hertz (metadata only).
pub const NFC_CARRIER_HZ: f64 = 13.56e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Vehicle,
    Rsd,
    Ca,
    Rskp,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Vehicle => "vehicle",
            NodeKind::Rsd => "rsd",
            NodeKind::Ca => "ca",
            NodeKind::Rskp => "rskp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technology {
    Wireless,
    Wireline,
    Nfc,
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Technology::Wireless => "wireless",
            Technology::Wireline => "wireline",
            Technology::Nfc => "nfc",
        })
    }
}

/// Modulation label of an NFC link; carried as metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NfcModulation {
    /// On/off keying, 100% depth.
    #[default]
    Ook100,
    /// On/off keying, 10% depth.
    Ook10,
    Bpsk,
}

/// Row of the communication table a link realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    V2v,
    V2rsd,
    /// Wireline RSD–CA leg of the composite V2CA path.
    V2ca,
    Ca2rskp,
    Rskp2v,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    /// Registering CA; required for every node except CAs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ca: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub id: String,
    pub a: String,
    /// Omitted on an NFC gate, which serves any passing vehicle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    pub technology: Technology,
    #[serde(default)]
    pub kljn: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wire_length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nfc_rate_bps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nfc_range_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<NfcModulation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NfcParams {
    pub rate_bps: u64,
    pub range_m: f64,
    pub modulation: NfcModulation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub ca: Option<usize>,
    pub region: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub kind: LinkKind,
    pub technology: Technology,
    pub kljn: bool,
    pub a: usize,
    pub b: Option<usize>,
    pub wire_length_m: Option<f64>,
    pub nfc: Option<NfcParams>,
}

impl Link {
    /// For a KLJN link, the `(ca, peer)` endpoints.
    pub fn kljn_endpoints(&self, nodes: &[Node]) -> Option<(usize, usize)> {
        if !self.kljn {
            return None;
        }
        let b = self.b?;
        if nodes[self.a].kind == NodeKind::Ca {
            Some((self.a, b))
        } else {
            Some((b, self.a))
        }
    }
}

/// Validated, immutable network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    node_index: HashMap<String, usize>,
    /// KLJN link feeding each RSD/RSKP.
    kljn_feed: Vec<Option<usize>>,
    /// NFC gate link of each RSKP.
    gate: Vec<Option<usize>>,
}

fn link_err(id: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Topology {
        element: format!("link '{id}'"),
        reason: reason.into(),
    }
}

fn node_err(id: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Topology {
        element: format!("node '{id}'"),
        reason: reason.into(),
    }
}

/// Validates nodes and links against the communication table.
pub fn build_topology(nodes: &[NodeSpec], links: &[LinkSpec]) -> Result<Network, ScenarioError> {
    let mut node_index = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if n.id.is_empty() {
            return Err(node_err(&n.id, "empty id"));
        }
        if node_index.insert(n.id.clone(), i).is_some() {
            return Err(node_err(&n.id, "duplicate id"));
        }
    }
    let mut built = Vec::with_capacity(nodes.len());
    for n in nodes {
        let ca = match (n.kind, &n.ca) {
            (NodeKind::Ca, None) => None,
            (NodeKind::Ca, Some(_)) => {
                return Err(node_err(&n.id, "a CA does not register with another CA"))
            }
            (_, None) => {
                return Err(node_err(
                    &n.id,
                    format!("{} must reference exactly one CA", n.kind),
                ))
            }
            (_, Some(ca)) => match node_index.get(ca) {
                Some(&j) if nodes[j].kind == NodeKind::Ca => Some(j),
                Some(_) => {
                    return Err(node_err(
                        &n.id,
                        format!("registering node '{ca}' is not a CA"),
                    ))
                }
                None => return Err(node_err(&n.id, format!("unknown CA '{ca}'"))),
            },
        };
        built.push(Node {
            id: n.id.clone(),
            kind: n.kind,
            ca,
            region: n.region.clone(),
        });
    }

    let mut seen_links = HashMap::new();
    let mut kljn_feed = vec![None; built.len()];
    let mut gate = vec![None; built.len()];
    let mut out = Vec::with_capacity(links.len());
    for (li, spec) in links.iter().enumerate() {
        if seen_links.insert(spec.id.clone(), li).is_some() {
            return Err(link_err(&spec.id, "duplicate id"));
        }
        let link = classify_link(spec, &built, &node_index)?;
        if let Some((_, peer)) = link.kljn_endpoints(&built) {
            if kljn_feed[peer].replace(li).is_some() {
                return Err(link_err(
                    &spec.id,
                    format!("node '{}' already has a KLJN link", built[peer].id),
                ));
            }
        }
        if link.kind == LinkKind::Rskp2v && link.b.is_none() && gate[link.a].replace(li).is_some() {
            return Err(link_err(
                &spec.id,
                format!("RSKP '{}' already has an NFC gate", built[link.a].id),
            ));
        }
        out.push(link);
    }
    Ok(Network {
        nodes: built,
        links: out,
        node_index,
        kljn_feed,
        gate,
    })
}

fn classify_link(
    spec: &LinkSpec,
    nodes: &[Node],
    index: &HashMap<String, usize>,
) -> Result<Link, ScenarioError> {
    let lookup = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| link_err(&spec.id, format!("unknown endpoint '{id}'")))
    };
    let a = lookup(&spec.a)?;
    let b = spec.b.as_deref().map(lookup).transpose()?;
    if b == Some(a) {
        return Err(link_err(&spec.id, "both endpoints are the same node"));
    }
    let ka = nodes[a].kind;
    let kb = b.map(|b| nodes[b].kind);

    if spec.kljn && spec.technology != Technology::Wireline {
        return Err(link_err(
            &spec.id,
            format!(
                "KLJN is only available on wireline links, not {}",
                spec.technology
            ),
        ));
    }
    if spec.technology != Technology::Nfc
        && (spec.nfc_rate_bps.is_some() || spec.nfc_range_m.is_some() || spec.modulation.is_some())
    {
        return Err(link_err(&spec.id, "NFC parameters on a non-NFC link"));
    }
    if spec.technology != Technology::Wireline && spec.wire_length_m.is_some() {
        return Err(link_err(&spec.id, "wire length on a non-wireline link"));
    }

    use NodeKind::*;
    let kind = match spec.technology {
        Technology::Wireless => match (ka, kb) {
            (Vehicle, Some(Vehicle)) => LinkKind::V2v,
            (Vehicle, Some(Rsd)) | (Rsd, Some(Vehicle)) => LinkKind::V2rsd,
            (_, None) => return Err(link_err(&spec.id, "wireless link needs two endpoints")),
            (x, Some(y)) => {
                return Err(link_err(
                    &spec.id,
                    format!("no wireless {x}-{y} communication type"),
                ))
            }
        },
        Technology::Wireline => {
            let Some(kb) = kb else {
                return Err(link_err(&spec.id, "wireline link needs two endpoints"));
            };
            let kind = match (ka, kb) {
                (Rsd, Ca) | (Ca, Rsd) => LinkKind::V2ca,
                (Ca, Rskp) | (Rskp, Ca) => LinkKind::Ca2rskp,
                (x, y) if spec.kljn && (x == Vehicle || y == Vehicle) => {
                    return Err(link_err(
                        &spec.id,
                        "a vehicle cannot terminate a KLJN link: only CAs mint key material",
                    ))
                }
                (x, y) => {
                    return Err(link_err(
                        &spec.id,
                        format!("no wireline {x}-{y} communication type"),
                    ))
                }
            };
            match spec.wire_length_m {
                Some(l) if l.is_finite() && l > 0.0 => {}
                Some(l) => {
                    return Err(link_err(
                        &spec.id,
                        format!("wire length must be positive, got {l}"),
                    ))
                }
                None if spec.kljn => {
                    return Err(link_err(&spec.id, "KLJN link needs wire_length_m"))
                }
                None => {}
            }
            if spec.kljn {
                let b = b.expect("checked above");
                let (ca, peer) = if ka == Ca { (a, b) } else { (b, a) };
                if nodes[peer].ca != Some(ca) {
                    return Err(link_err(
                        &spec.id,
                        format!(
                            "'{}' is not registered with CA '{}'",
                            nodes[peer].id, nodes[ca].id
                        ),
                    ));
                }
            }
            kind
        }
        Technology::Nfc => {
            if ka != Rskp {
                return Err(link_err(
                    &spec.id,
                    format!("NFC links start at an RSKP, not a {ka}"),
                ));
            }
            if let Some(k) = kb {
                if k != Vehicle {
                    return Err(link_err(
                        &spec.id,
                        format!("NFC links end at a vehicle, not a {k}"),
                    ));
                }
            }
            LinkKind::Rskp2v
        }
    };

    let nfc = if spec.technology == Technology::Nfc {
        let rate = spec
            .nfc_rate_bps
            .ok_or_else(|| link_err(&spec.id, "NFC link needs nfc_rate_bps"))?;
        if !NFC_RATES.contains(&rate) {
            return Err(link_err(
                &spec.id,
                format!("NFC rate {rate} bit/s is not one of 106000, 212000, 424000"),
            ));
        }
        let range = spec.nfc_range_m.unwrap_or(NFC_MAX_RANGE_M);
        if !(range > 0.0 && range <= NFC_MAX_RANGE_M) {
            return Err(link_err(
                &spec.id,
                format!("NFC range {range} m is outside (0, {NFC_MAX_RANGE_M}] m"),
            ));
        }
        Some(NfcParams {
            rate_bps: rate,
            range_m: range,
            modulation: spec.modulation.unwrap_or_default(),
        })
    } else {
        None
    };

    Ok(Link {
        id: spec.id.clone(),
        kind,
        technology: spec.technology,
        kljn: spec.kljn,
        a,
        b,
        wire_length_m: spec.wire_length_m,
        nfc,
    })
}

impl Network {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    /// KLJN link that feeds an RSD or RSKP.
    pub fn kljn_feed(&self, node: usize) -> Option<usize> {
        self.kljn_feed[node]
    }

    /// NFC gate of an RSKP.
    pub fn gate(&self, rskp: usize) -> Option<usize> {
        self.gate[rskp]
    }

    /// KLJN links whose CA end is `ca`, in declaration order.
    pub fn kljn_links_of(&self, ca: usize) -> Vec<usize> {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kljn_endpoints(&self.nodes).is_some_and(|(c, _)| c == ca))
            .map(|(i, _)| i)
            .collect()
    }
}
