//! Discrete-event simulation of key distribution in a vehicular network.
//!
//! Certification authorities (CAs) mint key material on KLJN wirelines to
//! roadside devices (RSDs) and roadside key providers (RSKPs). RSKPs act as
//! gates that hand keys to passing vehicles over near-field links; vehicles
//! spend keys to sign messages and can top up through an RSD.

mod error;
pub mod pool;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod topology;

pub use error::{ScenarioError, SimError};
pub use report::SimReport;
pub use scenario::{Defaults, EventSpec, Scenario, ScenarioDoc};
pub use sim::{run_scenario, share_kljn_capacity, Simulation};
pub use time::SimTime;
pub use topology::{build_topology, LinkSpec, Network, NodeKind, NodeSpec, Technology};
