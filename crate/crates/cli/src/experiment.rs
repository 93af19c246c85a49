//! Self-describing experiment specs and their parameter sets.
//!
//! Every command resolves its parameters from three layers: built-in
//! defaults, an optional `--config` JSON file, and command-line flags. The
//! resolved [`ExperimentSpec`] is embedded in (or written next to) every
//! report, and feeding it back through `--config` reproduces the report.

use std::path::Path;

use kljn_core::channel::{DEFAULT_B_KLJN, DEFAULT_GAMMA, DEFAULT_R_HIGH, DEFAULT_R_LOW};
use kljn_core::eavesdropper::DEFAULT_CALIBRATION_ROUNDS;
use kljn_core::{ChannelConfig, DecisionRule};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Ber,
    Leak,
    Keyrate,
    Session,
    Sim,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ber => "ber",
            Command::Leak => "leak",
            Command::Keyrate => "keyrate",
            Command::Session => "session",
            Command::Sim => "sim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: Command,
    #[serde(default)]
    pub parameters: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        // Reports embed their spec under "experiment"; accept those too.
        let value = match value.get("experiment") {
            Some(inner) => inner.clone(),
            None => value,
        };
        serde_json::from_value(value)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Parameters of `command` from this spec, or an error if it is for another command.
    pub fn parameters_for<P: DeserializeOwned + Default>(
        &self,
        command: Command,
    ) -> Result<P, CliError> {
        if self.command != command {
            return Err(CliError::Usage(format!(
                "config is for '{}', not '{}'",
                self.command.name(),
                command.name()
            )));
        }
        if self.parameters.is_null() {
            return Ok(P::default());
        }
        serde_json::from_value(self.parameters.clone())
            .map_err(|e| CliError::Usage(format!("parameters: {e}")))
    }
}

/// Wire and noise parameters shared by the channel-level commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub r_low: f64,
    pub r_high: f64,
    pub t_eff: f64,
    pub b_kljn: f64,
    pub gamma: u32,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            r_low: DEFAULT_R_LOW,
            r_high: DEFAULT_R_HIGH,
            t_eff: 1.0,
            b_kljn: DEFAULT_B_KLJN,
            gamma: DEFAULT_GAMMA,
        }
    }
}

impl ChannelParams {
    pub fn config(&self) -> Result<ChannelConfig, CliError> {
        Ok(ChannelConfig::new(
            self.r_low,
            self.r_high,
            self.t_eff,
            self.b_kljn,
            self.gamma,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerParams {
    pub gammas: Vec<u32>,
    pub trials: u64,
    /// Report one rule only; all three when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<DecisionRule>,
    pub channel: ChannelParams,
}

impl Default for BerParams {
    fn default() -> Self {
        BerParams {
            gammas: vec![10, 50, 200, 1000],
            trials: 10_000,
            rule: None,
            channel: ChannelParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeakParams {
    pub rounds: u64,
    pub secure_only: bool,
    pub calibration_rounds: usize,
    pub channel: ChannelParams,
}

impl Default for LeakParams {
    fn default() -> Self {
        LeakParams {
            rounds: 10_000,
            secure_only: false,
            calibration_rounds: DEFAULT_CALIBRATION_ROUNDS,
            channel: ChannelParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyrateParams {
    pub lengths: Vec<f64>,
    pub margin: f64,
    pub v_prop: f64,
    /// Monte-Carlo rounds for the error discount; 0 means an error-free wire.
    pub ber_trials: u64,
    pub rule: DecisionRule,
    pub channel: ChannelParams,
}

impl Default for KeyrateParams {
    fn default() -> Self {
        KeyrateParams {
            lengths: vec![1.0, 10.0, 100.0, 1000.0],
            margin: 100.0,
            v_prop: 2.0e8,
            ber_trials: 0,
            rule: DecisionRule::Combined,
            channel: ChannelParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionParams {
    pub key_bits: usize,
    pub max_rounds: u64,
    pub rule: DecisionRule,
    pub emit_keys: bool,
    pub channel: ChannelParams,
}

impl Default for SessionParams {
    fn default() -> Self {
        SessionParams {
            key_bits: 128,
            max_rounds: 100_000,
            rule: DecisionRule::Combined,
            emit_keys: false,
            channel: ChannelParams::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub scenario: String,
    /// Time-series CSV; defaults to the JSON report path with a `.csv` extension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_out: Option<String>,
}
