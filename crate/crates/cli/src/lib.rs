//! Experiment harness for the KLJN simulator.
//!
//! Subcommands `ber`, `leak`, `keyrate`, `session` and `sim` write CSV or
//! JSON reports. All randomness comes from `--seed`; identical inputs give
//! byte-identical outputs.

pub mod commands;
mod error;
pub mod experiment;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kljn_core::DecisionRule;

pub use error::CliError;
use experiment::{
    BerParams, ChannelParams, Command, ExperimentSpec, KeyrateParams, LeakParams, SessionParams,
    SimParams,
};

#[derive(Debug, Parser)]
#[command(
    name = "kljn-sim",
    version,
    about = "KLJN key exchange and vehicular key-distribution experiments"
)]
pub struct Cli {
    /// Top-level seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Experiment spec (or a previous JSON report) to start from; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Bit error rate of the decision rules against gamma (CSV).
    Ber(BerArgs),
    /// Eavesdropper guess accuracy (JSON).
    Leak(LeakArgs),
    /// Secure key rate against wire length (CSV).
    Keyrate(KeyrateArgs),
    /// One key session between two parties (JSON).
    Session(SessionArgs),
    /// Run a vehicular network scenario (JSON report and CSV time series).
    Sim(SimArgs),
}

fn parse_rule(s: &str) -> Result<DecisionRule, String> {
    s.parse().map_err(|e: kljn_core::Error| e.to_string())
}

#[derive(Debug, Args, Default)]
pub struct ChannelArgs {
    #[arg(long)]
    pub r_low: Option<f64>,
    #[arg(long)]
    pub r_high: Option<f64>,
    #[arg(long)]
    pub t_eff: Option<f64>,
    #[arg(long)]
    pub b_kljn: Option<f64>,
}

impl ChannelArgs {
    fn apply(&self, c: &mut ChannelParams, gamma: Option<u32>) {
        if let Some(v) = self.r_low {
            c.r_low = v;
        }
        if let Some(v) = self.r_high {
            c.r_high = v;
        }
        if let Some(v) = self.t_eff {
            c.t_eff = v;
        }
        if let Some(v) = self.b_kljn {
            c.b_kljn = v;
        }
        if let Some(g) = gamma {
            c.gamma = g;
        }
    }
}

#[derive(Debug, Args)]
pub struct BerArgs {
    /// Comma-separated gamma values.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<u32>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, value_parser = parse_rule)]
    pub rule: Option<DecisionRule>,
    #[command(flatten)]
    pub channel: ChannelArgs,
}

#[derive(Debug, Args)]
pub struct LeakArgs {
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub gamma: Option<u32>,
    /// Only 01/10 rounds.
    #[arg(long)]
    pub secure_only: bool,
    #[arg(long)]
    pub calibration_rounds: Option<usize>,
    #[command(flatten)]
    pub channel: ChannelArgs,
}

#[derive(Debug, Args)]
pub struct KeyrateArgs {
    /// Comma-separated wire lengths in metres.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lengths: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma: Option<u32>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub v_prop: Option<f64>,
    /// Monte-Carlo rounds for the error discount (0: error-free wire).
    #[arg(long)]
    pub ber_trials: Option<u64>,
    #[arg(long, value_parser = parse_rule)]
    pub rule: Option<DecisionRule>,
    #[command(flatten)]
    pub channel: ChannelArgs,
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    #[arg(long)]
    pub key_bits: Option<usize>,
    #[arg(long)]
    pub max_rounds: Option<u64>,
    #[arg(long)]
    pub gamma: Option<u32>,
    #[arg(long, value_parser = parse_rule)]
    pub rule: Option<DecisionRule>,
    /// Include both keys in hex.
    #[arg(long)]
    pub emit_keys: bool,
    #[command(flatten)]
    pub channel: ChannelArgs,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scenario JSON file.
    pub scenario: Option<PathBuf>,
    /// Time-series CSV path (default: the report path with a .csv extension).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Where a finished report goes.
struct Sink<'a, W: Write> {
    out: Option<&'a Path>,
    stdout: &'a mut W,
}

impl<W: Write> Sink<'_, W> {
    fn emit(&mut self, body: &str) -> Result<(), CliError> {
        match self.out {
            Some(p) => write_file(p, body),
            None => self
                .stdout
                .write_all(body.as_bytes())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
        }
    }

    /// CSV reports carry their spec in `<out>.experiment.json`.
    fn emit_csv(&mut self, body: &str, spec: &ExperimentSpec) -> Result<(), CliError> {
        self.emit(body)?;
        if let Some(p) = self.out {
            write_file(&sidecar_path(p), &commands::canonical_json(spec))?;
        }
        Ok(())
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".experiment.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn base_params<P: serde::de::DeserializeOwned + Default>(
    base: &Option<ExperimentSpec>,
    command: Command,
) -> Result<P, CliError> {
    match base {
        Some(spec) => spec.parameters_for(command),
        None => Ok(P::default()),
    }
}

/// Runs a parsed command line, writing stdout reports to `stdout`.
pub fn run<W: Write>(cli: Cli, stdout: &mut W) -> Result<(), CliError> {
    let base = cli
        .config
        .as_deref()
        .map(ExperimentSpec::load)
        .transpose()?;
    let seed = cli.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0);
    let out: Option<PathBuf> = cli.out.clone().or_else(|| {
        base.as_ref()
            .and_then(|b| b.output_path.clone())
            .map(PathBuf::from)
    });
    let mut sink = Sink {
        out: out.as_deref(),
        stdout,
    };

    match cli.command {
        CliCommand::Ber(a) => {
            let mut p: BerParams = base_params(&base, Command::Ber)?;
            if let Some(g) = a.gammas {
                p.gammas = g;
            }
            if let Some(t) = a.trials {
                p.trials = t;
            }
            if a.rule.is_some() {
                p.rule = a.rule;
            }
            a.channel.apply(&mut p.channel, None);
            let spec = commands::spec_of(Command::Ber, &p, seed, out.as_deref());
            let body = commands::cmd_ber(&p, seed)?;
            sink.emit_csv(&body, &spec)
        }
        CliCommand::Leak(a) => {
            let mut p: LeakParams = base_params(&base, Command::Leak)?;
            if let Some(r) = a.rounds {
                p.rounds = r;
            }
            if a.secure_only {
                p.secure_only = true;
            }
            if let Some(c) = a.calibration_rounds {
                p.calibration_rounds = c;
            }
            a.channel.apply(&mut p.channel, a.gamma);
            let spec = commands::spec_of(Command::Leak, &p, seed, out.as_deref());
            let body = commands::cmd_leak(&p, &spec)?;
            sink.emit(&body)
        }
        CliCommand::Keyrate(a) => {
            let mut p: KeyrateParams = base_params(&base, Command::Keyrate)?;
            if let Some(l) = a.lengths {
                p.lengths = l;
            }
            if let Some(m) = a.margin {
                p.margin = m;
            }
            if let Some(v) = a.v_prop {
                p.v_prop = v;
            }
            if let Some(t) = a.ber_trials {
                p.ber_trials = t;
            }
            if let Some(r) = a.rule {
                p.rule = r;
            }
            a.channel.apply(&mut p.channel, a.gamma);
            let spec = commands::spec_of(Command::Keyrate, &p, seed, out.as_deref());
            let body = commands::cmd_keyrate(&p, seed)?;
            sink.emit_csv(&body, &spec)
        }
        CliCommand::Session(a) => {
            let mut p: SessionParams = base_params(&base, Command::Session)?;
            if let Some(k) = a.key_bits {
                p.key_bits = k;
            }
            if let Some(m) = a.max_rounds {
                p.max_rounds = m;
            }
            if let Some(r) = a.rule {
                p.rule = r;
            }
            if a.emit_keys {
                p.emit_keys = true;
            }
            a.channel.apply(&mut p.channel, a.gamma);
            let spec = commands::spec_of(Command::Session, &p, seed, out.as_deref());
            let body = commands::cmd_session(&p, &spec)?;
            sink.emit(&body)
        }
        CliCommand::Sim(a) => {
            let mut p: SimParams = base_params(&base, Command::Sim)?;
            if let Some(s) = a.scenario {
                p.scenario = s.display().to_string();
            }
            if let Some(c) = a.csv {
                p.csv_out = Some(c.display().to_string());
            }
            let csv_path = p
                .csv_out
                .as_ref()
                .map(PathBuf::from)
                .or_else(|| out.as_ref().map(|o| o.with_extension("csv")));
            if csv_path.is_some() && csv_path == out {
                return Err(CliError::Usage(
                    "the CSV time series and the JSON report need different paths".into(),
                ));
            }
            let spec = commands::spec_of(Command::Sim, &p, seed, out.as_deref());
            let (json, csv) = commands::cmd_sim(&p, &spec)?;
            sink.emit(&json)?;
            if let Some(c) = csv_path {
                write_file(&c, &csv)?;
            }
            Ok(())
        }
    }
}
