//! Experiment configuration documents and the run result document.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::CollusionSpec;
use crate::analysis::{AnalysisError, SweepSpec};
use crate::channels::{ChannelLog, ParticipantId};
use crate::distill::{distill, DistillError, DistillReport, DistillVariant};
use crate::protocol::{
    run_protocol1, run_protocol2, run_protocol3, ConfigError, ProtocolConfig, ProtocolError, RoundRecord,
    SharedPair, Variant,
};
use crate::qsim::{fidelity, BellLabel, Statevector};
use crate::rng::{self, Purpose, StreamKey};

pub const SCHEMA_VERSION: u32 = 1;

fn default_protocol() -> u8 {
    3
}
fn default_p() -> f64 {
    0.25
}
fn default_theta() -> f64 {
    0.1
}
fn default_m() -> usize {
    10
}

/// Configuration document for `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_protocol")]
    pub protocol: u8,
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Default ξ for a TRAP_GUESS adversary that does not give its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default)]
    pub sender_index: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distill_variant: Option<DistillVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart_on_disagreement: Option<bool>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported protocol {0}; expected 1, 2 or 3")]
    Protocol(u8),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("adversary: {0}")]
    Adversary(String),
    #[error(transparent)]
    Run(#[from] ProtocolError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl From<serde_json::Error> for ExperimentError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends its own " at line L column C"
        let message = message
            .rsplit_once(" at line ")
            .map_or(message.as_str(), |(head, _)| head)
            .to_string();
        Self::Parse {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        let mut cfg = ProtocolConfig::new(self.n, self.m, self.p, self.theta, self.sender_index, self.seed);
        cfg.variant = self.variant;
        cfg.max_restarts = self.max_restarts;
        if let Some(flag) = self.restart_on_disagreement {
            cfg.restart_on_disagreement = flag;
        }
        cfg
    }

    pub fn collusion(&self) -> Result<CollusionSpec, ExperimentError> {
        let Some(value) = &self.adversary else {
            return Ok(CollusionSpec::honest());
        };
        let mut value = value.clone();
        if let (Some(xi), Some(strategy)) = (self.xi, value.get_mut("strategy").and_then(|s| s.as_object_mut())) {
            if strategy.get("kind").and_then(|k| k.as_str()) == Some("TRAP_GUESS") && !strategy.contains_key("xi") {
                strategy.insert("xi".into(), xi.into());
            }
        }
        serde_json::from_value(value).map_err(|e| ExperimentError::Adversary(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Completed,
    RestartLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub distributor: ParticipantId,
    pub attempt: u32,
    pub round: u32,
    pub label: BellLabel,
    pub touched: bool,
    /// Fidelity of the god-view state with |Φ+⟩.
    pub fidelity: f64,
}

impl PairRecord {
    fn from_pair(pair: &SharedPair) -> Self {
        let phi_plus = Statevector::bell(BellLabel::PhiPlus.outcome());
        Self {
            distributor: pair.distributor,
            attempt: pair.attempt,
            round: pair.round,
            label: pair.label,
            touched: pair.touched,
            fidelity: pair
                .state
                .as_ref()
                .and_then(|s| fidelity(s, &phi_plus).ok())
                .unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleportRecord {
    pub variant: Variant,
    pub distributor: ParticipantId,
    /// Amplitudes as (re, im) pairs.
    pub input: [[f64; 2]; 2],
    pub output: [[f64; 2]; 2],
    pub fidelity: f64,
}

fn amplitudes(s: &Statevector) -> [[f64; 2]; 2] {
    let a = s.amplitudes();
    [[a[0].re, a[0].im], [a[1].re, a[1].im]]
}

/// The JSON result of `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDocument {
    pub schema_version: u32,
    pub protocol: u8,
    pub seed: u64,
    pub status: RunStatus,
    pub config: ExperimentConfig,
    pub collusion: CollusionSpec,
    pub restarts: usize,
    pub pair_count: usize,
    pub pairs: Vec<PairRecord>,
    pub rounds: Vec<RoundRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distill: Option<DistillReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teleport: Option<TeleportRecord>,
    pub channel_log: String,
}

pub struct RunOutput {
    pub document: RunDocument,
    pub log: ChannelLog,
}

/// Executes the configured protocol once.
///
/// Hitting the restart budget is not an error: the document then carries
/// status `RESTART_LIMIT` and the partial records.
pub fn run_experiment(config: &ExperimentConfig, log_name: &str) -> Result<RunOutput, ExperimentError> {
    let cfg = config.protocol_config();
    let collusion = config.collusion()?;
    let mut status = RunStatus::Completed;
    let mut restarts = 0;
    let mut rounds = Vec::new();
    let mut teleport = None;
    let (result, mut log) = match config.protocol {
        1 | 2 => {
            let run = run_protocol2(&cfg, &collusion)?;
            (run.result, run.log)
        }
        3 => match run_protocol3(&cfg, &collusion) {
            Ok(run) => {
                restarts = run.restarts;
                rounds = run.rounds;
                (run.result, run.log)
            }
            Err(ProtocolError::RestartLimit { partial, .. }) => {
                status = RunStatus::RestartLimit;
                restarts = partial.restarts;
                rounds = partial.rounds;
                (partial.result, partial.log)
            }
            Err(e) => return Err(e.into()),
        },
        other => return Err(ExperimentError::Protocol(other)),
    };
    if config.protocol == 1 {
        let mut r = rng::keyed(cfg.seed, StreamKey::new(Purpose::Teleport, 0, 0, 0, 0));
        let message = Statevector::random_qubit(&mut r);
        let pair = result.pairs.first();
        let (out, tlog) = run_protocol1(&cfg, &message, pair, &mut r)?;
        log.append(tlog);
        teleport = Some(TeleportRecord {
            variant: cfg.variant,
            distributor: pair.map_or(ParticipantId(0), |p| p.distributor),
            input: amplitudes(&message),
            output: amplitudes(&out),
            fidelity: fidelity(&out, &message).map_err(ProtocolError::from)?,
        });
    }
    let distill = match config.distill_variant {
        Some(v) if status == RunStatus::Completed => Some(distill(v, &result, cfg.theta, cfg.seed)?),
        _ => None,
    };
    let document = RunDocument {
        schema_version: SCHEMA_VERSION,
        protocol: config.protocol,
        seed: cfg.seed,
        status,
        config: config.clone(),
        collusion,
        restarts,
        pair_count: result.len(),
        pairs: result.pairs.iter().map(PairRecord::from_pair).collect(),
        rounds,
        distill,
        teleport,
        channel_log: log_name.to_string(),
    };
    Ok(RunOutput { document, log })
}

/// Column order of the pair table written for `--format csv`.
pub const PAIR_COLUMNS: [&str; 7] = ["seed", "distributor", "attempt", "round", "label", "touched", "fidelity"];

/// A scalar or a list, for sweep axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

impl<T> Default for OneOrMany<T> {
    fn default() -> Self {
        Self::Many(Vec::new())
    }
}

fn default_target() -> f64 {
    0.01
}

/// Configuration document for `sweep`. Axis keys take a number or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default)]
    pub p: OneOrMany<f64>,
    #[serde(default)]
    pub xi: OneOrMany<f64>,
    #[serde(default)]
    pub theta: OneOrMany<f64>,
    #[serde(default)]
    pub m: OneOrMany<usize>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default = "default_target")]
    pub target: f64,
    #[serde(default)]
    pub seed: u64,
    /// Keys of a run document that a sweep ignores.
    #[serde(flatten)]
    pub other: serde_json::Map<String, serde_json::Value>,
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn spec(&self, quick: bool) -> SweepSpec {
        let trials = self.trials.unwrap_or(10_000);
        SweepSpec {
            p: self.p.to_vec(),
            xi: self.xi.to_vec(),
            theta: self.theta.to_vec(),
            m: self.m.to_vec(),
            trials: if quick { (trials / 10).max(1) } else { trials },
            target: self.target,
        }
    }
}
