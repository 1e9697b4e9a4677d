use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::ParticipantId;
use crate::qsim::DEFAULT_MAX_QUBITS;

/// Teleportation direction used by Protocol 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    /// Anonymous sender teleports to the public receiver.
    #[default]
    Mtas,
    /// Public party teleports to the anonymous one (message transfer with
    /// anonymous receiver).
    MtarInverted,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("need at least 3 participants, got {0}")]
    TooFewParticipants(usize),
    #[error("{0} participants exceed the {1}-qubit register limit")]
    TooManyParticipants(usize, usize),
    #[error("trap probability p must lie in (0, 1), got {0}")]
    TrapProbability(f64),
    #[error("theta must lie in (0, 1), got {0}")]
    Theta(f64),
    #[error("sender index {index} is not one of the {count} potential senders")]
    SenderIndex { index: usize, count: usize },
    #[error("the anonymous sender {0} cannot be corrupted")]
    CorruptedSender(ParticipantId),
    #[error("participant {0} does not exist")]
    UnknownParticipant(ParticipantId),
    #[error("restart budget {0} exceeds the supported maximum of {max}", max = MAX_RESTARTS)]
    RestartBudget(usize),
    #[error("invalid adversary: {0}")]
    Adversary(String),
}

/// Largest accepted restart budget; attempts index 12-bit random streams.
pub const MAX_RESTARTS: usize = 4000;

/// Parameters of one protocol run.
///
/// Participants are numbered `0..n`: ids `0..n-1` are the potential senders
/// and id `n-1` is the public receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n: usize,
    /// Rounds per attempt (Protocol 3).
    #[serde(default)]
    pub m: usize,
    /// Probability that a distributor operates in trap mode.
    pub p: f64,
    /// Distillation error threshold.
    pub theta: f64,
    pub sender_index: usize,
    #[serde(default)]
    pub variant: Variant,
    /// Restart budget; `None` means `n²`.
    #[serde(default)]
    pub max_restarts: Option<usize>,
    /// When false, detected disrupters are pruned but the run continues.
    #[serde(default = "yes")]
    pub restart_on_disagreement: bool,
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl ProtocolConfig {
    pub fn new(n: usize, m: usize, p: f64, theta: f64, sender_index: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            p,
            theta,
            sender_index,
            variant: Variant::Mtas,
            max_restarts: None,
            restart_on_disagreement: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(ConfigError::TrapProbability(self.p));
        }
        self.validate_structure()
    }

    /// Everything except the open-interval constraint on `p`; analysis
    /// harnesses also drive the protocol at p ∈ {0, 1}.
    pub(crate) fn validate_structure(&self) -> Result<(), ConfigError> {
        if self.n < 3 {
            return Err(ConfigError::TooFewParticipants(self.n));
        }
        // one spare qubit for an injected replacement particle
        if self.n + 1 > DEFAULT_MAX_QUBITS {
            return Err(ConfigError::TooManyParticipants(self.n, DEFAULT_MAX_QUBITS));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(ConfigError::TrapProbability(self.p));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(ConfigError::Theta(self.theta));
        }
        if self.restart_budget() > MAX_RESTARTS {
            return Err(ConfigError::RestartBudget(self.restart_budget()));
        }
        if self.sender_index >= self.n - 1 {
            return Err(ConfigError::SenderIndex {
                index: self.sender_index,
                count: self.n - 1,
            });
        }
        Ok(())
    }

    pub fn sender(&self) -> ParticipantId {
        ParticipantId(self.sender_index)
    }

    pub fn receiver(&self) -> ParticipantId {
        ParticipantId(self.n - 1)
    }

    pub fn potential_senders(&self) -> impl Iterator<Item = ParticipantId> {
        (0..self.n - 1).map(ParticipantId)
    }

    pub fn participants(&self) -> impl Iterator<Item = ParticipantId> {
        (0..self.n).map(ParticipantId)
    }

    pub fn restart_budget(&self) -> usize {
        self.max_restarts.unwrap_or(self.n * self.n)
    }

    pub fn with_sender(&self, sender_index: usize) -> Self {
        Self {
            sender_index,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}
