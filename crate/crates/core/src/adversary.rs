//! Corruption model: one adversary controlling a set of participants.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::channels::{ChannelLog, EntryView, ParticipantId};
use crate::distill::ReceiverDistillView;
use crate::protocol::{ConfigError, ParticipantState, ProtocolConfig};
use crate::qsim::DualOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DisruptAction {
    /// Replace the held qubit with a maximally mixed one.
    #[default]
    Depolarize,
    /// Apply σz to the held qubit before measuring it.
    PhaseFlip,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AdversaryStrategy {
    /// Follow the protocol, record everything.
    #[default]
    Passive,
    /// Flip each reported outcome with probability `prob`.
    FlipOutcome { prob: f64 },
    /// Disrupt every system received from a targeted distributor. On trap
    /// systems an oracle supplies the trap state, and the report is wrong with
    /// probability `xi`.
    TrapGuess {
        xi: f64,
        #[serde(default)]
        disrupt_action: DisruptAction,
        /// Distributors whose systems are disrupted; all honest ones when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        targets: Option<Vec<ParticipantId>>,
    },
    /// As a distributor, hand `target` a random dual-basis particle instead of
    /// its GHZ share and compensate the parity in the distributor's own report.
    TargetedNoise { target: ParticipantId },
    /// As a distributor, send random dual-basis product states instead of GHZ.
    ProductDistributor,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CollusionSpec {
    #[serde(default)]
    pub corrupted: BTreeSet<ParticipantId>,
    #[serde(default)]
    pub strategy: AdversaryStrategy,
}

impl CollusionSpec {
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn new(corrupted: impl IntoIterator<Item = usize>, strategy: AdversaryStrategy) -> Self {
        Self {
            corrupted: corrupted.into_iter().map(ParticipantId).collect(),
            strategy,
        }
    }

    pub fn is_corrupted(&self, p: ParticipantId) -> bool {
        self.corrupted.contains(&p)
    }

    pub fn validate(&self, config: &ProtocolConfig) -> Result<(), ConfigError> {
        if let Some(&p) = self.corrupted.iter().find(|p| p.0 >= config.n) {
            return Err(ConfigError::UnknownParticipant(p));
        }
        if self.is_corrupted(config.sender()) {
            return Err(ConfigError::CorruptedSender(config.sender()));
        }
        let prob_ok = |x: f64| (0.0..=1.0).contains(&x);
        match &self.strategy {
            AdversaryStrategy::FlipOutcome { prob } if !prob_ok(*prob) => {
                Err(ConfigError::Adversary(format!("flip probability {prob} outside [0, 1]")))
            }
            AdversaryStrategy::TrapGuess { xi, .. } if !prob_ok(*xi) => {
                Err(ConfigError::Adversary(format!("xi {xi} outside [0, 1]")))
            }
            AdversaryStrategy::TargetedNoise { target } if target.0 >= config.n - 1 => Err(
                ConfigError::Adversary(format!("target {target} is not a potential sender")),
            ),
            _ => Ok(()),
        }
    }
}

/// What a corrupted measurer knows when it reports on one held system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportContext {
    pub distributor: ParticipantId,
    /// Whether the strategy disrupts systems from this distributor.
    pub targeted: bool,
    /// Side-information oracle: the trap state, when the system is a trap.
    pub trap_state: Option<DualOutcome>,
}

/// A corrupted participant's report and what it did to the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportDecision {
    pub reported: DualOutcome,
    pub disruption: Option<DisruptAction>,
}

impl AdversaryStrategy {
    /// Whether systems from `distributor` are disrupted by a corrupted measurer.
    pub fn targets(&self, distributor: ParticipantId, collusion: &CollusionSpec) -> bool {
        match self {
            AdversaryStrategy::TrapGuess { targets, .. } => match targets {
                Some(list) => list.contains(&distributor),
                None => !collusion.is_corrupted(distributor),
            },
            _ => false,
        }
    }
}

/// Decides what a corrupted measurer reports, given the honest outcome of
/// measuring its (undisturbed) share in the dual basis.
pub fn act_on_report<R: Rng + ?Sized>(
    strategy: &AdversaryStrategy,
    true_outcome: DualOutcome,
    context: ReportContext,
    rng: &mut R,
) -> ReportDecision {
    let honest = ReportDecision {
        reported: true_outcome,
        disruption: None,
    };
    match strategy {
        AdversaryStrategy::Passive
        | AdversaryStrategy::TargetedNoise { .. }
        | AdversaryStrategy::ProductDistributor => honest,
        AdversaryStrategy::FlipOutcome { prob } => {
            let flip = rng.random_bool(*prob);
            ReportDecision {
                reported: if flip { true_outcome.flipped() } else { true_outcome },
                disruption: None,
            }
        }
        AdversaryStrategy::TrapGuess { xi, disrupt_action, .. } => {
            if !context.targeted {
                return honest;
            }
            let reported = match context.trap_state {
                Some(trap) => {
                    if rng.random_bool(*xi) {
                        trap.flipped()
                    } else {
                        trap
                    }
                }
                None => match disrupt_action {
                    DisruptAction::Depolarize => DualOutcome::from_bit(rng.random_bool(0.5)),
                    DisruptAction::PhaseFlip => true_outcome.flipped(),
                },
            };
            ReportDecision {
                reported,
                disruption: Some(*disrupt_action),
            }
        }
    }
}

/// Everything the collusion observes in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryView {
    pub corrupted: Vec<ParticipantId>,
    pub channel: Vec<EntryView>,
    pub records: Vec<ParticipantState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub receiver_distill: Option<ReceiverDistillView>,
}

impl AdversaryView {
    /// Canonical byte serialization used for equality and histogramming.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("view serializes")
    }

    pub fn is_empty(&self) -> bool {
        self.corrupted.is_empty()
    }
}

/// Extracts the collusion's view of a finished run.
///
/// `receiver_distill` is the receiver's record of the distillation phase; it
/// enters the view only when the receiver is corrupted.
pub fn build_view(
    log: &ChannelLog,
    participants: &[ParticipantState],
    collusion: &CollusionSpec,
    receiver: ParticipantId,
    receiver_distill: Option<&ReceiverDistillView>,
) -> AdversaryView {
    let corrupted = &collusion.corrupted;
    let records = participants
        .iter()
        .filter(|p| corrupted.contains(&p.id))
        .cloned()
        .collect();
    AdversaryView {
        corrupted: corrupted.iter().copied().collect(),
        channel: log.view_for(corrupted),
        records,
        receiver_distill: receiver_distill
            .filter(|_| corrupted.contains(&receiver))
            .cloned(),
    }
}
