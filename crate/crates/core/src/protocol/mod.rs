//! Protocol state machines.
//!
//! * [`run_protocol2`]: one GHZ state per potential sender, dual-basis
//!   measurements reported to the sender over MTAR, parity repair.
//! * [`run_protocol3`]: the same core repeated over `m` rounds with trap
//!   mode, disagreement broadcasts, cooperation-set pruning and restarts.
//! * [`run_protocol1`]: teleportation of a one-qubit message over a shared
//!   pair, in either direction.

mod config;
mod engine;
mod teleport;
pub mod wire;

pub use config::{ConfigError, ProtocolConfig, Variant, MAX_RESTARTS};
pub use teleport::run_protocol1;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::adversary::CollusionSpec;
use crate::channels::{ChannelError, ChannelLog, ParticipantId, QubitHandle};
use crate::qsim::{BellLabel, DualOutcome, Pauli, QsimError, Statevector};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("restart budget of {budget} exhausted")]
    RestartLimit { budget: usize, partial: Box<Protocol3Run> },
    #[error("no shared pair available for teleportation")]
    NoPair,
    #[error("message must be a single qubit, got {0} qubits")]
    MessageSize(usize),
    #[error("channel failure: {0}")]
    Channel(#[from] ChannelError),
    #[error("simulator failure: {0}")]
    Qsim(#[from] QsimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    PotentialSender,
    Sender,
    Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Actual,
    Trap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub attempt: u32,
    pub round: u32,
    pub distributor: ParticipantId,
    pub measured: DualOutcome,
    pub reported: DualOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub attempt: u32,
    pub round: u32,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrapRecord {
    pub attempt: u32,
    pub round: u32,
    pub states: Vec<(ParticipantId, DualOutcome)>,
}

/// Local memory of one participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantState {
    pub id: ParticipantId,
    pub role: Role,
    /// Participants this one distributes to (itself and the receiver included).
    pub cooperation_set: BTreeSet<ParticipantId>,
    pub held_qubits: Vec<QubitHandle>,
    pub outcomes: Vec<OutcomeRecord>,
    pub modes: Vec<ModeRecord>,
    pub trap_record: Vec<TrapRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub attempt: u32,
    pub round: u32,
    /// Modes as reported to the sender.
    pub modes: BTreeMap<ParticipantId, Mode>,
    /// Announced (distributor, measurer) disagreements.
    pub disagreements: Vec<(ParticipantId, ParticipantId)>,
    /// Indices into the attempt's pair list.
    pub produced: Vec<(ParticipantId, usize)>,
}

/// A sender–receiver pair with its god-view classification.
///
/// `state` holds the sender half on qubit 0 and the receiver half on qubit 1.
/// Label and state are analysis data; protocol logic never reads them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedPair {
    pub distributor: ParticipantId,
    pub attempt: u32,
    pub round: u32,
    pub sender_handle: QubitHandle,
    pub receiver_handle: QubitHandle,
    pub label: BellLabel,
    /// True when some adversary action touched this distributor's state.
    pub touched: bool,
    #[serde(skip)]
    pub state: Option<Statevector>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EprResult {
    pub pairs: Vec<SharedPair>,
}

impl EprResult {
    /// Pairs grouped by distributor, preserving order within each group.
    pub fn collect_by_distributor(&self) -> BTreeMap<ParticipantId, Vec<&SharedPair>> {
        let mut buckets: BTreeMap<ParticipantId, Vec<&SharedPair>> = BTreeMap::new();
        for pair in &self.pairs {
            buckets.entry(pair.distributor).or_default().push(pair);
        }
        buckets
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol2Run {
    pub result: EprResult,
    pub log: ChannelLog,
    pub participants: Vec<ParticipantState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol3Run {
    pub result: EprResult,
    pub rounds: Vec<RoundRecord>,
    pub log: ChannelLog,
    pub participants: Vec<ParticipantState>,
    pub restarts: usize,
}

/// Applies σz to `sender_qubit` of `pair` iff the number of `Minus` outcomes
/// is odd. The caller leaves the sender's own slot out of `outcomes`.
pub fn repair_parity(outcomes: &[DualOutcome], pair: &Statevector, sender_qubit: usize) -> Result<Statevector, QsimError> {
    let parity = outcomes.iter().fold(0u8, |acc, o| acc ^ o.bit());
    if parity == 1 {
        pair.apply_pauli(sender_qubit, Pauli::Z)
    } else {
        pair.check_qubit(sender_qubit)?;
        Ok(pair.clone())
    }
}

/// Protocol 2: anonymous noisy EPR generation without disruption detection.
pub fn run_protocol2(config: &ProtocolConfig, collusion: &CollusionSpec) -> Result<Protocol2Run, ProtocolError> {
    config.validate()?;
    collusion.validate(config)?;
    engine::Session::new(config, collusion).run_protocol2()
}

/// Protocol 3: trap-based anonymous EPR generation with restarts.
pub fn run_protocol3(config: &ProtocolConfig, collusion: &CollusionSpec) -> Result<Protocol3Run, ProtocolError> {
    config.validate()?;
    collusion.validate(config)?;
    engine::Session::new(config, collusion).run_protocol3()
}

/// Protocol 3 with `p` also allowed at 0 or 1, so harnesses can force every
/// round into one mode.
pub fn run_protocol3_relaxed(config: &ProtocolConfig, collusion: &CollusionSpec) -> Result<Protocol3Run, ProtocolError> {
    config.validate_structure()?;
    collusion.validate(config)?;
    engine::Session::new(config, collusion).run_protocol3()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{make_ghz, Basis, TOLERANCE};

    fn pair(d: usize) -> SharedPair {
        SharedPair {
            distributor: ParticipantId(d),
            attempt: 0,
            round: 0,
            sender_handle: QubitHandle(0),
            receiver_handle: QubitHandle(1),
            label: BellLabel::PhiPlus,
            touched: false,
            state: None,
        }
    }

    #[test]
    fn collect_by_distributor_partitions() {
        let result = EprResult {
            pairs: vec![pair(0), pair(1), pair(2), pair(0), pair(1), pair(2)],
        };
        let buckets = result.collect_by_distributor();
        assert_eq!(buckets.len(), 3);
        assert!(buckets.values().all(|b| b.len() == 2));
        let total: usize = buckets.values().map(Vec::len).sum();
        assert_eq!(total, result.len());
        assert!(EprResult::default().collect_by_distributor().is_empty());
    }

    #[test]
    fn repair_examples() {
        use DualOutcome::*;
        let phi_p = Statevector::bell(BellLabel::PhiPlus.outcome());
        let phi_m = Statevector::bell(BellLabel::PhiMinus.outcome());
        assert_eq!(repair_parity(&[Plus, Plus, Plus], &phi_p, 0).unwrap(), phi_p);
        let fixed = repair_parity(&[Plus, Minus, Plus], &phi_m, 0).unwrap();
        assert!((fixed.overlap(&phi_p).unwrap() - 1.0).abs() < TOLERANCE);
        let even = repair_parity(&[Plus, Minus, Minus], &phi_p, 0).unwrap();
        assert!((even.overlap(&phi_p).unwrap() - 1.0).abs() < TOLERANCE);
    }

    #[test]
    fn repair_over_all_ghz6_branches() {
        // measure qubits 2..6 of GHZ(6) along every outcome branch, repair qubit 0
        let phi_p = Statevector::bell(BellLabel::PhiPlus.outcome());
        for branch in 0u32..16 {
            let mut state = make_ghz(6).unwrap();
            let mut outcomes = Vec::new();
            for k in 0..4 {
                let minus = (branch >> k) & 1 == 1;
                let (_, next) = state.project(2, Basis::Dual, minus).unwrap().unwrap();
                state = next;
                outcomes.push(DualOutcome::from_bit(minus));
            }
            let repaired = repair_parity(&outcomes, &state, 0).unwrap();
            assert!((repaired.overlap(&phi_p).unwrap() - 1.0).abs() < TOLERANCE, "branch {branch:04b}");
        }
    }
}
