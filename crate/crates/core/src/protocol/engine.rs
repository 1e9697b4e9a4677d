use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

use super::wire::{self, DISAGREEMENTS, DISTRIBUTE, MODE_REPORT, OUTCOME_REPORT, TRAP_LIST};
use super::{
    repair_parity, EprResult, Mode, ModeRecord, OutcomeRecord, ParticipantState, Protocol2Run, Protocol3Run,
    ProtocolConfig, ProtocolError, Role, RoundRecord, SharedPair, TrapRecord,
};
use crate::adversary::{act_on_report, AdversaryStrategy, CollusionSpec, DisruptAction, ReportContext};
use crate::channels::{MessageKind, Network, ParticipantId, QubitHandle};
use crate::qsim::{make_ghz, BellLabel, DualOutcome, Statevector};
use crate::rng::{self, Purpose, SimRng, StreamKey};

/// Slot ids at or above this mark injected replacement particles.
const REPLACEMENT_SLOT: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Holder {
    participant: ParticipantId,
    handle: QubitHandle,
    /// Stable name of the qubit within its register (member id for GHZ shares).
    slot: usize,
}

/// One independently simulated system: a distributed GHZ state, a product
/// state from a cheating distributor, or a single trap qubit.
#[derive(Debug)]
struct Register {
    distributor: ParticipantId,
    state: Option<Statevector>,
    holders: Vec<Holder>,
    trap: Option<DualOutcome>,
    /// Prepared state of a particle injected in place of a GHZ share.
    replacement: Option<DualOutcome>,
    touched: bool,
    depolarized: bool,
}

impl Register {
    fn measure(&mut self, handle: QubitHandle, rng: &mut SimRng) -> Result<DualOutcome, ProtocolError> {
        let k = self
            .holders
            .iter()
            .position(|h| h.handle == handle)
            .expect("holder present in register");
        let state = self.state.take().expect("register still has qubits");
        let (outcome, rest) = state.measure_dual(k, rng)?;
        self.holders.remove(k);
        self.state = rest;
        Ok(outcome)
    }

    fn held_by(&self, p: ParticipantId) -> Vec<Holder> {
        self.holders.iter().filter(|h| h.participant == p).copied().collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct RoundPlan {
    traps: bool,
    dummy: bool,
}

struct RoundOutput {
    record: RoundRecord,
    pairs: Vec<SharedPair>,
}

pub(super) struct Session<'a> {
    cfg: &'a ProtocolConfig,
    collusion: &'a CollusionSpec,
    net: Network,
    participants: Vec<ParticipantState>,
    attempt: u32,
}

impl<'a> Session<'a> {
    pub(super) fn new(cfg: &'a ProtocolConfig, collusion: &'a CollusionSpec) -> Self {
        let everyone: BTreeSet<ParticipantId> = cfg.participants().collect();
        let participants = cfg
            .participants()
            .map(|id| {
                let role = if id == cfg.receiver() {
                    Role::Receiver
                } else if id == cfg.sender() {
                    Role::Sender
                } else {
                    Role::PotentialSender
                };
                ParticipantState {
                    id,
                    role,
                    cooperation_set: if role == Role::Receiver {
                        BTreeSet::new()
                    } else {
                        everyone.clone()
                    },
                    held_qubits: Vec::new(),
                    outcomes: Vec::new(),
                    modes: Vec::new(),
                    trap_record: Vec::new(),
                }
            })
            .collect();
        Self {
            cfg,
            collusion,
            net: Network::new(cfg.n),
            participants,
            attempt: 0,
        }
    }

    fn rng(&self, purpose: Purpose, round: u32, a: usize, b: usize) -> SimRng {
        rng::keyed(self.cfg.seed, StreamKey::new(purpose, self.attempt, round, a, b))
    }

    fn coin(&self, purpose: Purpose, round: u32, a: usize, b: usize) -> DualOutcome {
        DualOutcome::from_bit(self.rng(purpose, round, a, b).random_bool(0.5))
    }

    fn finish_holdings(&mut self) {
        for p in &mut self.participants {
            p.held_qubits = self.net.held_by(p.id);
        }
    }

    pub(super) fn run_protocol2(mut self) -> Result<Protocol2Run, ProtocolError> {
        let out = self.run_round(
            0,
            RoundPlan {
                traps: false,
                dummy: true,
            },
        )?;
        self.finish_holdings();
        Ok(Protocol2Run {
            result: EprResult { pairs: out.pairs },
            log: self.net.into_log(),
            participants: self.participants,
        })
    }

    pub(super) fn run_protocol3(mut self) -> Result<Protocol3Run, ProtocolError> {
        let mut rounds = Vec::new();
        let mut restarts = 0;
        let budget = self.cfg.restart_budget();
        let plan = RoundPlan {
            traps: true,
            dummy: false,
        };
        let pairs = 'attempts: loop {
            let mut pairs: Vec<SharedPair> = Vec::new();
            for round in 0..self.cfg.m as u32 {
                let mut out = self.run_round(round, plan)?;
                for produced in &mut out.record.produced {
                    produced.1 += pairs.len();
                }
                // every distributor prunes from the public announcement
                let announced = self
                    .net
                    .log()
                    .entries()
                    .iter()
                    .rev()
                    .find(|e| e.kind == MessageKind::Broadcast && e.tag == DISAGREEMENTS)
                    .and_then(|e| wire::decode_disagreements(&e.payload))
                    .unwrap_or_default();
                let disagreed = !announced.is_empty();
                for &(distributor, measurer) in &announced {
                    self.participants[distributor.0].cooperation_set.remove(&measurer);
                }
                rounds.push(out.record);
                if disagreed && self.cfg.restart_on_disagreement {
                    self.discard(&pairs)?;
                    self.discard(&out.pairs)?;
                    restarts += 1;
                    if restarts > budget {
                        self.finish_holdings();
                        let partial = Protocol3Run {
                            result: EprResult::default(),
                            rounds,
                            log: self.net.into_log(),
                            participants: self.participants,
                            restarts,
                        };
                        return Err(ProtocolError::RestartLimit {
                            budget,
                            partial: Box::new(partial),
                        });
                    }
                    self.attempt += 1;
                    continue 'attempts;
                }
                pairs.extend(out.pairs);
            }
            break pairs;
        };
        self.finish_holdings();
        Ok(Protocol3Run {
            result: EprResult { pairs },
            rounds,
            log: self.net.into_log(),
            participants: self.participants,
            restarts,
        })
    }

    fn discard(&mut self, pairs: &[SharedPair]) -> Result<(), ProtocolError> {
        for pair in pairs {
            self.net.consume(self.cfg.sender(), pair.sender_handle)?;
            self.net.consume(self.cfg.receiver(), pair.receiver_handle)?;
        }
        Ok(())
    }

    fn run_round(&mut self, round: u32, plan: RoundPlan) -> Result<RoundOutput, ProtocolError> {
        let cfg = self.cfg;
        let (s, r) = (cfg.sender(), cfg.receiver());
        let senders: Vec<ParticipantId> = cfg.potential_senders().collect();
        let round_start = self.net.log().len() as u64;
        let attempt = self.attempt;

        // Each potential sender picks its mode and reports it to S.
        let mut modes = BTreeMap::new();
        for &i in &senders {
            let mode = if plan.traps && self.rng(Purpose::ModeDraw, round, i.0, 0).random_bool(cfg.p) {
                Mode::Trap
            } else {
                Mode::Actual
            };
            modes.insert(i, mode);
            self.participants[i.0].modes.push(ModeRecord { attempt, round, mode });
            if plan.traps {
                self.net.mtar_send(i, s, MODE_REPORT, wire::encode_mode(i, mode))?;
            }
        }

        let mut registers = Vec::new();
        let mut trap_lists: BTreeMap<ParticipantId, Vec<Option<DualOutcome>>> = BTreeMap::new();
        for &i in &senders {
            match modes[&i] {
                Mode::Actual => registers.push(self.distribute_actual(i, round)?),
                Mode::Trap => {
                    let (regs, list) = self.distribute_traps(i, round)?;
                    registers.extend(regs);
                    trap_lists.insert(i, list);
                }
            }
        }

        // Everyone but S measures every held system and reports to S.
        let width = senders.len();
        for &j in &senders {
            if j == s {
                continue;
            }
            let slots = self.measure_and_report(j, round, &mut registers, width)?;
            self.net.mtar_send(j, s, OUTCOME_REPORT, wire::encode_outcomes(j, &slots))?;
        }
        if plan.dummy {
            let bit = self.rng(Purpose::DummyMessage, round, s.0, 0).random_bool(0.5);
            self.net.mtar_send(s, s, OUTCOME_REPORT, wire::encode_dummy(bit, width))?;
        }

        // S reads the mode reports addressed to it.
        let reported_modes: BTreeMap<ParticipantId, Mode> = if plan.traps {
            self.inbox_since(s, round_start, MODE_REPORT)
                .iter()
                .filter_map(|p| wire::decode_mode(p))
                .collect()
        } else {
            senders.iter().map(|&i| (i, Mode::Actual)).collect()
        };

        // S measures the systems it holds from trap-mode distributors.
        let mut own_trap_outcomes = BTreeMap::new();
        for reg in registers.iter_mut() {
            if reported_modes.get(&reg.distributor) != Some(&Mode::Trap) {
                continue;
            }
            for h in reg.held_by(s) {
                let mut mrng = rng::keyed(cfg.seed, StreamKey::new(Purpose::Measurement, attempt, round, reg.distributor.0, h.slot));
                let outcome = reg.measure(h.handle, &mut mrng)?;
                self.net.consume(s, h.handle)?;
                own_trap_outcomes.insert(reg.distributor, outcome);
                self.participants[s.0].outcomes.push(OutcomeRecord {
                    attempt,
                    round,
                    distributor: reg.distributor,
                    measured: outcome,
                    reported: outcome,
                });
            }
        }

        for (&i, list) in &trap_lists {
            self.net.mtar_send(i, s, TRAP_LIST, wire::encode_trap_list(i, list))?;
        }

        let reports: BTreeMap<ParticipantId, Vec<Option<DualOutcome>>> = self
            .inbox_since(s, round_start, OUTCOME_REPORT)
            .iter()
            .filter_map(|p| wire::decode_outcomes(p))
            .collect();

        let mut disagreements = Vec::new();
        if plan.traps {
            let lists: Vec<(ParticipantId, Vec<Option<DualOutcome>>)> = self
                .inbox_since(s, round_start, TRAP_LIST)
                .iter()
                .filter_map(|p| wire::decode_trap_list(p))
                .collect();
            for (i, list) in lists {
                for (j, state) in list.iter().enumerate() {
                    let (j, Some(state)) = (ParticipantId(j), state) else {
                        continue;
                    };
                    if j == r {
                        continue;
                    }
                    let seen = if j == s {
                        own_trap_outcomes.get(&i).copied()
                    } else {
                        reports.get(&j).and_then(|slots| slots.get(i.0).copied().flatten())
                    };
                    if seen != Some(*state) {
                        disagreements.push((i, j));
                    }
                }
            }
            self.net
                .broadcast_anonymous(s, DISAGREEMENTS, wire::encode_disagreements(&disagreements))?;
        }

        // S repairs each pair from an actual-mode distributor.
        let mut pairs = Vec::new();
        let mut produced = Vec::new();
        for reg in registers {
            if reported_modes.get(&reg.distributor) != Some(&Mode::Actual) {
                continue;
            }
            let d = reg.distributor;
            let (Some(sh), Some(rh)) = (
                reg.holders.iter().position(|h| h.participant == s),
                reg.holders.iter().position(|h| h.participant == r),
            ) else {
                continue;
            };
            let state = reg.state.as_ref().expect("pair qubits remain");
            if state.num_qubits() != 2 {
                continue;
            }
            // o_{S,d} is formally zero: only the other reports enter the parity
            let outcomes: Vec<DualOutcome> = reports
                .values()
                .filter_map(|slots| slots.get(d.0).copied().flatten())
                .collect();
            let repaired = repair_parity(&outcomes, state, sh)?;
            let pair_state = if sh == 0 { repaired } else { repaired.swap_qubits(0, 1)? };
            let mut label_rng = self.rng(Purpose::BellLabel, round, d.0, 0);
            let label = if reg.depolarized {
                BellLabel::ALL[label_rng.random_range(0..4)]
            } else {
                let probs = pair_state.bell_probabilities(0, 1)?;
                BellLabel::ALL[crate::qsim::sample_index(&probs, label_rng.random())]
            };
            produced.push((d, pairs.len()));
            pairs.push(SharedPair {
                distributor: d,
                attempt,
                round,
                sender_handle: reg.holders[sh].handle,
                receiver_handle: reg.holders[rh].handle,
                label,
                touched: reg.touched,
                state: Some(pair_state),
            });
        }

        Ok(RoundOutput {
            record: RoundRecord {
                attempt,
                round,
                modes,
                disagreements,
                produced,
            },
            pairs,
        })
    }

    fn inbox_since(&self, p: ParticipantId, start_step: u64, tag: &str) -> Vec<Vec<u8>> {
        self.net
            .inbox(p)
            .iter()
            .filter(|item| item.step >= start_step && item.kind == MessageKind::Mtar && item.tag == tag)
            .map(|item| item.payload.clone())
            .collect()
    }

    fn distribute_actual(&mut self, i: ParticipantId, round: u32) -> Result<Register, ProtocolError> {
        let members: Vec<ParticipantId> = self.participants[i.0].cooperation_set.iter().copied().collect();
        let corrupted = self.collusion.is_corrupted(i);
        let strategy = &self.collusion.strategy;
        let product = corrupted && matches!(strategy, AdversaryStrategy::ProductDistributor);
        let mut state = if product {
            let mut acc: Option<Statevector> = None;
            for &member in &members {
                let q = Statevector::dual(self.coin(Purpose::Replacement, round, i.0, member.0));
                acc = Some(match acc {
                    None => q,
                    Some(prev) => prev.tensor(&q)?,
                });
            }
            acc.expect("cooperation set is never empty")
        } else {
            make_ghz(members.len())?
        };
        let diverted_target = match strategy {
            AdversaryStrategy::TargetedNoise { target } if corrupted && *target != i && members.contains(target) => {
                Some(*target)
            }
            _ => None,
        };

        let mut holders = Vec::with_capacity(members.len() + 1);
        for &member in &members {
            holders.push(Holder {
                participant: i,
                handle: self.net.mint(i)?,
                slot: member.0,
            });
        }
        let mut replacement = None;
        for (k, &member) in members.iter().enumerate() {
            if member == i {
                continue;
            }
            if Some(member) == diverted_target {
                // keep the GHZ share, hand over a fresh dual-basis particle
                let prep = self.coin(Purpose::Replacement, round, i.0, REPLACEMENT_SLOT + member.0);
                state = state.tensor(&Statevector::dual(prep))?;
                let handle = self.net.mint(i)?;
                self.net.qsend(i, member, handle, DISTRIBUTE)?;
                holders.push(Holder {
                    participant: member,
                    handle,
                    slot: REPLACEMENT_SLOT + member.0,
                });
                replacement = Some(prep);
            } else {
                self.net.qsend(i, member, holders[k].handle, DISTRIBUTE)?;
                holders[k].participant = member;
            }
        }
        Ok(Register {
            distributor: i,
            state: Some(state),
            holders,
            trap: None,
            replacement,
            touched: product || replacement.is_some(),
            depolarized: false,
        })
    }

    fn distribute_traps(&mut self, i: ParticipantId, round: u32) -> Result<(Vec<Register>, Vec<Option<DualOutcome>>), ProtocolError> {
        let members: Vec<ParticipantId> = self.participants[i.0].cooperation_set.iter().copied().collect();
        let mut list = vec![None; self.cfg.n];
        let mut registers = Vec::new();
        for &member in members.iter().filter(|&&m| m != i) {
            let state = self.coin(Purpose::TrapState, round, i.0, member.0);
            list[member.0] = Some(state);
            let handle = self.net.mint(i)?;
            self.net.qsend(i, member, handle, DISTRIBUTE)?;
            registers.push(Register {
                distributor: i,
                state: Some(Statevector::dual(state)),
                holders: vec![Holder {
                    participant: member,
                    handle,
                    slot: member.0,
                }],
                trap: Some(state),
                replacement: None,
                touched: false,
                depolarized: false,
            });
        }
        self.participants[i.0].trap_record.push(TrapRecord {
            attempt: self.attempt,
            round,
            states: list
                .iter()
                .enumerate()
                .filter_map(|(p, s)| s.map(|s| (ParticipantId(p), s)))
                .collect(),
        });
        Ok((registers, list))
    }

    /// Measures everything `j` holds this round and returns its report slots.
    fn measure_and_report(
        &mut self,
        j: ParticipantId,
        round: u32,
        registers: &mut [Register],
        width: usize,
    ) -> Result<Vec<Option<DualOutcome>>, ProtocolError> {
        let attempt = self.attempt;
        let seed = self.cfg.seed;
        let corrupted = self.collusion.is_corrupted(j);
        let strategy = &self.collusion.strategy;
        let mut slots = vec![None; width];
        for reg in registers.iter_mut() {
            let held = reg.held_by(j);
            if held.is_empty() {
                continue;
            }
            let d = reg.distributor;
            let mut measured = Vec::with_capacity(held.len());
            for h in &held {
                let mut mrng = rng::keyed(seed, StreamKey::new(Purpose::Measurement, attempt, round, d.0, h.slot));
                measured.push(reg.measure(h.handle, &mut mrng)?);
                self.net.consume(j, h.handle)?;
            }
            let outcome = measured.iter().fold(DualOutcome::Plus, |acc, o| {
                DualOutcome::from_bit((acc.bit() ^ o.bit()) == 1)
            });
            let reported = if let Some(prep) = reg.replacement.filter(|_| j == d) {
                // kept share ⊕ diverted share ⊕ the particle the target will report
                DualOutcome::from_bit((outcome.bit() ^ prep.bit()) == 1)
            } else if corrupted {
                let context = ReportContext {
                    distributor: d,
                    targeted: strategy.targets(d, self.collusion),
                    trap_state: reg.trap,
                };
                let mut arng = rng::keyed(seed, StreamKey::new(Purpose::Adversary, attempt, round, d.0, j.0));
                let decision = act_on_report(strategy, outcome, context, &mut arng);
                if reg.trap.is_none() {
                    if decision.disruption.is_some() || decision.reported != outcome {
                        reg.touched = true;
                    }
                    if decision.disruption == Some(DisruptAction::Depolarize) {
                        reg.depolarized = true;
                    }
                }
                decision.reported
            } else {
                outcome
            };
            slots[d.0] = Some(reported);
            self.participants[j.0].outcomes.push(OutcomeRecord {
                attempt,
                round,
                distributor: d,
                measured: outcome,
                reported,
            });
        }
        Ok(slots)
    }
}
