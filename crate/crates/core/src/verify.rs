//! Self-check battery behind `anonqtx verify`.
//!
//! Quick mode divides every trial count by ten. Statistical rows compare
//! against tolerances expressed in standard errors, so they widen by √10
//! automatically; the anonymity threshold is scaled by the same factor.

use rand::Rng;
use serde::Serialize;
use std::collections::BTreeSet;

use crate::adversary::{AdversaryStrategy, CollusionSpec, DisruptAction};
use crate::analysis::{
    anonymity_test, default_grid, detection_bound, lemma1_check, min_rounds, monte_carlo_detection,
    tradeoff_is_monotone, DetectionExperiment,
};
use crate::channels::ParticipantId;
use crate::distill::{
    one_way_distill, per_distributor_distill, BellDiagonalEnsemble, Direction, DistillError,
};
use crate::protocol::{
    repair_parity, run_protocol1, run_protocol2, run_protocol3_relaxed, EprResult, ProtocolConfig, ProtocolError,
    Protocol3Run, SharedPair, Variant,
};
use crate::qsim::{fidelity, make_ghz, Basis, BellLabel, DualOutcome, QsimError, Statevector};
use crate::rng;

/// Deliberate defects for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Apply σz on an even number of MINUS outcomes instead of an odd one.
    FlipParity,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub quick: bool,
    pub fault: Option<Fault>,
    pub seed: u64,
}

impl VerifyOptions {
    fn trials(&self, full: usize) -> usize {
        if self.quick {
            (full / 10).max(1)
        } else {
            full
        }
    }

    /// Per-point sigma multiple for the bound grid. Quick runs test 27 points
    /// at a tenth of the trials, so they use a family-wise margin instead.
    fn grid_z(&self) -> f64 {
        if self.quick {
            4.0
        } else {
            3.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckRow {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &'static str, result: Result<(bool, String), String>) -> Self {
        match result {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

/// Worst fidelity with |Φ+⟩ over every dual-outcome branch of GHZ(`n`),
/// measuring qubits 2.. and repairing qubit 0.
pub fn parity_law_worst(n: usize, fault: Option<Fault>) -> Result<(usize, f64), QsimError> {
    let phi_plus = Statevector::bell(BellLabel::PhiPlus.outcome());
    let measured = n - 2;
    let mut worst: f64 = 1.0;
    for branch in 0..1usize << measured {
        let mut state = make_ghz(n)?;
        let mut outcomes = Vec::with_capacity(measured + 1);
        for k in 0..measured {
            let minus = (branch >> k) & 1 == 1;
            let (_, next) = state
                .project(2, Basis::Dual, minus)?
                .expect("every dual branch of a GHZ state has weight");
            state = next;
            outcomes.push(DualOutcome::from_bit(minus));
        }
        if fault == Some(Fault::FlipParity) {
            outcomes.push(DualOutcome::Minus);
        }
        let repaired = repair_parity(&outcomes, &state, 0)?;
        worst = worst.min(repaired.overlap(&phi_plus)?);
    }
    Ok((1 << measured, worst))
}

fn check_parity(opts: &VerifyOptions) -> CheckRow {
    let result = (3..=10).try_fold((0, 1.0f64), |(count, worst), n| {
        parity_law_worst(n, opts.fault).map(|(c, w)| (count + c, worst.min(w)))
    });
    CheckRow::from_result(
        "parity-law",
        result
            .map(|(count, worst)| (worst >= 1.0 - 1e-9, format!("{count} branches, n = 3..10, worst fidelity {worst:.12}")))
            .map_err(|e| e.to_string()),
    )
}

fn pair_fidelity(pair: &SharedPair) -> f64 {
    let phi_plus = Statevector::bell(BellLabel::PhiPlus.outcome());
    pair.state
        .as_ref()
        .map_or(0.0, |s| fidelity(s, &phi_plus).unwrap_or(0.0))
}

fn check_protocol2(opts: &VerifyOptions) -> CheckRow {
    let cfg = ProtocolConfig::new(5, 1, 0.25, 0.1, 1, opts.seed);
    let result = run_protocol2(&cfg, &CollusionSpec::honest()).map(|run| {
        let worst = run.result.pairs.iter().map(pair_fidelity).fold(1.0, f64::min);
        (
            run.result.len() == 4 && worst >= 1.0 - 1e-9,
            format!("{} pairs, worst fidelity {worst:.12}", run.result.len()),
        )
    });
    CheckRow::from_result("protocol2-honest", result.map_err(|e| e.to_string()))
}

/// Worst output fidelity over `count` Haar-random inputs teleported over
/// perfect pairs, for one direction.
pub fn teleport_worst(variant: Variant, count: usize, seed: u64) -> Result<f64, ProtocolError> {
    let mut cfg = ProtocolConfig::new(4, 1, 0.25, 0.1, 0, seed);
    cfg.variant = variant;
    let run = run_protocol2(&cfg, &CollusionSpec::honest())?;
    let mut r = rng::stream(seed, 0x7e1e);
    let mut worst: f64 = 1.0;
    for k in 0..count {
        let msg = Statevector::random_qubit(&mut r);
        let pair = &run.result.pairs[k % run.result.len()];
        let (out, _) = run_protocol1(&cfg, &msg, Some(pair), &mut r)?;
        worst = worst.min(fidelity(&out, &msg)?);
    }
    Ok(worst)
}

fn check_teleport(opts: &VerifyOptions) -> CheckRow {
    let count = opts.trials(100);
    let result = [Variant::Mtas, Variant::MtarInverted]
        .iter()
        .map(|&v| teleport_worst(v, count, opts.seed))
        .collect::<Result<Vec<_>, _>>()
        .map(|w| {
            let worst = w.iter().copied().fold(1.0, f64::min);
            (worst >= 1.0 - 1e-9, format!("{count} inputs per direction, worst fidelity {worst:.12}"))
        });
    CheckRow::from_result("teleportation", result.map_err(|e| e.to_string()))
}

/// The (p, ξ, k) grid checked against the closed form.
pub fn bound_grid() -> Vec<(f64, f64, usize)> {
    let axis = [0.1, 0.25, 0.5];
    let mut grid = Vec::new();
    for p in axis {
        for xi in axis {
            for k in [1, 5, 15] {
                grid.push((p, xi, k));
            }
        }
    }
    grid
}

fn check_bound_grid(opts: &VerifyOptions) -> CheckRow {
    let trials = opts.trials(10_000);
    let z = opts.grid_z();
    let mut failures = Vec::new();
    for (i, (p, xi, k)) in bound_grid().into_iter().enumerate() {
        let exp = DetectionExperiment::with_disruptions(p, xi, k, trials);
        match monte_carlo_detection(&exp, rng::trial_seed(opts.seed, i as u64)) {
            Ok(res) if res.agrees(z) => {}
            Ok(res) => failures.push(format!("p={p} xi={xi} k={k}: {:.4} vs {:.4}", res.rate, res.expected)),
            Err(e) => failures.push(e.to_string()),
        }
    }
    let detail = if failures.is_empty() {
        format!("27 points within {z} sigma at {trials} trials")
    } else {
        failures.join("; ")
    };
    CheckRow::new("bound-grid", failures.is_empty(), detail)
}

/// Draws `count` parameter points and checks bound(m) ≤ target < bound(m−1).
pub fn adjointness_failures(count: usize, seed: u64) -> Vec<String> {
    let mut r = rng::stream(seed, 0xad70);
    let mut failures = Vec::new();
    for _ in 0..count {
        let p = r.random_range(0.01..0.99);
        let xi = r.random_range(0.01..1.0);
        let theta = r.random_range(0.01..0.99);
        let target = r.random_range(1e-4..0.99);
        let ok = min_rounds(p, xi, theta, target).is_ok_and(|m| {
            detection_bound(p, xi, theta, m).is_ok_and(|b| b <= target)
                && detection_bound(p, xi, theta, m - 1).is_ok_and(|b| b > target)
        });
        if !ok {
            failures.push(format!("p={p} xi={xi} theta={theta} target={target}"));
        }
    }
    failures
}

fn check_min_rounds(opts: &VerifyOptions) -> CheckRow {
    let failures = adjointness_failures(50, opts.seed);
    CheckRow::new(
        "min-rounds",
        failures.is_empty(),
        if failures.is_empty() {
            "50 random points adjoint".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn check_anonymity(opts: &VerifyOptions) -> CheckRow {
    let trials = opts.trials(10_000);
    let threshold = 0.05 * (10_000.0 / trials as f64).sqrt();
    let cfg = ProtocolConfig::new(5, 10, 0.25, 0.1, 1, opts.seed);
    let collusion = CollusionSpec::new([0], AdversaryStrategy::Passive);
    let result = anonymity_test(&cfg, &collusion, (1, 2), None, trials, opts.seed).map(|r| {
        (
            r.tv_estimate <= threshold,
            format!("tv {:.4} <= {threshold:.3} over {trials} paired trials", r.tv_estimate),
        )
    });
    CheckRow::from_result("anonymity-null", result.map_err(|e| e.to_string()))
}

fn check_lemma1() -> CheckRow {
    let result = lemma1_check(3, 1, &default_grid()).map(|reports| {
        let comp = &reports[0];
        let dual = &reports[reports.len() - 1];
        let passed = (dual.distinguish_prob - 1.0).abs() < 1e-9
            && dual.collapse_distance < 1e-9
            && (comp.distinguish_prob - 0.5).abs() < 1e-9
            && tradeoff_is_monotone(&reports, 1e-12);
        (
            passed,
            format!(
                "dual ({:.3}, {:.1e}), computational ({:.3}, {:.3})",
                dual.distinguish_prob, dual.collapse_distance, comp.distinguish_prob, comp.collapse_distance
            ),
        )
    });
    CheckRow::from_result("measurement-tradeoff", result.map_err(|e| e.to_string()))
}

fn unwrap_partial(result: Result<Protocol3Run, ProtocolError>) -> Result<Protocol3Run, ProtocolError> {
    match result {
        Err(ProtocolError::RestartLimit { partial, .. }) => Ok(*partial),
        other => other,
    }
}

/// Every round in trap mode, P1 always misreporting P0's trap: the
/// disagreement (P0, P1) must be announced and P1 pruned from P0's set.
pub fn forced_trap_catch(seed: u64) -> Result<bool, ProtocolError> {
    let mut cfg = ProtocolConfig::new(4, 2, 1.0, 0.1, 2, seed);
    cfg.max_restarts = Some(3);
    let collusion = CollusionSpec::new(
        [1],
        AdversaryStrategy::TrapGuess {
            xi: 1.0,
            disrupt_action: DisruptAction::PhaseFlip,
            targets: Some(vec![ParticipantId(0)]),
        },
    );
    let run = unwrap_partial(run_protocol3_relaxed(&cfg, &collusion))?;
    let first = &run.rounds[0];
    Ok(first.disagreements == vec![(ParticipantId(0), ParticipantId(1))]
        && run.restarts == 1
        && !run.participants[0].cooperation_set.contains(&ParticipantId(1)))
}

/// Replays the announced disagreements attempt by attempt and checks that
/// every restart removes at least one member and nothing is ever re-added.
/// Returns the number of restarts when the history is consistent.
pub fn shrink_history(run: &Protocol3Run, n: usize) -> Option<usize> {
    let everyone: BTreeSet<ParticipantId> = (0..n).map(ParticipantId).collect();
    let mut sets = vec![everyone; n - 1];
    let mut restarts = 0;
    for round in &run.rounds {
        if round.disagreements.is_empty() {
            continue;
        }
        let before: usize = sets.iter().map(BTreeSet::len).sum();
        for &(d, m) in &round.disagreements {
            sets[d.0].remove(&m);
        }
        let after: usize = sets.iter().map(BTreeSet::len).sum();
        if after >= before {
            return None;
        }
        restarts += 1;
    }
    let consistent = sets
        .iter()
        .zip(&run.participants)
        .all(|(s, p)| *s == p.cooperation_set);
    consistent.then_some(restarts)
}

/// A run with at least three restarts: three corrupted participants that
/// always misreport, caught as honest distributors happen to pick trap mode.
/// Seeds are scanned in order from `seed`.
pub fn forced_restarts(seed: u64) -> Result<(Protocol3Run, usize), ProtocolError> {
    let collusion = CollusionSpec::new([0, 1, 2], AdversaryStrategy::FlipOutcome { prob: 1.0 });
    for offset in 0..1000 {
        let mut cfg = ProtocolConfig::new(6, 1, 0.2, 0.1, 3, seed.wrapping_add(offset));
        cfg.max_restarts = Some(36);
        let run = unwrap_partial(run_protocol3_relaxed(&cfg, &collusion))?;
        if let Some(restarts) = shrink_history(&run, 6).filter(|&r| r >= 3) {
            return Ok((run, restarts));
        }
    }
    panic!("no seed in range produced three restarts")
}

fn check_trap_mechanics(opts: &VerifyOptions) -> CheckRow {
    let caught = (0..opts.trials(100) as u64).try_fold(true, |ok, t| {
        forced_trap_catch(rng::trial_seed(opts.seed, t)).map(|c| ok && c)
    });
    let shrink = forced_restarts(opts.seed).map(|(run, restarts)| restarts == run.restarts);
    let result = caught.and_then(|c| shrink.map(|s| (c && s, format!("caught every time: {c}; monotone shrink: {s}"))));
    CheckRow::from_result("trap-mechanics", result.map_err(|e| e.to_string()))
}

fn ensemble(errors: usize, size: usize) -> BellDiagonalEnsemble {
    let mut labels = vec![BellLabel::PhiPlus; size - errors];
    labels.extend(std::iter::repeat_n(BellLabel::PsiPlus, errors));
    BellDiagonalEnsemble::new(labels, ParticipantId(0))
}

/// Boundary cases, one-way transcripts and receiver blindness.
pub fn distill_contracts(seed: u64) -> Result<bool, DistillError> {
    let mut r = rng::stream(seed, 0xd157);
    let boundary = !one_way_distill(&ensemble(2, 20), 0.1, &mut r)?.accepted
        && one_way_distill(&ensemble(1, 20), 0.1, &mut r)?.accepted
        && !one_way_distill(&ensemble(5, 20), 0.25, &mut r)?.accepted
        && one_way_distill(&ensemble(4, 20), 0.25, &mut r)?.accepted;

    // same bucket sizes, acceptance pattern permuted between distributors
    let build = |bad: usize| EprResult {
        pairs: (0..3)
            .flat_map(|d| {
                (0..10).map(move |k| SharedPair {
                    distributor: ParticipantId(d),
                    attempt: 0,
                    round: k,
                    sender_handle: crate::channels::QubitHandle(2 * k as u64),
                    receiver_handle: crate::channels::QubitHandle(2 * k as u64 + 1),
                    label: if d == bad && k < 6 { BellLabel::PsiMinus } else { BellLabel::PhiPlus },
                    touched: d == bad,
                    state: None,
                })
            })
            .collect(),
    };
    let a = per_distributor_distill(&build(0), 0.2, seed)?;
    let b = per_distributor_distill(&build(2), 0.2, seed)?;
    let patterns_differ = a.sender_view[&ParticipantId(0)].accepted != b.sender_view[&ParticipantId(0)].accepted;
    let blind = serde_json::to_vec(&a.receiver_view).ok() == serde_json::to_vec(&b.receiver_view).ok();
    let one_way = [&a, &b].iter().all(|rep| {
        rep.sender_view
            .values()
            .flat_map(|o| &o.transcript)
            .all(|m| m.direction == Direction::ReceiverToSender)
    });
    Ok(boundary && patterns_differ && blind && one_way)
}

fn check_distill(opts: &VerifyOptions) -> CheckRow {
    let result = distill_contracts(opts.seed).map(|ok| (ok, "threshold boundary, one-way transcripts, receiver blindness".to_string()));
    CheckRow::from_result("distill-contracts", result.map_err(|e| e.to_string()))
}

/// Runs every check in a fixed order.
pub fn run_battery(opts: &VerifyOptions) -> Vec<CheckRow> {
    vec![
        check_parity(opts),
        check_protocol2(opts),
        check_teleport(opts),
        check_bound_grid(opts),
        check_min_rounds(opts),
        check_anonymity(opts),
        check_lemma1(),
        check_trap_mechanics(opts),
        check_distill(opts),
    ]
}
