use rand::Rng;
use anonqtx::adversary::{build_view, AdversaryStrategy, CollusionSpec, DisruptAction};
use anonqtx::channels::{MessageKind, ParticipantId};
use anonqtx::protocol::{
    run_protocol1, run_protocol2, run_protocol3, Mode, ProtocolConfig, ProtocolError, SharedPair, Variant,
};
use anonqtx::qsim::{fidelity, BellLabel, Statevector};
use anonqtx::rng;
use num_complex::Complex64;

fn phi_plus() -> Statevector {
    Statevector::bell(BellLabel::PhiPlus.outcome())
}

fn pair_fidelity(pair: &SharedPair) -> f64 {
    fidelity(pair.state.as_ref().unwrap(), &phi_plus()).unwrap()
}

#[test]
fn protocol2_honest_gives_n_minus_one_perfect_pairs() {
    for seed in 0..5 {
        let cfg = ProtocolConfig::new(5, 1, 0.25, 0.1, (seed % 4) as usize, seed);
        let run = run_protocol2(&cfg, &CollusionSpec::honest()).unwrap();
        assert_eq!(run.result.len(), 4);
        for pair in &run.result.pairs {
            assert!(pair_fidelity(pair) >= 1.0 - 1e-9);
            assert_eq!(pair.label, BellLabel::PhiPlus);
            assert!(!pair.touched);
        }
    }
}

#[test]
fn protocol2_dummy_matches_report_length() {
    let cfg = ProtocolConfig::new(5, 1, 0.25, 0.1, 1, 3);
    let run = run_protocol2(&cfg, &CollusionSpec::honest()).unwrap();
    let reports: Vec<_> = run
        .log
        .entries()
        .iter()
        .filter(|e| e.kind == MessageKind::Mtar)
        .collect();
    // three non-senders report plus one dummy
    assert_eq!(reports.len(), 4);
    assert!(reports.iter().all(|e| e.payload.len() == reports[0].payload.len()));
    assert!(run.log.public_view().iter().all(|v| v.payload.is_none() || v.kind != MessageKind::Mtar));
}

#[test]
fn product_distributor_breaks_pair() {
    let cfg = ProtocolConfig::new(4, 1, 0.25, 0.1, 1, 11);
    let collusion = CollusionSpec::new([0], AdversaryStrategy::ProductDistributor);
    let run = run_protocol2(&cfg, &collusion).unwrap();
    let bad = run.result.pairs.iter().find(|p| p.distributor == ParticipantId(0)).unwrap();
    assert!(bad.touched);
    assert!(pair_fidelity(bad) < 1.0 - 1e-6);
    for pair in run.result.pairs.iter().filter(|p| p.distributor != ParticipantId(0)) {
        assert!(pair_fidelity(pair) >= 1.0 - 1e-9);
    }
}

#[test]
fn protocol3_honest_run() {
    let cfg = ProtocolConfig::new(5, 20, 0.25, 0.1, 2, 99);
    let run = run_protocol3(&cfg, &CollusionSpec::honest()).unwrap();
    assert_eq!(run.restarts, 0);
    assert!(run.rounds.iter().all(|r| r.disagreements.is_empty()));
    assert_eq!(run.rounds.len(), 20);
    let actual: usize = run
        .rounds
        .iter()
        .map(|r| r.modes.values().filter(|m| **m == Mode::Actual).count())
        .sum();
    assert_eq!(actual, run.result.len());
    for pair in &run.result.pairs {
        assert!(pair_fidelity(pair) >= 1.0 - 1e-9);
    }
    let buckets = run.result.collect_by_distributor();
    for d in 0..4 {
        let count = buckets.get(&ParticipantId(d)).map_or(0, Vec::len);
        // 20 rounds at 3/4: mean 15, sd ≈ 1.9
        assert!((7..=20).contains(&count), "distributor {d} made {count}");
    }
    // every round broadcasts its (possibly empty) disagreement list
    let broadcasts = run.log.entries().iter().filter(|e| e.kind == MessageKind::Broadcast).count();
    assert_eq!(broadcasts, 20);
}

#[test]
fn flipped_trap_report_is_caught_and_pruned() {
    let strategy = AdversaryStrategy::TrapGuess {
        xi: 1.0,
        disrupt_action: DisruptAction::PhaseFlip,
        targets: Some(vec![ParticipantId(0)]),
    };
    let collusion = CollusionSpec::new([1], strategy);
    let mut cfg = ProtocolConfig::new(4, 6, 0.5, 0.1, 2, 7);
    cfg.max_restarts = Some(5);
    let run = match run_protocol3(&cfg, &collusion) {
        Ok(run) => run,
        Err(ProtocolError::RestartLimit { partial, .. }) => *partial,
        Err(e) => panic!("{e}"),
    };
    let caught: Vec<_> = run.rounds.iter().flat_map(|r| r.disagreements.clone()).collect();
    assert!(caught.contains(&(ParticipantId(0), ParticipantId(1))));
    assert!(caught.iter().all(|&(d, m)| d == ParticipantId(0) && m == ParticipantId(1)));
    assert!(!run.participants[0].cooperation_set.contains(&ParticipantId(1)));
    assert!(run.restarts >= 1);
    // once pruned the attempt succeeds with P1 out of P0's set
    let last_attempt = run.rounds.last().unwrap().attempt;
    assert_eq!(last_attempt as usize, run.restarts);
}

#[test]
fn perfect_guesser_is_never_detected() {
    let strategy = AdversaryStrategy::TrapGuess {
        xi: 0.0,
        disrupt_action: DisruptAction::Depolarize,
        targets: None,
    };
    let collusion = CollusionSpec::new([0], strategy);
    let cfg = ProtocolConfig::new(5, 30, 0.3, 0.1, 1, 5);
    let run = run_protocol3(&cfg, &collusion).unwrap();
    assert_eq!(run.restarts, 0);
    assert!(run.rounds.iter().all(|r| r.disagreements.is_empty()));
    let mut noisy = 0;
    for pair in &run.result.pairs {
        if !pair.label.is_phi_plus() {
            assert!(pair.touched);
            noisy += 1;
        }
    }
    assert!(noisy > 0);
}

#[test]
fn restart_budget_returns_partial_records() {
    let strategy = AdversaryStrategy::FlipOutcome { prob: 1.0 };
    let collusion = CollusionSpec::new([0], strategy);
    let mut cfg = ProtocolConfig::new(4, 3, 0.9, 0.1, 1, 2);
    cfg.max_restarts = Some(0);
    match run_protocol3(&cfg, &collusion) {
        Err(ProtocolError::RestartLimit { budget, partial }) => {
            assert_eq!(budget, 0);
            assert_eq!(partial.restarts, 1);
            assert!(!partial.rounds.is_empty());
        }
        other => panic!("expected restart limit, got {other:?}"),
    }
}

#[test]
fn cooperation_sets_only_shrink() {
    let collusion = CollusionSpec::new([0, 2], AdversaryStrategy::FlipOutcome { prob: 0.3 });
    let mut cfg = ProtocolConfig::new(5, 4, 0.5, 0.1, 1, 8);
    cfg.max_restarts = Some(50);
    let run = match run_protocol3(&cfg, &collusion) {
        Ok(run) => run,
        Err(ProtocolError::RestartLimit { partial, .. }) => *partial,
        Err(e) => panic!("{e}"),
    };
    let removed: std::collections::BTreeSet<_> = run.rounds.iter().flat_map(|r| r.disagreements.clone()).collect();
    for p in &run.participants[..4] {
        for q in 0..5 {
            let q = ParticipantId(q);
            assert_eq!(p.cooperation_set.contains(&q), !removed.contains(&(p.id, q)));
        }
    }
}

#[test]
fn swapping_sender_leaves_adversary_view_unchanged() {
    let strategies = [
        AdversaryStrategy::Passive,
        AdversaryStrategy::FlipOutcome { prob: 0.2 },
        AdversaryStrategy::ProductDistributor,
        AdversaryStrategy::TrapGuess {
            xi: 0.5,
            disrupt_action: DisruptAction::Depolarize,
            targets: None,
        },
    ];
    for strategy in strategies {
        let collusion = CollusionSpec::new([0, 4], strategy.clone());
        for seed in 0..10 {
            let base = ProtocolConfig::new(5, 6, 0.3, 0.1, 1, seed);
            let views: Vec<_> = [1, 2, 3]
                .iter()
                .map(|&s| {
                    let cfg = base.with_sender(s);
                    let run = match run_protocol3(&cfg, &collusion) {
                        Ok(run) => run,
                        Err(ProtocolError::RestartLimit { partial, .. }) => *partial,
                        Err(e) => panic!("{e}"),
                    };
                    build_view(&run.log, &run.participants, &collusion, cfg.receiver(), None).canonical_bytes()
                })
                .collect();
            assert_eq!(views[0], views[1], "{strategy:?} seed {seed}");
            assert_eq!(views[0], views[2], "{strategy:?} seed {seed}");
        }
    }
}

#[test]
fn teleport_haar_inputs() {
    let mut r = rng::stream(42, 0);
    for variant in [Variant::Mtas, Variant::MtarInverted] {
        let mut cfg = ProtocolConfig::new(4, 1, 0.25, 0.1, 1, 1);
        cfg.variant = variant;
        let run = run_protocol2(&cfg, &CollusionSpec::honest()).unwrap();
        let pair = &run.result.pairs[0];
        for _ in 0..100 {
            let msg = Statevector::random_qubit(&mut r);
            let (out, log) = run_protocol1(&cfg, &msg, Some(pair), &mut r).unwrap();
            assert!(fidelity(&out, &msg).unwrap() >= 1.0 - 1e-9);
            assert_eq!(log.len(), 1);
        }
    }
    let zero = Statevector::qubit(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
    let cfg = ProtocolConfig::new(4, 1, 0.25, 0.1, 1, 1);
    let run = run_protocol2(&cfg, &CollusionSpec::honest()).unwrap();
    let (out, _) = run_protocol1(&cfg, &zero, run.result.pairs.first(), &mut r).unwrap();
    assert!((fidelity(&out, &zero).unwrap() - 1.0).abs() < 1e-9);
    assert!(matches!(run_protocol1(&cfg, &zero, None, &mut r), Err(ProtocolError::NoPair)));
}

fn pair_with_state(state: Statevector) -> SharedPair {
    SharedPair {
        distributor: ParticipantId(0),
        attempt: 0,
        round: 0,
        sender_handle: anonqtx::channels::QubitHandle(0),
        receiver_handle: anonqtx::channels::QubitHandle(1),
        label: BellLabel::PsiPlus,
        touched: true,
        state: Some(state),
    }
}

#[test]
fn teleport_over_disrupted_pairs_loses_fidelity() {
    let cfg = ProtocolConfig::new(4, 1, 0.25, 0.1, 0, 0);
    let mut r = rng::stream(5, 0);
    let trials = 4000;
    // coherent |Ψ+⟩: output is X|ψ⟩, and the sphere average of ⟨X⟩² is 1/3
    let psi = pair_with_state(Statevector::bell(BellLabel::PsiPlus.outcome()));
    let mut coherent = 0.0;
    // receiver half replaced by a uniformly random basis state: output independent of input
    let mut mixed = 0.0;
    for _ in 0..trials {
        let msg = Statevector::random_qubit(&mut r);
        let (out, _) = run_protocol1(&cfg, &msg, Some(&psi), &mut r).unwrap();
        coherent += fidelity(&out, &msg).unwrap();
        let sender_half = Statevector::random_qubit(&mut r);
        let receiver_half = Statevector::basis_state(1, r.random_range(0..2)).unwrap();
        let product = pair_with_state(sender_half.tensor(&receiver_half).unwrap());
        let (out, _) = run_protocol1(&cfg, &msg, Some(&product), &mut r).unwrap();
        mixed += fidelity(&out, &msg).unwrap();
    }
    let (coherent, mixed) = (coherent / trials as f64, mixed / trials as f64);
    assert!((coherent - 1.0 / 3.0).abs() < 0.03, "{coherent}");
    assert!((mixed - 0.5).abs() < 0.03, "{mixed}");
}
