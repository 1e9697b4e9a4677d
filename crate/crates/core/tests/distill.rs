use anonqtx::adversary::{AdversaryStrategy, CollusionSpec};
use anonqtx::channels::{ParticipantId, QubitHandle};
use anonqtx::distill::{
    check_count, combined_distill, distill, hashing_yield, one_way_distill, per_distributor_distill,
    reveal_variant_distill, BellDiagonalEnsemble, Direction, DistillError, DistillVariant,
};
use anonqtx::protocol::{run_protocol3, EprResult, ProtocolConfig, SharedPair};
use anonqtx::qsim::BellLabel;
use anonqtx::rng;
use proptest::prelude::*;
use rand::Rng;

fn ensemble(errors: usize, size: usize) -> BellDiagonalEnsemble {
    let mut labels = vec![BellLabel::PhiPlus; size - errors];
    labels.extend(std::iter::repeat_n(BellLabel::PhiMinus, errors));
    BellDiagonalEnsemble::new(labels, ParticipantId(0))
}

fn pair(d: usize, k: u32, label: BellLabel) -> SharedPair {
    SharedPair {
        distributor: ParticipantId(d),
        attempt: 0,
        round: k,
        sender_handle: QubitHandle(2 * u64::from(k)),
        receiver_handle: QubitHandle(2 * u64::from(k) + 1),
        label,
        touched: !label.is_phi_plus(),
        state: None,
    }
}

fn buckets(sizes: &[usize], labels: impl Fn(usize, usize) -> BellLabel) -> EprResult {
    let mut pairs = Vec::new();
    for (d, &size) in sizes.iter().enumerate() {
        for k in 0..size {
            pairs.push(pair(d, k as u32, labels(d, k)));
        }
    }
    EprResult { pairs }
}

#[test]
fn twenty_pair_examples() {
    let mut r = rng::stream(1, 0);
    let one = one_way_distill(&ensemble(1, 20), 0.1, &mut r).unwrap();
    assert!(one.accepted && one.distilled_count >= 1);
    let clean = one_way_distill(&ensemble(0, 20), 0.1, &mut r).unwrap();
    assert!(clean.accepted);
    assert_eq!(clean.distilled_count, 20);
    let three = one_way_distill(&ensemble(3, 20), 0.1, &mut r).unwrap();
    assert!(!three.accepted);
    assert_eq!(three.distilled_count, 0);
}

#[test]
fn exact_threshold_is_rejected() {
    let mut r = rng::stream(2, 0);
    for (errors, size, theta) in [(2, 20, 0.1), (5, 20, 0.25), (3, 10, 0.3), (1, 7, 1.0 / 7.0)] {
        assert!(!one_way_distill(&ensemble(errors, size), theta, &mut r).unwrap().accepted);
        assert!(one_way_distill(&ensemble(errors - 1, size), theta, &mut r).unwrap().accepted);
    }
}

#[test]
fn theta_outside_unit_interval_is_an_error() {
    let mut r = rng::stream(0, 0);
    for theta in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(matches!(one_way_distill(&ensemble(0, 4), theta, &mut r), Err(DistillError::Theta(_))));
    }
}

#[test]
fn yield_reference_values() {
    // h(0.05) ≈ 0.286397, so (1 − 2h)·20 ≈ 8.54
    assert_eq!(hashing_yield(1, 20), 8);
    assert_eq!(hashing_yield(0, 20), 20);
    // rate negative at e = 0.15; clamped
    assert_eq!(hashing_yield(3, 20), 1);
    // ⌈20·2h(0.1)⌉ = ⌈18.76⌉
    assert_eq!(check_count(20, 0.1), 19);
    assert_eq!(check_count(0, 0.1), 0);
}

#[test]
fn combined_pool_with_one_depolarized_bucket_is_accepted() {
    // five equal buckets of 20; a depolarized pair is non-Φ+ with probability
    // 3/4, so the pool expects 15 errors in 100 and can hold at most 20
    let mut r = rng::stream(3, 0);
    let draws: Vec<BellLabel> = (0..20).map(|_| BellLabel::ALL[r.random_range(0..4)]).collect();
    let result = buckets(&[20; 5], |d, k| if d == 2 { draws[k] } else { BellLabel::PhiPlus });
    let errors = draws.iter().filter(|l| !l.is_phi_plus()).count();
    assert!(errors as f64 / 100.0 <= 0.2);
    let report = combined_distill(&result, 0.25, 9).unwrap();
    let pooled = report.combined.as_ref().unwrap();
    assert!(pooled.accepted);
    assert_eq!((pooled.errors, pooled.size), (errors, 100));
    assert!(report.sender_view.is_empty());
    assert_eq!(report.accepted_groups(), 1);

    // the same bucket alone fails
    let alone = one_way_distill(&BellDiagonalEnsemble::from_pairs(&result.pairs[40..60]), 0.25, &mut r).unwrap();
    assert_eq!(alone.accepted, (errors as f64) < 5.0);
}

#[test]
fn pool_at_exact_theta_is_rejected() {
    let result = buckets(&[10, 10], |d, k| if d == 0 && k < 5 { BellLabel::PsiMinus } else { BellLabel::PhiPlus });
    assert!(!combined_distill(&result, 0.25, 0).unwrap().combined.unwrap().accepted);
    assert!(combined_distill(&result, 0.26, 0).unwrap().combined.unwrap().accepted);
}

#[test]
fn honest_run_accepts_every_bucket_and_is_deterministic() {
    let cfg = ProtocolConfig::new(5, 20, 0.25, 0.1, 1, 17);
    let run = run_protocol3(&cfg, &CollusionSpec::honest()).unwrap();
    let report = per_distributor_distill(&run.result, 0.1, 17).unwrap();
    assert!(report.sender_view.values().all(|o| o.accepted));
    assert_eq!(report, per_distributor_distill(&run.result, 0.1, 17).unwrap());
    let reveal = reveal_variant_distill(&run.result, 0.1, 17).unwrap();
    assert!(reveal.anonymity_weakening);
    assert!(reveal.receiver_view.acceptance.as_ref().unwrap().values().all(|&a| a));
    let buckets = run.result.collect_by_distributor();
    assert_eq!(buckets.values().map(Vec::len).sum::<usize>(), run.result.len());
}

#[test]
fn targeted_noise_rejection_is_hidden_from_the_receiver() {
    let collusion = CollusionSpec::new([0], AdversaryStrategy::TargetedNoise { target: ParticipantId(1) });
    let mut rejected_somewhere = false;
    for seed in 0..10 {
        let cfg = ProtocolConfig::new(5, 20, 0.1, 0.1, 1, seed);
        let run = run_protocol3(&cfg, &collusion).unwrap();
        let report = per_distributor_distill(&run.result, 0.1, seed).unwrap();
        rejected_somewhere |= report.sender_view.get(&ParticipantId(0)).is_some_and(|o| !o.accepted);

        // relabel every pair as Φ+: the receiver's record must not change
        let mut clean = run.result.clone();
        for p in &mut clean.pairs {
            p.label = BellLabel::PhiPlus;
        }
        let sanitized = per_distributor_distill(&clean, 0.1, seed).unwrap();
        let text = serde_json::to_string(&report.receiver_view).unwrap();
        assert_eq!(text, serde_json::to_string(&sanitized.receiver_view).unwrap());
        assert!(!text.contains("accept"));
    }
    assert!(rejected_somewhere);
}

#[test]
fn reveal_works_with_two_nondisrupting_senders() {
    let result = buckets(&[10, 10], |d, k| if d == 1 && k < 4 { BellLabel::PsiPlus } else { BellLabel::PhiPlus });
    let report = distill(DistillVariant::Reveal, &result, 0.2, 0).unwrap();
    let map = report.receiver_view.acceptance.unwrap();
    assert!(map[&ParticipantId(0)]);
    assert!(!map[&ParticipantId(1)]);
}

#[test]
fn empty_result_distills_to_nothing() {
    let empty = EprResult::default();
    let report = per_distributor_distill(&empty, 0.1, 0).unwrap();
    assert!(report.sender_view.is_empty());
    assert_eq!(report.distilled_total(), 0);
}

fn arb_labels() -> impl Strategy<Value = Vec<BellLabel>> {
    prop::collection::vec(prop::sample::select(BellLabel::ALL.to_vec()), 1..60)
}

proptest! {
    #[test]
    fn repairing_an_error_keeps_acceptance(labels in arb_labels(), theta in 0.01f64..0.99, pick in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let mut r = rng::stream(seed, 0);
        let before = one_way_distill(&BellDiagonalEnsemble::new(labels.clone(), ParticipantId(0)), theta, &mut r).unwrap();
        let errors: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_phi_plus()).collect();
        prop_assume!(!errors.is_empty());
        let mut fixed = labels;
        fixed[errors[pick.index(errors.len())]] = BellLabel::PhiPlus;
        let after = one_way_distill(&BellDiagonalEnsemble::new(fixed, ParticipantId(0)), theta, &mut r).unwrap();
        prop_assert!(!before.accepted || after.accepted);
    }

    #[test]
    fn outcomes_respect_their_contracts(labels in arb_labels(), theta in 0.01f64..0.99, seed in any::<u64>()) {
        let mut r = rng::stream(seed, 0);
        let out = one_way_distill(&BellDiagonalEnsemble::new(labels.clone(), ParticipantId(0)), theta, &mut r).unwrap();
        prop_assert!(out.accepted || out.distilled_count == 0);
        prop_assert!(!out.accepted || out.distilled_count >= 1);
        prop_assert!(out.transcript.iter().all(|m| m.direction == Direction::ReceiverToSender));
        prop_assert!(out.transcript.iter().all(|m| !m.subset.is_empty() && m.subset.iter().all(|&i| i < labels.len())));
        prop_assert_eq!(out.transcript.len(), check_count(labels.len(), theta));
    }

    #[test]
    fn receiver_view_ignores_which_bucket_failed(sizes in prop::collection::vec(4usize..12, 2..5), bad in any::<prop::sample::Index>(), seed in any::<u64>()) {
        // buckets of equal size so that permuting outcomes keeps the shapes
        let size = sizes[0];
        let n = sizes.len();
        let build = |b: usize| buckets(&vec![size; n], |d, _| if d == b { BellLabel::PsiMinus } else { BellLabel::PhiPlus });
        let a = build(bad.index(n));
        let b = build((bad.index(n) + 1) % n);
        for variant in [DistillVariant::PerDistributor, DistillVariant::Combined] {
            let ra = distill(variant, &a, 0.3, seed).unwrap();
            let rb = distill(variant, &b, 0.3, seed).unwrap();
            prop_assert_eq!(serde_json::to_string(&ra.receiver_view).unwrap(), serde_json::to_string(&rb.receiver_view).unwrap());
        }
    }
}
