use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::AnalysisError;
use crate::adversary::{build_view, AdversaryView, CollusionSpec};
use crate::channels::{MessageKind, ParticipantId};
use crate::distill::{distill, DistillVariant};
use crate::protocol::{run_protocol3, wire, Mode, ProtocolConfig, ProtocolError};
use crate::qsim::DualOutcome;
use crate::rng;

/// Fixed coarsening applied to every view before histogramming.
pub const BUCKETING: &str = "restarts capped at 3; announced disagreement set; \
per (kind, tag) event counts as floor(log2(count + 1)); corrupted MINUS-report share and \
trap-mode share split at 1/2; receiver acceptance map verbatim; receiver transcript sizes as \
floor(log2(len + 1))";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymityReport {
    pub tv_estimate: f64,
    pub trials: usize,
    pub sender_pair: (usize, usize),
    pub collusion: CollusionSpec,
    pub distill_variant: Option<DistillVariant>,
    /// Number of distinct coarse views seen across both hypotheses.
    pub distinct_views: usize,
}

fn log2_bucket(count: usize) -> u32 {
    (count + 1).ilog2()
}

fn halves(num: usize, den: usize) -> u8 {
    if den == 0 {
        2
    } else {
        u8::from(2 * num >= den)
    }
}

#[derive(Serialize)]
struct CoarseView {
    restarts: usize,
    disagreements: BTreeSet<(ParticipantId, ParticipantId)>,
    counts: Vec<(MessageKind, String, u32)>,
    minus_share: u8,
    trap_share: u8,
    acceptance: Option<BTreeMap<ParticipantId, bool>>,
    transcripts: Vec<u32>,
}

/// Reduces a view to a finite key; see [`BUCKETING`].
pub fn coarse_key(view: &AdversaryView) -> String {
    if view.is_empty() {
        return String::new();
    }
    let mut counts: BTreeMap<(MessageKind, String), usize> = BTreeMap::new();
    let mut restarts = 0;
    let mut disagreements = BTreeSet::new();
    for entry in &view.channel {
        *counts.entry((entry.kind, entry.tag.clone())).or_default() += 1;
        if entry.kind == MessageKind::Broadcast && entry.tag == wire::DISAGREEMENTS {
            let list = entry
                .payload
                .as_deref()
                .and_then(|p| wire::decode_disagreements(p.as_bytes()))
                .unwrap_or_default();
            if !list.is_empty() {
                restarts += 1;
            }
            disagreements.extend(list);
        }
    }
    let reports = view.records.iter().flat_map(|r| &r.outcomes);
    let (minus, total) = reports.fold((0, 0), |(m, t), o| (m + usize::from(o.reported == DualOutcome::Minus), t + 1));
    let modes = view.records.iter().flat_map(|r| &r.modes);
    let (traps, rounds) = modes.fold((0, 0), |(k, t), m| {
        (k + usize::from(m.mode == Mode::Trap), t + 1)
    });
    let coarse = CoarseView {
        restarts: restarts.min(3),
        disagreements,
        counts: counts.into_iter().map(|((kind, tag), v)| (kind, tag, log2_bucket(v))).collect(),
        minus_share: halves(minus, total),
        trap_share: halves(traps, rounds),
        acceptance: view.receiver_distill.as_ref().and_then(|d| d.acceptance.clone()),
        transcripts: view
            .receiver_distill
            .as_ref()
            .map(|d| d.transcripts.iter().map(|t| log2_bucket(t.len())).collect())
            .unwrap_or_default(),
    };
    serde_json::to_string(&coarse).expect("coarse view serializes")
}

/// Runs Protocol 3 (and optionally distillation) and returns the
/// collusion's view.
pub fn adversary_view(
    config: &ProtocolConfig,
    collusion: &CollusionSpec,
    variant: Option<DistillVariant>,
) -> Result<AdversaryView, AnalysisError> {
    let (result, log, participants) = match run_protocol3(config, collusion) {
        Ok(run) => (run.result, run.log, run.participants),
        Err(ProtocolError::RestartLimit { partial, .. }) => (partial.result, partial.log, partial.participants),
        Err(e) => return Err(e.into()),
    };
    let report = match variant {
        Some(v) => Some(distill(v, &result, config.theta, config.seed)?),
        None => None,
    };
    Ok(build_view(
        &log,
        &participants,
        collusion,
        config.receiver(),
        report.as_ref().map(|r| &r.receiver_view),
    ))
}

/// Total-variation distance between the coarse-view distributions under
/// senders `s` and `s_prime`, estimated from `trials` independent runs each.
pub fn anonymity_test(
    config: &ProtocolConfig,
    collusion: &CollusionSpec,
    senders: (usize, usize),
    variant: Option<DistillVariant>,
    trials: usize,
    seed: u64,
) -> Result<AnonymityReport, AnalysisError> {
    let (s, s_prime) = senders;
    for idx in [s, s_prime] {
        if idx >= config.n.saturating_sub(1) || collusion.is_corrupted(ParticipantId(idx)) {
            return Err(AnalysisError::SenderPair(s, s_prime));
        }
    }
    if s == s_prime {
        return Err(AnalysisError::SenderPair(s, s_prime));
    }
    if trials == 0 {
        return Err(AnalysisError::Domain("trials must be at least 1".into()));
    }
    let keys: Vec<(String, String)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let a = config.with_sender(s).with_seed(rng::trial_seed(seed, 2 * t));
            let b = config.with_sender(s_prime).with_seed(rng::trial_seed(seed, 2 * t + 1));
            Ok((
                coarse_key(&adversary_view(&a, collusion, variant)?),
                coarse_key(&adversary_view(&b, collusion, variant)?),
            ))
        })
        .collect::<Result<_, AnalysisError>>()?;
    let mut hist: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
    for (a, b) in &keys {
        hist.entry(a).or_default().0 += 1;
        hist.entry(b).or_default().1 += 1;
    }
    let diff: i64 = hist.values().map(|(a, b)| (a - b).abs()).sum();
    Ok(AnonymityReport {
        tv_estimate: diff as f64 / (2.0 * trials as f64),
        trials,
        sender_pair: senders,
        collusion: collusion.clone(),
        distill_variant: variant,
        distinct_views: hist.len(),
    })
}
