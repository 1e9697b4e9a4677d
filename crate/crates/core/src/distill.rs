//! Threshold model of one-way distillation over Bell-diagonal ensembles.
//!
//! A group of `r` pairs is accepted iff it carries fewer than `θr` non-Φ+
//! labels. The transcript stands in for the receiver's syndrome announcements:
//! how many checks are sent depends only on `r` and `θ`, and each announced bit
//! is uniform because the receiver's half of every pair is maximally mixed.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::channels::ParticipantId;
use crate::protocol::{EprResult, SharedPair};
use crate::qsim::BellLabel;
use crate::rng::{self, Purpose, StreamKey};

/// Slack for deciding `errors < θr` in floating point; near-equality rejects.
const THRESHOLD_SLACK: f64 = 1e-9;
/// Stream index for the pooled variant, outside any participant id.
const POOL_STREAM: usize = 0xfff;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistillError {
    #[error("theta must lie strictly between 0 and 1, got {0}")]
    Theta(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalEnsemble {
    pub labels: Vec<BellLabel>,
    pub provenance: Vec<ParticipantId>,
}

impl BellDiagonalEnsemble {
    pub fn new(labels: Vec<BellLabel>, distributor: ParticipantId) -> Self {
        let provenance = vec![distributor; labels.len()];
        Self { labels, provenance }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a SharedPair>) -> Self {
        let mut ensemble = Self::default();
        for pair in pairs {
            ensemble.labels.push(pair.label);
            ensemble.provenance.push(pair.distributor);
        }
        ensemble
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn errors(&self) -> usize {
        self.labels.iter().filter(|l| !l.is_phi_plus()).count()
    }

    /// Zero for an empty ensemble.
    pub fn error_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.errors() as f64 / self.len() as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    ReceiverToSender,
    SenderToReceiver,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMessage {
    pub direction: Direction,
    /// Indices of the pairs entering the check.
    pub subset: Vec<usize>,
    pub parity: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillOutcome {
    pub accepted: bool,
    pub distilled_count: usize,
    pub errors: usize,
    pub size: usize,
    pub transcript: Vec<TranscriptMessage>,
}

pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// `errors < θr`, rejecting within [`THRESHOLD_SLACK`] of equality.
pub fn passes_threshold(errors: usize, size: usize, theta: f64) -> bool {
    (errors as f64) < theta * size as f64 - THRESHOLD_SLACK
}

/// Number of syndrome checks announced for a group of `size` pairs.
pub fn check_count(size: usize, theta: f64) -> usize {
    if size == 0 {
        return 0;
    }
    let k = (size as f64 * 2.0 * binary_entropy(theta)).ceil() as usize;
    k.clamp(1, size)
}

/// Reporting figure: ⌊(1−2h(e))r⌋ clamped to at least one pair.
pub fn hashing_yield(errors: usize, size: usize) -> usize {
    if size == 0 {
        return 0;
    }
    let e = errors as f64 / size as f64;
    let rate = 1.0 - 2.0 * binary_entropy(e);
    ((rate * size as f64).floor().max(1.0)) as usize
}

pub fn one_way_distill<R: Rng + ?Sized>(
    ensemble: &BellDiagonalEnsemble,
    theta: f64,
    rng: &mut R,
) -> Result<DistillOutcome, DistillError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(DistillError::Theta(theta));
    }
    let size = ensemble.len();
    let errors = ensemble.errors();
    let transcript = (0..check_count(size, theta))
        .map(|_| {
            let amount = rng.random_range(1..=size);
            let mut subset = index::sample(rng, size, amount).into_vec();
            subset.sort_unstable();
            TranscriptMessage {
                direction: Direction::ReceiverToSender,
                subset,
                parity: rng.random_range(0..2),
            }
        })
        .collect();
    let accepted = passes_threshold(errors, size, theta);
    Ok(DistillOutcome {
        accepted,
        distilled_count: if accepted { hashing_yield(errors, size) } else { 0 },
        errors,
        size,
        transcript,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DistillVariant {
    #[default]
    PerDistributor,
    Combined,
    Reveal,
}

/// What the receiver keeps after the distillation phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReceiverDistillView {
    /// Its own announcements, one transcript per distilled group.
    pub transcripts: Vec<Vec<TranscriptMessage>>,
    /// Present only when the variant tells the receiver which groups passed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<BTreeMap<ParticipantId, bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillReport {
    pub variant: DistillVariant,
    /// Per-distributor outcomes; known to the sender only.
    pub sender_view: BTreeMap<ParticipantId, DistillOutcome>,
    /// Pooled outcome for the combined variant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combined: Option<DistillOutcome>,
    pub receiver_view: ReceiverDistillView,
    pub anonymity_weakening: bool,
}

impl DistillReport {
    /// Number of groups that passed (the pooled group counts once).
    pub fn accepted_groups(&self) -> usize {
        match &self.combined {
            Some(outcome) => usize::from(outcome.accepted),
            None => self.sender_view.values().filter(|o| o.accepted).count(),
        }
    }

    pub fn distilled_total(&self) -> usize {
        match &self.combined {
            Some(outcome) => outcome.distilled_count,
            None => self.sender_view.values().map(|o| o.distilled_count).sum(),
        }
    }
}

fn bucket_rng(seed: u64, index: usize) -> rng::SimRng {
    rng::keyed(seed, StreamKey::new(Purpose::Distill, 0, 0, index, 0))
}

fn per_bucket(result: &EprResult, theta: f64, seed: u64) -> Result<BTreeMap<ParticipantId, DistillOutcome>, DistillError> {
    result
        .collect_by_distributor()
        .into_iter()
        .map(|(d, pairs)| {
            let ensemble = BellDiagonalEnsemble::from_pairs(pairs);
            Ok((d, one_way_distill(&ensemble, theta, &mut bucket_rng(seed, d.0))?))
        })
        .collect()
}

/// Distills each distributor's pairs separately; only the sender learns which
/// groups passed.
pub fn per_distributor_distill(result: &EprResult, theta: f64, seed: u64) -> Result<DistillReport, DistillError> {
    let sender_view = per_bucket(result, theta, seed)?;
    let receiver_view = ReceiverDistillView {
        transcripts: sender_view.values().map(|o| o.transcript.clone()).collect(),
        acceptance: None,
    };
    Ok(DistillReport {
        variant: DistillVariant::PerDistributor,
        sender_view,
        combined: None,
        receiver_view,
        anonymity_weakening: false,
    })
}

/// Pools every pair regardless of provenance and distills once.
pub fn combined_distill(result: &EprResult, theta: f64, seed: u64) -> Result<DistillReport, DistillError> {
    let ensemble = BellDiagonalEnsemble::from_pairs(&result.pairs);
    let outcome = one_way_distill(&ensemble, theta, &mut bucket_rng(seed, POOL_STREAM))?;
    Ok(DistillReport {
        variant: DistillVariant::Combined,
        sender_view: BTreeMap::new(),
        receiver_view: ReceiverDistillView {
            transcripts: vec![outcome.transcript.clone()],
            acceptance: None,
        },
        combined: Some(outcome),
        anonymity_weakening: false,
    })
}

/// Per-distributor distillation with the acceptance map disclosed to the
/// receiver. Unsafe against a colluding receiver.
pub fn reveal_variant_distill(result: &EprResult, theta: f64, seed: u64) -> Result<DistillReport, DistillError> {
    let mut report = per_distributor_distill(result, theta, seed)?;
    report.variant = DistillVariant::Reveal;
    report.receiver_view.acceptance = Some(report.sender_view.iter().map(|(d, o)| (*d, o.accepted)).collect());
    report.anonymity_weakening = true;
    Ok(report)
}

pub fn distill(variant: DistillVariant, result: &EprResult, theta: f64, seed: u64) -> Result<DistillReport, DistillError> {
    match variant {
        DistillVariant::PerDistributor => per_distributor_distill(result, theta, seed),
        DistillVariant::Combined => combined_distill(result, theta, seed),
        DistillVariant::Reveal => reveal_variant_distill(result, theta, seed),
    }
}
