//! Closed forms, Monte Carlo experiments and numeric checks.

mod anonymity;
mod bounds;
mod detection;
mod lemma1;
mod sweep;

pub use anonymity::{adversary_view, anonymity_test, coarse_key, AnonymityReport, BUCKETING};
pub use bounds::{detection_bound, disruption_survival, min_rounds};
pub use detection::{monte_carlo_detection, DetectionExperiment, DetectionResult};
pub use lemma1::{default_grid, lemma1_check, tradeoff_is_monotone, Lemma1Report, MAX_QUBITS, OUTCOME_CUTOFF};
pub use sweep::{sweep, SweepRow, SweepSpec, SWEEP_COLUMNS};

use thiserror::Error;

use crate::distill::DistillError;
use crate::protocol::ProtocolError;
use crate::qsim::QsimError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("no finite round count reaches the target when pξ = 0 or p = 1")]
    Unbounded,
    #[error("need 1 ≤ corrupted < n ≤ {max}, got n = {n}, corrupted = {m_corrupt}")]
    Scale { n: usize, m_corrupt: usize, max: usize },
    #[error("invalid sender pair ({0}, {1})")]
    SenderPair(usize, usize),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

impl PartialEq for AnalysisError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}
