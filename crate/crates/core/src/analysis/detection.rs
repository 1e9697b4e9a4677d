use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::disruption_survival;
use super::AnalysisError;
use crate::adversary::{AdversaryStrategy, CollusionSpec, DisruptAction};
use crate::channels::ParticipantId;
use crate::protocol::{run_protocol3_relaxed, ProtocolConfig, ProtocolError};
use crate::rng;

/// Monte Carlo setup for the detection bound.
///
/// Each trial runs `k` rounds of the trap protocol on four participants: an
/// honest distributor P0, a disrupter P1 that attacks everything P0 sends it,
/// the sender P2 and the receiver P3. Every round is one disruption, caught
/// with probability `pξ`. A non-integer `k` is rounded at random per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionExperiment {
    pub p: f64,
    pub xi: f64,
    pub theta: f64,
    pub m: usize,
    pub trials: usize,
    pub disruptions_per_trial: f64,
}

impl DetectionExperiment {
    pub fn with_disruptions(p: f64, xi: f64, k: usize, trials: usize) -> Self {
        Self {
            p,
            xi,
            theta: 0.1,
            m: k,
            trials,
            disruptions_per_trial: k as f64,
        }
    }

    /// `θm(1−p)` disruptions, the disrupted share of actual-mode systems.
    pub fn from_rounds(p: f64, xi: f64, theta: f64, m: usize, trials: usize) -> Self {
        Self {
            p,
            xi,
            theta,
            m,
            trials,
            disruptions_per_trial: theta * m as f64 * (1.0 - p),
        }
    }

    pub fn expected_rate(&self) -> f64 {
        disruption_survival(self.p, self.xi, self.disruptions_per_trial)
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        if self.trials == 0 {
            return Err(AnalysisError::Domain("trials must be at least 1".into()));
        }
        if !(self.disruptions_per_trial >= 0.0 && self.disruptions_per_trial < 1e6) {
            return Err(AnalysisError::Domain(format!(
                "disruption count {} out of range",
                self.disruptions_per_trial
            )));
        }
        for (name, v) in [("p", self.p), ("xi", self.xi)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(AnalysisError::Domain(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub trials: usize,
    pub undetected: usize,
    pub rate: f64,
    /// Binomial standard error at the closed-form rate.
    pub sigma: f64,
    /// Wilson score interval at z = 3.
    pub ci_low: f64,
    pub ci_high: f64,
    pub expected: f64,
}

impl DetectionResult {
    /// Whether the empirical rate lies within `z` standard errors of the
    /// closed form. A zero-variance prediction must match exactly.
    pub fn agrees(&self, z: f64) -> bool {
        (self.rate - self.expected).abs() <= z * self.sigma + 1e-12
    }
}

fn wilson(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let phat = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (phat + z * z / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn trial_undetected(exp: &DetectionExperiment, seed: u64) -> Result<bool, AnalysisError> {
    let k = exp.disruptions_per_trial;
    let whole = k.floor();
    let extra = rng::stream(seed, u64::MAX).random_bool(k - whole);
    let rounds = whole as usize + usize::from(extra);
    let mut config = ProtocolConfig::new(4, rounds, exp.p, exp.theta, 2, seed);
    config.restart_on_disagreement = false;
    let collusion = CollusionSpec {
        corrupted: [ParticipantId(1)].into(),
        strategy: AdversaryStrategy::TrapGuess {
            xi: exp.xi,
            disrupt_action: DisruptAction::Depolarize,
            targets: Some(vec![ParticipantId(0)]),
        },
    };
    let run = match run_protocol3_relaxed(&config, &collusion) {
        Ok(run) => run,
        Err(ProtocolError::RestartLimit { partial, .. }) => *partial,
        Err(e) => return Err(e.into()),
    };
    Ok(run.rounds.iter().all(|r| r.disagreements.is_empty()))
}

/// Fraction of trials in which no disagreement is ever announced.
pub fn monte_carlo_detection(exp: &DetectionExperiment, seed: u64) -> Result<DetectionResult, AnalysisError> {
    exp.validate()?;
    let undetected = (0..exp.trials as u64)
        .into_par_iter()
        .map(|t| trial_undetected(exp, rng::trial_seed(seed, t)).map(usize::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let expected = exp.expected_rate();
    let n = exp.trials as f64;
    let (ci_low, ci_high) = wilson(undetected, exp.trials, 3.0);
    Ok(DetectionResult {
        trials: exp.trials,
        undetected,
        rate: undetected as f64 / n,
        sigma: (expected * (1.0 - expected) / n).sqrt(),
        ci_low,
        ci_high,
        expected,
    })
}
