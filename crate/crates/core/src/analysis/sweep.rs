use serde::{Deserialize, Serialize};

use super::{detection_bound, min_rounds, monte_carlo_detection, AnalysisError, DetectionExperiment};
use crate::rng;

fn default_target() -> f64 {
    0.01
}

fn default_trials() -> usize {
    10_000
}

/// Cartesian grid over (p, ξ, θ, m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub xi: Vec<f64>,
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Undetected-disruption probability used for the `min_rounds` column.
    #[serde(default = "default_target")]
    pub target: f64,
}

/// Column order of [`SweepRow`] in CSV output.
pub const SWEEP_COLUMNS: [&str; 14] = [
    "seed",
    "p",
    "xi",
    "theta",
    "m",
    "bound",
    "min_rounds",
    "disruptions",
    "trials",
    "undetected",
    "mc_rate",
    "ci_low",
    "ci_high",
    "bound_in_ci",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Seed of the whole sweep; point `i` uses `trial_seed(seed, i)`.
    pub seed: u64,
    pub p: f64,
    pub xi: f64,
    pub theta: f64,
    pub m: usize,
    pub bound: f64,
    /// Empty when no finite `m` reaches the target.
    pub min_rounds: Option<usize>,
    pub disruptions: f64,
    pub trials: usize,
    pub undetected: usize,
    pub mc_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound_in_ci: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let unit = |name: &str, v: f64, open: bool| {
            let ok = if open { v > 0.0 && v < 1.0 } else { (0.0..=1.0).contains(&v) };
            if ok {
                Ok(())
            } else {
                Err(AnalysisError::Domain(format!("{name} = {v} out of range")))
            }
        };
        self.p.iter().try_for_each(|&v| unit("p", v, false))?;
        self.xi.iter().try_for_each(|&v| unit("xi", v, false))?;
        self.theta.iter().try_for_each(|&v| unit("theta", v, true))?;
        unit("target", self.target, true)?;
        if self.trials == 0 {
            return Err(AnalysisError::Domain("trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<(f64, f64, f64, usize)> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &xi in &self.xi {
                for &theta in &self.theta {
                    for &m in &self.m {
                        out.push((p, xi, theta, m));
                    }
                }
            }
        }
        out
    }
}

/// One row per grid point, in p-major order.
pub fn sweep(spec: &SweepSpec, seed: u64) -> Result<Vec<SweepRow>, AnalysisError> {
    spec.validate()?;
    spec.points()
        .into_iter()
        .enumerate()
        .map(|(i, (p, xi, theta, m))| {
            let bound = detection_bound(p, xi, theta, m)?;
            let rounds = match min_rounds(p, xi, theta, spec.target) {
                Ok(r) => Some(r),
                Err(AnalysisError::Unbounded) => None,
                Err(e) => return Err(e),
            };
            let exp = DetectionExperiment::from_rounds(p, xi, theta, m, spec.trials);
            let mc = monte_carlo_detection(&exp, rng::trial_seed(seed, i as u64))?;
            Ok(SweepRow {
                seed,
                p,
                xi,
                theta,
                m,
                bound,
                min_rounds: rounds,
                disruptions: exp.disruptions_per_trial,
                trials: mc.trials,
                undetected: mc.undetected,
                mc_rate: mc.rate,
                ci_low: mc.ci_low,
                ci_high: mc.ci_high,
                bound_in_ci: (mc.ci_low..=mc.ci_high).contains(&bound),
            })
        })
        .collect()
}
