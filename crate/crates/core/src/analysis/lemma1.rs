use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use super::AnalysisError;
use crate::qsim::{make_ghz, trace_distance, DensityMatrix, DualOutcome, Statevector};

/// Outcomes below this probability are ignored when maximizing the distance.
pub const OUTCOME_CUTOFF: f64 = 1e-6;
/// Largest register handled with dense density matrices here.
pub const MAX_QUBITS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    /// Rotation angle of every corrupted qubit's measurement basis.
    pub angle: f64,
    pub measurement: String,
    /// Average probability of naming the dual product state correctly.
    pub distinguish_prob: f64,
    /// Largest trace distance between the honest qubits' conditional state and
    /// the state predicted by a dual-basis outcome.
    pub collapse_distance: f64,
    pub cutoff: f64,
}

/// The 21 angles `kπ/80`, spanning computational (0) to dual (π/4).
pub fn default_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * FRAC_PI_4 / 20.0).collect()
}

fn product(states: impl IntoIterator<Item = Statevector>) -> Result<Statevector, AnalysisError> {
    let mut acc: Option<Statevector> = None;
    for s in states {
        acc = Some(match acc {
            None => s,
            Some(prev) => prev.tensor(&s)?,
        });
    }
    acc.ok_or_else(|| AnalysisError::Domain("empty product".into()))
}

fn bits(index: usize, count: usize) -> impl Iterator<Item = bool> {
    (0..count).map(move |k| (index >> k) & 1 == 1)
}

/// Measurement basis vector `y` rotated by `t`: `Ry(2t)|y⟩`.
fn rotated(t: f64, y: bool) -> Result<Statevector, AnalysisError> {
    Ok(Statevector::basis_state(1, usize::from(y))?.rotate_y(0, t)?)
}

fn projector(state: &Statevector) -> DMatrix<Complex64> {
    let a = state.amplitudes();
    DMatrix::from_fn(a.len(), a.len(), |i, j| a[i] * a[j].conj())
}

/// Conditional state of the honest qubits after projecting the low
/// `m` qubits of `rho` onto `phi`, with the branch probability.
fn condition(rho: &DMatrix<Complex64>, phi: &Statevector, honest: usize) -> Result<(f64, DensityMatrix), AnalysisError> {
    let m = phi.num_qubits();
    let p = DMatrix::<Complex64>::identity(1 << honest, 1 << honest).kronecker(&projector(phi));
    let branch = &p * rho * &p;
    let prob = branch.trace().re;
    let normalized = DensityMatrix::try_from_matrix(branch / Complex64::new(prob, 0.0))?;
    let keep: Vec<usize> = (m..m + honest).collect();
    Ok((prob, normalized.partial_trace(&keep)?))
}

/// Evaluates the rotated-product-basis family on GHZ(`n`) with the first
/// `m_corrupt` qubits corrupted, one report per grid angle.
pub fn lemma1_check(n: usize, m_corrupt: usize, grid: &[f64]) -> Result<Vec<Lemma1Report>, AnalysisError> {
    if n > MAX_QUBITS || m_corrupt == 0 || m_corrupt >= n {
        return Err(AnalysisError::Scale { n, m_corrupt, max: MAX_QUBITS });
    }
    if let Some(t) = grid.iter().find(|t| !(0.0..=FRAC_PI_4 + 1e-12).contains(*t)) {
        return Err(AnalysisError::Domain(format!("angle {t} outside [0, π/4]")));
    }
    let m = m_corrupt;
    let honest = n - m;
    let ghz = make_ghz(n)?;
    let rho = projector(&ghz);
    let inputs: Vec<Statevector> = (0..1usize << m)
        .map(|x| product(bits(x, m).map(|b| Statevector::dual(DualOutcome::from_bit(b)))))
        .collect::<Result<_, _>>()?;

    grid.iter()
        .map(|&t| {
            let mut success = 0.0;
            let mut distance: f64 = 0.0;
            for y in 0..1usize << m {
                let b = product(bits(y, m).map(|bit| rotated(t, bit)).collect::<Result<Vec<_>, _>>()?)?;
                // maximum-likelihood guess, lowest index on ties
                let mut best = (0, -1.0);
                for (x, input) in inputs.iter().enumerate() {
                    let likelihood = b.overlap(input)?;
                    if likelihood > best.1 + 1e-12 {
                        best = (x, likelihood);
                    }
                }
                success += best.1;

                let (prob, actual) = condition(&rho, &b, honest)?;
                if prob < OUTCOME_CUTOFF {
                    continue;
                }
                let (_, predicted) = condition(&rho, &inputs[best.0], honest)?;
                distance = distance.max(trace_distance(&actual, &predicted)?);
            }
            Ok(Lemma1Report {
                angle: t,
                measurement: format!("rotated product basis, t = {t:.6}"),
                distinguish_prob: success / (1usize << m) as f64,
                collapse_distance: distance,
                cutoff: OUTCOME_CUTOFF,
            })
        })
        .collect()
}

/// Checks that the collapse distance never increases as the distinguishing
/// probability grows.
pub fn tradeoff_is_monotone(reports: &[Lemma1Report], tol: f64) -> bool {
    let mut sorted: Vec<&Lemma1Report> = reports.iter().collect();
    sorted.sort_by(|a, b| a.distinguish_prob.total_cmp(&b.distinguish_prob));
    sorted
        .windows(2)
        .all(|w| w[1].collapse_distance <= w[0].collapse_distance + tol)
}
