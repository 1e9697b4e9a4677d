use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use super::{BellOutcome, DualOutcome, QsimError, Result, TOLERANCE};

pub const DEFAULT_MAX_QUBITS: usize = 14;

/// Branches with probability below this are treated as impossible.
const ZERO_PROB: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Computational,
    Dual,
}

/// Pure state of a small register, stored as `2^num_qubits` amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statevector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

/// GHZ state (|0…0⟩ + |1…1⟩)/√2 on `n` qubits, with the default size cap.
pub fn make_ghz(n: usize) -> Result<Statevector> {
    Statevector::ghz_with_limit(n, DEFAULT_MAX_QUBITS)
}

#[inline]
fn insert_bit(rest: usize, position: usize, bit: usize) -> usize {
    let low = rest & ((1 << position) - 1);
    ((rest >> position) << (position + 1)) | (bit << position) | low
}

impl Statevector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QsimError::BadLength(len));
        }
        let state = Self {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(QsimError::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Builds a state from possibly unnormalized amplitudes.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < ZERO_PROB {
            return Err(QsimError::NotNormalized(0.0));
        }
        Self::new(amplitudes.into_iter().map(|a| a / norm).collect())
    }

    fn from_raw(num_qubits: usize, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << num_qubits);
        Self {
            num_qubits,
            amplitudes,
        }
    }

    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        check_size(num_qubits, DEFAULT_MAX_QUBITS)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        *amps
            .get_mut(index)
            .ok_or(QsimError::InvalidQubit { qubit: index, num_qubits })? = Complex64::new(1.0, 0.0);
        Ok(Self::from_raw(num_qubits, amps))
    }

    pub fn ghz_with_limit(n: usize, max_qubits: usize) -> Result<Self> {
        check_size(n, max_qubits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        amps[(1 << n) - 1] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Ok(Self::from_raw(n, amps))
    }

    /// Single qubit α|0⟩ + β|1⟩, normalized.
    pub fn qubit(alpha: Complex64, beta: Complex64) -> Result<Self> {
        Self::normalized(vec![alpha, beta])
    }

    pub fn dual(outcome: DualOutcome) -> Self {
        let sign = match outcome {
            DualOutcome::Plus => 1.0,
            DualOutcome::Minus => -1.0,
        };
        Self::from_raw(
            1,
            vec![
                Complex64::new(FRAC_1_SQRT_2, 0.0),
                Complex64::new(sign * FRAC_1_SQRT_2, 0.0),
            ],
        )
    }

    /// Two-qubit Bell state `(I ⊗ X^bx Z^bz)|Φ+⟩` on qubits (0, 1).
    pub fn bell(outcome: BellOutcome) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 4];
        let (x, z) = (outcome.bx as usize, outcome.bz);
        let sign = if z == 1 { -1.0 } else { 1.0 };
        // qubit 0 is the first member of the pair, qubit 1 the second
        amps[x << 1] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        amps[1 | ((1 ^ x) << 1)] = Complex64::new(sign * FRAC_1_SQRT_2, 0.0);
        Self::from_raw(2, amps)
    }

    /// Haar-random single-qubit pure state.
    pub fn random_qubit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u: f64 = rng.random();
        let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let cos_half = (1.0 - u).sqrt();
        let sin_half = u.sqrt();
        Self::from_raw(
            1,
            vec![
                Complex64::new(cos_half, 0.0),
                Complex64::from_polar(sin_half, phi),
            ],
        )
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `self` occupies the low qubits of the result, `other` the high ones.
    pub fn tensor(&self, other: &Statevector) -> Result<Self> {
        let total = self.num_qubits + other.num_qubits;
        check_size(total, DEFAULT_MAX_QUBITS)?;
        let mut amps = Vec::with_capacity(1 << total);
        for b in &other.amplitudes {
            for a in &self.amplitudes {
                amps.push(a * b);
            }
        }
        Ok(Self::from_raw(total, amps))
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Statevector) -> Result<Complex64> {
        self.same_dims(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub(crate) fn same_dims(&self, other: &Statevector) -> Result<()> {
        if self.num_qubits != other.num_qubits {
            return Err(QsimError::DimensionMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        Ok(())
    }

    pub(crate) fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(QsimError::InvalidQubit {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    pub fn apply_pauli(&self, qubit: usize, which: Pauli) -> Result<Self> {
        self.check_qubit(qubit)?;
        let mask = 1 << qubit;
        let mut amps = self.amplitudes.clone();
        match which {
            Pauli::X => {
                for i in 0..amps.len() {
                    if i & mask == 0 {
                        amps.swap(i, i | mask);
                    }
                }
            }
            Pauli::Z => {
                for (i, a) in amps.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *a = -*a;
                    }
                }
            }
        }
        Ok(Self::from_raw(self.num_qubits, amps))
    }

    /// Exchanges qubits `a` and `b`.
    pub fn swap_qubits(&self, a: usize, b: usize) -> Result<Self> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        let mut amps = self.amplitudes.clone();
        for (i, amp) in self.amplitudes.iter().enumerate() {
            let (ba, bb) = ((i >> a) & 1, (i >> b) & 1);
            let j = (i & !(1 << a) & !(1 << b)) | (ba << b) | (bb << a);
            amps[j] = *amp;
        }
        Ok(Self::from_raw(self.num_qubits, amps))
    }

    /// Applies a real rotation about Y by `angle` to one qubit:
    /// |0⟩ → cos|0⟩ + sin|1⟩, |1⟩ → −sin|0⟩ + cos|1⟩.
    pub fn rotate_y(&self, qubit: usize, angle: f64) -> Result<Self> {
        self.check_qubit(qubit)?;
        let (s, c) = angle.sin_cos();
        let mask = 1 << qubit;
        let mut amps = self.amplitudes.clone();
        for i in 0..amps.len() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                amps[i] = a0 * c - a1 * s;
                amps[i | mask] = a0 * s + a1 * c;
            }
        }
        Ok(Self::from_raw(self.num_qubits, amps))
    }

    /// Unnormalized post-measurement amplitudes on the remaining qubits,
    /// for projecting `qubit` onto `outcome` of `basis`.
    fn branch(&self, qubit: usize, basis: Basis, outcome: bool) -> Vec<Complex64> {
        let rest_len = 1 << (self.num_qubits - 1);
        let sign = if outcome { -1.0 } else { 1.0 };
        (0..rest_len)
            .map(|r| {
                let a0 = self.amplitudes[insert_bit(r, qubit, 0)];
                let a1 = self.amplitudes[insert_bit(r, qubit, 1)];
                match basis {
                    Basis::Computational => {
                        if outcome {
                            a1
                        } else {
                            a0
                        }
                    }
                    Basis::Dual => (a0 + a1 * sign) * FRAC_1_SQRT_2,
                }
            })
            .collect()
    }

    fn finish_branch(&self, amps: Vec<Complex64>) -> Option<(f64, Statevector)> {
        let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if prob < ZERO_PROB {
            return None;
        }
        let scale = 1.0 / prob.sqrt();
        let amps = amps.into_iter().map(|a| a * scale).collect();
        Some((prob, Self::from_raw(self.num_qubits - 1, amps)))
    }

    /// Probability and collapsed state (with `qubit` removed) for one outcome.
    /// `None` when the branch has zero probability. Requires at least two qubits.
    pub fn project(&self, qubit: usize, basis: Basis, outcome: bool) -> Result<Option<(f64, Statevector)>> {
        self.check_qubit(qubit)?;
        if self.num_qubits < 2 {
            // Measuring the last qubit leaves nothing to return; treat as a size error.
            return Err(QsimError::Size {
                requested: 0,
                max: DEFAULT_MAX_QUBITS,
            });
        }
        Ok(self.finish_branch(self.branch(qubit, basis, outcome)))
    }

    /// Outcome probability without collapsing. Works on single-qubit registers.
    pub fn outcome_probability(&self, qubit: usize, basis: Basis, outcome: bool) -> Result<f64> {
        self.check_qubit(qubit)?;
        if self.num_qubits == 1 {
            let (a0, a1) = (self.amplitudes[0], self.amplitudes[1]);
            return Ok(match (basis, outcome) {
                (Basis::Computational, false) => a0.norm_sqr(),
                (Basis::Computational, true) => a1.norm_sqr(),
                (Basis::Dual, false) => ((a0 + a1) * FRAC_1_SQRT_2).norm_sqr(),
                (Basis::Dual, true) => ((a0 - a1) * FRAC_1_SQRT_2).norm_sqr(),
            });
        }
        Ok(self.branch(qubit, basis, outcome).iter().map(|a| a.norm_sqr()).sum())
    }

    fn sample<R: Rng + ?Sized>(&self, qubit: usize, basis: Basis, rng: &mut R) -> Result<(bool, Option<Statevector>)> {
        let p0 = self.outcome_probability(qubit, basis, false)?;
        let outcome = rng.random::<f64>() >= p0;
        if self.num_qubits == 1 {
            return Ok((outcome, None));
        }
        let amps = self.branch(qubit, basis, outcome);
        let (_, state) = self
            .finish_branch(amps)
            .expect("sampled branch has positive probability");
        Ok((outcome, Some(state)))
    }

    /// Measures `qubit` in the dual basis. The returned register lacks the
    /// measured qubit; measuring a single-qubit register returns `None`.
    pub fn measure_dual<R: Rng + ?Sized>(&self, qubit: usize, rng: &mut R) -> Result<(DualOutcome, Option<Statevector>)> {
        let (bit, rest) = self.sample(qubit, Basis::Dual, rng)?;
        Ok((DualOutcome::from_bit(bit), rest))
    }

    pub fn measure_computational<R: Rng + ?Sized>(&self, qubit: usize, rng: &mut R) -> Result<(u8, Option<Statevector>)> {
        let (bit, rest) = self.sample(qubit, Basis::Computational, rng)?;
        Ok((bit as u8, rest))
    }

    fn bell_branch(&self, q1: usize, q2: usize, outcome: BellOutcome) -> Vec<Complex64> {
        let (lo, hi) = if q1 < q2 { (q1, q2) } else { (q2, q1) };
        let rest_len = 1 << (self.num_qubits - 2);
        let x = outcome.bx as usize;
        let sign = if outcome.bz == 1 { -1.0 } else { 1.0 };
        let index = |r: usize, b1: usize, b2: usize| {
            let (blo, bhi) = if q1 < q2 { (b1, b2) } else { (b2, b1) };
            insert_bit(insert_bit(r, lo, blo), hi, bhi)
        };
        (0..rest_len)
            .map(|r| {
                // ⟨β| = (⟨0,x| + sign ⟨1,1⊕x|)/√2 with q1 first
                let a = self.amplitudes[index(r, 0, x)];
                let b = self.amplitudes[index(r, 1, 1 ^ x)];
                (a + b * sign) * FRAC_1_SQRT_2
            })
            .collect()
    }

    fn check_pair(&self, q1: usize, q2: usize) -> Result<()> {
        self.check_qubit(q1)?;
        self.check_qubit(q2)?;
        if q1 == q2 {
            return Err(QsimError::EqualQubits(q1));
        }
        Ok(())
    }

    /// Probability of each Bell outcome on (q1, q2), in `BellOutcome::ALL` order.
    pub fn bell_probabilities(&self, q1: usize, q2: usize) -> Result<[f64; 4]> {
        self.check_pair(q1, q2)?;
        let mut probs = [0.0; 4];
        for (p, outcome) in probs.iter_mut().zip(BellOutcome::ALL) {
            *p = self.bell_branch(q1, q2, outcome).iter().map(|a| a.norm_sqr()).sum();
        }
        Ok(probs)
    }

    /// Deterministic Bell-basis branch; `None` when the register would be empty
    /// or the branch is impossible.
    pub fn project_bell(&self, q1: usize, q2: usize, outcome: BellOutcome) -> Result<Option<(f64, Statevector)>> {
        self.check_pair(q1, q2)?;
        let amps = self.bell_branch(q1, q2, outcome);
        let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if prob < ZERO_PROB || self.num_qubits == 2 {
            return Ok(None);
        }
        let scale = 1.0 / prob.sqrt();
        Ok(Some((
            prob,
            Self::from_raw(self.num_qubits - 2, amps.into_iter().map(|a| a * scale).collect()),
        )))
    }

    /// Projects (q1, q2) onto the Bell basis; both qubits leave the register.
    /// A two-qubit register yields `None` for the remainder.
    pub fn bell_measure<R: Rng + ?Sized>(
        &self,
        q1: usize,
        q2: usize,
        rng: &mut R,
    ) -> Result<(BellOutcome, Option<Statevector>)> {
        let probs = self.bell_probabilities(q1, q2)?;
        let outcome = sample_index(&probs, rng.random());
        let outcome = BellOutcome::ALL[outcome];
        if self.num_qubits == 2 {
            return Ok((outcome, None));
        }
        let rest = self
            .project_bell(q1, q2, outcome)?
            .map(|(_, s)| s)
            .expect("sampled Bell branch has positive probability");
        Ok((outcome, Some(rest)))
    }

    /// |⟨self|other⟩|².
    pub fn overlap(&self, other: &Statevector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }
}

pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    let target = u * total;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if target < acc {
            return i;
        }
    }
    // u rounded past the last bucket; pick the last nonzero one
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn check_size(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        return Err(QsimError::Size { requested: n, max });
    }
    Ok(())
}
