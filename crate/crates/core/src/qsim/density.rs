use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::{QsimError, Result, Statevector, TOLERANCE};

/// Mixed state of a small register. Index convention matches [`Statevector`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_pure(state: &Statevector) -> Self {
        let dim = state.amplitudes().len();
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        let entries = &v * v.adjoint();
        debug_assert_eq!(entries.nrows(), dim);
        Self {
            num_qubits: state.num_qubits(),
            entries,
        }
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let dim = 1 << num_qubits;
        Self {
            num_qubits,
            entries: DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// Wraps a matrix after checking it is Hermitian, unit-trace and PSD.
    pub fn try_from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        let dim = entries.nrows();
        if dim < 2 || !dim.is_power_of_two() || entries.ncols() != dim {
            return Err(QsimError::BadLength(dim));
        }
        let rho = Self {
            num_qubits: dim.trailing_zeros() as usize,
            entries,
        };
        rho.validate()?;
        Ok(rho)
    }

    pub fn validate(&self) -> Result<()> {
        let herm_err = max_abs(&(&self.entries - self.entries.adjoint()));
        if herm_err > TOLERANCE {
            return Err(QsimError::InvalidDensity("not Hermitian"));
        }
        if (self.trace() - 1.0).abs() > TOLERANCE {
            return Err(QsimError::InvalidDensity("trace differs from 1"));
        }
        if self.eigenvalues().iter().any(|&l| l < -TOLERANCE) {
            return Err(QsimError::InvalidDensity("negative eigenvalue"));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.entries).0
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn expectation(&self, state: &Statevector) -> Result<f64> {
        if state.num_qubits() != self.num_qubits {
            return Err(QsimError::DimensionMismatch {
                left: self.num_qubits,
                right: state.num_qubits(),
            });
        }
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Ok((v.adjoint() * &self.entries * &v)[(0, 0)].re)
    }

    /// Reduced state on `keep`. Kept qubits are renumbered in ascending order
    /// of their original index.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(QsimError::EmptyKeepSet);
        }
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        for w in kept.windows(2) {
            if w[0] == w[1] {
                return Err(QsimError::EqualQubits(w[0]));
            }
        }
        if let Some(&q) = kept.iter().find(|&&q| q >= self.num_qubits) {
            return Err(QsimError::InvalidQubit {
                qubit: q,
                num_qubits: self.num_qubits,
            });
        }
        let traced: Vec<usize> = (0..self.num_qubits).filter(|q| !kept.contains(q)).collect();
        let dim_kept = 1 << kept.len();
        let dim_traced = 1 << traced.len();
        let mut out = DMatrix::<Complex64>::zeros(dim_kept, dim_kept);
        for a in 0..dim_kept {
            let ia = scatter(a, &kept);
            for b in 0..dim_kept {
                let ib = scatter(b, &kept);
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..dim_traced {
                    let it = scatter(t, &traced);
                    acc += self.entries[(ia | it, ib | it)];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(Self {
            num_qubits: kept.len(),
            entries: out,
        })
    }
}

pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Spreads the low bits of `value` onto the bit positions in `positions`.
fn scatter(value: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &p)| acc | (((value >> i) & 1) << p))
}

fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    // symmetrize away rounding noise before decomposing
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (values, vectors) = hermitian_eigen(m);
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
    ));
    &vectors * diag * vectors.adjoint()
}

/// Either kind of state, for metrics that accept both.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a Statevector),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a Statevector> for StateRef<'a> {
    fn from(s: &'a Statevector) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    fn num_qubits(&self) -> usize {
        match self {
            StateRef::Pure(s) => s.num_qubits(),
            StateRef::Mixed(r) => r.num_qubits(),
        }
    }
}

/// Squared (Uhlmann) fidelity: |⟨a|b⟩|² for pure states, ⟨ψ|ρ|ψ⟩ for a pure
/// and a mixed state, (Tr √(√ρ σ √ρ))² for two mixed states.
pub fn fidelity<'a, 'b>(a: impl Into<StateRef<'a>>, b: impl Into<StateRef<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    if a.num_qubits() != b.num_qubits() {
        return Err(QsimError::DimensionMismatch {
            left: a.num_qubits(),
            right: b.num_qubits(),
        });
    }
    let f = match (a, b) {
        (StateRef::Pure(x), StateRef::Pure(y)) => x.overlap(y)?,
        (StateRef::Pure(x), StateRef::Mixed(r)) | (StateRef::Mixed(r), StateRef::Pure(x)) => r.expectation(x)?,
        (StateRef::Mixed(r), StateRef::Mixed(s)) => {
            let root = psd_sqrt(&r.entries);
            let inner = &root * &s.entries * &root;
            let (values, _) = hermitian_eigen(&inner);
            let t: f64 = values.iter().map(|l| l.max(0.0).sqrt()).sum();
            t * t
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// ½‖a − b‖₁, from the eigenvalues of the Hermitian difference.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.num_qubits != b.num_qubits {
        return Err(QsimError::DimensionMismatch {
            left: a.num_qubits,
            right: b.num_qubits,
        });
    }
    let diff = &a.entries - &b.entries;
    let (values, _) = hermitian_eigen(&diff);
    Ok((0.5 * values.iter().map(|l| l.abs()).sum::<f64>()).clamp(0.0, 1.0))
}
