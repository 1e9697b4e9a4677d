//! Exact simulation of small qubit registers.
//!
//! Qubit `k` of a register is bit `k` of the basis-state index, with bit 0 the
//! least significant. Measuring a qubit removes it from the register: qubits
//! below the measured one keep their index, qubits above it shift down by one.

mod density;
mod statevector;

pub use density::{fidelity, trace_distance, DensityMatrix, StateRef};
pub use statevector::{make_ghz, Basis, Pauli, Statevector, DEFAULT_MAX_QUBITS};
pub(crate) use statevector::sample_index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for exact-math comparisons.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("register size {requested} outside 1..={max}")]
    Size { requested: usize, max: usize },
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    InvalidQubit { qubit: usize, num_qubits: usize },
    #[error("qubits must be distinct, got {0} twice")]
    EqualQubits(usize),
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("partial trace needs a nonempty set of kept qubits")]
    EmptyKeepSet,
    #[error("amplitude vector of length {0} is not a power of two")]
    BadLength(usize),
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("matrix is not a valid density matrix: {0}")]
    InvalidDensity(&'static str),
}

pub type Result<T> = std::result::Result<T, QsimError>;

/// Outcome of a measurement in the {|+⟩, |−⟩} basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DualOutcome {
    Plus,
    Minus,
}

impl DualOutcome {
    /// Contribution to a parity sum: `Minus` counts 1.
    pub fn bit(self) -> u8 {
        match self {
            DualOutcome::Plus => 0,
            DualOutcome::Minus => 1,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            DualOutcome::Minus
        } else {
            DualOutcome::Plus
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            DualOutcome::Plus => DualOutcome::Minus,
            DualOutcome::Minus => DualOutcome::Plus,
        }
    }
}

/// Result of a Bell measurement as two classical bits.
///
/// `bx` marks a bit flip and `bz` a phase flip relative to |Φ+⟩, so the
/// measured state is `(I ⊗ X^bx Z^bz)|Φ+⟩`: (0,0) is |Φ+⟩, (0,1) |Φ−⟩,
/// (1,0) |Ψ+⟩ and (1,1) |Ψ−⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellOutcome {
    pub bx: u8,
    pub bz: u8,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome { bx: 0, bz: 0 },
        BellOutcome { bx: 0, bz: 1 },
        BellOutcome { bx: 1, bz: 0 },
        BellOutcome { bx: 1, bz: 1 },
    ];

    pub fn label(self) -> BellLabel {
        match (self.bx, self.bz) {
            (0, 0) => BellLabel::PhiPlus,
            (0, _) => BellLabel::PhiMinus,
            (_, 0) => BellLabel::PsiPlus,
            _ => BellLabel::PsiMinus,
        }
    }
}

/// The four Bell states by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];

    pub fn outcome(self) -> BellOutcome {
        match self {
            BellLabel::PhiPlus => BellOutcome { bx: 0, bz: 0 },
            BellLabel::PhiMinus => BellOutcome { bx: 0, bz: 1 },
            BellLabel::PsiPlus => BellOutcome { bx: 1, bz: 0 },
            BellLabel::PsiMinus => BellOutcome { bx: 1, bz: 1 },
        }
    }

    pub fn is_phi_plus(self) -> bool {
        self == BellLabel::PhiPlus
    }
}
