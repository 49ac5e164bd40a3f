//! Pauli strings with phase tracking.
//!
//! A string is stored as `i^k · X^x Z^z` with one x/z bit per qubit. Qubit 0
//! is the leftmost tensor factor everywhere in this crate, and the Pauli
//! basis for transfer matrices is ordered lexicographically in {I,X,Y,Z}^n
//! with qubit 0 as the most significant digit.

use crate::linalg::{kron, CMat, C_I, C_ONE, C_ZERO};
use crate::{LfError, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliLabel {
    I,
    X,
    Y,
    Z,
}

impl PauliLabel {
    pub fn as_char(self) -> char {
        match self {
            PauliLabel::I => 'I',
            PauliLabel::X => 'X',
            PauliLabel::Y => 'Y',
            PauliLabel::Z => 'Z',
        }
    }

    fn from_char(c: char) -> Result<Self> {
        Ok(match c {
            'I' => PauliLabel::I,
            'X' => PauliLabel::X,
            'Y' => PauliLabel::Y,
            'Z' => PauliLabel::Z,
            other => {
                return Err(LfError::InvalidValue(format!(
                    "unknown Pauli label '{other}'"
                )))
            }
        })
    }

    pub fn matrix(self) -> CMat {
        match self {
            PauliLabel::I => CMat::from_row_slice(2, 2, &[C_ONE, C_ZERO, C_ZERO, C_ONE]),
            PauliLabel::X => CMat::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ONE, C_ZERO]),
            PauliLabel::Y => CMat::from_row_slice(2, 2, &[C_ZERO, -C_I, C_I, C_ZERO]),
            PauliLabel::Z => CMat::from_row_slice(2, 2, &[C_ONE, C_ZERO, C_ZERO, -C_ONE]),
        }
    }
}

/// An n-qubit Pauli operator `i^phase_pow · X^x Z^z` (n ≤ 64).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    /// Power of i in front of the X^x Z^z product, mod 4.
    phase_pow: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            x: 0,
            z: 0,
            phase_pow: 0,
        }
    }

    /// Build from per-qubit labels; the result is the Hermitian Pauli
    /// `⊗_j P_j` (each Y folds a factor of i into the phase bookkeeping).
    pub fn from_labels(labels: &[PauliLabel]) -> Self {
        let mut x = 0u64;
        let mut z = 0u64;
        let mut phase = 0u8;
        for (j, l) in labels.iter().enumerate() {
            let bit = 1u64 << j;
            match l {
                PauliLabel::I => {}
                PauliLabel::X => x |= bit,
                PauliLabel::Z => z |= bit,
                PauliLabel::Y => {
                    x |= bit;
                    z |= bit;
                    phase = (phase + 1) % 4; // Y = i·XZ
                }
            }
        }
        Self {
            n: labels.len(),
            x,
            z,
            phase_pow: phase,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let labels: Result<Vec<PauliLabel>> = s.chars().map(PauliLabel::from_char).collect();
        Ok(Self::from_labels(&labels?))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self, qubit: usize) -> PauliLabel {
        let bit = 1u64 << qubit;
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => PauliLabel::I,
            (true, false) => PauliLabel::X,
            (false, true) => PauliLabel::Z,
            (true, true) => PauliLabel::Y,
        }
    }

    pub fn labels(&self) -> Vec<PauliLabel> {
        (0..self.n).map(|q| self.label(q)).collect()
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// Phase as a complex unit, i^phase_pow relative to the X^x Z^z product.
    /// For label-built strings this folds back so that the full operator is
    /// `sign() · ⊗_j P_j` with `sign() ∈ {1, -1, i, -i}`.
    pub fn sign(&self) -> Complex64 {
        // Convert i^phase_pow X^x Z^z into (phase) · (Hermitian labels).
        let ys = (self.x & self.z).count_ones() as u8;
        // Hermitian form carries i^ys, so residual phase is phase_pow - ys.
        let k = (self.phase_pow + 4 - (ys % 4)) % 4;
        match k {
            0 => C_ONE,
            1 => C_I,
            2 => -C_ONE,
            _ => -C_I,
        }
    }

    /// Set the residual phase (relative to the Hermitian label product).
    pub fn with_sign(mut self, sign: Complex64) -> Self {
        let k = if (sign - C_ONE).norm() < 1e-9 {
            0
        } else if (sign - C_I).norm() < 1e-9 {
            1
        } else if (sign + C_ONE).norm() < 1e-9 {
            2
        } else {
            3
        };
        let ys = ((self.x & self.z).count_ones() % 4) as u8;
        self.phase_pow = (k + ys) % 4;
        self
    }

    pub fn mul(&self, other: &PauliString) -> PauliString {
        assert_eq!(self.n, other.n);
        // Z^z1 X^x2 = (-1)^{|z1 & x2|} X^x2 Z^z1.
        let swaps = (self.z & other.x).count_ones() as u8;
        PauliString {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase_pow: (self.phase_pow + other.phase_pow + 2 * (swaps % 2)) % 4,
        }
    }

    /// Symplectic inner product ⟨a,b⟩ = x_a·z_b + z_a·x_b mod 2.
    pub fn symplectic_product(&self, other: &PauliString) -> u8 {
        let t = (self.x & other.z).count_ones() + (self.z & other.x).count_ones();
        (t % 2) as u8
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        self.symplectic_product(other) == 0
    }

    /// Dense matrix including the phase. Capped well below u64 range; the
    /// crate only needs this for ≤4-qubit transfer-matrix work.
    pub fn to_matrix(&self) -> CMat {
        assert!(self.n <= 12, "dense Pauli matrices capped at 12 qubits");
        let mut m = CMat::from_row_slice(1, 1, &[self.sign()]);
        for q in 0..self.n {
            m = kron(&m, &self.label(q).matrix());
        }
        m
    }

    /// Index in the lexicographic {I,X,Y,Z}^n ordering, qubit 0 most
    /// significant: I=0, X=1, Y=2, Z=3.
    pub fn basis_index(&self) -> usize {
        let mut idx = 0usize;
        for q in 0..self.n {
            let digit = match self.label(q) {
                PauliLabel::I => 0,
                PauliLabel::X => 1,
                PauliLabel::Y => 2,
                PauliLabel::Z => 3,
            };
            idx = idx * 4 + digit;
        }
        idx
    }

    /// Inverse of [`basis_index`]: the Hermitian Pauli at position `idx`.
    pub fn from_basis_index(n: usize, idx: usize) -> Self {
        let mut labels = vec![PauliLabel::I; n];
        let mut rem = idx;
        for q in (0..n).rev() {
            labels[q] = match rem % 4 {
                0 => PauliLabel::I,
                1 => PauliLabel::X,
                2 => PauliLabel::Y,
                _ => PauliLabel::Z,
            };
            rem /= 4;
        }
        Self::from_labels(&labels)
    }

    /// X/Z bit views (qubit j is bit j).
    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    /// Raw phase exponent k in the i^k · X^x Z^z decomposition.
    pub(crate) fn phase_pow(&self) -> u8 {
        self.phase_pow
    }

    /// Phase-only string i^k on n qubits (identity operator content).
    pub(crate) fn phase_identity(n: usize, phase_pow: u8) -> Self {
        Self {
            n,
            x: 0,
            z: 0,
            phase_pow: phase_pow % 4,
        }
    }

    /// Single-generator strings.
    pub(crate) fn x_generator(n: usize, qubit: usize) -> Self {
        Self {
            n,
            x: 1 << qubit,
            z: 0,
            phase_pow: 0,
        }
    }

    pub(crate) fn z_generator(n: usize, qubit: usize) -> Self {
        Self {
            n,
            x: 0,
            z: 1 << qubit,
            phase_pow: 0,
        }
    }

    /// Re-embed a small string into `n` qubits at the given positions,
    /// preserving the phase bookkeeping.
    pub(crate) fn embed(&self, n: usize, positions: &[usize]) -> Self {
        assert_eq!(positions.len(), self.n);
        let mut x = 0u64;
        let mut z = 0u64;
        for (local, &pos) in positions.iter().enumerate() {
            if self.x & (1 << local) != 0 {
                x |= 1 << pos;
            }
            if self.z & (1 << local) != 0 {
                z |= 1 << pos;
            }
        }
        Self {
            n,
            x,
            z,
            phase_pow: self.phase_pow,
        }
    }

    pub fn from_bits(n: usize, x: u64, z: u64) -> Self {
        // Hermitian representative of the (x, z) coset.
        let ys = ((x & z).count_ones() % 4) as u8;
        Self {
            n,
            x,
            z,
            phase_pow: ys,
        }
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sign = self.sign();
        if (sign - C_ONE).norm() < 1e-9 {
            write!(f, "+")?;
        } else if (sign + C_ONE).norm() < 1e-9 {
            write!(f, "-")?;
        } else if (sign - C_I).norm() < 1e-9 {
            write!(f, "+i")?;
        } else {
            write!(f, "-i")?;
        }
        for q in 0..self.n {
            write!(f, "{}", self.label(q).as_char())?;
        }
        Ok(())
    }
}
