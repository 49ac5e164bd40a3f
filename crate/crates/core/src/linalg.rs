//! Dense complex linear algebra helpers shared by the channel, Clifford and
//! simulator modules. Everything here is plain `nalgebra` on small matrices;
//! qubit-local operator application uses index arithmetic so density-matrix
//! updates stay O(4^n) per one- or two-qubit factor.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// Kronecker product, `a` acting on the more significant (leftmost) factor.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// Max elementwise absolute deviation from the identity of `u† u`.
pub fn unitarity_deviation(u: &CMat) -> f64 {
    let p = u.adjoint() * u;
    let mut dev: f64 = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { C_ONE } else { C_ZERO };
            dev = dev.max((p[(i, j)] - target).norm());
        }
    }
    dev
}

/// Whether `u` and `v` implement the same map up to global phase, tested via
/// |Tr(u† v)| / dim = 1 within `tol`.
pub fn equal_up_to_phase(u: &CMat, v: &CMat, tol: f64) -> bool {
    let dim = u.nrows();
    if v.nrows() != dim || u.ncols() != dim || v.ncols() != dim {
        return false;
    }
    let overlap = (u.adjoint() * v).trace().norm() / dim as f64;
    (overlap - 1.0).abs() <= tol
}

/// Matrix exponential by scaling and squaring with a Taylor series core.
/// Intended for small generator matrices (PTM-sized at most).
pub fn expm(m: &CMat) -> CMat {
    let dim = m.nrows();
    let norm: f64 = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m.map(|c| c / 2f64.powi(squarings as i32));
    let mut term = identity(dim);
    let mut sum = identity(dim);
    for k in 1..=24 {
        term = (&term * &scaled).map(|c| c / k as f64);
        sum += &term;
    }
    let mut out = sum;
    for _ in 0..squarings {
        out = &out * &out;
    }
    out
}

/// Expand the index `group` over the non-target qubits and the local index
/// `local` over `qubits` into a full computational-basis index. Qubit 0 is
/// the leftmost (most significant) factor.
#[inline]
fn expand_index(group: usize, local: usize, qubit_masks: &[usize], rest_mask: usize) -> usize {
    // Deposit the group bits into the positions not covered by qubit_masks.
    let mut idx = 0usize;
    let mut g = group;
    let mut bit = rest_mask;
    // rest_mask has a 1 for every non-target position; walk from LSB.
    while bit != 0 {
        let low = bit & bit.wrapping_neg();
        if g & 1 != 0 {
            idx |= low;
        }
        g >>= 1;
        bit &= bit - 1;
    }
    for (k, mask) in qubit_masks.iter().enumerate() {
        if local & (1 << (qubit_masks.len() - 1 - k)) != 0 {
            idx |= mask;
        }
    }
    idx
}

fn qubit_bit_masks(n: usize, qubits: &[usize]) -> (Vec<usize>, usize) {
    let dim = 1usize << n;
    let masks: Vec<usize> = qubits.iter().map(|&q| dim >> (q + 1)).collect();
    let mut rest = dim - 1;
    for m in &masks {
        rest &= !m;
    }
    (masks, rest)
}

/// Apply a k-qubit unitary to a density matrix in place: rho -> U rho U†.
/// `u` has dimension 2^k with `qubits` ordered most-significant first.
pub fn apply_local_unitary(rho: &mut CMat, u: &CMat, qubits: &[usize], n: usize) {
    let k = qubits.len();
    let ldim = 1usize << k;
    assert_eq!(u.nrows(), ldim);
    let dim = 1usize << n;
    let (masks, rest_mask) = qubit_bit_masks(n, qubits);
    let groups = dim >> k;
    let mut scratch = vec![C_ZERO; ldim];

    // Left multiply rows: rho <- U rho.
    for col in 0..dim {
        for g in 0..groups {
            for (local, s) in scratch.iter_mut().enumerate() {
                *s = rho[(expand_index(g, local, &masks, rest_mask), col)];
            }
            for row_local in 0..ldim {
                let mut acc = C_ZERO;
                for (local, s) in scratch.iter().enumerate() {
                    acc += u[(row_local, local)] * s;
                }
                rho[(expand_index(g, row_local, &masks, rest_mask), col)] = acc;
            }
        }
    }
    // Right multiply columns: rho <- rho U†.
    for row in 0..dim {
        for g in 0..groups {
            for (local, s) in scratch.iter_mut().enumerate() {
                *s = rho[(row, expand_index(g, local, &masks, rest_mask))];
            }
            for col_local in 0..ldim {
                let mut acc = C_ZERO;
                for (local, s) in scratch.iter().enumerate() {
                    acc += s * u[(col_local, local)].conj();
                }
                rho[(row, expand_index(g, col_local, &masks, rest_mask))] = acc;
            }
        }
    }
}

/// Apply a k-qubit Kraus channel to a density matrix: rho -> Σ K rho K†.
pub fn apply_local_kraus(rho: &mut CMat, kraus: &[CMat], qubits: &[usize], n: usize) {
    let mut acc = CMat::zeros(rho.nrows(), rho.ncols());
    for k in kraus {
        let mut term = rho.clone();
        apply_local_unitary(&mut term, k, qubits, n);
        acc += term;
    }
    *rho = acc;
}

/// Multiply a diagonal phase factor on the given qubit pair:
/// rho -> D rho D† where D = diag over the pair's basis with `phases`.
pub fn apply_local_diagonal(rho: &mut CMat, phases: &[Complex64], qubits: &[usize], n: usize) {
    let k = qubits.len();
    let ldim = 1usize << k;
    assert_eq!(phases.len(), ldim);
    let dim = 1usize << n;
    let (masks, _) = qubit_bit_masks(n, qubits);
    let local_of = |idx: usize| -> usize {
        let mut local = 0usize;
        for (pos, m) in masks.iter().enumerate() {
            if idx & m != 0 {
                local |= 1 << (k - 1 - pos);
            }
        }
        local
    };
    for row in 0..dim {
        let pr = phases[local_of(row)];
        for col in 0..dim {
            rho[(row, col)] *= pr * phases[local_of(col)].conj();
        }
    }
}

/// Partial trace keeping `keep` (ordered most-significant-first in the output).
pub fn partial_trace(rho: &CMat, keep: &[usize], n: usize) -> CMat {
    let dim = 1usize << n;
    assert_eq!(rho.nrows(), dim);
    let k = keep.len();
    let ldim = 1usize << k;
    let (masks, rest_mask) = qubit_bit_masks(n, keep);
    let groups = dim >> k;
    let mut out = CMat::zeros(ldim, ldim);
    for a in 0..ldim {
        for b in 0..ldim {
            let mut acc = C_ZERO;
            for g in 0..groups {
                acc += rho[(
                    expand_index(g, a, &masks, rest_mask),
                    expand_index(g, b, &masks, rest_mask),
                )];
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Embed a k-qubit operator into the full n-qubit space (dense; test oracle
/// and PTM construction only).
pub fn embed(op: &CMat, qubits: &[usize], n: usize) -> CMat {
    let dim = 1usize << n;
    let k = qubits.len();
    let ldim = 1usize << k;
    assert_eq!(op.nrows(), ldim);
    let (masks, _) = qubit_bit_masks(n, qubits);
    let local_of = |idx: usize| -> usize {
        let mut local = 0usize;
        for (pos, m) in masks.iter().enumerate() {
            if idx & m != 0 {
                local |= 1 << (k - 1 - pos);
            }
        }
        local
    };
    let rest_of = |idx: usize| -> usize {
        let mut rest = idx;
        for m in &masks {
            rest &= !m;
        }
        rest
    };
    let mut out = CMat::zeros(dim, dim);
    for row in 0..dim {
        for col in 0..dim {
            if rest_of(row) == rest_of(col) {
                out[(row, col)] = op[(local_of(row), local_of(col))];
            }
        }
    }
    out
}
