//! Clifford tableaus on one and two qubits, used to track randomized
//! sequences and synthesize the closing inverse layer into native gates.
//!
//! Synthesis is table-driven: the 24-element single-qubit group is
//! enumerated once with minimal-X90 Euler decompositions, and the two-qubit
//! group (11520 elements) gets a shortest-path table per native gate kind
//! ordered by (two-qubit gate count, X90 count), so inverses always use at
//! most 3 native two-qubit gates.

use crate::gates::{x90_unitary, Op, TwoQubitGateKind};
use crate::linalg::{embed, equal_up_to_phase, CMat};
use crate::pauli::PauliString;
use crate::{LfError, Result};
use std::collections::HashMap;
use std::sync::OnceLock;

/// Conjugation action of a Clifford unitary on 1 or 2 qubits, stored as the
/// signed Pauli images of the X and Z generators.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CliffordTableau {
    n: usize,
    x_img: Vec<PauliString>,
    z_img: Vec<PauliString>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            x_img: (0..n).map(|q| PauliString::x_generator(n, q)).collect(),
            z_img: (0..n).map(|q| PauliString::z_generator(n, q)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Image of an arbitrary signed Pauli under conjugation.
    pub fn conjugate(&self, p: &PauliString) -> PauliString {
        assert_eq!(p.n(), self.n);
        let mut acc = PauliString::phase_identity(self.n, p.phase_pow());
        for j in 0..self.n {
            if p.x_bits() & (1 << j) != 0 {
                acc = acc.mul(&self.x_img[j]);
            }
        }
        for j in 0..self.n {
            if p.z_bits() & (1 << j) != 0 {
                acc = acc.mul(&self.z_img[j]);
            }
        }
        acc
    }

    /// Tableau of `then · self` as a circuit (apply `self` first).
    pub fn then(&self, then: &CliffordTableau) -> CliffordTableau {
        assert_eq!(self.n, then.n);
        CliffordTableau {
            n: self.n,
            x_img: self.x_img.iter().map(|p| then.conjugate(p)).collect(),
            z_img: self.z_img.iter().map(|p| then.conjugate(p)).collect(),
        }
    }

    /// Apply a sub-tableau on the listed qubits of a larger register.
    pub fn then_on(&self, sub: &CliffordTableau, qubits: &[usize]) -> CliffordTableau {
        assert_eq!(sub.n, qubits.len());
        let conj = |p: &PauliString| conjugate_on_subset(p, sub, qubits);
        CliffordTableau {
            n: self.n,
            x_img: self.x_img.iter().map(conj).collect(),
            z_img: self.z_img.iter().map(conj).collect(),
        }
    }

    pub fn inverse(&self) -> CliffordTableau {
        let rows = 2 * self.n;
        // Symplectic matrix over GF(2): column for each generator image.
        let mut m = vec![0u8; rows * rows];
        let bits_of = |p: &PauliString| -> Vec<u8> {
            (0..self.n)
                .map(|q| (p.x_bits() >> q & 1) as u8)
                .chain((0..self.n).map(|q| (p.z_bits() >> q & 1) as u8))
                .collect()
        };
        for (col, img) in self.x_img.iter().chain(self.z_img.iter()).enumerate() {
            for (row, b) in bits_of(img).into_iter().enumerate() {
                m[row * rows + col] = b;
            }
        }
        let minv = gf2_inverse(&m, rows).expect("tableau symplectic part invertible");
        let pick = |col: usize| -> PauliString {
            let mut x = 0u64;
            let mut z = 0u64;
            for q in 0..self.n {
                if minv[q * rows + col] == 1 {
                    x |= 1 << q;
                }
                if minv[(self.n + q) * rows + col] == 1 {
                    z |= 1 << q;
                }
            }
            PauliString::from_bits(self.n, x, z)
        };
        let mut x_img = Vec::with_capacity(self.n);
        let mut z_img = Vec::with_capacity(self.n);
        for q in 0..self.n {
            let mut cand = pick(q);
            // Fix the sign so that conj(cand) = +X_q exactly.
            let target = PauliString::x_generator(self.n, q);
            if self.conjugate(&cand) != target {
                cand = cand.mul(&PauliString::phase_identity(self.n, 2));
                debug_assert_eq!(self.conjugate(&cand), target);
            }
            x_img.push(cand);
        }
        for q in 0..self.n {
            let mut cand = pick(self.n + q);
            let target = PauliString::z_generator(self.n, q);
            if self.conjugate(&cand) != target {
                cand = cand.mul(&PauliString::phase_identity(self.n, 2));
                debug_assert_eq!(self.conjugate(&cand), target);
            }
            z_img.push(cand);
        }
        CliffordTableau {
            n: self.n,
            x_img,
            z_img,
        }
    }

    /// Build a tableau from a dense unitary (must be Clifford).
    pub fn from_unitary(n: usize, u: &CMat) -> Result<Self> {
        if n == 0 || n > 2 {
            return Err(LfError::UnsupportedQubitCount(n));
        }
        let dev = crate::linalg::unitarity_deviation(u);
        if dev > 1e-8 {
            return Err(LfError::NotUnitary(dev));
        }
        let match_pauli = |m: &CMat| -> Result<PauliString> {
            for idx in 0..1usize << (2 * n) {
                let p = PauliString::from_basis_index(n, idx);
                let pd = p.to_matrix();
                if (m - &pd).iter().all(|c| c.norm() < 1e-8) {
                    return Ok(p);
                }
                if (m + &pd).iter().all(|c| c.norm() < 1e-8) {
                    return Ok(p.mul(&PauliString::phase_identity(n, 2)));
                }
            }
            Err(LfError::InvalidValue(
                "unitary is not a Clifford operation".into(),
            ))
        };
        let mut x_img = Vec::new();
        let mut z_img = Vec::new();
        for q in 0..n {
            let g = PauliString::x_generator(n, q).to_matrix();
            x_img.push(match_pauli(&(u * g * u.adjoint()))?);
        }
        for q in 0..n {
            let g = PauliString::z_generator(n, q).to_matrix();
            z_img.push(match_pauli(&(u * g * u.adjoint()))?);
        }
        Ok(Self { n, x_img, z_img })
    }

    /// Packed key: 5 bits per generator image (x bits, z bits, sign).
    fn key(&self) -> u64 {
        let mut key = 0u64;
        for img in self.x_img.iter().chain(self.z_img.iter()) {
            let sign_bit = u64::from(img.phase_pow() == 2 || img.phase_pow() == 3);
            let chunk = img.x_bits() | (img.z_bits() << self.n) | (sign_bit << (2 * self.n));
            key = (key << (2 * self.n + 1)) | chunk;
        }
        key
    }
}

/// Conjugate an n-qubit Pauli by a small tableau acting on `qubits`.
pub fn conjugate_on_subset(
    p: &PauliString,
    tableau: &CliffordTableau,
    qubits: &[usize],
) -> PauliString {
    let n = p.n();
    let k = qubits.len();
    assert_eq!(tableau.n, k);
    let mut acc = PauliString::phase_identity(n, p.phase_pow());
    for j in 0..n {
        if p.x_bits() & (1 << j) != 0 {
            let img = match qubits.iter().position(|&q| q == j) {
                Some(local) => tableau.x_img[local].embed(n, qubits),
                None => PauliString::x_generator(n, j),
            };
            acc = acc.mul(&img);
        }
    }
    for j in 0..n {
        if p.z_bits() & (1 << j) != 0 {
            let img = match qubits.iter().position(|&q| q == j) {
                Some(local) => tableau.z_img[local].embed(n, qubits),
                None => PauliString::z_generator(n, j),
            };
            acc = acc.mul(&img);
        }
    }
    acc
}

/// Conjugate an n-qubit Pauli through a native op (Rz angles must be
/// multiples of π/2).
pub fn conjugate_through_op(p: &PauliString, op: &Op) -> Result<PauliString> {
    match op {
        Op::Barrier => Ok(*p),
        Op::X90 { q } => Ok(conjugate_on_subset(p, x90_tableau(), &[*q])),
        Op::Rz { q, theta } => {
            let quarter = theta / std::f64::consts::FRAC_PI_2;
            let k = quarter.round();
            if (quarter - k).abs() > 1e-9 {
                return Err(LfError::InvalidValue(format!(
                    "Rz({theta}) is not a Clifford rotation"
                )));
            }
            let k = k.rem_euclid(4.0) as usize;
            Ok(conjugate_on_subset(p, s_power_tableau(k), &[*q]))
        }
        Op::TwoQ { a, b, kind } => Ok(conjugate_on_subset(p, two_q_tableau(*kind), &[*a, *b])),
    }
}

fn gf2_inverse(m: &[u8], n: usize) -> Option<Vec<u8>> {
    let mut a = m.to_vec();
    let mut inv = vec![0u8; n * n];
    for i in 0..n {
        inv[i * n + i] = 1;
    }
    for col in 0..n {
        let pivot = (col..n).find(|&r| a[r * n + col] == 1)?;
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
        }
        for r in 0..n {
            if r != col && a[r * n + col] == 1 {
                for j in 0..n {
                    a[r * n + j] ^= a[col * n + j];
                    inv[r * n + j] ^= inv[col * n + j];
                }
            }
        }
    }
    Some(inv)
}

// ---------------------------------------------------------------------------
// Static gate tableaus.

fn tableau_from_dense_1q(u: &CMat) -> CliffordTableau {
    CliffordTableau::from_unitary(1, u).expect("native 1Q gate is Clifford")
}

pub fn x90_tableau() -> &'static CliffordTableau {
    static T: OnceLock<CliffordTableau> = OnceLock::new();
    T.get_or_init(|| tableau_from_dense_1q(&x90_unitary()))
}

/// Tableau of Rz(kπ/2) = S^k.
pub fn s_power_tableau(k: usize) -> &'static CliffordTableau {
    static T: OnceLock<[CliffordTableau; 4]> = OnceLock::new();
    &T.get_or_init(|| {
        let make = |k: usize| {
            tableau_from_dense_1q(&crate::gates::rz_unitary(
                k as f64 * std::f64::consts::FRAC_PI_2,
            ))
        };
        [make(0), make(1), make(2), make(3)]
    })[k % 4]
}

pub fn two_q_tableau(kind: TwoQubitGateKind) -> &'static CliffordTableau {
    static T: OnceLock<HashMap<TwoQubitGateKind, CliffordTableau>> = OnceLock::new();
    T.get_or_init(|| {
        [
            TwoQubitGateKind::Cx,
            TwoQubitGateKind::Cz,
            TwoQubitGateKind::Ecr,
        ]
        .into_iter()
        .map(|k| {
            (
                k,
                CliffordTableau::from_unitary(2, &k.unitary())
                    .expect("native 2Q gate is Clifford"),
            )
        })
        .collect()
    })
    .get(&kind)
    .unwrap()
}

// ---------------------------------------------------------------------------
// Single-qubit Clifford group.

/// One of the 24 single-qubit Cliffords with its native decomposition
/// (ops in circuit order, Rz angles multiples of π/2, at most two X90).
#[derive(Debug, Clone)]
pub struct Clifford1Q {
    pub tableau: CliffordTableau,
    pub unitary: CMat,
    /// Ops on a placeholder qubit 0; remap before appending to a circuit.
    pub ops: Vec<Op>,
    pub x90_count: usize,
}

pub struct Clifford1QTable {
    pub elements: Vec<Clifford1Q>,
    index_by_key: HashMap<u64, usize>,
}

impl Clifford1QTable {
    pub fn index_of(&self, tableau: &CliffordTableau) -> Option<usize> {
        self.index_by_key.get(&tableau.key()).copied()
    }
}

pub fn clifford_1q_table() -> &'static Clifford1QTable {
    static TABLE: OnceLock<Clifford1QTable> = OnceLock::new();
    TABLE.get_or_init(build_clifford_1q_table)
}

fn build_clifford_1q_table() -> Clifford1QTable {
    // Enumerate by BFS over {H, S} products.
    let h = {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMat::from_row_slice(
            2,
            2,
            &[
                num_complex::Complex64::new(s, 0.0),
                num_complex::Complex64::new(s, 0.0),
                num_complex::Complex64::new(s, 0.0),
                num_complex::Complex64::new(-s, 0.0),
            ],
        )
    };
    let s_gate = crate::gates::rz_unitary(std::f64::consts::FRAC_PI_2);
    let gens = [h, s_gate];

    let mut elements: Vec<(CliffordTableau, CMat)> =
        vec![(CliffordTableau::identity(1), CMat::identity(2, 2))];
    let mut seen: HashMap<u64, usize> = HashMap::new();
    seen.insert(elements[0].0.key(), 0);
    let mut frontier = vec![0usize];
    while let Some(idx) = frontier.pop() {
        let (tab, uni) = elements[idx].clone();
        for g in &gens {
            let gtab = tableau_from_dense_1q(g);
            let next = tab.then(&gtab);
            if !seen.contains_key(&next.key()) {
                let nu = g * &uni;
                seen.insert(next.key(), elements.len());
                frontier.push(elements.len());
                elements.push((next, nu));
            }
        }
    }
    assert_eq!(elements.len(), 24, "single-qubit Clifford group size");

    // Minimal-X90 Euler decomposition per element: scan 0, 1, 2 X90 forms
    // with Rz multiples of π/2, first match wins.
    let quarter = std::f64::consts::FRAC_PI_2;
    let decompose = |target: &CMat| -> (Vec<Op>, usize) {
        let rz = |k: usize| crate::gates::rz_unitary(k as f64 * quarter);
        let x90 = x90_unitary();
        for ka in 0..4usize {
            if equal_up_to_phase(&rz(ka), target, 1e-9) {
                return (rz_ops(&[ka as f64 * quarter]), 0);
            }
        }
        for kb in 0..4usize {
            for ka in 0..4usize {
                let u = rz(kb) * &x90 * rz(ka);
                if equal_up_to_phase(&u, target, 1e-9) {
                    let mut ops = rz_ops(&[ka as f64 * quarter]);
                    ops.push(Op::X90 { q: 0 });
                    ops.extend(rz_ops(&[kb as f64 * quarter]));
                    return (ops, 1);
                }
            }
        }
        for kc in 0..4usize {
            for kb in 0..4usize {
                for ka in 0..4usize {
                    let u = rz(kc) * &x90 * rz(kb) * &x90 * rz(ka);
                    if equal_up_to_phase(&u, target, 1e-9) {
                        let mut ops = rz_ops(&[ka as f64 * quarter]);
                        ops.push(Op::X90 { q: 0 });
                        ops.extend(rz_ops(&[kb as f64 * quarter]));
                        ops.push(Op::X90 { q: 0 });
                        ops.extend(rz_ops(&[kc as f64 * quarter]));
                        return (ops, 2);
                    }
                }
            }
        }
        unreachable!("every 1Q Clifford has a 2-X90 Euler form")
    };

    let mut out = Vec::with_capacity(24);
    let mut index_by_key = HashMap::new();
    for (i, (tab, uni)) in elements.into_iter().enumerate() {
        let (ops, x90_count) = decompose(&uni);
        index_by_key.insert(tab.key(), i);
        out.push(Clifford1Q {
            tableau: tab,
            unitary: uni,
            ops,
            x90_count,
        });
    }
    Clifford1QTable {
        elements: out,
        index_by_key,
    }
}

fn rz_ops(angles: &[f64]) -> Vec<Op> {
    angles
        .iter()
        .filter(|a| a.abs() > 1e-12)
        .map(|&theta| Op::Rz { q: 0, theta })
        .collect()
}

/// Remap placeholder-qubit ops onto a concrete qubit.
pub fn remap_ops_1q(ops: &[Op], qubit: usize) -> Vec<Op> {
    ops.iter()
        .map(|op| match op {
            Op::X90 { .. } => Op::X90 { q: qubit },
            Op::Rz { theta, .. } => Op::Rz {
                q: qubit,
                theta: *theta,
            },
            other => other.clone(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Two-qubit synthesis table.

#[derive(Debug, Clone, Copy)]
enum SynthStep {
    OneQ { qubit: usize, clifford: usize },
    Gate,
}

struct SynthTable {
    /// key -> (cost, parent key, step taken to reach this state)
    entries: HashMap<u64, (u32, u64, Option<SynthStep>)>,
    max_gate_count: u32,
}

fn synth_cost(gates: u32, x90s: u32) -> u32 {
    gates * 1_000 + x90s
}

fn build_synth_table(kind: TwoQubitGateKind) -> SynthTable {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let table = clifford_1q_table();
    let gate_tab = two_q_tableau(kind);
    let ident = CliffordTableau::identity(2);

    let mut entries: HashMap<u64, (u32, u64, Option<SynthStep>)> = HashMap::new();
    let start_key = ident.key();
    entries.insert(start_key, (0, start_key, None));
    let mut heap: BinaryHeap<Reverse<(u32, u64)>> = BinaryHeap::new();
    heap.push(Reverse((0, start_key)));
    let mut tableaus: HashMap<u64, CliffordTableau> = HashMap::new();
    tableaus.insert(start_key, ident);
    let mut max_gates = 0u32;

    while let Some(Reverse((cost, key))) = heap.pop() {
        if entries[&key].0 != cost {
            continue;
        }
        max_gates = max_gates.max(cost / 1_000);
        let tab = tableaus[&key].clone();
        let mut push = |next: CliffordTableau, step_cost: u32, step: SynthStep| {
            let nk = next.key();
            let nc = cost + step_cost;
            let better = match entries.get(&nk) {
                Some(&(old, _, _)) => nc < old,
                None => true,
            };
            if better {
                entries.insert(nk, (nc, key, Some(step)));
                tableaus.insert(nk, next);
                heap.push(Reverse((nc, nk)));
            }
        };
        for qubit in 0..2usize {
            for (ci, c) in table.elements.iter().enumerate() {
                if ci == 0 {
                    continue; // identity
                }
                let next = tab.then_on(&c.tableau, &[qubit]);
                push(
                    next,
                    synth_cost(0, c.x90_count as u32),
                    SynthStep::OneQ {
                        qubit,
                        clifford: ci,
                    },
                );
            }
        }
        push(tab.then(gate_tab), synth_cost(1, 0), SynthStep::Gate);
    }

    assert_eq!(entries.len(), 11_520, "two-qubit Clifford group size");
    SynthTable {
        entries,
        max_gate_count: max_gates,
    }
}

fn synth_table(kind: TwoQubitGateKind) -> &'static SynthTable {
    static CX: OnceLock<SynthTable> = OnceLock::new();
    static CZ: OnceLock<SynthTable> = OnceLock::new();
    static ECR: OnceLock<SynthTable> = OnceLock::new();
    match kind {
        TwoQubitGateKind::Cx => CX.get_or_init(|| build_synth_table(kind)),
        TwoQubitGateKind::Cz => CZ.get_or_init(|| build_synth_table(kind)),
        TwoQubitGateKind::Ecr => ECR.get_or_init(|| build_synth_table(kind)),
    }
}

/// Synthesize a tableau into native ops (placeholder qubits 0/1 for n = 2,
/// qubit 0 for n = 1). Two-qubit synthesis uses at most 3 native gates,
/// minimal gate count first and fewest X90 on ties.
pub fn clifford_to_native(tableau: &CliffordTableau, kind: TwoQubitGateKind) -> Result<Vec<Op>> {
    match tableau.n {
        1 => {
            let t = clifford_1q_table();
            let idx = t
                .index_of(tableau)
                .ok_or_else(|| LfError::InvalidValue("unknown 1Q tableau".into()))?;
            Ok(t.elements[idx].ops.clone())
        }
        2 => {
            let table = synth_table(kind);
            let mut steps = Vec::new();
            let mut key = tableau.key();
            loop {
                let &(_, parent, step) = table
                    .entries
                    .get(&key)
                    .ok_or_else(|| LfError::InvalidValue("unknown 2Q tableau".into()))?;
                match step {
                    None => break,
                    Some(s) => {
                        steps.push(s);
                        key = parent;
                    }
                }
            }
            steps.reverse();
            let t1q = clifford_1q_table();
            let mut ops = Vec::new();
            for s in steps {
                match s {
                    SynthStep::OneQ { qubit, clifford } => {
                        ops.extend(remap_ops_1q(&t1q.elements[clifford].ops, qubit));
                    }
                    SynthStep::Gate => ops.push(Op::TwoQ {
                        a: 0,
                        b: 1,
                        kind,
                    }),
                }
            }
            Ok(ops)
        }
        n => Err(LfError::UnsupportedQubitCount(n)),
    }
}

/// Maximum native-gate count over the whole 2Q group (3 for the supported
/// kinds; exposed for the structural test).
pub fn max_two_q_gate_count(kind: TwoQubitGateKind) -> u32 {
    synth_table(kind).max_gate_count
}

/// Track a native-op sequence on a small register into a tableau.
pub fn tableau_from_ops(n: usize, ops: &[Op]) -> Result<CliffordTableau> {
    let mut tab = CliffordTableau::identity(n);
    for op in ops {
        match op {
            Op::Barrier => {}
            Op::X90 { q } => tab = tab.then_on(x90_tableau(), &[*q]),
            Op::Rz { q, theta } => {
                let quarter = theta / std::f64::consts::FRAC_PI_2;
                let k = quarter.round();
                if (quarter - k).abs() > 1e-9 {
                    return Err(LfError::InvalidValue(format!(
                        "Rz({theta}) is not a Clifford rotation"
                    )));
                }
                tab = tab.then_on(s_power_tableau(k.rem_euclid(4.0) as usize), &[*q]);
            }
            Op::TwoQ { a, b, kind } => tab = tab.then_on(two_q_tableau(*kind), &[*a, *b]),
        }
    }
    Ok(tab)
}

/// Dense unitary of an op sequence on an n-qubit register (test oracle and
/// coherent-error bookkeeping; n small).
pub fn ops_to_unitary(n: usize, ops: &[Op]) -> CMat {
    let dim = 1usize << n;
    let mut u = CMat::identity(dim, dim);
    for op in ops {
        let (local, qubits): (CMat, Vec<usize>) = match op {
            Op::Barrier => continue,
            Op::X90 { q } => (x90_unitary(), vec![*q]),
            Op::Rz { q, theta } => (crate::gates::rz_unitary(*theta), vec![*q]),
            Op::TwoQ { a, b, kind } => (kind.unitary(), vec![*a, *b]),
        };
        u = embed(&local, &qubits, n) * u;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn one_qubit_group_has_24_elements() {
        assert_eq!(clifford_1q_table().elements.len(), 24);
    }

    #[test]
    fn identity_synthesizes_to_empty_sequence() {
        let ops = clifford_to_native(&CliffordTableau::identity(1), TwoQubitGateKind::Cx).unwrap();
        assert!(ops.is_empty());
    }

    #[test]
    fn hadamard_decomposition_matches_dense() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = CMat::from_row_slice(
            2,
            2,
            &[
                num_complex::Complex64::new(s, 0.0),
                num_complex::Complex64::new(s, 0.0),
                num_complex::Complex64::new(s, 0.0),
                num_complex::Complex64::new(-s, 0.0),
            ],
        );
        let tab = CliffordTableau::from_unitary(1, &h).unwrap();
        let ops = clifford_to_native(&tab, TwoQubitGateKind::Cx).unwrap();
        let u = ops_to_unitary(1, &ops);
        assert!(equal_up_to_phase(&u, &h, 1e-9));
    }

    #[test]
    fn every_1q_clifford_decomposition_is_exact() {
        for c in &clifford_1q_table().elements {
            let u = ops_to_unitary(1, &c.ops);
            assert!(equal_up_to_phase(&u, &c.unitary, 1e-9));
            assert!(c.x90_count <= 2);
        }
    }

    fn random_2q_ops(rng: &mut StdRng, len: usize) -> Vec<Op> {
        let table = clifford_1q_table();
        let mut ops = Vec::new();
        for _ in 0..len {
            match rng.gen_range(0..3) {
                0 => {
                    let q = rng.gen_range(0..2);
                    ops.extend(remap_ops_1q(
                        &table.elements[rng.gen_range(0..24)].ops,
                        q,
                    ));
                }
                1 => ops.push(Op::TwoQ {
                    a: 0,
                    b: 1,
                    kind: TwoQubitGateKind::Cx,
                }),
                _ => ops.push(Op::TwoQ {
                    a: 0,
                    b: 1,
                    kind: TwoQubitGateKind::Ecr,
                }),
            }
        }
        ops
    }

    #[test]
    fn tracked_tableau_matches_dense_product() {
        // Random 1Q Cliffords interleaved with 2Q gates; the tracked tableau
        // must equal the tableau derived from the dense matrix product.
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let ops = random_2q_ops(&mut rng, 6);
            let tracked = tableau_from_ops(2, &ops).unwrap();
            let dense = ops_to_unitary(2, &ops);
            let from_dense = CliffordTableau::from_unitary(2, &dense).unwrap();
            assert_eq!(tracked, from_dense);
        }
    }

    #[test]
    fn synthesized_inverse_cancels_random_2q_cliffords() {
        let mut rng = StdRng::seed_from_u64(11);
        for kind in [TwoQubitGateKind::Cx, TwoQubitGateKind::Cz] {
            for _ in 0..500 {
                let ops = random_2q_ops(&mut rng, 5);
                let tab = tableau_from_ops(2, &ops).unwrap();
                let inv_ops = clifford_to_native(&tab.inverse(), kind).unwrap();
                let gate_count = inv_ops
                    .iter()
                    .filter(|o| matches!(o, Op::TwoQ { .. }))
                    .count();
                assert!(gate_count <= 3);
                let u = ops_to_unitary(2, &ops);
                let v = ops_to_unitary(2, &inv_ops);
                assert!(
                    equal_up_to_phase(&(v * u), &CMat::identity(4, 4), 1e-9),
                    "inverse must cancel"
                );
            }
        }
    }

    #[test]
    fn inverse_composes_to_identity_tableau() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let ops = random_2q_ops(&mut rng, 4);
            let tab = tableau_from_ops(2, &ops).unwrap();
            assert_eq!(tab.then(&tab.inverse()), CliffordTableau::identity(2));
        }
    }

    #[test]
    fn two_q_synthesis_never_exceeds_three_gates() {
        assert!(max_two_q_gate_count(TwoQubitGateKind::Cx) <= 3);
    }

    #[test]
    fn conjugation_matches_dense_on_larger_register() {
        // Push XZYI through a CX on qubits (1, 3) of a 4-qubit register.
        let p = PauliString::parse("XZYI").unwrap();
        let got = conjugate_on_subset(&p, two_q_tableau(TwoQubitGateKind::Cx), &[1, 3]);
        let u = embed(&TwoQubitGateKind::Cx.unitary(), &[1, 3], 4);
        let want = &u * p.to_matrix() * u.adjoint();
        assert!((got.to_matrix() - want).iter().all(|c| c.norm() < 1e-9));
    }
}
