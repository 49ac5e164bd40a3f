//! Quantum states and channels: dense density matrices, channels in Kraus /
//! Pauli-probability / transfer-matrix form, and the process-fidelity
//! arithmetic used to assemble layer fidelities.

use crate::linalg::{kron, CMat, C_ONE};
use num_complex::Complex64;
use crate::pauli::PauliString;
use crate::{LfError, Result};
use nalgebra::DMatrix;

/// Dense construction cap for transfer matrices and Choi checks.
pub const PTM_QUBIT_CAP: usize = 4;

/// A dense n-qubit density matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n: usize,
    mat: CMat,
}

impl DensityMatrix {
    /// |0…0⟩⟨0…0|.
    pub fn ground(n: usize) -> Self {
        let dim = 1 << n;
        let mut mat = CMat::zeros(dim, dim);
        mat[(0, 0)] = C_ONE;
        Self { n, mat }
    }

    pub fn from_matrix(n: usize, mat: CMat) -> Result<Self> {
        let dm = Self { n, mat };
        dm.validate()?;
        Ok(dm)
    }

    /// Hermiticity, unit trace (1e-10) and positivity (eigenvalues ≥ -1e-9).
    pub fn validate(&self) -> Result<()> {
        let dim = 1 << self.n;
        if self.mat.nrows() != dim || self.mat.ncols() != dim {
            return Err(LfError::DimensionMismatch(format!(
                "density matrix is {}x{}, expected {dim}x{dim}",
                self.mat.nrows(),
                self.mat.ncols()
            )));
        }
        let herm_dev = (&self.mat - self.mat.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if herm_dev > 1e-9 {
            return Err(LfError::InvalidValue(format!(
                "density matrix not Hermitian (deviation {herm_dev:.3e})"
            )));
        }
        let tr = self.mat.trace();
        if (tr - C_ONE).norm() > 1e-10 {
            return Err(LfError::InvalidValue(format!(
                "density matrix trace {} != 1",
                tr.re
            )));
        }
        let min_eig = hermitian_min_eigenvalue(&self.mat);
        if min_eig < -1e-9 {
            return Err(LfError::InvalidValue(format!(
                "density matrix not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut CMat {
        &mut self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }
}

pub fn hermitian_min_eigenvalue(m: &CMat) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Channel representation: Kraus operators, Pauli-Kraus probabilities
/// (indexed by the lexicographic Pauli basis), or a dense transfer matrix.
#[derive(Debug, Clone)]
pub enum ChannelRep {
    Kraus(Vec<CMat>),
    PauliProbs(Vec<f64>),
    Ptm(Ptm),
}

/// A completely positive trace-preserving map on n qubits.
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    n: usize,
    rep: ChannelRep,
}

impl QuantumChannel {
    pub fn identity(n: usize) -> Self {
        Self::unitary(n, &CMat::identity(1 << n, 1 << n)).unwrap()
    }

    pub fn unitary(n: usize, u: &CMat) -> Result<Self> {
        let dev = crate::linalg::unitarity_deviation(u);
        if dev > 1e-8 {
            return Err(LfError::NotUnitary(dev));
        }
        Ok(Self {
            n,
            rep: ChannelRep::Kraus(vec![u.clone()]),
        })
    }

    pub fn from_kraus(n: usize, ops: Vec<CMat>) -> Result<Self> {
        let dim = 1usize << n;
        let mut sum = CMat::zeros(dim, dim);
        for k in &ops {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(LfError::DimensionMismatch(
                    "Kraus operator dimension".into(),
                ));
            }
            sum += k.adjoint() * k;
        }
        let dev = (&sum - CMat::identity(dim, dim))
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(LfError::NotTracePreserving(dev));
        }
        Ok(Self {
            n,
            rep: ChannelRep::Kraus(ops),
        })
    }

    /// Pauli channel from probabilities indexed by the lexicographic basis.
    pub fn from_pauli_probs(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << (2 * n) {
            return Err(LfError::DimensionMismatch(
                "Pauli probability vector length".into(),
            ));
        }
        if probs.iter().any(|&p| p < -1e-12) {
            return Err(LfError::InvalidValue("negative Pauli probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(LfError::NotTracePreserving((total - 1.0).abs()));
        }
        Ok(Self {
            n,
            rep: ChannelRep::PauliProbs(probs),
        })
    }

    pub fn from_ptm(ptm: Ptm) -> Result<Self> {
        ptm.check_trace_preserving()?;
        Ok(Self {
            n: ptm.n,
            rep: ChannelRep::Ptm(ptm),
        })
    }

    /// Depolarizing channel Λ(ρ) = αρ + (1-α)·I/d, as Pauli probabilities
    /// {α + (1-α)/4^n on I, (1-α)/4^n elsewhere}.
    pub fn depolarizing(n: usize, alpha: f64) -> Result<Self> {
        let count = 1usize << (2 * n);
        let base = (1.0 - alpha) / count as f64;
        let mut probs = vec![base; count];
        probs[0] += alpha;
        Self::from_pauli_probs(n, probs)
    }

    /// Single-Pauli channel Λ(ρ) = pρ + (1-p) PρP.
    pub fn single_pauli(p: f64, pauli: &PauliString) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(LfError::InvalidValue("probability outside [0,1]".into()));
        }
        let n = pauli.n();
        let mut probs = vec![0.0; 1 << (2 * n)];
        probs[0] = p;
        probs[pauli.basis_index()] += 1.0 - p;
        Self::from_pauli_probs(n, probs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rep(&self) -> &ChannelRep {
        &self.rep
    }

    /// Apply to a dense matrix (not necessarily a state).
    pub fn apply_matrix(&self, rho: &CMat) -> CMat {
        match &self.rep {
            ChannelRep::Kraus(ops) => {
                let mut out = CMat::zeros(rho.nrows(), rho.ncols());
                for k in ops {
                    out += k * rho * k.adjoint();
                }
                out
            }
            ChannelRep::PauliProbs(probs) => {
                let mut out = CMat::zeros(rho.nrows(), rho.ncols());
                for (idx, &p) in probs.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let pm = PauliString::from_basis_index(self.n, idx).to_matrix();
                    out += (&pm * rho * &pm).map(|c| c * p);
                }
                out
            }
            ChannelRep::Ptm(ptm) => {
                // Expand rho in the Pauli basis and reassemble. Coefficients
                // stay complex so non-Hermitian inputs (Choi construction)
                // map correctly.
                let d = (1usize << self.n) as f64;
                let count = 1 << (2 * self.n);
                let paulis: Vec<CMat> = (0..count)
                    .map(|i| PauliString::from_basis_index(self.n, i).to_matrix())
                    .collect();
                let coeffs: Vec<Complex64> =
                    paulis.iter().map(|pj| (pj * rho).trace() / d).collect();
                let mut out = CMat::zeros(rho.nrows(), rho.ncols());
                for (i, pi) in paulis.iter().enumerate() {
                    let mut amp = Complex64::new(0.0, 0.0);
                    for (j, &c) in coeffs.iter().enumerate() {
                        amp += c * ptm.mat[(i, j)];
                    }
                    out += pi.map(|x| x * amp);
                }
                out
            }
        }
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n() != self.n {
            return Err(LfError::DimensionMismatch("channel vs state".into()));
        }
        DensityMatrix::from_matrix(self.n, self.apply_matrix(rho.matrix()))
    }

    /// Kraus form (conversion from any representation).
    pub fn kraus_ops(&self) -> Result<Vec<CMat>> {
        match &self.rep {
            ChannelRep::Kraus(ops) => Ok(ops.clone()),
            ChannelRep::PauliProbs(probs) => Ok(probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(idx, &p)| {
                    PauliString::from_basis_index(self.n, idx)
                        .to_matrix()
                        .map(|c| c * p.sqrt())
                })
                .collect()),
            ChannelRep::Ptm(_) => {
                let choi = self.choi();
                let dim = 1usize << self.n;
                let eig = choi.symmetric_eigen();
                let mut ops = Vec::new();
                for (vi, &lambda) in eig.eigenvalues.iter().enumerate() {
                    if lambda < -1e-9 {
                        return Err(LfError::InvalidValue(format!(
                            "channel not completely positive (Choi eigenvalue {lambda:.3e})"
                        )));
                    }
                    if lambda <= 1e-12 {
                        continue;
                    }
                    let v = eig.eigenvectors.column(vi);
                    let mut k = CMat::zeros(dim, dim);
                    for a in 0..dim {
                        for b in 0..dim {
                            k[(a, b)] = v[a * dim + b] * (lambda * dim as f64).sqrt();
                        }
                    }
                    ops.push(k);
                }
                Ok(ops)
            }
        }
    }

    /// Choi matrix (1/d) Σ_kl Λ(|k⟩⟨l|) ⊗ |k⟩⟨l|; PSD iff completely positive.
    pub fn choi(&self) -> CMat {
        let dim = 1usize << self.n;
        let full = dim * dim;
        let mut choi = CMat::zeros(full, full);
        for k in 0..dim {
            for l in 0..dim {
                let mut e = CMat::zeros(dim, dim);
                e[(k, l)] = C_ONE;
                let mapped = self.apply_matrix(&e);
                for a in 0..dim {
                    for b in 0..dim {
                        choi[(a * dim + k, b * dim + l)] += mapped[(a, b)] / dim as f64;
                    }
                }
            }
        }
        choi
    }

    pub fn choi_min_eigenvalue(&self) -> f64 {
        hermitian_min_eigenvalue(&self.choi())
    }

    /// Pauli fidelities when the channel is a Pauli channel:
    /// f_a = Σ_b (-1)^{⟨a,b⟩} p_b.
    pub fn pauli_fidelities(&self) -> Result<Vec<f64>> {
        match &self.rep {
            ChannelRep::PauliProbs(probs) => {
                let count = probs.len();
                let mut out = vec![0.0; count];
                for (a, f) in out.iter_mut().enumerate() {
                    let pa = PauliString::from_basis_index(self.n, a);
                    for (b, &p) in probs.iter().enumerate() {
                        if p == 0.0 {
                            continue;
                        }
                        let pb = PauliString::from_basis_index(self.n, b);
                        let sign = if pa.symplectic_product(&pb) == 0 {
                            1.0
                        } else {
                            -1.0
                        };
                        *f += sign * p;
                    }
                }
                Ok(out)
            }
            _ => {
                let ptm = ptm_from_channel(self)?;
                ptm.diagonal_if_pauli().ok_or_else(|| {
                    LfError::InvalidValue("channel is not a Pauli channel".into())
                })
            }
        }
    }

    /// Sequential composition: `after` runs after `self`.
    pub fn compose(&self, after: &QuantumChannel) -> Result<QuantumChannel> {
        if self.n != after.n {
            return Err(LfError::DimensionMismatch("channel composition".into()));
        }
        let first = self.kraus_ops()?;
        let second = after.kraus_ops()?;
        let mut ops = Vec::with_capacity(first.len() * second.len());
        for b in &second {
            for a in &first {
                ops.push(b * a);
            }
        }
        QuantumChannel::from_kraus(self.n, ops)
    }

    /// Tensor product with `self` on the leftmost (qubit-0 side) factor.
    pub fn tensor(&self, other: &QuantumChannel) -> Result<QuantumChannel> {
        let a = self.kraus_ops()?;
        let b = other.kraus_ops()?;
        let mut ops = Vec::with_capacity(a.len() * b.len());
        for ka in &a {
            for kb in &b {
                ops.push(kron(ka, kb));
            }
        }
        QuantumChannel::from_kraus(self.n + other.n, ops)
    }
}

/// Pauli transfer matrix R_ij = Tr(P_i Λ[P_j]) / d in the lexicographic
/// Pauli basis with qubit 0 as the leftmost factor.
#[derive(Debug, Clone)]
pub struct Ptm {
    n: usize,
    mat: DMatrix<f64>,
}

impl Ptm {
    pub fn identity(n: usize) -> Self {
        let count = 1 << (2 * n);
        Self {
            n,
            mat: DMatrix::identity(count, count),
        }
    }

    pub fn from_matrix(n: usize, mat: DMatrix<f64>) -> Result<Self> {
        let count = 1 << (2 * n);
        if mat.nrows() != count || mat.ncols() != count {
            return Err(LfError::DimensionMismatch("PTM size".into()));
        }
        Ok(Self { n, mat })
    }

    pub fn from_diagonal(n: usize, fidelities: &[f64]) -> Result<Self> {
        let count = 1 << (2 * n);
        if fidelities.len() != count {
            return Err(LfError::DimensionMismatch("PTM diagonal length".into()));
        }
        let mut mat = DMatrix::zeros(count, count);
        for (i, &f) in fidelities.iter().enumerate() {
            mat[(i, i)] = f;
        }
        Ok(Self { n, mat })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// First row must be (1, 0, …, 0) for a trace-preserving map.
    pub fn check_trace_preserving(&self) -> Result<()> {
        let mut dev: f64 = (self.mat[(0, 0)] - 1.0).abs();
        for j in 1..self.mat.ncols() {
            dev = dev.max(self.mat[(0, j)].abs());
        }
        if dev > 1e-9 {
            return Err(LfError::NotTracePreserving(dev));
        }
        Ok(())
    }

    /// PTM of sequential composition (`after` applied second) is the matrix
    /// product R_after · R_self.
    pub fn compose(&self, after: &Ptm) -> Result<Ptm> {
        if self.n != after.n {
            return Err(LfError::DimensionMismatch("PTM composition".into()));
        }
        Ok(Ptm {
            n: self.n,
            mat: &after.mat * &self.mat,
        })
    }

    pub fn diagonal_if_pauli(&self) -> Option<Vec<f64>> {
        for i in 0..self.mat.nrows() {
            for j in 0..self.mat.ncols() {
                if i != j && self.mat[(i, j)].abs() > 1e-9 {
                    return None;
                }
            }
        }
        Some((0..self.mat.nrows()).map(|i| self.mat[(i, i)]).collect())
    }

    /// Tensor product in the PTM basis (self on the qubit-0 side).
    pub fn tensor(&self, other: &Ptm) -> Ptm {
        Ptm {
            n: self.n + other.n,
            mat: self.mat.kronecker(&other.mat),
        }
    }
}

/// Dense PTM construction, R_ij = Tr(P_i Λ[P_j]) / d. Capped at
/// [`PTM_QUBIT_CAP`] qubits; larger systems must be composed from disjoint
/// blocks.
pub fn ptm_from_channel(channel: &QuantumChannel) -> Result<Ptm> {
    let n = channel.n();
    if n > PTM_QUBIT_CAP {
        return Err(LfError::SizeCap {
            n,
            cap: PTM_QUBIT_CAP,
        });
    }
    // Reject channels that are not trace preserving.
    match channel.rep() {
        ChannelRep::Kraus(ops) => {
            // from_kraus validated on construction; re-check cheaply.
            let dim = 1usize << n;
            let mut sum = CMat::zeros(dim, dim);
            for k in ops {
                sum += k.adjoint() * k;
            }
            let dev = (&sum - CMat::identity(dim, dim))
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            if dev > 1e-10 {
                return Err(LfError::NotTracePreserving(dev));
            }
        }
        ChannelRep::Ptm(p) => p.check_trace_preserving()?,
        ChannelRep::PauliProbs(_) => {}
    }

    if let ChannelRep::PauliProbs(_) = channel.rep() {
        return Ok(Ptm::from_diagonal(n, &channel.pauli_fidelities()?)?);
    }
    if let ChannelRep::Ptm(p) = channel.rep() {
        return Ok(p.clone());
    }

    let d = (1usize << n) as f64;
    let count = 1usize << (2 * n);
    let paulis: Vec<CMat> = (0..count)
        .map(|i| PauliString::from_basis_index(n, i).to_matrix())
        .collect();
    let mut mat = DMatrix::zeros(count, count);
    for (j, pj) in paulis.iter().enumerate() {
        let mapped = channel.apply_matrix(pj);
        for (i, pi) in paulis.iter().enumerate() {
            mat[(i, j)] = (pi * &mapped).trace().re / d;
        }
    }
    Ok(Ptm { n, mat })
}

/// Process fidelity F = Tr(R_ideal⁻¹ R_exp) / d².
pub fn process_fidelity(exp: &Ptm, ideal: &Ptm) -> Result<f64> {
    if exp.n != ideal.n {
        return Err(LfError::DimensionMismatch("process fidelity".into()));
    }
    let inv = ideal
        .mat
        .clone()
        .try_inverse()
        .ok_or_else(|| LfError::Singular("ideal PTM not invertible".into()))?;
    let d2 = exp.mat.nrows() as f64;
    Ok((inv * &exp.mat).trace() / d2)
}

/// Average-gate-fidelity conversions for d = 2^n:
/// F_g = (d·F_p + 1)/(d + 1), ε_p = ((d+1)/d)·ε_g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityConversions {
    pub process_fidelity: f64,
    pub gate_fidelity: f64,
    pub gate_error: f64,
    pub process_error: f64,
}

pub fn fidelity_conversions(f_p: f64, d: usize) -> Result<FidelityConversions> {
    if d != 2 && d != 4 {
        return Err(LfError::InvalidValue(format!(
            "decay-space dimension {d} not in {{2, 4}}"
        )));
    }
    let dd = d as f64;
    let gate_fidelity = (dd * f_p + 1.0) / (dd + 1.0);
    Ok(FidelityConversions {
        process_fidelity: f_p,
        gate_fidelity,
        gate_error: 1.0 - gate_fidelity,
        process_error: 1.0 - f_p,
    })
}

/// Process error from average gate error, ε_p = ((d+1)/d)·ε_g.
pub fn process_error_from_gate_error(eps_g: f64, d: usize) -> f64 {
    (d as f64 + 1.0) / d as f64 * eps_g
}

/// Fidelity of disjoint subsystems combined: the exact product. This is
/// exact only for disjoint blocks; across sequential layers it is an
/// approximation valid for small errors of diagonal maps.
pub fn fidelity_product_disjoint(fidelities: &[f64]) -> Result<f64> {
    for &f in fidelities {
        if !(0.0..=1.0 + 1e-12).contains(&f) {
            return Err(LfError::InvalidValue(format!(
                "process fidelity {f} outside [0, 1]"
            )));
        }
    }
    Ok(fidelities.iter().product())
}
