//! Sampling-overhead γ calculators and bounds for Pauli channels.
//!
//! γ = e^{2Σλ_k} for a Pauli-Lindblad model, equivalently det(Λ)^{-2/d²};
//! γ^{-1/2} is the geometric mean of the Pauli fidelities while the process
//! fidelity is their arithmetic mean, which gives the two-sided bound
//! implemented in [`gamma_bounds`].

use crate::channel::Ptm;
use crate::noise::PauliLindbladModel;
use crate::{LfError, Result};
use rand::Rng;

/// γ = e^{Σ_k 2λ_k}.
pub fn gamma_from_lindblad(model: &PauliLindbladModel) -> Result<f64> {
    let total: f64 = model.parsed_generators()?.iter().map(|(_, l)| l).sum();
    Ok((2.0 * total).exp())
}

/// γ = det(Λ)^{-2/d²} for a diagonal (Pauli-channel) transfer matrix.
pub fn gamma_from_det(ptm: &Ptm) -> Result<f64> {
    let fidelities = ptm
        .diagonal_if_pauli()
        .ok_or_else(|| LfError::InvalidValue("PTM is not diagonal (not a Pauli channel)".into()))?;
    gamma_from_pauli_fidelities(&fidelities)
}

/// γ from the list of Pauli fidelities (the PTM diagonal).
pub fn gamma_from_pauli_fidelities(fidelities: &[f64]) -> Result<f64> {
    let d2 = fidelities.len() as f64;
    let mut log_det = 0.0;
    for &f in fidelities {
        if f <= 0.0 {
            return Err(LfError::InvalidValue(format!(
                "nonpositive Pauli fidelity {f}: log-determinant undefined"
            )));
        }
        log_det += f.ln();
    }
    Ok((-2.0 * log_det / d2).exp())
}

/// Process fidelity of a Pauli channel from its fidelities (arithmetic mean).
pub fn process_fidelity_from_pauli_fidelities(fidelities: &[f64]) -> f64 {
    fidelities.iter().sum::<f64>() / fidelities.len() as f64
}

/// Two-sided bound on γ^{-1/2} for a CPTP Pauli channel with process
/// fidelity `f_p` ∈ (1/2, 1]:
/// F_p - 1 + 2λ₀(1-F_p) + (2F_p-1)^{λ₀} ≤ γ^{-1/2} ≤ F_p.
pub fn gamma_bounds(f_p: f64) -> Result<(f64, f64)> {
    if !(f_p > 0.5 && f_p <= 1.0) {
        return Err(LfError::InvalidValue(format!(
            "process fidelity {f_p} outside (1/2, 1]"
        )));
    }
    // λ₀ degenerates as F_p -> 1 where both bounds coincide.
    if f_p > 1.0 - 1e-6 {
        return Ok((f_p, f_p));
    }
    let c = 2.0 * f_p - 1.0;
    let lambda0 = ((2.0 - 2.0 * f_p).ln() - (-c.ln()).ln()) / c.ln();
    let lower = f_p - 1.0 + 2.0 * lambda0 * (1.0 - f_p) + c.powf(lambda0);
    Ok((lower, f_p))
}

/// Arithmetic-geometric gap over the hyperrectangle [c, d]^N: the maximum of
/// mean(x) - geomean(x) over the 2^N extreme points (N+1 distinct values by
/// symmetry), together with the analytic bound f(λ₀) where
/// f(λ) = λc + (1-λ)d - c^λ d^{1-λ} evaluated at its stationary point.
pub fn lemma_gap(c: f64, d_hi: f64, n: usize) -> Result<(f64, f64)> {
    if !(0.0 < c && c < d_hi) {
        return Err(LfError::InvalidValue(format!(
            "lemma domain requires 0 < c < d, got c = {c}, d = {d_hi}"
        )));
    }
    if n == 0 {
        return Err(LfError::InvalidValue("N must be at least 1".into()));
    }
    let mut numeric_max = f64::NEG_INFINITY;
    for m in 0..=n {
        let mean = (m as f64 * c + (n - m) as f64 * d_hi) / n as f64;
        let geo = c.powf(m as f64 / n as f64) * d_hi.powf((n - m) as f64 / n as f64);
        numeric_max = numeric_max.max(mean - geo);
    }
    let f = |lambda: f64| lambda * c + (1.0 - lambda) * d_hi - c.powf(lambda) * d_hi.powf(1.0 - lambda);
    let lambda0 = ((d_hi / c).ln().ln() - ((d_hi - c) / d_hi).ln()) / (d_hi / c).ln();
    let analytic = f(lambda0.clamp(0.0, 1.0));
    Ok((numeric_max, analytic))
}

/// Closed forms for the globally depolarizing family on n qubits with
/// non-trivial Pauli fidelity α: (F_p, γ^{-1/2}).
pub fn global_depolarizing_family(n: usize, alpha: f64) -> (f64, f64) {
    let count = 4f64.powi(n as i32);
    let f_p = (1.0 + (count - 1.0) * alpha) / count;
    let gamma_inv_sqrt = alpha.powf((count - 1.0) / count);
    (f_p, gamma_inv_sqrt)
}

/// Closed forms for n/2 two-qubit depolarizing factors, each of strength α.
pub fn tensor_2q_depolarizing_family(n: usize, alpha: f64) -> (f64, f64) {
    assert!(n % 2 == 0);
    let f_pair = (1.0 + 15.0 * alpha) / 16.0;
    let f_p = f_pair.powi((n / 2) as i32);
    let gamma_inv_sqrt = alpha.powf(15.0 * n as f64 / 32.0);
    (f_p, gamma_inv_sqrt)
}

/// Closed forms for the single-Pauli channel Λ(ρ) = pρ + (1-p)PρP.
pub fn single_pauli_family(p: f64) -> (f64, f64) {
    (p, (2.0 * p - 1.0).max(0.0).sqrt())
}

/// γ for depolarizing per-pair fidelities: γ_D = Π_i α_i^{-15/8} with
/// α_i = (16 F_i - 1)/15.
pub fn gamma_exact_depolarizing(pair_process_fidelities: &[f64]) -> Result<f64> {
    let mut gamma = 1.0;
    for &f in pair_process_fidelities {
        let alpha = (16.0 * f - 1.0) / 15.0;
        if alpha <= 0.0 {
            return Err(LfError::InvalidValue(format!(
                "pair fidelity {f} gives nonpositive depolarizing parameter"
            )));
        }
        gamma *= alpha.powf(-15.0 / 8.0);
    }
    Ok(gamma)
}

/// Random CPTP Pauli channel on n qubits: Dirichlet-uniform Kraus
/// probabilities with the identity weight floored at `identity_floor` so the
/// process fidelity stays above it.
pub fn random_pauli_probs<R: Rng>(rng: &mut R, n: usize, identity_floor: f64) -> Vec<f64> {
    let count = 1usize << (2 * n);
    // Dirichlet(1,...,1) via normalized exponentials.
    let mut draws: Vec<f64> = (0..count)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let total: f64 = draws.iter().sum();
    for d in &mut draws {
        *d = *d / total * (1.0 - identity_floor);
    }
    draws[0] += identity_floor;
    draws
}
