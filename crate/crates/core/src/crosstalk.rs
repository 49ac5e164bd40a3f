//! Exact oracle for a single weight-2 crosstalk term spanning two disjoint
//! benchmarking subspaces: compares the true process fidelity of the joint
//! map against the product of per-subspace twirled fidelities, which is what
//! a simultaneous/layered RB experiment estimates. The product double-counts
//! the crosstalk and lower-bounds the truth.

use crate::channel::{process_fidelity, ptm_from_channel, Ptm, QuantumChannel};
use crate::linalg::expm;
use crate::pauli::{PauliLabel, PauliString};
use crate::{LfError, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrosstalkFlavor {
    /// U = exp(-iα P_x).
    Coherent,
    /// 𝓔(ρ) = (1-α²)ρ + α² P_x ρ P_x.
    Stochastic,
}

#[derive(Debug, Clone, Copy)]
pub struct CrosstalkBound {
    pub f_true: f64,
    pub f_subspace_k: f64,
    pub f_subspace_j: f64,
    pub f_layer_estimate: f64,
}

/// Evaluate the oracle for subspaces of n_k and n_j qubits (k first). `p_x`
/// must be weight-2 with exactly one non-identity site in each subspace.
pub fn crosstalk_bound_oracle(
    alpha: f64,
    n_k: usize,
    n_j: usize,
    p_x: &PauliString,
    flavor: CrosstalkFlavor,
) -> Result<CrosstalkBound> {
    let n = n_k + n_j;
    if p_x.n() != n {
        return Err(LfError::DimensionMismatch(
            "crosstalk Pauli length vs subspaces".into(),
        ));
    }
    if !(0.0..=0.3).contains(&alpha) {
        return Err(LfError::InvalidValue(format!(
            "crosstalk strength {alpha} outside [0, 0.3]"
        )));
    }
    let weight_k = (0..n_k).filter(|&q| p_x.label(q) != PauliLabel::I).count();
    let weight_j = (n_k..n).filter(|&q| p_x.label(q) != PauliLabel::I).count();
    if weight_k != 1 || weight_j != 1 {
        return Err(LfError::InvalidValue(
            "crosstalk Pauli must be weight-2 with one site in each subspace".into(),
        ));
    }

    let channel = match flavor {
        CrosstalkFlavor::Coherent => {
            let u = expm(&p_x.to_matrix().map(|c| c * Complex64::new(0.0, -alpha)));
            QuantumChannel::unitary(n, &u)?
        }
        CrosstalkFlavor::Stochastic => QuantumChannel::single_pauli(1.0 - alpha * alpha, p_x)?,
    };

    let ptm = ptm_from_channel(&channel)?;
    let f_true = process_fidelity(&ptm, &Ptm::identity(n))?;

    // Twirl over each subspace's Pauli group: the decay parameter is the
    // average diagonal PTM entry over the non-identity Paulis supported in
    // that subspace alone.
    let diag: Vec<f64> = (0..ptm.matrix().nrows())
        .map(|i| ptm.matrix()[(i, i)])
        .collect();
    let subspace_fidelity = |qubits: std::ops::Range<usize>| -> f64 {
        let size = qubits.len();
        let dims = 4usize.pow(size as u32);
        let mut total = 0.0;
        let mut count = 0usize;
        for idx in 0..diag.len() {
            let p = PauliString::from_basis_index(n, idx);
            if p.weight() == 0 {
                continue;
            }
            let inside = (0..n).all(|q| p.label(q) == PauliLabel::I || qubits.contains(&q));
            if inside {
                total += diag[idx];
                count += 1;
            }
        }
        debug_assert_eq!(count, dims - 1);
        let alpha_sub = total / count as f64;
        (1.0 + (dims as f64 - 1.0) * alpha_sub) / dims as f64
    };

    let f_k = subspace_fidelity(0..n_k);
    let f_j = subspace_fidelity(n_k..n);
    Ok(CrosstalkBound {
        f_true,
        f_subspace_k: f_k,
        f_subspace_j: f_j,
        f_layer_estimate: f_k * f_j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn labels_with(
        n: usize,
        site_k: usize,
        label_k: PauliLabel,
        site_j: usize,
        label_j: PauliLabel,
    ) -> PauliString {
        let mut labels = vec![PauliLabel::I; n];
        labels[site_k] = label_k;
        labels[site_j] = label_j;
        PauliString::from_labels(&labels)
    }

    #[test]
    fn zero_strength_is_exact() {
        let p = labels_with(2, 0, PauliLabel::Z, 1, PauliLabel::Z);
        for flavor in [CrosstalkFlavor::Coherent, CrosstalkFlavor::Stochastic] {
            let b = crosstalk_bound_oracle(0.0, 1, 1, &p, flavor).unwrap();
            assert!((b.f_true - 1.0).abs() < 1e-12);
            assert!((b.f_layer_estimate - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_small_alpha_forms() {
        let p = labels_with(2, 0, PauliLabel::Z, 1, PauliLabel::Z);
        let alpha = 0.1;
        let b = crosstalk_bound_oracle(alpha, 1, 1, &p, CrosstalkFlavor::Coherent).unwrap();
        // Exact values are cos²α and cos⁴α; small-α forms within O(α⁴).
        assert!((b.f_true - (1.0 - alpha * alpha)).abs() < 1e-3);
        assert!((b.f_layer_estimate - (1.0 - alpha * alpha).powi(2)).abs() < 1e-3);
        assert!(b.f_layer_estimate <= b.f_true);
        assert!((b.f_subspace_k - b.f_subspace_j).abs() < 1e-12);
    }

    #[test]
    fn stochastic_forms_are_exact() {
        let p = labels_with(2, 0, PauliLabel::X, 1, PauliLabel::X);
        let alpha = 0.1; // α² = 0.01
        let b = crosstalk_bound_oracle(alpha, 1, 1, &p, CrosstalkFlavor::Stochastic).unwrap();
        assert!((b.f_true - 0.99).abs() < 1e-12);
        assert!((b.f_subspace_k - 0.99).abs() < 1e-12);
        assert!((b.f_subspace_j - 0.99).abs() < 1e-12);
        assert!(b.f_layer_estimate <= b.f_true);
    }

    #[test]
    fn estimate_never_exceeds_truth() {
        let mut rng = StdRng::seed_from_u64(23);
        let labels = [PauliLabel::X, PauliLabel::Y, PauliLabel::Z];
        for _ in 0..300 {
            let n_k = rng.gen_range(1..=2);
            let n_j = rng.gen_range(1..=2);
            let site_k = rng.gen_range(0..n_k);
            let site_j = n_k + rng.gen_range(0..n_j);
            let p = labels_with(
                n_k + n_j,
                site_k,
                labels[rng.gen_range(0..3)],
                site_j,
                labels[rng.gen_range(0..3)],
            );
            let alpha = rng.gen::<f64>() * 0.3;
            let flavor = if rng.gen::<bool>() {
                CrosstalkFlavor::Coherent
            } else {
                CrosstalkFlavor::Stochastic
            };
            let b = crosstalk_bound_oracle(alpha, n_k, n_j, &p, flavor).unwrap();
            assert!(
                b.f_layer_estimate <= b.f_true + 1e-12,
                "estimate exceeded truth for {p} α = {alpha}"
            );
        }
    }

    #[test]
    fn rejects_bad_weight() {
        let p = PauliString::parse("XXI").unwrap();
        assert!(crosstalk_bound_oracle(0.1, 2, 1, &p, CrosstalkFlavor::Coherent).is_err());
        let p = PauliString::parse("III").unwrap();
        assert!(crosstalk_bound_oracle(0.1, 2, 1, &p, CrosstalkFlavor::Coherent).is_err());
    }
}
