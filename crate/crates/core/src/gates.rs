//! Native gate set: X90, virtual Rz, and the Clifford two-qubit entanglers.
//!
//! Every two-qubit kind here is a Hermitian involution, so it can be written
//! exactly as exp(-iπQ) with Q = (I - U)/2 a projector. The simulator slices
//! that exponential into fractional time steps and rotation errors rescale
//! the angle.

use crate::linalg::{expm, kron, CMat, C_I, C_ONE, C_ZERO};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TwoQubitGateKind {
    Cx,
    Cz,
    Ecr,
}

impl TwoQubitGateKind {
    /// 4x4 unitary with the first listed qubit as the leftmost factor.
    pub fn unitary(self) -> CMat {
        match self {
            TwoQubitGateKind::Cx => CMat::from_row_slice(
                4,
                4,
                &[
                    C_ONE, C_ZERO, C_ZERO, C_ZERO, //
                    C_ZERO, C_ONE, C_ZERO, C_ZERO, //
                    C_ZERO, C_ZERO, C_ZERO, C_ONE, //
                    C_ZERO, C_ZERO, C_ONE, C_ZERO,
                ],
            ),
            TwoQubitGateKind::Cz => {
                let mut m = CMat::identity(4, 4);
                m[(3, 3)] = -C_ONE;
                m
            }
            // Echoed cross-resonance, (IX - XY)/√2: Hermitian, self-inverse,
            // locally equivalent to CX.
            TwoQubitGateKind::Ecr => {
                let ix = kron(
                    &CMat::identity(2, 2),
                    &CMat::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ONE, C_ZERO]),
                );
                let xy = kron(
                    &CMat::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ONE, C_ZERO]),
                    &CMat::from_row_slice(2, 2, &[C_ZERO, -C_I, C_I, C_ZERO]),
                );
                (ix - xy).map(|c| c / 2f64.sqrt())
            }
        }
    }

    /// Projector Q with unitary = exp(-iπQ) exactly.
    pub fn generator_projector(self) -> CMat {
        (CMat::identity(4, 4) - self.unitary()).map(|c| c / 2.0)
    }

    /// One Trotter step: exp(-iπ·scale·Q / steps). `scale` carries rotation
    /// errors (1.0 when noiseless).
    pub fn partial_unitary(self, steps: u32, scale: f64) -> CMat {
        let q = self.generator_projector();
        expm(&q.map(|c| c * Complex64::new(0.0, -std::f64::consts::PI * scale / steps as f64)))
    }

    pub fn name(self) -> &'static str {
        match self {
            TwoQubitGateKind::Cx => "CX",
            TwoQubitGateKind::Cz => "CZ",
            TwoQubitGateKind::Ecr => "ECR",
        }
    }
}

/// A circuit operation. `Barrier` forces everything before it to complete
/// before anything after it starts, across all qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Op {
    X90 { q: usize },
    Rz { q: usize, theta: f64 },
    TwoQ { a: usize, b: usize, kind: TwoQubitGateKind },
    Barrier,
}

pub fn x90_unitary() -> CMat {
    // exp(-iπ/4 X)
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    CMat::from_row_slice(2, 2, &[s, -C_I * s, -C_I * s, s])
}

/// X90 with a rotation-fraction error: exp(-i(1+f)π/4 X).
pub fn x90_unitary_scaled(scale: f64) -> CMat {
    let x = CMat::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ONE, C_ZERO]);
    expm(&x.map(|c| c * Complex64::new(0.0, -std::f64::consts::FRAC_PI_4 * scale)))
}

pub fn rz_unitary(theta: f64) -> CMat {
    let mut m = CMat::zeros(2, 2);
    m[(0, 0)] = Complex64::from_polar(1.0, -theta / 2.0);
    m[(1, 1)] = Complex64::from_polar(1.0, theta / 2.0);
    m
}

/// Dense unitary of an op on its own qubits (oracle/test helper).
pub fn op_local_unitary(op: &Op) -> Option<CMat> {
    match op {
        Op::X90 { .. } => Some(x90_unitary()),
        Op::Rz { theta, .. } => Some(rz_unitary(*theta)),
        Op::TwoQ { kind, .. } => Some(kind.unitary()),
        Op::Barrier => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_deviation;

    #[test]
    fn two_qubit_kinds_are_hermitian_involutions() {
        for kind in [
            TwoQubitGateKind::Cx,
            TwoQubitGateKind::Cz,
            TwoQubitGateKind::Ecr,
        ] {
            let u = kind.unitary();
            assert!(unitarity_deviation(&u) < 1e-12, "{}", kind.name());
            let sq = &u * &u;
            assert!(
                (&sq - CMat::identity(4, 4)).iter().all(|c| c.norm() < 1e-12),
                "{} self-inverse",
                kind.name()
            );
            let herm = (&u - u.adjoint()).iter().all(|c| c.norm() < 1e-12);
            assert!(herm, "{} Hermitian", kind.name());
        }
    }

    #[test]
    fn partial_unitary_composes_to_gate() {
        for kind in [
            TwoQubitGateKind::Cx,
            TwoQubitGateKind::Cz,
            TwoQubitGateKind::Ecr,
        ] {
            for steps in [1u32, 5, 8] {
                let step = kind.partial_unitary(steps, 1.0);
                let mut acc = CMat::identity(4, 4);
                for _ in 0..steps {
                    acc = &step * acc;
                }
                assert!(
                    crate::linalg::equal_up_to_phase(&acc, &kind.unitary(), 1e-9),
                    "{} over {} steps",
                    kind.name(),
                    steps
                );
            }
        }
    }

    #[test]
    fn x90_squares_to_x() {
        let u = x90_unitary();
        let x = CMat::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ONE, C_ZERO]);
        assert!(crate::linalg::equal_up_to_phase(&(&u * &u), &x, 1e-12));
        assert!(crate::linalg::equal_up_to_phase(
            &x90_unitary_scaled(1.0),
            &u,
            1e-12
        ));
    }
}
