//! Trotterized density-matrix evolution of scheduled circuits under a
//! NoiseModel. Each finite time slice applies the slice unitary (gates plus
//! coherent error factors, in a fixed order: gate unitaries, drive
//! crosstalk, ZZ phases, Z drift) followed by the discrete per-qubit T1/T2
//! map and any stochastic terms; zero-duration Rz slices apply unitary only.

use crate::channel::DensityMatrix;
use crate::gates::TwoQubitGateKind;
use crate::linalg::{
    apply_local_diagonal, apply_local_kraus, apply_local_unitary, partial_trace, CMat, C_ONE,
};
use crate::noise::{t1t2_kraus, CoherentTerm, NoiseModel};
use crate::pauli::PauliString;
use crate::schedule::{ScheduledCircuit, SliceAction};
use crate::{LfError, Result};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::HashMap;

/// Dense density-matrix cap.
pub const SIM_QUBIT_CAP: usize = 10;

/// Exact simulation output for one circuit.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    /// Survival probability per disjoint unit (exact).
    pub unit_survivals: Vec<f64>,
    /// Sampled survival counts per unit (shots > 0 only).
    pub counts: Option<Vec<u64>>,
    /// Shots used for sampling (0 = exact mode).
    pub shots: u64,
    /// Probability per Hamming distance from the global target (mirror).
    pub hamming: Option<Vec<f64>>,
    pub wall_time_units: u64,
    pub seed: u64,
}

struct SliceGateInfo {
    overrotation: f64,
    underrotation_1q: f64,
}

/// Evolve a schedule from |0…0⟩ under the noise model.
pub fn evolve(
    sched: &ScheduledCircuit,
    noise: &NoiseModel,
    unit_time_s: f64,
) -> Result<DensityMatrix> {
    evolve_from(DensityMatrix::ground(sched.n), sched, noise, unit_time_s)
}

/// Evolve from an arbitrary initial state.
pub fn evolve_from(
    initial: DensityMatrix,
    sched: &ScheduledCircuit,
    noise: &NoiseModel,
    unit_time_s: f64,
) -> Result<DensityMatrix> {
    let n = sched.n;
    if n > SIM_QUBIT_CAP {
        return Err(LfError::SizeCap {
            n,
            cap: SIM_QUBIT_CAP,
        });
    }
    if initial.n() != n {
        return Err(LfError::DimensionMismatch("initial state size".into()));
    }
    sched.validate()?;
    noise.validate(n)?;

    let info = SliceGateInfo {
        overrotation: noise
            .coherent_terms
            .iter()
            .filter_map(|t| match t {
                CoherentTerm::Overrotation2q { fraction } => Some(*fraction),
                _ => None,
            })
            .sum(),
        underrotation_1q: noise
            .coherent_terms
            .iter()
            .filter_map(|t| match t {
                CoherentTerm::Underrotation1q { fraction } => Some(*fraction),
                _ => None,
            })
            .sum(),
    };

    // Per-qubit T1/T2 Kraus for one unit step.
    let dt = unit_time_s;
    let t1t2: Vec<Option<Vec<CMat>>> = (0..n)
        .map(|q| {
            let t1 = noise.t1_s.get(q).copied().flatten();
            let t2 = noise.t2_s.get(q).copied().flatten();
            if t1.is_none() && t2.is_none() {
                None
            } else {
                Some(t1t2_kraus(t1, t2, dt))
            }
        })
        .collect();

    let x90 = crate::gates::x90_unitary_scaled(1.0 - info.underrotation_1q);
    let mut partial_cache: HashMap<(TwoQubitGateKind, u32), CMat> = HashMap::new();
    let mut drive_cache: HashMap<(u32, i64), CMat> = HashMap::new();

    let stochastic: Vec<(Vec<usize>, CMat, f64)> = noise
        .stochastic_terms
        .iter()
        .map(|s| {
            let p = PauliString::parse(&s.pauli)?;
            Ok((s.qubits.clone(), p.to_matrix(), s.probability))
        })
        .collect::<Result<_>>()?;

    let mut rho = initial;
    for slice in &sched.slices {
        let mat = rho.matrix_mut();

        // Which qubits are inside 2Q-gate slices right now.
        let mut in_gate: Vec<Option<usize>> = vec![None; n];
        for (q, a) in slice.actions.iter().enumerate() {
            if let SliceAction::TwoQ { gate, .. } = a {
                in_gate[q] = Some(*gate);
            }
        }

        // (a) 1Q gate unitaries.
        for (q, a) in slice.actions.iter().enumerate() {
            match a {
                SliceAction::X90 => apply_local_unitary(mat, &x90, &[q], n),
                SliceAction::Rz { theta } => {
                    let rz = crate::gates::rz_unitary(*theta);
                    apply_local_unitary(mat, &rz, &[q], n);
                }
                _ => {}
            }
        }
        // (b) fractional 2Q gate steps (once per active gate).
        let mut applied_gates: Vec<usize> = Vec::new();
        for (q, a) in slice.actions.iter().enumerate() {
            if let SliceAction::TwoQ { gate, .. } = a {
                if applied_gates.contains(gate) {
                    continue;
                }
                let g = &sched.gates[*gate];
                if g.a != q {
                    continue; // apply from the first qubit's cell
                }
                applied_gates.push(*gate);
                let u = partial_cache
                    .entry((g.kind, g.duration))
                    .or_insert_with(|| g.kind.partial_unitary(g.duration, 1.0 + info.overrotation))
                    .clone();
                apply_local_unitary(mat, &u, &[g.a, g.b], n);
            }
        }
        // (c) drive crosstalk while the driver's gate is running.
        for term in &noise.coherent_terms {
            if let CoherentTerm::DriveCrosstalk {
                driver,
                spectator,
                fraction,
            } = term
            {
                if let Some(gi) = in_gate[*driver] {
                    let duration = sched.gates[gi].duration;
                    let key = (duration, (fraction * 1e12) as i64);
                    let u = drive_cache
                        .entry(key)
                        .or_insert_with(|| {
                            drive_crosstalk_step(duration, *fraction)
                        })
                        .clone();
                    apply_local_unitary(mat, &u, &[*driver, *spectator], n);
                }
            }
        }
        // (d) ZZ phases and (e) Z drift accrue only over finite slices.
        if slice.duration > 0 {
            for term in &noise.coherent_terms {
                match term {
                    CoherentTerm::ZzAlwaysOn { qubits, rate_hz } => {
                        apply_zz(mat, qubits, *rate_hz, dt * slice.duration as f64, n);
                    }
                    CoherentTerm::ZzSimultaneous2q { qubits, rate_hz } => {
                        let both_active = in_gate[qubits.0].is_some() && in_gate[qubits.1].is_some();
                        if both_active {
                            apply_zz(mat, qubits, *rate_hz, dt * slice.duration as f64, n);
                        }
                    }
                    CoherentTerm::ZDriftPerSlice { qubits, angle_rad } => {
                        let rz = crate::gates::rz_unitary(*angle_rad);
                        for &q in qubits {
                            apply_local_unitary(mat, &rz, &[q], n);
                        }
                    }
                    _ => {}
                }
            }

            // T1/T2 step on every qubit.
            for (q, kraus) in t1t2.iter().enumerate() {
                if let Some(kraus) = kraus {
                    apply_local_kraus(mat, kraus, &[q], n);
                }
            }
            // Stochastic Pauli terms.
            for (qubits, pm, prob) in &stochastic {
                if *prob > 0.0 {
                    let mut flipped = mat.clone();
                    apply_local_unitary(&mut flipped, pm, qubits, n);
                    *mat = mat.map(|c| c * (1.0 - prob)) + flipped.map(|c| c * *prob);
                }
            }
        }
        // Gate-completion depolarizing injections.
        for (q, a) in slice.actions.iter().enumerate() {
            if let SliceAction::TwoQ { gate, step } = a {
                let g = &sched.gates[*gate];
                if g.a == q && *step == g.duration - 1 {
                    for inj in &noise.gate_depolarizing {
                        let pair = (inj.pair.0.min(inj.pair.1), inj.pair.0.max(inj.pair.1));
                        if pair == (g.a.min(g.b), g.a.max(g.b)) {
                            apply_depolarizing_2q(mat, &[g.a, g.b], inj.alpha, n);
                        }
                    }
                }
            }
        }
    }
    // Re-validate the physicality invariants on the way out.
    let out = rho;
    debug_assert!((out.trace() - 1.0).abs() < 1e-9);
    Ok(out)
}

fn apply_zz(mat: &mut CMat, qubits: &(usize, usize), rate_hz: f64, dt_s: f64, n: usize) {
    let phase = 2.0 * std::f64::consts::PI * rate_hz * dt_s;
    let phases = [
        C_ONE,
        C_ONE,
        C_ONE,
        Complex64::from_polar(1.0, -phase),
    ];
    apply_local_diagonal(mat, &phases, &[qubits.0, qubits.1], n);
}

fn drive_crosstalk_step(duration: u32, fraction: f64) -> CMat {
    // exp(-i f · θ_slice · (IY + ZY)/2) on (driver, spectator) with
    // θ_slice = π / duration, the driven gate's per-slice rotation angle.
    let theta = std::f64::consts::PI / duration as f64;
    let iy = PauliString::parse("IY").unwrap().to_matrix();
    let zy = PauliString::parse("ZY").unwrap().to_matrix();
    let h = (iy + zy).map(|c| c / 2.0);
    crate::linalg::expm(&h.map(|c| c * Complex64::new(0.0, -fraction * theta)))
}

/// rho -> α rho + (1-α) tr_pair(rho) ⊗ I/4 on the pair.
fn apply_depolarizing_2q(mat: &mut CMat, qubits: &[usize], alpha: f64, n: usize) {
    if alpha >= 1.0 {
        return;
    }
    let others: Vec<usize> = (0..n).filter(|q| !qubits.contains(q)).collect();
    let reduced = partial_trace(mat, &others, n);
    // Re-embed reduced ⊗ I/4 at the pair's position: zero the pair's
    // coherences by direct index surgery.
    let dim = 1usize << n;
    let mask_a = dim >> (qubits[0] + 1);
    let mask_b = dim >> (qubits[1] + 1);
    let pair_mask = mask_a | mask_b;
    let rest_index = |idx: usize| -> usize {
        // Compact the non-pair bits (in descending significance).
        let mut out = 0usize;
        for q in 0..n {
            if qubits.contains(&q) {
                continue;
            }
            out = (out << 1) | ((idx >> (n - 1 - q)) & 1);
        }
        out
    };
    for row in 0..dim {
        for col in 0..dim {
            let mixed = if (row & pair_mask) == (col & pair_mask) {
                reduced[(rest_index(row), rest_index(col))] / 4.0
            } else {
                Complex64::new(0.0, 0.0)
            };
            mat[(row, col)] = mat[(row, col)] * alpha + mixed * (1.0 - alpha);
        }
    }
}

/// Ground/target population of a unit: partial trace over the complement,
/// then the diagonal element at `target`.
pub fn unit_survival(dm: &DensityMatrix, unit_qubits: &[usize], target: u64) -> f64 {
    let reduced = partial_trace(dm.matrix(), unit_qubits, dm.n());
    reduced[(target as usize, target as usize)].re
}

/// Probability per Hamming distance from `target` over the full register.
pub fn hamming_histogram(dm: &DensityMatrix, target: u64) -> Vec<f64> {
    let n = dm.n();
    let mut h = vec![0.0; n + 1];
    for b in 0..(1usize << n) {
        let k = ((b as u64) ^ target).count_ones() as usize;
        h[k] += dm.matrix()[(b, b)].re;
    }
    h
}

/// Multinomial sampling: draw `shots` outcomes over `probs` (normalized on
/// entry up to rounding; remainders fold into the last class).
pub fn sample_multinomial(probs: &[f64], shots: u64, rng: &mut ChaCha12Rng) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    if probs.is_empty() {
        return counts;
    }
    for _ in 0..shots {
        let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let mut acc = 0.0;
        let mut hit = probs.len() - 1;
        for (i, &p) in probs.iter().enumerate() {
            acc += p.max(0.0);
            if u < acc {
                hit = i;
                break;
            }
        }
        counts[hit] += 1;
    }
    counts
}

/// Simulate one circuit's schedule and read out every unit. `shots = 0`
/// reports exact probabilities only.
pub fn simulate_scheduled(
    sched: &ScheduledCircuit,
    meta: &crate::circuits::CircuitMeta,
    noise: &NoiseModel,
    unit_time_s: f64,
    shots: u64,
    seed: u64,
) -> Result<SimOutcome> {
    let dm = evolve(sched, noise, unit_time_s)?;
    let mut survivals = Vec::new();
    for u in &meta.units {
        survivals.push(unit_survival(&dm, &u.unit.qubits(), u.target));
    }
    let mut hamming = None;
    if let Some(target) = meta.global_target {
        let all: Vec<usize> = (0..sched.n).collect();
        survivals.push(unit_survival(&dm, &all, target));
        hamming = Some(hamming_histogram(&dm, target));
    }
    let mut counts = None;
    if shots > 0 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        counts = Some(
            survivals
                .iter()
                .map(|&p| sample_multinomial(&[p, 1.0 - p], shots, &mut rng)[0])
                .collect(),
        );
        if let Some(h) = &hamming {
            let sampled = sample_multinomial(h, shots, &mut rng);
            hamming = Some(sampled.iter().map(|&c| c as f64 / shots as f64).collect());
        }
    }
    Ok(SimOutcome {
        unit_survivals: survivals,
        counts,
        shots,
        hamming,
        wall_time_units: sched.wall_time_units(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_direct_rb, LayerSpec, RbConfig};
    use crate::gates::Op;
    use crate::noise::GateDepolarizing;
    use crate::schedule::schedule;
    use std::collections::BTreeMap;

    const UNIT: f64 = 50e-9;

    #[test]
    fn empty_schedule_leaves_state() {
        let sched = schedule(2, &[], &BTreeMap::new()).unwrap();
        let out = evolve(&sched, &NoiseModel::noiseless(), UNIT).unwrap();
        assert!((out.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn idle_t1_decay_closed_form() {
        // 8 idle slices on one qubit prepared in |1⟩, T1 = 50 µs, unit 50 ns:
        // excited population e^{-0.008}.
        let ops: Vec<Op> = (0..8).map(|_| Op::X90 { q: 1 }).collect(); // busy q1 to make 8 slices
        let sched = schedule(2, &ops, &BTreeMap::new()).unwrap();
        let mut init = DensityMatrix::ground(2);
        // |1⟩ on qubit 0 (leftmost): basis index 0b10.
        init.matrix_mut()[(0, 0)] = Complex64::new(0.0, 0.0);
        init.matrix_mut()[(2, 2)] = Complex64::new(1.0, 0.0);
        let noise = NoiseModel {
            t1_s: vec![Some(50e-6), None],
            t2_s: vec![Some(50e-6), None],
            ..NoiseModel::default()
        };
        let out = evolve_from(init, &sched, &noise, UNIT).unwrap();
        let pop: f64 = out.matrix()[(2, 2)].re + out.matrix()[(3, 3)].re;
        assert!((pop - (-0.008f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let spec = LayerSpec::even_odd_chain(4, crate::gates::TwoQubitGateKind::Cx, 8).unwrap();
        let cfg = RbConfig {
            depths: vec![4],
            randomizations: 1,
            shots: 0,
            seed: 3,
        };
        let c = &build_direct_rb(&spec, 0, &cfg).unwrap()[0];
        let sched = c.schedule(&spec).unwrap();
        let mut noise = NoiseModel::uniform_t1t2(4, 50e-6, 50e-6);
        noise.coherent_terms = crate::noise::scenario_preset('b').unwrap();
        let out = evolve(&sched, &noise, UNIT).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-9);
        let herm = (out.matrix() - out.matrix().adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(herm < 1e-10);
        out.validate().unwrap();
    }

    #[test]
    fn noiseless_direct_rb_survival_is_one() {
        let spec = LayerSpec::even_odd_chain(4, crate::gates::TwoQubitGateKind::Cx, 5).unwrap();
        let cfg = RbConfig {
            depths: vec![1, 4],
            randomizations: 2,
            shots: 0,
            seed: 11,
        };
        for m in 0..2 {
            for c in build_direct_rb(&spec, m, &cfg).unwrap() {
                let sched = c.schedule(&spec).unwrap();
                let out =
                    simulate_scheduled(&sched, &c.meta, &NoiseModel::noiseless(), UNIT, 0, 0)
                        .unwrap();
                for s in out.unit_survivals {
                    assert!((s - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn unit_survival_examples() {
        let dm = DensityMatrix::ground(3);
        assert!((unit_survival(&dm, &[0, 1], 0) - 1.0).abs() < 1e-12);
        // Maximally mixed pair: survival 1/4.
        let mut mixed = DensityMatrix::ground(2);
        let m = mixed.matrix_mut();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = if i == j {
                    Complex64::new(0.25, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
        }
        assert!((unit_survival(&mixed, &[0, 1], 0) - 0.25).abs() < 1e-12);

        // Product state oracle: |0⟩⊗|1⟩⊗|0⟩, survival of (1) at |1⟩ is 1.
        let mut prod = DensityMatrix::ground(3);
        prod.matrix_mut()[(0, 0)] = Complex64::new(0.0, 0.0);
        prod.matrix_mut()[(0b010, 0b010)] = Complex64::new(1.0, 0.0);
        assert!((unit_survival(&prod, &[1], 1) - 1.0).abs() < 1e-12);
        assert!((unit_survival(&prod, &[0, 2], 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn per_gate_depolarizing_matches_closed_form() {
        // Direct RB on a 2-qubit chain with per-gate depolarizing α: exact
        // survival is 1/4 + (3/4) α^{l + g_inv}.
        let spec = LayerSpec::even_odd_chain(2, crate::gates::TwoQubitGateKind::Cx, 8).unwrap();
        let alpha = 0.95;
        let noise = NoiseModel {
            gate_depolarizing: vec![GateDepolarizing {
                pair: (0, 1),
                alpha,
            }],
            ..NoiseModel::default()
        };
        let cfg = RbConfig {
            depths: vec![3],
            randomizations: 4,
            shots: 0,
            seed: 21,
        };
        for c in build_direct_rb(&spec, 0, &cfg).unwrap() {
            let g_inv = c
                .ops
                .iter()
                .filter(|o| matches!(o, Op::TwoQ { .. }))
                .count() as u32
                - c.meta.depth;
            let sched = c.schedule(&spec).unwrap();
            let out = simulate_scheduled(&sched, &c.meta, &noise, UNIT, 0, 0).unwrap();
            let total = alpha.powi((c.meta.depth + g_inv) as i32);
            let expect = 0.25 + 0.75 * total;
            assert!(
                (out.unit_survivals[0] - expect).abs() < 1e-9,
                "depth {} g_inv {}",
                c.meta.depth,
                g_inv
            );
        }
    }

    #[test]
    fn sampling_behaviour() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let counts = sample_multinomial(&[1.0, 0.0], 300, &mut rng);
        assert_eq!(counts, vec![300, 0]);

        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let counts = sample_multinomial(&[0.5, 0.5], 100_000, &mut rng);
        let sigma = (100_000f64 * 0.25).sqrt();
        assert!((counts[0] as f64 - 50_000.0).abs() < 5.0 * sigma);

        // Reproducibility.
        let mut a = ChaCha12Rng::seed_from_u64(7);
        let mut b = ChaCha12Rng::seed_from_u64(7);
        assert_eq!(
            sample_multinomial(&[0.3, 0.7], 1000, &mut a),
            sample_multinomial(&[0.3, 0.7], 1000, &mut b)
        );
    }

    #[test]
    fn zz_simultaneous_requires_both_members_in_gates() {
        // One pair gated, ZZ(0, 3) simultaneous-only: qubit 3 idles, so the
        // term never fires and survival stays 1.
        let spec = LayerSpec::new(
            4,
            vec![crate::circuits::SubLayer {
                gates: vec![crate::circuits::GateSpec {
                    a: 0,
                    b: 1,
                    kind: crate::gates::TwoQubitGateKind::Cx,
                }],
                idle: vec![2, 3],
            }],
            [((0, 1), 8)].into_iter().collect(),
        )
        .unwrap();
        let cfg = RbConfig {
            depths: vec![4],
            randomizations: 2,
            shots: 0,
            seed: 9,
        };
        let noise = NoiseModel {
            coherent_terms: vec![CoherentTerm::ZzSimultaneous2q {
                qubits: (0, 3),
                rate_hz: 150e3,
            }],
            ..NoiseModel::default()
        };
        for c in build_direct_rb(&spec, 0, &cfg).unwrap() {
            let sched = c.schedule(&spec).unwrap();
            let out = simulate_scheduled(&sched, &c.meta, &noise, UNIT, 0, 0).unwrap();
            for s in &out.unit_survivals {
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn determinism_same_seed_same_outcome() {
        let spec = LayerSpec::even_odd_chain(4, crate::gates::TwoQubitGateKind::Cx, 8).unwrap();
        let cfg = RbConfig {
            depths: vec![2],
            randomizations: 1,
            shots: 100,
            seed: 1,
        };
        let c = &build_direct_rb(&spec, 0, &cfg).unwrap()[0];
        let sched = c.schedule(&spec).unwrap();
        let noise = NoiseModel::uniform_t1t2(4, 50e-6, 50e-6);
        let a = simulate_scheduled(&sched, &c.meta, &noise, UNIT, 100, 42).unwrap();
        let b = simulate_scheduled(&sched, &c.meta, &noise, UNIT, 100, 42).unwrap();
        assert_eq!(a.unit_survivals, b.unit_survivals);
        assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn disjointness_noise_on_one_unit_only() {
        // Depolarizing on pair (0,1) leaves pair (2,3) at survival 1.
        let spec = LayerSpec::even_odd_chain(4, crate::gates::TwoQubitGateKind::Cx, 8).unwrap();
        let noise = NoiseModel {
            gate_depolarizing: vec![GateDepolarizing {
                pair: (0, 1),
                alpha: 0.9,
            }],
            ..NoiseModel::default()
        };
        let cfg = RbConfig {
            depths: vec![3],
            randomizations: 2,
            shots: 0,
            seed: 31,
        };
        for c in build_direct_rb(&spec, 0, &cfg).unwrap() {
            let sched = c.schedule(&spec).unwrap();
            let out = simulate_scheduled(&sched, &c.meta, &noise, UNIT, 0, 0).unwrap();
            assert!(out.unit_survivals[0] < 1.0 - 1e-3);
            assert!((out.unit_survivals[1] - 1.0).abs() < 1e-9);
        }
    }
}
