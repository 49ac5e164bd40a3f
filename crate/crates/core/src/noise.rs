//! Noise models: per-qubit T1/T2 maps, coherent error terms (ZZ coupling,
//! rotation errors, Z drift, drive crosstalk), per-gate Pauli-stochastic
//! injections, and Pauli-Lindblad generator models.
//!
//! Units are seconds (T1/T2, durations), Hz (ZZ rates), dimensionless
//! fractions (rotation and drive-crosstalk strengths) and radians (Z drift),
//! matching the JSON schema in this module.

use crate::channel::QuantumChannel;
use crate::linalg::{CMat, C_ZERO};
use crate::pauli::PauliString;
use crate::{LfError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A coherent error term attached to the schedule.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoherentTerm {
    /// Always-on ZZ coupling: phase 2π·rate·Δt on |11⟩ of the pair every
    /// finite-duration slice.
    ZzAlwaysOn { qubits: (usize, usize), rate_hz: f64 },
    /// ZZ coupling active only while both pair members sit inside
    /// concurrently executing two-qubit gate slices.
    ZzSimultaneous2q { qubits: (usize, usize), rate_hz: f64 },
    /// Fractional overrotation of every two-qubit gate generator.
    Overrotation2q { fraction: f64 },
    /// Fractional underrotation of every X90.
    Underrotation1q { fraction: f64 },
    /// Rz(angle) applied to each listed qubit after every finite time slice.
    ZDriftPerSlice { qubits: Vec<usize>, angle_rad: f64 },
    /// While the 2Q gate on `driver`'s pair runs, the spectator receives IY
    /// and ZY drive terms (driver as the Z leg) at `fraction` of the driven
    /// gate's per-slice rotation angle.
    DriveCrosstalk {
        driver: usize,
        spectator: usize,
        fraction: f64,
    },
}

impl CoherentTerm {
    pub fn validate(&self, n: usize) -> Result<()> {
        let check_q = |q: usize| -> Result<()> {
            if q >= n {
                return Err(LfError::InvalidValue(format!(
                    "coherent term references qubit {q} outside system of {n}"
                )));
            }
            Ok(())
        };
        match self {
            CoherentTerm::ZzAlwaysOn { qubits, .. }
            | CoherentTerm::ZzSimultaneous2q { qubits, .. } => {
                check_q(qubits.0)?;
                check_q(qubits.1)?;
                if qubits.0 == qubits.1 {
                    return Err(LfError::InvalidValue(
                        "ZZ term needs two distinct qubits".into(),
                    ));
                }
            }
            CoherentTerm::Overrotation2q { fraction }
            | CoherentTerm::Underrotation1q { fraction } => {
                if !(-1.0..=1.0).contains(fraction) {
                    return Err(LfError::InvalidValue(format!(
                        "rotation fraction {fraction} outside [-1, 1]"
                    )));
                }
            }
            CoherentTerm::ZDriftPerSlice { qubits, .. } => {
                for &q in qubits {
                    check_q(q)?;
                }
            }
            CoherentTerm::DriveCrosstalk {
                driver,
                spectator,
                fraction,
            } => {
                check_q(*driver)?;
                check_q(*spectator)?;
                if !(-1.0..=1.0).contains(fraction) {
                    return Err(LfError::InvalidValue(format!(
                        "drive crosstalk fraction {fraction} outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Qubits this term couples (for locality analysis).
    pub fn support(&self) -> Vec<usize> {
        match self {
            CoherentTerm::ZzAlwaysOn { qubits, .. }
            | CoherentTerm::ZzSimultaneous2q { qubits, .. } => vec![qubits.0, qubits.1],
            CoherentTerm::Overrotation2q { .. } | CoherentTerm::Underrotation1q { .. } => vec![],
            CoherentTerm::ZDriftPerSlice { qubits, .. } => qubits.clone(),
            CoherentTerm::DriveCrosstalk {
                driver, spectator, ..
            } => vec![*driver, *spectator],
        }
    }
}

/// A Pauli-stochastic term applied after every finite time slice.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StochasticTerm {
    pub pauli: String,
    /// Qubits the Pauli string acts on (string index i -> qubits[i]).
    pub qubits: Vec<usize>,
    pub probability: f64,
}

/// Depolarizing noise attached to each application of a two-qubit gate on
/// the given pair (applied once, at gate completion).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GateDepolarizing {
    pub pair: (usize, usize),
    pub alpha: f64,
}

/// Full noise description for a simulated register.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Per-qubit T1 in seconds; `None` disables amplitude damping.
    #[serde(default)]
    pub t1_s: Vec<Option<f64>>,
    /// Per-qubit T2 in seconds; `None` disables dephasing. T2 ≤ 2·T1.
    #[serde(default)]
    pub t2_s: Vec<Option<f64>>,
    #[serde(default)]
    pub coherent_terms: Vec<CoherentTerm>,
    #[serde(default)]
    pub stochastic_terms: Vec<StochasticTerm>,
    #[serde(default)]
    pub gate_depolarizing: Vec<GateDepolarizing>,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    /// Uniform T1/T2 on `n` qubits.
    pub fn uniform_t1t2(n: usize, t1_s: f64, t2_s: f64) -> Self {
        Self {
            t1_s: vec![Some(t1_s); n],
            t2_s: vec![Some(t2_s); n],
            ..Self::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (t1, t2) in self.t1_s.iter().zip(&self.t2_s) {
            if let (Some(t1), Some(t2)) = (t1, t2) {
                if *t2 > 2.0 * t1 + 1e-15 {
                    return Err(LfError::InvalidValue(format!(
                        "T2 = {t2} exceeds 2·T1 = {}",
                        2.0 * t1
                    )));
                }
            }
        }
        for term in &self.coherent_terms {
            term.validate(n)?;
        }
        let mut total = 0.0;
        for s in &self.stochastic_terms {
            if !(0.0..=1.0).contains(&s.probability) {
                return Err(LfError::InvalidValue(
                    "stochastic probability outside [0,1]".into(),
                ));
            }
            total += s.probability;
            let p = PauliString::parse(&s.pauli)?;
            if p.n() != s.qubits.len() {
                return Err(LfError::InvalidValue(
                    "stochastic term qubit list does not match Pauli length".into(),
                ));
            }
            for &q in &s.qubits {
                if q >= n {
                    return Err(LfError::InvalidValue(format!(
                        "stochastic term references qubit {q} outside system of {n}"
                    )));
                }
            }
        }
        if total > 1.0 + 1e-12 {
            return Err(LfError::InvalidValue(
                "stochastic probabilities exceed 1 (no identity weight left)".into(),
            ));
        }
        for g in &self.gate_depolarizing {
            if !(0.0..=1.0).contains(&g.alpha) {
                return Err(LfError::InvalidValue(
                    "gate depolarizing parameter outside [0,1]".into(),
                ));
            }
            if g.pair.0 >= n || g.pair.1 >= n {
                return Err(LfError::InvalidValue(
                    "gate depolarizing pair outside system".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.t1_s.iter().all(Option::is_none)
            && self.t2_s.iter().all(Option::is_none)
            && self.coherent_terms.is_empty()
            && self.stochastic_terms.is_empty()
            && self.gate_depolarizing.is_empty()
    }

    /// True when no term couples qubits across the given disjoint groups, so
    /// each group can be simulated in its own window.
    pub fn is_local_to(&self, groups: &[Vec<usize>]) -> bool {
        let group_of = |q: usize| groups.iter().position(|g| g.contains(&q));
        let single_group = |support: &[usize]| -> bool {
            let mut ids = support.iter().map(|&q| group_of(q));
            match ids.next() {
                None => true,
                Some(first) => first.is_some() && ids.all(|g| g == first),
            }
        };
        self.coherent_terms.iter().all(|t| {
            let s = t.support();
            s.is_empty() || single_group(&s)
        }) && self.stochastic_terms.iter().all(|t| single_group(&t.qubits))
            && self
                .gate_depolarizing
                .iter()
                .all(|g| single_group(&[g.pair.0, g.pair.1]))
    }

    /// Restrict to a qubit window, relabeling qubit indices. Terms not fully
    /// inside the window are dropped; call only after `is_local_to` clears
    /// the partition.
    pub fn restrict(&self, window: &[usize]) -> NoiseModel {
        let map = |q: usize| window.iter().position(|&w| w == q);
        let pick = |v: &Vec<Option<f64>>| {
            window
                .iter()
                .map(|&q| v.get(q).copied().flatten())
                .collect()
        };
        NoiseModel {
            t1_s: pick(&self.t1_s),
            t2_s: pick(&self.t2_s),
            coherent_terms: self
                .coherent_terms
                .iter()
                .filter_map(|t| match t {
                    CoherentTerm::ZzAlwaysOn { qubits, rate_hz } => Some(CoherentTerm::ZzAlwaysOn {
                        qubits: (map(qubits.0)?, map(qubits.1)?),
                        rate_hz: *rate_hz,
                    }),
                    CoherentTerm::ZzSimultaneous2q { qubits, rate_hz } => {
                        Some(CoherentTerm::ZzSimultaneous2q {
                            qubits: (map(qubits.0)?, map(qubits.1)?),
                            rate_hz: *rate_hz,
                        })
                    }
                    CoherentTerm::Overrotation2q { .. } | CoherentTerm::Underrotation1q { .. } => {
                        Some(t.clone())
                    }
                    CoherentTerm::ZDriftPerSlice { qubits, angle_rad } => {
                        let kept: Vec<usize> = qubits.iter().filter_map(|&q| map(q)).collect();
                        if kept.is_empty() {
                            None
                        } else {
                            Some(CoherentTerm::ZDriftPerSlice {
                                qubits: kept,
                                angle_rad: *angle_rad,
                            })
                        }
                    }
                    CoherentTerm::DriveCrosstalk {
                        driver,
                        spectator,
                        fraction,
                    } => Some(CoherentTerm::DriveCrosstalk {
                        driver: map(*driver)?,
                        spectator: map(*spectator)?,
                        fraction: *fraction,
                    }),
                })
                .collect(),
            stochastic_terms: self
                .stochastic_terms
                .iter()
                .filter_map(|s| {
                    let qubits: Option<Vec<usize>> = s.qubits.iter().map(|&q| map(q)).collect();
                    Some(StochasticTerm {
                        pauli: s.pauli.clone(),
                        qubits: qubits?,
                        probability: s.probability,
                    })
                })
                .collect(),
            gate_depolarizing: self
                .gate_depolarizing
                .iter()
                .filter_map(|g| {
                    Some(GateDepolarizing {
                        pair: (map(g.pair.0)?, map(g.pair.1)?),
                        alpha: g.alpha,
                    })
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Discrete T1/T2 step: amplitude damping toward |0⟩ with 1 - e^{-dt/T1}
/// composed with pure dephasing so the total transverse decay is e^{-dt/T2}.
pub fn t1t2_step_channel(
    t1_s: Option<f64>,
    t2_s: Option<f64>,
    dt_s: f64,
) -> Result<QuantumChannel> {
    if dt_s < 0.0 {
        return Err(LfError::InvalidValue("negative time step".into()));
    }
    if let (Some(t1), Some(t2)) = (t1_s, t2_s) {
        if t2 > 2.0 * t1 + 1e-15 {
            return Err(LfError::InvalidValue(format!(
                "T2 = {t2} exceeds 2·T1 = {} (unphysical pure dephasing rate)",
                2.0 * t1
            )));
        }
    }
    QuantumChannel::from_kraus(1, t1t2_kraus(t1_s, t2_s, dt_s))
}

/// Kraus operators of the T1/T2 step (shared with the simulator hot path).
pub fn t1t2_kraus(t1_s: Option<f64>, t2_s: Option<f64>, dt_s: f64) -> Vec<CMat> {
    let gamma = t1_s.map_or(0.0, |t1| 1.0 - (-dt_s / t1).exp());
    // Extra pure-dephasing rate 1/T2 - 1/(2 T1).
    let rate = t2_s.map_or(0.0, |t2| 1.0 / t2) - t1_s.map_or(0.0, |t1| 0.5 / t1);
    let lambda = (-dt_s * rate.max(0.0)).exp();
    let p_z = (1.0 - lambda) / 2.0;

    let c = |x: f64| Complex64::new(x, 0.0);
    let ad0 = CMat::from_row_slice(2, 2, &[c(1.0), C_ZERO, C_ZERO, c((1.0 - gamma).sqrt())]);
    let ad1 = CMat::from_row_slice(2, 2, &[C_ZERO, c(gamma.sqrt()), C_ZERO, C_ZERO]);
    let mut out = Vec::with_capacity(4);
    for ad in [ad0, ad1] {
        if ad.iter().all(|v| v.norm() < 1e-15) {
            continue;
        }
        let k0 = ad.map(|v| v * (1.0 - p_z).sqrt());
        if k0.iter().any(|v| v.norm() > 1e-15) {
            out.push(k0);
        }
        if p_z > 0.0 {
            let z = CMat::from_row_slice(2, 2, &[c(1.0), C_ZERO, C_ZERO, c(-1.0)]);
            let kz = (&z * &ad).map(|v| v * p_z.sqrt());
            out.push(kz);
        }
    }
    out
}

/// Incoherent process error of a layer of duration `t_g_s` over the listed
/// qubits: ε = 1 - Π_i (1/4 + (1/2) e^{-t/T2,i} + (1/4) e^{-t/T1,i}).
pub fn incoherent_layer_error(t1_s: &[Option<f64>], t2_s: &[Option<f64>], t_g_s: f64) -> f64 {
    let mut prod = 1.0;
    for (t1, t2) in t1_s.iter().zip(t2_s) {
        let e1 = t1.map_or(1.0, |t| (-t_g_s / t).exp());
        let e2 = t2.map_or(1.0, |t| (-t_g_s / t).exp());
        prod *= 0.25 + 0.5 * e2 + 0.25 * e1;
    }
    1.0 - prod
}

/// Coherent process error ε_U = 1 - |Tr(U_ideal† U)|² / d².
pub fn coherent_process_error(u: &CMat, u_ideal: &CMat) -> Result<f64> {
    if u.nrows() != u_ideal.nrows() {
        return Err(LfError::DimensionMismatch(
            "coherent error unitaries".into(),
        ));
    }
    for m in [u, u_ideal] {
        let dev = crate::linalg::unitarity_deviation(m);
        if dev > 1e-8 {
            return Err(LfError::NotUnitary(dev));
        }
    }
    let d = u.nrows() as f64;
    let overlap = (u_ideal.adjoint() * u).trace().norm();
    Ok((1.0 - overlap * overlap / (d * d)).max(0.0))
}

/// Pauli-Lindblad model: generators (P_k, λ_k ≥ 0) of
/// ℒ(ρ) = Σ_k λ_k (P_k ρ P_k - ρ).
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct PauliLindbladModel {
    pub generators: Vec<(String, f64)>,
}

impl PauliLindbladModel {
    pub fn new(generators: Vec<(PauliString, f64)>) -> Result<Self> {
        for (_, l) in &generators {
            if *l < 0.0 {
                return Err(LfError::InvalidValue("negative Lindblad rate".into()));
            }
        }
        Ok(Self {
            generators: generators
                .into_iter()
                .map(|(p, l)| (p.to_string().trim_start_matches('+').to_string(), l))
                .collect(),
        })
    }

    pub fn parsed_generators(&self) -> Result<Vec<(PauliString, f64)>> {
        self.generators
            .iter()
            .map(|(s, l)| Ok((PauliString::parse(s)?, *l)))
            .collect()
    }

    /// Pauli fidelities of e^ℒ on n qubits: f_a = e^{-2 Σ_{k: ⟨a,k⟩≠0} λ_k}.
    pub fn pauli_fidelities(&self, n: usize) -> Result<Vec<f64>> {
        let gens = self.parsed_generators()?;
        let count = 1usize << (2 * n);
        let mut out = vec![0.0f64; count];
        for (a, f) in out.iter_mut().enumerate() {
            let pa = PauliString::from_basis_index(n, a);
            let mut rate = 0.0;
            for (pk, lk) in &gens {
                if pa.symplectic_product(pk) != 0 {
                    rate += lk;
                }
            }
            *f = (-2.0 * rate).exp();
        }
        Ok(out)
    }
}

/// Built-in coherent-error scenario presets for the four-qubit chain used by
/// the scattershot comparison campaign (labels a-i).
pub fn scenario_preset(label: char) -> Result<Vec<CoherentTerm>> {
    let zz = |a: usize, b: usize, rate: f64| CoherentTerm::ZzAlwaysOn {
        qubits: (a, b),
        rate_hz: rate,
    };
    let zz_sim = |a: usize, b: usize, rate: f64| CoherentTerm::ZzSimultaneous2q {
        qubits: (a, b),
        rate_hz: rate,
    };
    Ok(match label {
        'a' => vec![zz(0, 1, 150e3), zz(2, 3, 150e3)],
        'b' => vec![zz(0, 3, 150e3), zz(1, 2, 150e3)],
        'c' => vec![zz_sim(0, 1, 150e3), zz_sim(2, 3, 150e3)],
        'd' => vec![zz_sim(0, 3, 150e3), zz_sim(1, 2, 150e3)],
        'e' => vec![zz(0, 1, 100e3), zz(1, 2, 100e3), zz(2, 3, 100e3)],
        'f' => vec![CoherentTerm::ZDriftPerSlice {
            qubits: vec![0, 1, 2, 3],
            angle_rad: 0.02,
        }],
        'g' => vec![CoherentTerm::Overrotation2q { fraction: 0.10 }],
        'h' => vec![
            CoherentTerm::Overrotation2q { fraction: 0.10 },
            CoherentTerm::Underrotation1q { fraction: 0.10 },
        ],
        // Both IY and ZY at 10% each on every listed drive pair.
        'i' => vec![
            CoherentTerm::DriveCrosstalk {
                driver: 1,
                spectator: 2,
                fraction: 0.10,
            },
            CoherentTerm::DriveCrosstalk {
                driver: 2,
                spectator: 1,
                fraction: 0.10,
            },
            CoherentTerm::DriveCrosstalk {
                driver: 1,
                spectator: 0,
                fraction: 0.10,
            },
        ],
        other => {
            return Err(LfError::InvalidValue(format!(
                "unknown scenario preset '{other}'"
            )))
        }
    })
}
