//! RB circuit families over disjoint two-qubit-gate layers: direct
//! (barrier-aligned), simultaneous (free-running), isolated, mirror with and
//! without a central Pauli layer, and staggered layers. Builders track the
//! per-unit Clifford so the closing layer inverts each disjoint unit, and
//! every circuit records its ideal measurement target.

use crate::clifford::{
    clifford_1q_table, clifford_to_native, conjugate_through_op, remap_ops_1q,
    CliffordTableau,
};
use crate::gates::{Op, TwoQubitGateKind};
use crate::pauli::{PauliLabel, PauliString};
use crate::schedule::{schedule, ScheduledCircuit};
use crate::{LfError, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub a: usize,
    pub b: usize,
    pub kind: TwoQubitGateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubLayer {
    pub gates: Vec<GateSpec>,
    pub idle: Vec<usize>,
}

/// An N-qubit connected gate set partitioned into disjoint sub-layers, with
/// idle-qubit bookkeeping and per-edge durations in time units (1Q gate = 1
/// unit, Rz = 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub n: usize,
    pub sublayers: Vec<SubLayer>,
    pub durations: BTreeMap<(usize, usize), u32>,
}

/// A disjoint decay unit of one sub-layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Pair { a: usize, b: usize, kind: TwoQubitGateKind },
    Idle { q: usize },
}

impl Unit {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Unit::Pair { a, b, .. } => vec![*a, *b],
            Unit::Idle { q } => vec![*q],
        }
    }

    /// Decay-space dimension: 4 for pairs, 2 for idles.
    pub fn dimension(&self) -> usize {
        match self {
            Unit::Pair { .. } => 4,
            Unit::Idle { .. } => 2,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Unit::Pair { a, b, .. } => format!("pair({a},{b})"),
            Unit::Idle { q } => format!("idle({q})"),
        }
    }
}

impl LayerSpec {
    pub fn new(
        n: usize,
        sublayers: Vec<SubLayer>,
        durations: BTreeMap<(usize, usize), u32>,
    ) -> Result<Self> {
        let spec = Self {
            n,
            sublayers,
            durations,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Even/odd decomposition of a linear chain of n qubits with uniform
    /// gate kind and duration.
    pub fn even_odd_chain(n: usize, kind: TwoQubitGateKind, duration: u32) -> Result<Self> {
        let mut durations = BTreeMap::new();
        let mut even = SubLayer {
            gates: vec![],
            idle: vec![],
        };
        let mut odd = SubLayer {
            gates: vec![],
            idle: vec![],
        };
        for q in 0..n.saturating_sub(1) {
            durations.insert((q, q + 1), duration);
            let gate = GateSpec { a: q, b: q + 1, kind };
            if q % 2 == 0 {
                even.gates.push(gate);
            } else {
                odd.gates.push(gate);
            }
        }
        for q in 0..n {
            if !even.gates.iter().any(|g| g.a == q || g.b == q) {
                even.idle.push(q);
            }
            if !odd.gates.iter().any(|g| g.a == q || g.b == q) {
                odd.idle.push(q);
            }
        }
        Self::new(n, vec![even, odd], durations)
    }

    pub fn validate(&self) -> Result<()> {
        let key = |a: usize, b: usize| (a.min(b), a.max(b));
        let mut all_edges = std::collections::BTreeSet::new();
        for (m, sub) in self.sublayers.iter().enumerate() {
            let mut used = vec![false; self.n];
            for g in &sub.gates {
                if g.a >= self.n || g.b >= self.n || g.a == g.b {
                    return Err(LfError::InvalidLayerSpec(format!(
                        "bad gate ({}, {}) in sub-layer {m}",
                        g.a, g.b
                    )));
                }
                for q in [g.a, g.b] {
                    if used[q] {
                        return Err(LfError::InvalidLayerSpec(format!(
                            "qubit {q} appears twice in sub-layer {m}"
                        )));
                    }
                    used[q] = true;
                }
                if !all_edges.insert(key(g.a, g.b)) {
                    return Err(LfError::InvalidLayerSpec(format!(
                        "edge ({}, {}) appears in more than one sub-layer",
                        g.a, g.b
                    )));
                }
                if !self.durations.contains_key(&key(g.a, g.b)) {
                    return Err(LfError::InvalidLayerSpec(format!(
                        "no duration for edge ({}, {})",
                        g.a, g.b
                    )));
                }
            }
            for &q in &sub.idle {
                if q >= self.n {
                    return Err(LfError::InvalidLayerSpec(format!(
                        "idle qubit {q} out of range"
                    )));
                }
                if used[q] {
                    return Err(LfError::InvalidLayerSpec(format!(
                        "qubit {q} both gated and idle in sub-layer {m}"
                    )));
                }
                used[q] = true;
            }
            if let Some(q) = used.iter().position(|u| !u) {
                return Err(LfError::InvalidLayerSpec(format!(
                    "qubit {q} neither gated nor idle in sub-layer {m}"
                )));
            }
        }
        Ok(())
    }

    /// Disjoint decay units of sub-layer m (pairs first, then idles).
    pub fn units(&self, m: usize) -> Vec<Unit> {
        let sub = &self.sublayers[m];
        sub.gates
            .iter()
            .map(|g| Unit::Pair {
                a: g.a,
                b: g.b,
                kind: g.kind,
            })
            .chain(sub.idle.iter().map(|&q| Unit::Idle { q }))
            .collect()
    }

    pub fn duration_of(&self, a: usize, b: usize) -> u32 {
        self.durations[&(a.min(b), a.max(b))]
    }

    /// Longest gate duration in sub-layer m (the barrier pads everything to
    /// this length).
    pub fn padded_duration(&self, m: usize) -> u32 {
        self.sublayers[m]
            .gates
            .iter()
            .map(|g| self.duration_of(g.a, g.b))
            .max()
            .unwrap_or(0)
    }

    /// Total number of 2Q gates across all sub-layers.
    pub fn n_2q(&self) -> usize {
        self.sublayers.iter().map(|s| s.gates.len()).sum()
    }
}

/// Shared RB experiment shape. `shots = 0` requests exact probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbConfig {
    pub depths: Vec<u32>,
    pub randomizations: u32,
    pub shots: u64,
    pub seed: u64,
}

impl RbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LfError::InvalidConfig(
                "depths must be strictly increasing".into(),
            ));
        }
        if self.depths.is_empty() {
            return Err(LfError::InvalidConfig("no depths".into()));
        }
        if self.randomizations == 0 {
            return Err(LfError::InvalidConfig("no randomizations".into()));
        }
        Ok(())
    }

    pub fn validate_mirror(&self) -> Result<()> {
        self.validate()?;
        if self.depths.iter().any(|d| d % 2 != 0) {
            return Err(LfError::InvalidConfig("mirror depths must be even".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbFamily {
    Direct,
    Simultaneous,
    Isolated,
    MirrorPauli,
    MirrorNoPauli,
    Staggered,
}

impl RbFamily {
    fn tag(self) -> u64 {
        match self {
            RbFamily::Direct => 1,
            RbFamily::Simultaneous => 2,
            RbFamily::Isolated => 3,
            RbFamily::MirrorPauli => 4,
            RbFamily::MirrorNoPauli => 5,
            RbFamily::Staggered => 6,
        }
    }
}

/// Per-unit measurement descriptor: survival is read at `target` (bits over
/// `qubits`, qubits[0] the most significant bit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitDescriptor {
    pub unit: Unit,
    pub sublayer: usize,
    pub target: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitMeta {
    pub family: RbFamily,
    pub depth: u32,
    pub randomization: u32,
    pub units: Vec<UnitDescriptor>,
    /// For mirror circuits: target bitstring over the full register.
    pub global_target: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n: usize,
    pub ops: Vec<Op>,
    pub meta: CircuitMeta,
}

impl Circuit {
    pub fn schedule(&self, spec: &LayerSpec) -> Result<ScheduledCircuit> {
        schedule(self.n, &self.ops, &spec.durations)
    }
}

/// Deterministic per-circuit RNG stream from (seed, family, sub-layer/pair
/// discriminator, depth, randomization).
fn circuit_rng(seed: u64, family: RbFamily, discr: u64, depth: u32, randomization: u32) -> ChaCha12Rng {
    let mut state = seed;
    let mut mix = |v: u64| {
        state ^= v.wrapping_add(0x9e3779b97f4a7c15).wrapping_add(state << 6);
        state = state.wrapping_mul(0xbf58476d1ce4e5b9);
        state ^= state >> 27;
    };
    mix(family.tag());
    mix(discr);
    mix(depth as u64);
    mix(randomization as u64);
    let mut bytes = [0u8; 32];
    for chunk in 0..4 {
        state = state.wrapping_mul(0x94d049bb133111eb).wrapping_add(1);
        let v = state ^ (state >> 31);
        bytes[chunk * 8..chunk * 8 + 8].copy_from_slice(&v.to_le_bytes());
    }
    ChaCha12Rng::from_seed(bytes)
}

fn sample_clifford<R: Rng>(rng: &mut R) -> usize {
    rng.gen_range(0..24)
}

/// Tracker for one disjoint unit's accumulated Clifford.
struct UnitTracker {
    unit: Unit,
    sublayer: usize,
    tableau: CliffordTableau,
}

impl UnitTracker {
    fn new(unit: Unit, sublayer: usize) -> Self {
        let n = unit.qubits().len();
        Self {
            unit,
            sublayer,
            tableau: CliffordTableau::identity(n),
        }
    }

    fn apply_1q(&mut self, qubit: usize, clifford: usize) {
        let local = self
            .unit
            .qubits()
            .iter()
            .position(|&q| q == qubit)
            .expect("qubit belongs to unit");
        let table = clifford_1q_table();
        self.tableau = self
            .tableau
            .then_on(&table.elements[clifford].tableau, &[local]);
    }

    fn apply_gate(&mut self) {
        if let Unit::Pair { kind, .. } = self.unit {
            self.tableau = self.tableau.then(crate::clifford::two_q_tableau(kind));
        }
    }

    /// Closing inverse as native ops on the unit's real qubits.
    fn inversion_ops(&self) -> Result<Vec<Op>> {
        let inv = self.tableau.inverse();
        let kind = match self.unit {
            Unit::Pair { kind, .. } => kind,
            Unit::Idle { .. } => TwoQubitGateKind::Cx,
        };
        let ops = clifford_to_native(&inv, kind)?;
        let qubits = self.unit.qubits();
        Ok(ops
            .into_iter()
            .map(|op| match op {
                Op::X90 { q } => Op::X90 { q: qubits[q] },
                Op::Rz { q, theta } => Op::Rz {
                    q: qubits[q],
                    theta,
                },
                Op::TwoQ { a, b, kind } => Op::TwoQ {
                    a: qubits[a],
                    b: qubits[b],
                    kind,
                },
                Op::Barrier => Op::Barrier,
            })
            .collect())
    }

    fn descriptor(&self) -> UnitDescriptor {
        UnitDescriptor {
            unit: self.unit.clone(),
            sublayer: self.sublayer,
            target: 0,
        }
    }
}

fn append_clifford(ops: &mut Vec<Op>, qubit: usize, clifford: usize) {
    let table = clifford_1q_table();
    ops.extend(remap_ops_1q(&table.elements[clifford].ops, qubit));
}

/// Direct RB on sub-layer m: l repetitions of [1Q Clifford layer; barrier;
/// sub-layer gates; barrier], then one inversion layer per disjoint unit.
/// Ideal output is all-zeros on every unit.
pub fn build_direct_rb(spec: &LayerSpec, m: usize, cfg: &RbConfig) -> Result<Vec<Circuit>> {
    build_layer_family(spec, m, cfg, RbFamily::Direct)
}

/// Staggered variant: the 2Q gates of the sub-layer execute sequentially
/// (barriers between them), so no two gates share a time slice.
pub fn build_staggered(spec: &LayerSpec, m: usize, cfg: &RbConfig) -> Result<Vec<Circuit>> {
    build_layer_family(spec, m, cfg, RbFamily::Staggered)
}

fn build_layer_family(
    spec: &LayerSpec,
    m: usize,
    cfg: &RbConfig,
    family: RbFamily,
) -> Result<Vec<Circuit>> {
    spec.validate()?;
    cfg.validate()?;
    if m >= spec.sublayers.len() {
        return Err(LfError::InvalidConfig(format!("sub-layer {m} out of range")));
    }
    let mut out = Vec::new();
    for &depth in &cfg.depths {
        for r in 0..cfg.randomizations {
            let mut rng = circuit_rng(cfg.seed, family, m as u64, depth, r);
            let mut trackers: Vec<UnitTracker> = spec
                .units(m)
                .into_iter()
                .map(|u| UnitTracker::new(u, m))
                .collect();
            let mut ops = Vec::new();
            for _ in 0..depth {
                for q in 0..spec.n {
                    let c = sample_clifford(&mut rng);
                    append_clifford(&mut ops, q, c);
                    for t in trackers.iter_mut() {
                        if t.unit.qubits().contains(&q) {
                            t.apply_1q(q, c);
                        }
                    }
                }
                ops.push(Op::Barrier);
                for g in &spec.sublayers[m].gates {
                    ops.push(Op::TwoQ {
                        a: g.a,
                        b: g.b,
                        kind: g.kind,
                    });
                    if family == RbFamily::Staggered {
                        ops.push(Op::Barrier);
                    }
                }
                for t in trackers.iter_mut() {
                    t.apply_gate();
                }
                if family != RbFamily::Staggered {
                    ops.push(Op::Barrier);
                }
            }
            for t in &trackers {
                ops.extend(t.inversion_ops()?);
                // Keep the staggered property through the closing layer.
                if family == RbFamily::Staggered {
                    ops.push(Op::Barrier);
                }
            }
            out.push(Circuit {
                n: spec.n,
                ops,
                meta: CircuitMeta {
                    family,
                    depth,
                    randomization: r,
                    units: trackers.iter().map(|t| t.descriptor()).collect(),
                    global_target: None,
                },
            });
        }
    }
    Ok(out)
}

/// Simultaneous RB on sub-layer m: each disjoint unit runs its own Clifford
/// sequence with no cross-unit barriers; units of unequal gate duration
/// drift out of alignment.
pub fn build_simultaneous_rb(spec: &LayerSpec, m: usize, cfg: &RbConfig) -> Result<Vec<Circuit>> {
    spec.validate()?;
    cfg.validate()?;
    if m >= spec.sublayers.len() {
        return Err(LfError::InvalidConfig(format!("sub-layer {m} out of range")));
    }
    let mut out = Vec::new();
    for &depth in &cfg.depths {
        for r in 0..cfg.randomizations {
            let mut rng = circuit_rng(cfg.seed, RbFamily::Simultaneous, m as u64, depth, r);
            let mut trackers: Vec<UnitTracker> = spec
                .units(m)
                .into_iter()
                .map(|u| UnitTracker::new(u, m))
                .collect();
            let mut ops = Vec::new();
            for _ in 0..depth {
                for t in trackers.iter_mut() {
                    for q in t.unit.qubits() {
                        let c = sample_clifford(&mut rng);
                        append_clifford(&mut ops, q, c);
                        t.apply_1q(q, c);
                    }
                    if let Unit::Pair { a, b, kind } = t.unit {
                        ops.push(Op::TwoQ { a, b, kind });
                    }
                    t.apply_gate();
                }
            }
            for t in &trackers {
                ops.extend(t.inversion_ops()?);
            }
            out.push(Circuit {
                n: spec.n,
                ops,
                meta: CircuitMeta {
                    family: RbFamily::Simultaneous,
                    depth,
                    randomization: r,
                    units: trackers.iter().map(|t| t.descriptor()).collect(),
                    global_target: None,
                },
            });
        }
    }
    Ok(out)
}

/// Isolated RB: only the chosen pair is active, spectators carry no gates
/// and there are no barriers.
pub fn build_isolated_rb(
    spec: &LayerSpec,
    pair: (usize, usize),
    cfg: &RbConfig,
) -> Result<Vec<Circuit>> {
    spec.validate()?;
    cfg.validate()?;
    let (m, gate) = spec
        .sublayers
        .iter()
        .enumerate()
        .find_map(|(m, sub)| {
            sub.gates
                .iter()
                .find(|g| {
                    (g.a, g.b) == pair || (g.b, g.a) == pair
                })
                .map(|g| (m, *g))
        })
        .ok_or_else(|| {
            LfError::InvalidConfig(format!("pair ({}, {}) not in any sub-layer", pair.0, pair.1))
        })?;
    let mut out = Vec::new();
    for &depth in &cfg.depths {
        for r in 0..cfg.randomizations {
            let discr = (gate.a as u64) << 32 | gate.b as u64;
            let mut rng = circuit_rng(cfg.seed, RbFamily::Isolated, discr, depth, r);
            let mut tracker = UnitTracker::new(
                Unit::Pair {
                    a: gate.a,
                    b: gate.b,
                    kind: gate.kind,
                },
                m,
            );
            let mut ops = Vec::new();
            for _ in 0..depth {
                for q in [gate.a, gate.b] {
                    let c = sample_clifford(&mut rng);
                    append_clifford(&mut ops, q, c);
                    tracker.apply_1q(q, c);
                }
                ops.push(Op::TwoQ {
                    a: gate.a,
                    b: gate.b,
                    kind: gate.kind,
                });
                tracker.apply_gate();
            }
            ops.extend(tracker.inversion_ops()?);
            out.push(Circuit {
                n: spec.n,
                ops,
                meta: CircuitMeta {
                    family: RbFamily::Isolated,
                    depth,
                    randomization: r,
                    units: vec![tracker.descriptor()],
                    global_target: None,
                },
            });
        }
    }
    Ok(out)
}

/// Native compilation of a Pauli layer element.
fn pauli_ops(q: usize, label: PauliLabel) -> Vec<Op> {
    match label {
        PauliLabel::I => vec![],
        PauliLabel::Z => vec![Op::Rz {
            q,
            theta: std::f64::consts::PI,
        }],
        PauliLabel::X => vec![Op::X90 { q }, Op::X90 { q }],
        PauliLabel::Y => vec![
            Op::Rz {
                q,
                theta: std::f64::consts::PI,
            },
            Op::X90 { q },
            Op::X90 { q },
        ],
    }
}

/// Mirror RB over the full layer: depth l counts full-layer blocks (each
/// block cycles through every sub-layer, a fresh random 1Q Clifford layer
/// before each). Forward half of l/2 blocks, optional uniform random Pauli
/// on all qubits, then the exact inverse circuit. The ideal output is
/// all-zeros without the Pauli layer, or the central Pauli propagated
/// through the reverse half with it.
pub fn build_mirror(spec: &LayerSpec, cfg: &RbConfig, pauli_layer: bool) -> Result<Vec<Circuit>> {
    spec.validate()?;
    cfg.validate_mirror()?;
    let family = if pauli_layer {
        RbFamily::MirrorPauli
    } else {
        RbFamily::MirrorNoPauli
    };
    let table = clifford_1q_table();
    let mut out = Vec::new();
    for &depth in &cfg.depths {
        for r in 0..cfg.randomizations {
            let mut rng = circuit_rng(cfg.seed, family, 0, depth, r);
            let mut ops = Vec::new();
            // forward[j] = (sub-layer index, per-qubit Clifford indices)
            let mut forward: Vec<(usize, Vec<usize>)> = Vec::new();
            for _block in 0..depth / 2 {
                for m in 0..spec.sublayers.len() {
                    let cliffs: Vec<usize> =
                        (0..spec.n).map(|_| sample_clifford(&mut rng)).collect();
                    for (q, &c) in cliffs.iter().enumerate() {
                        append_clifford(&mut ops, q, c);
                    }
                    ops.push(Op::Barrier);
                    for g in &spec.sublayers[m].gates {
                        ops.push(Op::TwoQ {
                            a: g.a,
                            b: g.b,
                            kind: g.kind,
                        });
                    }
                    ops.push(Op::Barrier);
                    forward.push((m, cliffs));
                }
            }

            let mut central = PauliString::identity(spec.n);
            if pauli_layer {
                let labels: Vec<PauliLabel> = (0..spec.n)
                    .map(|_| match rng.gen_range(0..4) {
                        0 => PauliLabel::I,
                        1 => PauliLabel::X,
                        2 => PauliLabel::Y,
                        _ => PauliLabel::Z,
                    })
                    .collect();
                central = PauliString::from_labels(&labels);
                for (q, &l) in labels.iter().enumerate() {
                    ops.extend(pauli_ops(q, l));
                }
                ops.push(Op::Barrier);
            }

            // Reverse half: invert each segment in reverse order (the gates
            // are self-inverse, the Clifford layers invert element-wise).
            let mut reverse_ops = Vec::new();
            for (m, cliffs) in forward.iter().rev() {
                for g in &spec.sublayers[*m].gates {
                    reverse_ops.push(Op::TwoQ {
                        a: g.a,
                        b: g.b,
                        kind: g.kind,
                    });
                }
                reverse_ops.push(Op::Barrier);
                for (q, &c) in cliffs.iter().enumerate() {
                    let inv = table.elements[c].tableau.inverse();
                    let inv_idx = table
                        .index_of(&inv)
                        .expect("inverse of a 1Q Clifford is a 1Q Clifford");
                    append_clifford(&mut reverse_ops, q, inv_idx);
                }
                reverse_ops.push(Op::Barrier);
            }

            // Propagate the central Pauli through the reverse circuit to get
            // the ideal output bitstring.
            let mut frame = central;
            for op in &reverse_ops {
                frame = conjugate_through_op(&frame, op)?;
            }
            let mut target = 0u64;
            for q in 0..spec.n {
                if frame.label(q) == PauliLabel::X || frame.label(q) == PauliLabel::Y {
                    target |= 1 << (spec.n - 1 - q);
                }
            }
            ops.extend(reverse_ops);

            out.push(Circuit {
                n: spec.n,
                ops,
                meta: CircuitMeta {
                    family,
                    depth,
                    randomization: r,
                    units: vec![],
                    global_target: Some(target),
                },
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::ops_to_unitary;
    use crate::linalg::{equal_up_to_phase, CMat};

    fn chain4() -> LayerSpec {
        LayerSpec::even_odd_chain(4, TwoQubitGateKind::Cx, 8).unwrap()
    }

    fn cfg(depths: Vec<u32>) -> RbConfig {
        RbConfig {
            depths,
            randomizations: 2,
            shots: 0,
            seed: 77,
        }
    }

    #[test]
    fn layer_spec_validation() {
        let spec = chain4();
        assert_eq!(spec.sublayers.len(), 2);
        assert_eq!(spec.units(0).len(), 2);
        assert_eq!(spec.units(1).len(), 3); // pair (1,2) + idles 0, 3
        assert_eq!(spec.n_2q(), 3);

        // Qubit both gated and idle.
        let bad = LayerSpec::new(
            2,
            vec![SubLayer {
                gates: vec![GateSpec {
                    a: 0,
                    b: 1,
                    kind: TwoQubitGateKind::Cx,
                }],
                idle: vec![1],
            }],
            [((0, 1), 8)].into_iter().collect(),
        );
        assert!(bad.is_err());

        // Missing qubit.
        let bad = LayerSpec::new(
            3,
            vec![SubLayer {
                gates: vec![GateSpec {
                    a: 0,
                    b: 1,
                    kind: TwoQubitGateKind::Cx,
                }],
                idle: vec![],
            }],
            [((0, 1), 8)].into_iter().collect(),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn direct_rb_depth_zero_inverts_to_identity() {
        let spec = chain4();
        let circuits = build_direct_rb(&spec, 0, &cfg(vec![1, 2])).unwrap();
        assert_eq!(circuits.len(), 4);
        // Fig. 1(d) shape: even sub-layer of a 4-qubit chain gives two 2Q
        // units and zero idle units.
        assert_eq!(circuits[0].meta.units.len(), 2);
    }

    #[test]
    fn direct_rb_is_noiseless_identity_per_unit() {
        let spec = chain4();
        for m in 0..2 {
            let circuits = build_direct_rb(&spec, m, &cfg(vec![1, 3])).unwrap();
            for c in &circuits {
                let u = ops_to_unitary(c.n, &c.ops);
                // Each unit's reduced action is identity on its qubits; the
                // whole circuit unitary maps |0...0> to itself up to phase.
                let dim = 1 << c.n;
                let mut amp = 0.0;
                for k in 0..dim {
                    let v = u[(k, 0)].norm();
                    if k == 0 {
                        amp = v;
                    } else {
                        assert!(v < 1e-9, "depth {} leaks to basis state {k}", c.meta.depth);
                    }
                }
                assert!((amp - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tracked_inversion_matches_dense_oracle_per_pair() {
        let spec = chain4();
        let circuits = build_direct_rb(&spec, 0, &cfg(vec![1])).unwrap();
        for c in &circuits {
            // Restrict ops to pair (0,1) and check the product is identity.
            let pair_ops: Vec<Op> = c
                .ops
                .iter()
                .filter(|op| match op {
                    Op::X90 { q } | Op::Rz { q, .. } => *q < 2,
                    Op::TwoQ { a, b, .. } => *a < 2 && *b < 2,
                    Op::Barrier => false,
                })
                .cloned()
                .collect();
            let u = ops_to_unitary(2, &pair_ops);
            assert!(equal_up_to_phase(&u, &CMat::identity(4, 4), 1e-9));
        }
    }

    #[test]
    fn reproducibility_bit_identical() {
        let spec = chain4();
        let a = build_direct_rb(&spec, 0, &cfg(vec![1, 5])).unwrap();
        let b = build_direct_rb(&spec, 0, &cfg(vec![1, 5])).unwrap();
        assert_eq!(a, b);
        let c = build_mirror(&spec, &cfg(vec![2, 4]), true).unwrap();
        let d = build_mirror(&spec, &cfg(vec![2, 4]), true).unwrap();
        assert_eq!(c, d);
        // Different seed differs.
        let mut cfg2 = cfg(vec![1, 5]);
        cfg2.seed = 78;
        assert_ne!(a, build_direct_rb(&spec, 0, &cfg2).unwrap());
    }

    #[test]
    fn mirror_rejects_odd_depth() {
        let spec = chain4();
        assert!(build_mirror(&spec, &cfg(vec![1, 2]), false).is_err());
    }

    #[test]
    fn mirror_no_pauli_is_noiseless_identity() {
        let spec = chain4();
        let circuits = build_mirror(&spec, &cfg(vec![2, 4]), false).unwrap();
        for c in &circuits {
            assert_eq!(c.meta.global_target, Some(0));
            let u = ops_to_unitary(c.n, &c.ops);
            assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mirror_pauli_target_matches_dense_propagation() {
        let spec = chain4();
        let circuits = build_mirror(&spec, &cfg(vec![2, 4]), true).unwrap();
        for c in &circuits {
            let u = ops_to_unitary(c.n, &c.ops);
            let target = c.meta.global_target.unwrap() as usize;
            let amp = u[(target, 0)].norm();
            assert!(
                (amp - 1.0).abs() < 1e-9,
                "noiseless mirror output must be the propagated target"
            );
        }
    }

    #[test]
    fn mirror_block_1q_layer_count_matches_layer_rb() {
        // Mirror of depth l has l·M 1Q Clifford layers; layer RB of depth l
        // on each of the M sub-layers has l layers each, i.e. the same
        // count when constructing the full layer fidelity.
        let spec = chain4();
        let mirror = &build_mirror(&spec, &cfg(vec![4]), false).unwrap()[0];
        // Count barrier-delimited segments that contain X90/Rz but no 2Q.
        let mut segments = 0;
        let mut has_1q = false;
        let mut has_2q = false;
        for op in &mirror.ops {
            match op {
                Op::Barrier => {
                    if has_1q && !has_2q {
                        segments += 1;
                    }
                    has_1q = false;
                    has_2q = false;
                }
                Op::X90 { .. } | Op::Rz { .. } => has_1q = true,
                Op::TwoQ { .. } => has_2q = true,
            }
        }
        if has_1q && !has_2q {
            segments += 1;
        }
        assert_eq!(segments, 4 * spec.sublayers.len());
    }

    #[test]
    fn staggered_gates_never_share_a_slice() {
        let spec = chain4();
        let circuits = build_staggered(&spec, 0, &cfg(vec![2])).unwrap();
        for c in &circuits {
            let sched = c.schedule(&spec).unwrap();
            for s in &sched.slices {
                let active_gates: std::collections::BTreeSet<usize> = s
                    .actions
                    .iter()
                    .filter_map(|a| match a {
                        crate::schedule::SliceAction::TwoQ { gate, .. } => Some(*gate),
                        _ => None,
                    })
                    .collect();
                assert!(active_gates.len() <= 1);
            }
            // Total 2Q segment duration is the sum of gate durations.
            let u = ops_to_unitary(c.n, &c.ops);
            assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn simultaneous_rb_drifts_with_unequal_durations() {
        let mut spec = chain4();
        spec.durations.insert((0, 1), 5);
        let circuits = build_simultaneous_rb(&spec, 0, &cfg(vec![8])).unwrap();
        let direct = build_direct_rb(&spec, 0, &cfg(vec![8])).unwrap();
        for (sim_c, dir_c) in circuits.iter().zip(&direct) {
            let sim = sim_c.schedule(&spec).unwrap();
            let dir = dir_c.schedule(&spec).unwrap();
            // With barriers, the short-gate pair is padded to the long one:
            // its busy span matches the full circuit. Free-running, it
            // finishes its gate work ~3 units per block earlier.
            let busy_until = |sched: &ScheduledCircuit, qs: [usize; 2]| -> u64 {
                let mut t = 0u64;
                let mut last = 0u64;
                for s in &sched.slices {
                    for &q in &qs {
                        if !matches!(s.actions[q], crate::schedule::SliceAction::Idle) {
                            last = t + s.duration as u64;
                        }
                    }
                    t += s.duration as u64;
                }
                last
            };
            let short = busy_until(&sim, [0, 1]);
            let long = busy_until(&sim, [2, 3]);
            // Depth 8 with a 3-unit duration difference: ~24 units of drift
            // accumulate (modulo the random 1Q layer lengths).
            assert!(long > short + 12, "short {short} long {long}");
            // Under barriers both pairs stay aligned to the padded layer.
            let dir_short = busy_until(&dir, [0, 1]);
            let dir_long = busy_until(&dir, [2, 3]);
            assert!(dir_long.abs_diff(dir_short) <= 8);
        }
    }

    #[test]
    fn isolated_rb_touches_only_the_pair() {
        let spec = chain4();
        let circuits = build_isolated_rb(&spec, (1, 2), &cfg(vec![3])).unwrap();
        for c in &circuits {
            for op in &c.ops {
                match op {
                    Op::X90 { q } | Op::Rz { q, .. } => assert!(*q == 1 || *q == 2),
                    Op::TwoQ { a, b, .. } => assert_eq!((*a, *b), (1, 2)),
                    Op::Barrier => panic!("isolated RB has no barriers"),
                }
            }
            let u = ops_to_unitary(c.n, &c.ops);
            assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-9);
        }
        assert!(build_isolated_rb(&spec, (0, 2), &cfg(vec![1])).is_err());
    }

    #[test]
    fn average_1q_layer_length_near_1_5() {
        // Over random blocks on 4 qubits the barrier-padded 1Q layer
        // averages about 1.5 units.
        let spec = chain4();
        let many = RbConfig {
            depths: vec![100],
            randomizations: 1,
            shots: 0,
            seed: 5,
        };
        let c = &build_direct_rb(&spec, 0, &many).unwrap()[0];
        let sched = c.schedule(&spec).unwrap();
        // Count unit slices that are not 2Q-gate slices, divided by depth
        // (excludes the closing inversion segment by subtracting it).
        let gate_slices: u64 = sched
            .slices
            .iter()
            .filter(|s| {
                s.actions
                    .iter()
                    .any(|a| matches!(a, crate::schedule::SliceAction::TwoQ { .. }))
            })
            .map(|s| s.duration as u64)
            .sum();
        // 100 blocks of 8-unit gates plus <= 3 inversion gates.
        assert!(gate_slices >= 800);
        let total = sched.wall_time_units();
        let one_q_slices = total - gate_slices;
        let per_block = one_q_slices as f64 / 100.0;
        assert!(
            (per_block - 1.5).abs() < 0.2,
            "1Q layer average {per_block}"
        );
    }
}
