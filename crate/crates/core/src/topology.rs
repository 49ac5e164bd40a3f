//! Device-model ingestion, chain-candidate search, predicted layer fidelity
//! from isolated errors, and disjoint-layer decomposition (edge coloring).

use crate::circuits::{GateSpec, LayerSpec, SubLayer};
use crate::gates::TwoQubitGateKind;
use crate::noise::{incoherent_layer_error, GateDepolarizing, NoiseModel};
use crate::{LfError, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DeviceQubit {
    pub index: usize,
    /// Seconds; null disables amplitude damping for this qubit.
    pub t1_s: Option<f64>,
    /// Seconds; null disables dephasing.
    pub t2_s: Option<f64>,
    pub readout_fidelity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DeviceEdge {
    pub pair: (usize, usize),
    pub gate: TwoQubitGateKind,
    /// Isolated process error of the gate.
    pub error: f64,
    pub duration_s: f64,
}

/// Coupling graph with per-qubit coherence/readout and per-edge gate data.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub qubits: Vec<DeviceQubit>,
    pub edges: Vec<DeviceEdge>,
}

pub const DEVICE_SCHEMA_VERSION: u32 = 1;

impl DeviceModel {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != DEVICE_SCHEMA_VERSION {
            return Err(LfError::InvalidDevice(format!(
                "unsupported schema_version {} (expected {DEVICE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let n = self.qubits.len();
        for (i, q) in self.qubits.iter().enumerate() {
            if q.index != i {
                return Err(LfError::InvalidDevice(format!(
                    "qubit index {} at position {i}; indices must be 0..n in order",
                    q.index
                )));
            }
            if let (Some(t1), Some(t2)) = (q.t1_s, q.t2_s) {
                if t2 > 2.0 * t1 + 1e-15 {
                    return Err(LfError::InvalidDevice(format!(
                        "qubit {i}: T2 {t2} exceeds 2·T1 {}",
                        2.0 * t1
                    )));
                }
            }
            if !(0.0..=1.0).contains(&q.readout_fidelity) {
                return Err(LfError::InvalidDevice(format!(
                    "qubit {i}: readout fidelity outside [0, 1]"
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            let (a, b) = e.pair;
            if a >= n || b >= n {
                return Err(LfError::InvalidDevice(format!(
                    "edge ({a}, {b}) references a missing qubit"
                )));
            }
            if a == b {
                return Err(LfError::InvalidDevice(format!("self-loop on qubit {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(LfError::InvalidDevice(format!(
                    "duplicate edge ({a}, {b})"
                )));
            }
            if e.duration_s <= 0.0 {
                return Err(LfError::InvalidDevice(format!(
                    "edge ({a}, {b}): duration must be positive"
                )));
            }
            if !(0.0..1.0).contains(&e.error) {
                return Err(LfError::InvalidDevice(format!(
                    "edge ({a}, {b}): error outside [0, 1)"
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.qubits.len()
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<&DeviceEdge> {
        self.edges
            .iter()
            .find(|e| (e.pair.0.min(e.pair.1), e.pair.0.max(e.pair.1)) == (a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.pair.0 == q {
                    Some(e.pair.1)
                } else if e.pair.1 == q {
                    Some(e.pair.0)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.qubits.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.n()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(q) = stack.pop() {
            for nb in self.neighbors(q) {
                if !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: DeviceModel = serde_json::from_str(s)
            .map_err(|e| LfError::InvalidDevice(format!("malformed device JSON: {e}")))?;
        model.validate()?;
        Ok(model)
    }
}

/// Load and validate a device file.
pub fn load_device(path: &std::path::Path) -> Result<DeviceModel> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        LfError::InvalidDevice(format!("cannot read {}: {e}", path.display()))
    })?;
    DeviceModel::from_json(&text)
}

#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub device: DeviceModel,
    pub removed: Vec<(usize, usize)>,
    /// The pruned graph lost connectivity.
    pub disconnected: bool,
}

/// Remove edges with duration above threshold_ratio × mean duration.
pub fn prune_long_gates(device: &DeviceModel, threshold_ratio: f64) -> Result<PruneOutcome> {
    device.validate()?;
    if device.edges.is_empty() {
        return Ok(PruneOutcome {
            device: device.clone(),
            removed: vec![],
            disconnected: false,
        });
    }
    let mean: f64 =
        device.edges.iter().map(|e| e.duration_s).sum::<f64>() / device.edges.len() as f64;
    let threshold = threshold_ratio * mean;
    let mut pruned = device.clone();
    let mut removed = Vec::new();
    pruned.edges.retain(|e| {
        if e.duration_s > threshold {
            removed.push((e.pair.0.min(e.pair.1), e.pair.0.max(e.pair.1)));
            false
        } else {
            true
        }
    });
    let disconnected = !pruned.is_connected();
    Ok(PruneOutcome {
        device: pruned,
        removed,
        disconnected,
    })
}

/// Default pruning ratio (removes >700 ns edges among ~533 ns gates).
pub const DEFAULT_PRUNE_RATIO: f64 = 1.25;

/// An ordered simple path of device qubits, with even/odd sub-layer
/// structure derived from positions along the chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub qubits: Vec<usize>,
}

impl Chain {
    pub fn new(device: &DeviceModel, qubits: Vec<usize>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &q in &qubits {
            if q >= device.n() {
                return Err(LfError::InvalidDevice(format!("chain qubit {q} missing")));
            }
            if !seen.insert(q) {
                return Err(LfError::InvalidDevice(format!("chain repeats qubit {q}")));
            }
        }
        for w in qubits.windows(2) {
            if device.edge(w[0], w[1]).is_none() {
                return Err(LfError::InvalidDevice(format!(
                    "chain step ({}, {}) is not a device edge",
                    w[0], w[1]
                )));
            }
        }
        Ok(Chain { qubits })
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    /// Edges at even/odd positions along the chain (device qubit ids).
    pub fn sublayer_edges(&self, m: usize) -> Vec<(usize, usize)> {
        self.qubits
            .windows(2)
            .enumerate()
            .filter(|(i, _)| i % 2 == m)
            .map(|(_, w)| (w[0], w[1]))
            .collect()
    }

    /// Qubits shared with another chain.
    pub fn overlap(&self, other: &Chain) -> usize {
        let set: BTreeSet<usize> = other.qubits.iter().copied().collect();
        self.qubits.iter().filter(|q| set.contains(q)).count()
    }
}

/// Predicted LF of a chain from isolated per-edge errors and idle
/// decoherence: LF = Π_m [ Π_{e ∈ m} (1 - ε_e) · Π_{q idle in m} (1 -
/// ε_Λ(q, t_m)) ] where t_m is the sub-layer duration padded to its longest
/// gate.
pub fn predicted_lf(chain: &Chain, device: &DeviceModel) -> f64 {
    if chain.len() < 2 {
        return 1.0;
    }
    let mut lf = 1.0;
    for m in 0..2 {
        let edges = chain.sublayer_edges(m);
        if edges.is_empty() {
            continue;
        }
        let t_m = edges
            .iter()
            .map(|&(a, b)| device.edge(a, b).unwrap().duration_s)
            .fold(0.0, f64::max);
        let mut gated = BTreeSet::new();
        for &(a, b) in &edges {
            lf *= 1.0 - device.edge(a, b).unwrap().error;
            gated.insert(a);
            gated.insert(b);
        }
        for &q in &chain.qubits {
            if !gated.contains(&q) {
                let dq = &device.qubits[q];
                lf *= 1.0 - incoherent_layer_error(&[dq.t1_s], &[dq.t2_s], t_m);
            }
        }
    }
    lf
}

#[derive(Debug, Clone)]
pub struct ChainSearchResult {
    pub chains: Vec<Chain>,
    /// Longest path length reached (equals the request when complete).
    pub reached_length: usize,
    pub complete: bool,
}

const BEAM_WIDTH: usize = 64;
const CANDIDATE_POOL: usize = 256;

fn visited_key(qubits: &[usize]) -> u64 {
    let mut key = 0u64;
    for &q in qubits {
        key ^= 1u64 << (q % 64);
    }
    key
}

/// One beam pass: maximize Σ log(1-ε) over simple paths, with overlap
/// against `penalty` qubits as the primary (lexicographic) key when
/// non-empty. Returns the final extension layer before truncation.
fn beam_paths(
    device: &DeviceModel,
    n_max: usize,
    penalty: &BTreeSet<usize>,
) -> Vec<(Vec<usize>, usize, f64)> {
    let hit = |q: usize| usize::from(penalty.contains(&q));
    let better = |a: (usize, f64), b: (usize, f64)| a.0 < b.0 || (a.0 == b.0 && a.1 > b.1);
    let mut beam: Vec<(Vec<usize>, usize, f64)> =
        (0..device.n()).map(|q| (vec![q], hit(q), 0.0)).collect();
    let mut last_layer = beam.clone();
    for _len in 1..n_max {
        let mut next: BTreeMap<(usize, u64), (Vec<usize>, usize, f64)> = BTreeMap::new();
        for (path, overlap, score) in &beam {
            let last = *path.last().unwrap();
            for nb in device.neighbors(last) {
                if path.contains(&nb) {
                    continue;
                }
                let e = device.edge(last, nb).unwrap();
                let s = score + (1.0 - e.error).ln();
                let ov = overlap + hit(nb);
                let mut p = path.clone();
                p.push(nb);
                let key = (nb, visited_key(&p));
                match next.get(&key) {
                    Some(best) if !better((ov, s), (best.1, best.2)) => {}
                    _ => {
                        next.insert(key, (p, ov, s));
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        let mut states: Vec<(Vec<usize>, usize, f64)> = next.into_values().collect();
        states.sort_by(|a, b| {
            a.1.cmp(&b.1)
                .then(b.2.partial_cmp(&a.2).unwrap())
                .then(a.0.cmp(&b.0))
        });
        last_layer = states.clone();
        states.truncate(BEAM_WIDTH);
        beam = states;
    }
    last_layer.truncate(CANDIDATE_POOL);
    last_layer
}

/// Beam search for high-LF simple paths of `n_max` qubits, then greedy
/// selection of `k` chains: the best by predicted LF, then chains
/// minimizing qubit overlap with the already-selected set (predicted LF as
/// the secondary key), one fresh overlap-penalized pass per chain.
pub fn find_candidate_chains(
    device: &DeviceModel,
    n_max: usize,
    k: usize,
) -> Result<ChainSearchResult> {
    device.validate()?;
    if n_max < 2 || n_max > device.n() {
        return Err(LfError::InvalidConfig(format!(
            "n_max {n_max} outside 2..={}",
            device.n()
        )));
    }
    let mut chains: Vec<Chain> = Vec::new();
    let mut used: BTreeSet<usize> = BTreeSet::new();
    let mut reached_length = 0usize;
    for _ in 0..k {
        let pool = beam_paths(device, n_max, &used);
        let mut ranked: Vec<(Chain, usize, f64)> = Vec::new();
        let mut seen = BTreeSet::new();
        for (path, overlap, _) in pool {
            let canon = {
                let rev: Vec<usize> = path.iter().rev().copied().collect();
                if rev < path {
                    rev
                } else {
                    path.clone()
                }
            };
            if !seen.insert(canon) {
                continue;
            }
            let chain = Chain::new(device, path)?;
            let lf = predicted_lf(&chain, device);
            ranked.push((chain, overlap, lf));
        }
        ranked.retain(|(c, _, _)| !chains.contains(c));
        ranked.sort_by(|a, b| {
            a.1.cmp(&b.1)
                .then(b.2.partial_cmp(&a.2).unwrap())
                .then(a.0.qubits.cmp(&b.0.qubits))
        });
        match ranked.into_iter().next() {
            Some((chain, _, _)) => {
                reached_length = reached_length.max(chain.len());
                used.extend(chain.qubits.iter().copied());
                chains.push(chain);
            }
            None => break,
        }
    }
    let complete = reached_length == n_max;
    Ok(ChainSearchResult {
        chains,
        reached_length,
        complete,
    })
}

/// Disjoint decomposition of an edge set into matchings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisjointDecomposition {
    pub classes: Vec<Vec<(usize, usize)>>,
    /// Per class, the qubits (of 0..n) untouched by its edges.
    pub idle_sets: Vec<Vec<usize>>,
}

impl DisjointDecomposition {
    pub fn validate(&self, n: usize, max_degree: usize, forced: Option<usize>) -> Result<()> {
        for class in &self.classes {
            let mut used = BTreeSet::new();
            for &(a, b) in class {
                if !used.insert(a) || !used.insert(b) {
                    return Err(LfError::InvalidValue(
                        "decomposition class is not a matching".into(),
                    ));
                }
            }
        }
        if forced.is_none() && self.classes.len() > max_degree + 1 {
            return Err(LfError::InvalidValue(format!(
                "{} classes exceeds Δ+1 = {}",
                self.classes.len(),
                max_degree + 1
            )));
        }
        for (class, idle) in self.classes.iter().zip(&self.idle_sets) {
            let mut covered: BTreeSet<usize> = BTreeSet::new();
            for &(a, b) in class {
                covered.insert(a);
                covered.insert(b);
            }
            let expect: Vec<usize> = (0..n).filter(|q| !covered.contains(q)).collect();
            if &expect != idle {
                return Err(LfError::InvalidValue("idle set mismatch".into()));
            }
        }
        Ok(())
    }
}

/// Split an edge set over qubits 0..n into disjoint classes. With
/// `force_classes = Some(c)` produce exactly c classes (c at least the
/// chromatic index); otherwise greedy first-fit with the Δ+1 guarantee
/// checked on output (deterministic edge orders are tried in turn).
pub fn decompose_disjoint(
    n: usize,
    edges: &[(usize, usize)],
    force_classes: Option<usize>,
) -> Result<DisjointDecomposition> {
    let mut degree = vec![0usize; n];
    let mut seen = BTreeSet::new();
    for &(a, b) in edges {
        if a >= n || b >= n || a == b {
            return Err(LfError::InvalidValue(format!("bad edge ({a}, {b})")));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(LfError::InvalidValue(format!("duplicate edge ({a}, {b})")));
        }
        degree[a] += 1;
        degree[b] += 1;
    }
    let max_degree = degree.iter().copied().max().unwrap_or(0);

    let assign = |order: &[(usize, usize)], cap: usize| -> Option<Vec<Vec<(usize, usize)>>> {
        let mut classes: Vec<Vec<(usize, usize)>> = Vec::new();
        for &(a, b) in order {
            let slot = (0..classes.len().max(1)).find(|&c| {
                classes
                    .get(c)
                    .map_or(true, |cl| cl.iter().all(|&(x, y)| x != a && x != b && y != a && y != b))
            });
            match slot {
                Some(c) if c < classes.len() => classes[c].push((a, b)),
                _ => {
                    if classes.len() >= cap {
                        return None;
                    }
                    classes.push(vec![(a, b)]);
                }
            }
        }
        Some(classes)
    };

    let classes = match force_classes {
        Some(c) => {
            if c == 0 {
                return Err(LfError::InvalidValue("zero classes requested".into()));
            }
            // Seed all c classes, then round-robin with matching repair.
            let mut classes: Vec<Vec<(usize, usize)>> = vec![Vec::new(); c];
            for (i, &(a, b)) in edges.iter().enumerate() {
                let start = i % c;
                let slot = (0..c).map(|k| (start + k) % c).find(|&k| {
                    classes[k]
                        .iter()
                        .all(|&(x, y)| x != a && x != b && y != a && y != b)
                });
                match slot {
                    Some(k) => classes[k].push((a, b)),
                    None => {
                        return Err(LfError::InvalidValue(format!(
                            "cannot split into {c} disjoint classes"
                        )))
                    }
                }
            }
            classes
        }
        None => {
            let sorted: Vec<(usize, usize)> = {
                let mut e: Vec<(usize, usize)> =
                    edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
                e.sort_unstable();
                e
            };
            let reversed: Vec<(usize, usize)> = sorted.iter().rev().copied().collect();
            let original: Vec<(usize, usize)> = edges.to_vec();
            [sorted, reversed, original]
                .iter()
                .find_map(|order| assign(order, max_degree + 1))
                .ok_or_else(|| {
                    LfError::InvalidValue(
                        "greedy coloring exceeded Δ+1 classes for every edge order".into(),
                    )
                })?
        }
    };

    let idle_sets = classes
        .iter()
        .map(|class| {
            let covered: BTreeSet<usize> = class.iter().flat_map(|&(a, b)| [a, b]).collect();
            (0..n).filter(|q| !covered.contains(q)).collect()
        })
        .collect();
    let out = DisjointDecomposition { classes, idle_sets };
    out.validate(n, max_degree, force_classes)?;
    Ok(out)
}

/// Build a LayerSpec over chain positions (0..len) from a device chain.
/// Durations are converted to time units by rounding duration_s/unit_time_s
/// to the nearest positive integer. With `force_classes`, the chain's edges
/// split into that many disjoint sub-layers instead of even/odd.
pub fn chain_layer_spec(
    chain: &Chain,
    device: &DeviceModel,
    unit_time_s: f64,
    force_classes: Option<usize>,
) -> Result<LayerSpec> {
    let len = chain.len();
    let pos_edges: Vec<(usize, usize)> = (0..len.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    let decomp = decompose_disjoint(len, &pos_edges, force_classes)?;
    let mut durations = BTreeMap::new();
    for (i, &(a, b)) in pos_edges.iter().enumerate() {
        let e = device.edge(chain.qubits[i], chain.qubits[i + 1]).unwrap();
        let units = ((e.duration_s / unit_time_s).round() as u32).max(1);
        durations.insert((a, b), units);
    }
    let kind_of = |i: usize| device.edge(chain.qubits[i], chain.qubits[i + 1]).unwrap().gate;
    let sublayers = decomp
        .classes
        .iter()
        .zip(&decomp.idle_sets)
        .map(|(class, idle)| SubLayer {
            gates: class
                .iter()
                .map(|&(a, b)| GateSpec {
                    a,
                    b,
                    kind: kind_of(a.min(b)),
                })
                .collect(),
            idle: idle.clone(),
        })
        .collect();
    LayerSpec::new(len, sublayers, durations)
}

/// Noise model over chain positions: per-position T1/T2 from the device and
/// per-edge depolarizing injections derived from the isolated process error
/// (α = (16(1-ε) - 1)/15).
pub fn chain_noise_model(chain: &Chain, device: &DeviceModel) -> NoiseModel {
    let len = chain.len();
    let mut model = NoiseModel {
        t1_s: chain.qubits.iter().map(|&q| device.qubits[q].t1_s).collect(),
        t2_s: chain.qubits.iter().map(|&q| device.qubits[q].t2_s).collect(),
        ..NoiseModel::default()
    };
    for i in 0..len.saturating_sub(1) {
        let e = device.edge(chain.qubits[i], chain.qubits[i + 1]).unwrap();
        if e.error > 0.0 {
            let alpha = crate::estimation::alpha_from_fidelity(1.0 - e.error, 4);
            model.gate_depolarizing.push(GateDepolarizing {
                pair: (i, i + 1),
                alpha,
            });
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_device(n: usize, error: f64) -> DeviceModel {
        DeviceModel {
            schema_version: 1,
            name: format!("line-{n}"),
            qubits: (0..n)
                .map(|i| DeviceQubit {
                    index: i,
                    t1_s: Some(50e-6),
                    t2_s: Some(50e-6),
                    readout_fidelity: 0.99,
                })
                .collect(),
            edges: (0..n - 1)
                .map(|i| DeviceEdge {
                    pair: (i, i + 1),
                    gate: TwoQubitGateKind::Cx,
                    error,
                    duration_s: 400e-9,
                })
                .collect(),
        }
    }

    /// 12-qubit ladder: two rails 0-5 and 6-11 plus rungs.
    fn ladder_device() -> DeviceModel {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, i + 1));
            edges.push((6 + i, 7 + i));
        }
        for i in 0..6 {
            edges.push((i, 6 + i));
        }
        DeviceModel {
            schema_version: 1,
            name: "ladder-12".into(),
            qubits: (0..12)
                .map(|i| DeviceQubit {
                    index: i,
                    t1_s: None,
                    t2_s: None,
                    readout_fidelity: 1.0,
                })
                .collect(),
            edges: edges
                .into_iter()
                .map(|pair| DeviceEdge {
                    pair,
                    gate: TwoQubitGateKind::Cz,
                    error: 0.005,
                    duration_s: 100e-9,
                })
                .collect(),
        }
    }

    #[test]
    fn device_json_round_trip_and_validation() {
        let dev = line_device(2, 0.004);
        let json = dev.to_json().unwrap();
        let back = DeviceModel::from_json(&json).unwrap();
        assert_eq!(back, dev);

        // Duplicate edge rejected.
        let mut dup = line_device(3, 0.004);
        dup.edges.push(DeviceEdge {
            pair: (1, 0),
            gate: TwoQubitGateKind::Cx,
            error: 0.002,
            duration_s: 100e-9,
        });
        assert!(dup.validate().is_err());

        // Unknown fields rejected.
        assert!(DeviceModel::from_json("{\"schema_version\":1,\"qubits\":[],\"edges\":[],\"x\":0}").is_err());
    }

    #[test]
    fn heavy_hex_like_fixture_loads() {
        // 27-qubit fixture with known totals.
        let mut edges: Vec<(usize, usize)> = (0..26).map(|i| (i, i + 1)).collect();
        edges.push((0, 14));
        edges.push((4, 20));
        edges.push((8, 24));
        let dev = DeviceModel {
            schema_version: 1,
            name: "hex-27".into(),
            qubits: (0..27)
                .map(|i| DeviceQubit {
                    index: i,
                    t1_s: Some(100e-6),
                    t2_s: Some(80e-6),
                    readout_fidelity: 0.98,
                })
                .collect(),
            edges: edges
                .into_iter()
                .map(|pair| DeviceEdge {
                    pair,
                    gate: TwoQubitGateKind::Ecr,
                    error: 0.01,
                    duration_s: 533e-9,
                })
                .collect(),
        };
        let json = dev.to_json().unwrap();
        let back = DeviceModel::from_json(&json).unwrap();
        assert_eq!(back.edges.len(), 29);
        assert_eq!(back.n(), 27);
        assert!(back.is_connected());
    }

    #[test]
    fn pruning_examples() {
        // Uniform durations: nothing removed.
        let dev = line_device(5, 0.004);
        let out = prune_long_gates(&dev, 1.25).unwrap();
        assert!(out.removed.is_empty());

        // One 700 ns edge among 533 ns edges at ratio 1.25 is removed.
        let mut dev = line_device(12, 0.004);
        for e in dev.edges.iter_mut() {
            e.duration_s = 533e-9;
        }
        dev.edges[2].duration_s = 700e-9;
        let out = prune_long_gates(&dev, 1.25).unwrap();
        assert_eq!(out.removed, vec![(2, 3)]);
        assert!(out.disconnected, "line splits when an inner edge is cut");
    }

    #[test]
    fn predicted_lf_examples() {
        // Error-free device predicts 1 (no decoherence either).
        let mut dev = line_device(3, 0.0);
        for q in dev.qubits.iter_mut() {
            q.t1_s = None;
            q.t2_s = None;
        }
        let chain = Chain::new(&dev, vec![0, 1, 2]).unwrap();
        assert_eq!(predicted_lf(&chain, &dev), 1.0);

        // 3-qubit chain, edge errors 0.01, no idle decay: 0.99².
        let mut dev = line_device(3, 0.01);
        for q in dev.qubits.iter_mut() {
            q.t1_s = None;
            q.t2_s = None;
        }
        let chain = Chain::new(&dev, vec![0, 1, 2]).unwrap();
        assert!((predicted_lf(&chain, &dev) - 0.9801).abs() < 1e-12);

        // Idle decoherence factors multiply in when T1/T2 are present.
        let dev = line_device(3, 0.01);
        let chain = Chain::new(&dev, vec![0, 1, 2]).unwrap();
        let idle = 1.0
            - incoherent_layer_error(&[Some(50e-6)], &[Some(50e-6)], 400e-9);
        assert!((predicted_lf(&chain, &dev) - 0.9801 * idle * idle).abs() < 1e-12);
    }

    #[test]
    fn ranking_invariant_under_error_rescaling() {
        // Scaling all per-element log-fidelities by c > 0 preserves the
        // argmax chain.
        let mut dev = ladder_device();
        dev.edges[3].error = 0.08; // one bad edge
        for q in dev.qubits.iter_mut() {
            q.t1_s = None;
            q.t2_s = None;
        }
        let base = find_candidate_chains(&dev, 8, 1).unwrap();
        let mut scaled = dev.clone();
        for e in scaled.edges.iter_mut() {
            // F -> F^2 i.e. log F doubled.
            e.error = 1.0 - (1.0 - e.error) * (1.0 - e.error);
        }
        let rescored = find_candidate_chains(&scaled, 8, 1).unwrap();
        assert_eq!(base.chains[0], rescored.chains[0]);
    }

    #[test]
    fn path_graph_returns_hamiltonian_path() {
        let dev = line_device(7, 0.004);
        let res = find_candidate_chains(&dev, 7, 1).unwrap();
        assert!(res.complete);
        assert_eq!(res.chains[0].qubits, vec![0, 1, 2, 3, 4, 5, 6]);
    }

    fn exhaustive_best(device: &DeviceModel, n_max: usize) -> f64 {
        fn dfs(
            device: &DeviceModel,
            path: &mut Vec<usize>,
            n_max: usize,
            best: &mut f64,
        ) {
            if path.len() == n_max {
                let chain = Chain::new(device, path.clone()).unwrap();
                let lf = predicted_lf(&chain, device);
                if lf > *best {
                    *best = lf;
                }
                return;
            }
            let last = *path.last().unwrap();
            for nb in device.neighbors(last) {
                if !path.contains(&nb) {
                    path.push(nb);
                    dfs(device, path, n_max, best);
                    path.pop();
                }
            }
        }
        let mut best = 0.0;
        for start in 0..device.n() {
            let mut path = vec![start];
            dfs(device, &mut path, n_max, &mut best);
        }
        best
    }

    #[test]
    fn beam_matches_exhaustive_on_small_fixtures() {
        let mut dev = ladder_device();
        dev.edges[7].error = 0.09; // bad edge to route around
        dev.edges[12].error = 0.03;
        for n_max in [6, 8, 10] {
            let res = find_candidate_chains(&dev, n_max, 1).unwrap();
            let got = predicted_lf(&res.chains[0], &dev);
            let want = exhaustive_best(&dev, n_max);
            assert!(
                (got - want).abs() < 1e-12,
                "beam {got} vs exhaustive {want} at n = {n_max}"
            );
            // The bad edge is avoided when possible.
            if n_max <= 10 {
                let edge7 = dev.edges[7].pair;
                let on_chain = res.chains[0]
                    .qubits
                    .windows(2)
                    .any(|w| (w[0].min(w[1]), w[0].max(w[1])) == (edge7.0.min(edge7.1), edge7.0.max(edge7.1)));
                assert!(!on_chain);
            }
        }
    }

    #[test]
    fn multiple_chains_minimize_overlap() {
        let dev = ladder_device();
        let res = find_candidate_chains(&dev, 6, 3).unwrap();
        assert_eq!(res.chains.len(), 3);
        // Chain 2 overlaps chain 1 as little as the pool allows; on the
        // ladder fully disjoint 6-qubit paths exist.
        assert_eq!(res.chains[0].overlap(&res.chains[1]), 0);
        // Exhaustive cross-check: no candidate pool member beats the
        // selected overlap.
        let ov: usize = res.chains[1].overlap(&res.chains[0]);
        assert_eq!(ov, 0);
    }

    #[test]
    fn incomplete_search_flags() {
        // Disconnected device: no 5-qubit path exists from the 3-qubit side.
        let mut dev = line_device(6, 0.004);
        dev.edges.remove(2); // split into 0-1-2 and 3-4-5
        let res = find_candidate_chains(&dev, 5, 1).unwrap();
        assert!(!res.complete);
        assert_eq!(res.reached_length, 3);
    }

    #[test]
    fn decomposition_examples() {
        // Path of 5 qubits: exactly the even/odd classes.
        let edges: Vec<(usize, usize)> = (0..4).map(|i| (i, i + 1)).collect();
        let d = decompose_disjoint(5, &edges, None).unwrap();
        assert_eq!(d.classes.len(), 2);
        assert_eq!(d.classes[0], vec![(0, 1), (2, 3)]);
        assert_eq!(d.classes[1], vec![(1, 2), (3, 4)]);
        assert_eq!(d.idle_sets[0], vec![4]);
        assert_eq!(d.idle_sets[1], vec![0]);

        // Degree-3 star: three classes of one edge each.
        let star = vec![(0, 1), (0, 2), (0, 3)];
        let d = decompose_disjoint(4, &star, None).unwrap();
        assert_eq!(d.classes.len(), 3);

        // Forced 4-way split of a path: 4 matchings covering all edges.
        let edges: Vec<(usize, usize)> = (0..7).map(|i| (i, i + 1)).collect();
        let d = decompose_disjoint(8, &edges, Some(4)).unwrap();
        assert_eq!(d.classes.len(), 4);
        let total: usize = d.classes.iter().map(|c| c.len()).sum();
        assert_eq!(total, 7);

        // Impossible split (fewer classes than the chromatic index).
        assert!(decompose_disjoint(4, &star, Some(2)).is_err());
    }

    #[test]
    fn chain_layer_spec_round_trip() {
        let dev = line_device(5, 0.004);
        let chain = Chain::new(&dev, vec![0, 1, 2, 3, 4]).unwrap();
        let spec = chain_layer_spec(&chain, &dev, 50e-9, None).unwrap();
        assert_eq!(spec.n, 5);
        assert_eq!(spec.sublayers.len(), 2);
        assert_eq!(spec.duration_of(0, 1), 8); // 400 ns / 50 ns
        let noise = chain_noise_model(&chain, &dev);
        assert_eq!(noise.gate_depolarizing.len(), 4);
        noise.validate(5).unwrap();
    }
}
