//! Conversion of gate circuits into time slices, with the single-qubit gate
//! as the unit of time. Two-qubit gates occupy an integer number of
//! consecutive unit slices on both qubits, Rz gates are zero-duration slices
//! of their own, and barriers synchronize every qubit.

use crate::gates::{Op, TwoQubitGateKind};
use crate::{LfError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTwoQ {
    pub a: usize,
    pub b: usize,
    pub kind: TwoQubitGateKind,
    pub duration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum SliceAction {
    Idle,
    X90,
    Rz { theta: f64 },
    /// Step `step` (0-based) of `gates[gate]`.
    TwoQ { gate: usize, step: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    /// 0 for Rz-only slices, 1 otherwise.
    pub duration: u32,
    pub actions: Vec<SliceAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCircuit {
    pub n: usize,
    pub slices: Vec<Slice>,
    pub gates: Vec<ScheduledTwoQ>,
    /// Barrier positions in unit time.
    pub barriers: Vec<u32>,
}

impl ScheduledCircuit {
    /// Total wall time in units (zero-duration slices contribute nothing).
    pub fn wall_time_units(&self) -> u64 {
        self.slices.iter().map(|s| s.duration as u64).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Restrict to a qubit window keeping the global timing: every slice is
    /// retained with actions projected onto `window` (index i of the result
    /// is `window[i]`). Two-qubit gates straddling the window boundary are
    /// rejected.
    pub fn restrict_to_qubits(&self, window: &[usize]) -> Result<ScheduledCircuit> {
        let map = |q: usize| window.iter().position(|&w| w == q);
        let mut gate_map: BTreeMap<usize, usize> = BTreeMap::new();
        let mut gates = Vec::new();
        for (gi, g) in self.gates.iter().enumerate() {
            match (map(g.a), map(g.b)) {
                (Some(a), Some(b)) => {
                    gate_map.insert(gi, gates.len());
                    gates.push(ScheduledTwoQ {
                        a,
                        b,
                        kind: g.kind,
                        duration: g.duration,
                    });
                }
                (None, None) => {}
                _ => {
                    return Err(LfError::InvalidSchedule(format!(
                        "gate on ({}, {}) straddles the window",
                        g.a, g.b
                    )))
                }
            }
        }
        let slices = self
            .slices
            .iter()
            .map(|s| Slice {
                duration: s.duration,
                actions: window
                    .iter()
                    .map(|&q| match s.actions[q] {
                        SliceAction::TwoQ { gate, step } => SliceAction::TwoQ {
                            gate: gate_map[&gate],
                            step,
                        },
                        other => other,
                    })
                    .collect(),
            })
            .filter(|s| {
                s.duration > 0
                    || s.actions
                        .iter()
                        .any(|a| !matches!(a, SliceAction::Idle))
            })
            .collect();
        Ok(ScheduledCircuit {
            n: window.len(),
            slices,
            gates,
            barriers: self.barriers.clone(),
        })
    }

    /// Validate structural invariants: action lengths, gate occupancy
    /// (a k-unit gate covers k consecutive unit slices on both qubits) and
    /// that no action crosses a barrier.
    pub fn validate(&self) -> Result<()> {
        let mut seen: BTreeMap<usize, Vec<(u32, u64)>> = BTreeMap::new(); // gate -> (step, time)
        let mut t = 0u64;
        for s in &self.slices {
            if s.actions.len() != self.n {
                return Err(LfError::InvalidSchedule("action row length".into()));
            }
            for (q, a) in s.actions.iter().enumerate() {
                match a {
                    SliceAction::TwoQ { gate, step } => {
                        if s.duration == 0 {
                            return Err(LfError::InvalidSchedule(
                                "gate step in zero-duration slice".into(),
                            ));
                        }
                        let g = self
                            .gates
                            .get(*gate)
                            .ok_or_else(|| LfError::InvalidSchedule("gate index".into()))?;
                        if g.a != q && g.b != q {
                            return Err(LfError::InvalidSchedule(
                                "gate step on foreign qubit".into(),
                            ));
                        }
                        seen.entry(*gate).or_default().push((*step, t));
                    }
                    SliceAction::Rz { .. } => {}
                    _ => {}
                }
            }
            t += s.duration as u64;
        }
        for (gi, mut hits) in seen {
            let g = &self.gates[gi];
            hits.sort();
            if hits.len() != 2 * g.duration as usize {
                return Err(LfError::InvalidSchedule(format!(
                    "gate {gi} occupies {} cells, expected {}",
                    hits.len(),
                    2 * g.duration
                )));
            }
            let start = hits[0].1;
            for (k, &(step, time)) in hits.iter().enumerate() {
                let expect_step = (k / 2) as u32;
                if step != expect_step || time != start + expect_step as u64 {
                    return Err(LfError::InvalidSchedule(format!(
                        "gate {gi} does not occupy consecutive slices"
                    )));
                }
            }
            for &b in &self.barriers {
                let b = b as u64;
                if start < b && b < start + g.duration as u64 {
                    return Err(LfError::InvalidSchedule(format!(
                        "gate {gi} crosses a barrier"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Deterministic ASAP scheduler. `durations` maps unordered pairs to the 2Q
/// gate length in units; X90 takes 1 unit, Rz takes 0.
pub fn schedule(
    n: usize,
    ops: &[Op],
    durations: &BTreeMap<(usize, usize), u32>,
) -> Result<ScheduledCircuit> {
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut cursor = vec![0u64; n];
    // Unit-time grid: grid[t][q]; grown on demand.
    let mut grid: Vec<Vec<SliceAction>> = Vec::new();
    let mut rz_at: BTreeMap<u64, Vec<(usize, f64)>> = BTreeMap::new();
    let mut gates: Vec<ScheduledTwoQ> = Vec::new();
    let mut barriers: Vec<u32> = Vec::new();

    let ensure = |grid: &mut Vec<Vec<SliceAction>>, t: u64| {
        while grid.len() <= t as usize {
            grid.push(vec![SliceAction::Idle; n]);
        }
    };

    for op in ops {
        match op {
            Op::Barrier => {
                let t = cursor.iter().copied().max().unwrap_or(0);
                cursor.iter_mut().for_each(|c| *c = t);
                barriers.push(t as u32);
            }
            Op::Rz { q, theta } => {
                if *q >= n {
                    return Err(LfError::InvalidSchedule(format!("qubit {q} out of range")));
                }
                if theta.abs() > 1e-15 {
                    let entry = rz_at.entry(cursor[*q]).or_default();
                    match entry.iter_mut().find(|(eq, _)| eq == q) {
                        Some((_, th)) => *th += theta,
                        None => entry.push((*q, *theta)),
                    }
                }
            }
            Op::X90 { q } => {
                if *q >= n {
                    return Err(LfError::InvalidSchedule(format!("qubit {q} out of range")));
                }
                let t = cursor[*q];
                ensure(&mut grid, t);
                grid[t as usize][*q] = SliceAction::X90;
                cursor[*q] = t + 1;
            }
            Op::TwoQ { a, b, kind } => {
                if *a >= n || *b >= n || a == b {
                    return Err(LfError::InvalidSchedule(format!(
                        "bad gate qubits ({a}, {b})"
                    )));
                }
                let duration = *durations.get(&key(*a, *b)).ok_or_else(|| {
                    LfError::InvalidSchedule(format!("no duration for pair ({a}, {b})"))
                })?;
                if duration == 0 {
                    return Err(LfError::InvalidSchedule("zero gate duration".into()));
                }
                let start = cursor[*a].max(cursor[*b]);
                let gi = gates.len();
                gates.push(ScheduledTwoQ {
                    a: *a,
                    b: *b,
                    kind: *kind,
                    duration,
                });
                ensure(&mut grid, start + duration as u64 - 1);
                for step in 0..duration {
                    let t = (start + step as u64) as usize;
                    grid[t][*a] = SliceAction::TwoQ { gate: gi, step };
                    grid[t][*b] = SliceAction::TwoQ { gate: gi, step };
                }
                cursor[*a] = start + duration as u64;
                cursor[*b] = start + duration as u64;
            }
        }
    }

    let total = cursor.iter().copied().max().unwrap_or(0);
    ensure(&mut grid, total.saturating_sub(1).max(0));

    let mut slices = Vec::new();
    for t in 0..=total {
        if let Some(rzs) = rz_at.get(&t) {
            let mut actions = vec![SliceAction::Idle; n];
            for &(q, theta) in rzs {
                actions[q] = SliceAction::Rz { theta };
            }
            slices.push(Slice {
                duration: 0,
                actions,
            });
        }
        if t < total {
            slices.push(Slice {
                duration: 1,
                actions: grid[t as usize].clone(),
            });
        }
    }
    barriers.dedup();

    let out = ScheduledCircuit {
        n,
        slices,
        gates,
        barriers,
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn durations(pairs: &[((usize, usize), u32)]) -> BTreeMap<(usize, usize), u32> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn single_x90_is_one_unit_slice() {
        let sched = schedule(1, &[Op::X90 { q: 0 }], &durations(&[])).unwrap();
        assert_eq!(sched.slices.len(), 1);
        assert_eq!(sched.slices[0].duration, 1);
        assert_eq!(sched.wall_time_units(), 1);
    }

    #[test]
    fn rz_slices_are_zero_duration_and_merge() {
        let ops = vec![
            Op::Rz { q: 0, theta: 0.3 },
            Op::Rz { q: 0, theta: 0.2 },
            Op::X90 { q: 0 },
            Op::Rz { q: 0, theta: 0.1 },
        ];
        let sched = schedule(1, &ops, &durations(&[])).unwrap();
        assert_eq!(sched.wall_time_units(), 1);
        assert_eq!(sched.slices.len(), 3);
        assert_eq!(sched.slices[0].duration, 0);
        match sched.slices[0].actions[0] {
            SliceAction::Rz { theta } => assert!((theta - 0.5).abs() < 1e-12),
            _ => panic!("expected merged Rz"),
        }
        assert_eq!(sched.slices[2].duration, 0);
    }

    #[test]
    fn barrier_pads_short_gate_to_longest() {
        // 8-unit gate beside a 5-unit gate inside one barrier-aligned layer:
        // both qubit pairs stay busy/idle until unit 8.
        let ops = vec![
            Op::Barrier,
            Op::TwoQ {
                a: 0,
                b: 1,
                kind: TwoQubitGateKind::Cx,
            },
            Op::TwoQ {
                a: 2,
                b: 3,
                kind: TwoQubitGateKind::Cx,
            },
            Op::Barrier,
            Op::X90 { q: 0 },
            Op::X90 { q: 2 },
        ];
        let sched = schedule(4, &ops, &durations(&[((0, 1), 5), ((2, 3), 8)])).unwrap();
        // The X90s both start at t = 8 because of the barrier.
        let x90_times: Vec<u64> = {
            let mut t = 0;
            let mut found = Vec::new();
            for s in &sched.slices {
                for a in &s.actions {
                    if matches!(a, SliceAction::X90) {
                        found.push(t);
                    }
                }
                t += s.duration as u64;
            }
            found
        };
        assert_eq!(x90_times, vec![8, 8]);
        assert_eq!(sched.wall_time_units(), 9);
    }

    #[test]
    fn no_barrier_lets_gates_drift() {
        let ops = vec![
            Op::TwoQ {
                a: 0,
                b: 1,
                kind: TwoQubitGateKind::Cx,
            },
            Op::X90 { q: 0 },
            Op::TwoQ {
                a: 2,
                b: 3,
                kind: TwoQubitGateKind::Cx,
            },
            Op::X90 { q: 2 },
        ];
        let sched = schedule(4, &ops, &durations(&[((0, 1), 5), ((2, 3), 8)])).unwrap();
        // Qubit 0's X90 lands at t = 5, qubit 2's at t = 8.
        let mut t = 0;
        let mut times = Vec::new();
        for s in &sched.slices {
            for (q, a) in s.actions.iter().enumerate() {
                if matches!(a, SliceAction::X90) {
                    times.push((q, t));
                }
            }
            t += s.duration as u64;
        }
        assert_eq!(times, vec![(0, 5), (2, 8)]);
    }

    #[test]
    fn restriction_preserves_timing() {
        let ops = vec![
            Op::X90 { q: 0 },
            Op::Barrier,
            Op::TwoQ {
                a: 0,
                b: 1,
                kind: TwoQubitGateKind::Cx,
            },
            Op::TwoQ {
                a: 2,
                b: 3,
                kind: TwoQubitGateKind::Cz,
            },
            Op::Barrier,
            Op::X90 { q: 3 },
        ];
        let sched = schedule(4, &ops, &durations(&[((0, 1), 8), ((2, 3), 5)])).unwrap();
        let win = sched.restrict_to_qubits(&[2, 3]).unwrap();
        assert_eq!(win.n, 2);
        assert_eq!(win.wall_time_units(), sched.wall_time_units());
        assert_eq!(win.gates.len(), 1);
        assert_eq!(win.gates[0].kind, TwoQubitGateKind::Cz);
        win.validate().unwrap();
        // Straddling window is rejected.
        assert!(sched.restrict_to_qubits(&[1, 2]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let ops = vec![
            Op::Rz {
                q: 0,
                theta: std::f64::consts::FRAC_PI_2,
            },
            Op::X90 { q: 0 },
            Op::TwoQ {
                a: 0,
                b: 1,
                kind: TwoQubitGateKind::Ecr,
            },
        ];
        let sched = schedule(2, &ops, &durations(&[((0, 1), 5)])).unwrap();
        let json = sched.to_json().unwrap();
        let back = ScheduledCircuit::from_json(&json).unwrap();
        assert_eq!(back, sched);
    }
}
