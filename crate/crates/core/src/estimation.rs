//! Decay fitting and protocol outputs: per-element process fidelities,
//! per-sub-layer and full layer fidelity, EPLG, subchain tables, γ estimates
//! and mirror polarization.
//!
//! The RB model is P(l) = A·α^l + B with A, B ∈ [0, 1] and α ∈ (0, 1],
//! fitted by weighted least squares: for fixed α the model is linear in
//! (A, B), and α is profiled by a grid plus golden-section refinement.

use crate::circuits::Unit;
use crate::{LfError, Result};
use serde::{Deserialize, Serialize};

/// Survival probability vs depth for one disjoint unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayCurve {
    pub depths: Vec<u32>,
    pub means: Vec<f64>,
    pub std_errs: Vec<f64>,
    /// Decay-space dimension (2 for idles, 4 for pairs, 2^n for mirror).
    pub dimension: usize,
    pub label: String,
}

impl DecayCurve {
    pub fn validate(&self) -> Result<()> {
        if self.depths.len() != self.means.len() || self.depths.len() != self.std_errs.len() {
            return Err(LfError::InvalidValue("decay curve length mismatch".into()));
        }
        if self.means.iter().any(|&m| !(-1e-9..=1.0 + 1e-9).contains(&m)) {
            return Err(LfError::InvalidValue(
                "survival probabilities outside [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub alpha: f64,
    pub b: f64,
    pub a_err: f64,
    pub alpha_err: f64,
    pub b_err: f64,
    /// Reduced residual norm sqrt(SSR_w / dof).
    pub quality: f64,
    /// Curve never dropped below 0.95: α is weakly constrained and its
    /// uncertainty is floored. Extend the depth grid.
    pub underdriven: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions {
    /// Pin B (mirror polarization decays to 0).
    pub fix_b: Option<f64>,
}

struct LinearSolution {
    a: f64,
    b: f64,
    ssr: f64,
}

fn solve_linear(x: &[f64], y: &[f64], w: &[f64], b0: f64, fix_b: Option<f64>) -> LinearSolution {
    let ssr_of = |a: f64, b: f64| -> f64 {
        x.iter()
            .zip(y)
            .zip(w)
            .map(|((&xi, &yi), &wi)| wi * (a * xi + b - yi) * (a * xi + b - yi))
            .sum()
    };
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let a_given_b = |b: f64| -> f64 {
        let num: f64 = x
            .iter()
            .zip(y)
            .zip(w)
            .map(|((&xi, &yi), &wi)| wi * xi * (yi - b))
            .sum();
        let den: f64 = x.iter().zip(w).map(|(&xi, &wi)| wi * xi * xi).sum();
        if den > 0.0 {
            clamp(num / den)
        } else {
            0.0
        }
    };
    if let Some(b) = fix_b {
        let a = a_given_b(b);
        return LinearSolution {
            a,
            b,
            ssr: ssr_of(a, b),
        };
    }
    let b_given_a = |a: f64| -> f64 {
        let num: f64 = x
            .iter()
            .zip(y)
            .zip(w)
            .map(|((&xi, &yi), &wi)| wi * (yi - a * xi))
            .sum();
        let den: f64 = w.iter().sum();
        clamp(num / den)
    };
    let (s_xx, s_x1, s_11, s_xy, s_1y) = x.iter().zip(y).zip(w).fold(
        (0.0, 0.0, 0.0, 0.0, 0.0),
        |(sxx, sx1, s11, sxy, s1y), ((&xi, &yi), &wi)| {
            (
                sxx + wi * xi * xi,
                sx1 + wi * xi,
                s11 + wi,
                sxy + wi * xi * yi,
                s1y + wi * yi,
            )
        },
    );
    let det = s_xx * s_11 - s_x1 * s_x1;
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    if det.abs() > 1e-12 * s_11.max(1.0) {
        let a = (s_11 * s_xy - s_x1 * s_1y) / det;
        let b = (s_xx * s_1y - s_x1 * s_xy) / det;
        if (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) {
            candidates.push((a, b));
        }
    } else {
        // x is (numerically) constant, e.g. α = 1: only A + B identified.
        let mean = s_1y / s_11;
        candidates.push((clamp(mean - b0), clamp(b0.min(mean))));
    }
    for a in [0.0, 1.0] {
        candidates.push((a, b_given_a(a)));
    }
    for b in [0.0, 1.0] {
        candidates.push((a_given_b(b), b));
    }
    let (a, b) = candidates
        .into_iter()
        .min_by(|p, q| {
            ssr_of(p.0, p.1)
                .partial_cmp(&ssr_of(q.0, q.1))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    LinearSolution {
        a,
        b,
        ssr: ssr_of(a, b),
    }
}

/// Weighted nonlinear least squares of P(l) = A α^l + B with bounds.
pub fn fit_decay(curve: &DecayCurve) -> Result<FitResult> {
    fit_decay_with(curve, FitOptions::default())
}

pub fn fit_decay_with(curve: &DecayCurve, opts: FitOptions) -> Result<FitResult> {
    curve.validate()?;
    let npts = curve.depths.len();
    let free_params = if opts.fix_b.is_some() { 2 } else { 3 };
    if npts < free_params + 1 {
        return Err(LfError::FitFailed(format!(
            "need at least {} distinct depths",
            free_params + 1
        )));
    }
    let b0 = 1.0 / curve.dimension as f64 / curve.dimension as f64;
    let ls: Vec<f64> = curve.depths.iter().map(|&l| l as f64).collect();
    let y = &curve.means;
    let weighted = curve.std_errs.iter().any(|&s| s > 0.0);
    let w: Vec<f64> = if weighted {
        // Sample standard errors can be 0 by chance (identical draws at one
        // depth); floor them at a fraction of the RMS so no point gets
        // runaway weight.
        let rms = (curve.std_errs.iter().map(|s| s * s).sum::<f64>() / npts as f64).sqrt();
        curve
            .std_errs
            .iter()
            .map(|&s| 1.0 / s.max(0.3 * rms).max(1e-9).powi(2))
            .collect()
    } else {
        vec![1.0; npts]
    };

    let eval = |alpha: f64| -> (LinearSolution, f64) {
        let x: Vec<f64> = ls.iter().map(|&l| alpha.powf(l)).collect();
        let sol = solve_linear(&x, y, &w, b0, opts.fix_b);
        let ssr = sol.ssr;
        (sol, ssr)
    };

    // Coarse grid, then golden-section refinement around the best cell.
    let grid: Vec<f64> = (0..=400)
        .map(|i| 1e-4f64.powf(1.0 - i as f64 / 400.0))
        .collect();
    let mut best_i = 0;
    let mut best_ssr = f64::INFINITY;
    for (i, &alpha) in grid.iter().enumerate() {
        let (_, ssr) = eval(alpha);
        if ssr < best_ssr {
            best_ssr = ssr;
            best_i = i;
        }
    }
    let mut lo = grid[best_i.saturating_sub(1)];
    let mut hi = grid[(best_i + 1).min(grid.len() - 1)];
    let phi = 0.618_033_988_749_894_8;
    for _ in 0..80 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if eval(m1).1 <= eval(m2).1 {
            hi = m2;
        } else {
            lo = m1;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let (sol, ssr) = eval(alpha);

    // Covariance from the weighted Jacobian at the optimum.
    let mut jtj = nalgebra::DMatrix::<f64>::zeros(free_params, free_params);
    for (i, &l) in ls.iter().enumerate() {
        let xi = alpha.powf(l);
        let dda = xi;
        let ddalpha = if l > 0.0 {
            sol.a * l * alpha.powf(l - 1.0)
        } else {
            0.0
        };
        let row: Vec<f64> = if opts.fix_b.is_some() {
            vec![dda, ddalpha]
        } else {
            vec![dda, ddalpha, 1.0]
        };
        for r in 0..free_params {
            for c in 0..free_params {
                jtj[(r, c)] += w[i] * row[r] * row[c];
            }
        }
    }
    let dof = (npts - free_params).max(1) as f64;
    let quality = (ssr / dof).sqrt();
    let scale = if weighted { 1.0 } else { ssr / dof };
    let cov = jtj.clone().try_inverse();
    let (a_err, alpha_err, b_err) = match cov {
        Some(c) => {
            let get = |i: usize| (c[(i, i)].max(0.0) * scale.max(1e-30)).sqrt();
            if opts.fix_b.is_some() {
                (get(0), get(1), 0.0)
            } else {
                (get(0), get(1), get(2))
            }
        }
        None => (f64::INFINITY, f64::INFINITY, f64::INFINITY),
    };

    let min_mean = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let underdriven = min_mean > 0.95;
    let alpha_err = if underdriven {
        let l_max = *curve.depths.last().unwrap() as f64;
        alpha_err.max((1.0 - min_mean) / l_max.max(1.0)).max(1e-6)
    } else {
        alpha_err
    };
    let alpha = if underdriven && (1.0 - min_mean) < 1e-9 {
        1.0
    } else {
        alpha
    };

    Ok(FitResult {
        a: sol.a,
        alpha,
        b: sol.b,
        a_err,
        alpha_err,
        b_err,
        quality,
        underdriven,
    })
}

/// Process fidelity from an RB decay rate: F = (1 + (d²-1)α)/d².
pub fn fidelity_from_alpha(alpha: f64, d: usize) -> f64 {
    let d2 = (d * d) as f64;
    (1.0 + (d2 - 1.0) * alpha) / d2
}

/// Inverse of [`fidelity_from_alpha`].
pub fn alpha_from_fidelity(fidelity: f64, d: usize) -> f64 {
    let d2 = (d * d) as f64;
    (d2 * fidelity - 1.0) / (d2 - 1.0)
}

/// One fitted element of a disjoint layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementFidelity {
    pub unit: Unit,
    pub sublayer: usize,
    pub fidelity: f64,
    pub std_err: f64,
    pub alpha: f64,
    pub alpha_err: f64,
    pub underdriven: bool,
}

/// Per-sub-layer products LF_m = Π_j F_{j,m} and the full LF = Π_m LF_m.
/// Every unit of every sub-layer (including idles) must be present.
pub fn layer_fidelity(
    spec: &crate::circuits::LayerSpec,
    elements: &[ElementFidelity],
) -> Result<(Vec<f64>, f64)> {
    let mut lf_m = Vec::with_capacity(spec.sublayers.len());
    for m in 0..spec.sublayers.len() {
        let mut product = 1.0;
        for unit in spec.units(m) {
            let found = elements
                .iter()
                .find(|e| e.sublayer == m && e.unit == unit)
                .ok_or_else(|| {
                    LfError::IncompleteLayer(format!(
                        "missing fidelity for {} in sub-layer {m}",
                        unit.label()
                    ))
                })?;
            product *= found.fidelity;
        }
        lf_m.push(product);
    }
    let lf = lf_m.iter().product();
    Ok((lf_m, lf))
}

/// EPLG = 1 - LF^{1/n_2q}.
pub fn eplg(lf: f64, n_2q: usize) -> Result<f64> {
    if lf <= 0.0 || lf > 1.0 + 1e-12 {
        return Err(LfError::InvalidValue(format!("LF {lf} outside (0, 1]")));
    }
    if n_2q == 0 {
        return Err(LfError::InvalidValue("n_2q must be positive".into()));
    }
    Ok(1.0 - lf.powf(1.0 / n_2q as f64))
}

/// γ = 1/LF² (valid in the α -> 1 limit).
pub fn gamma_from_lf(lf: f64) -> Result<f64> {
    if lf <= 0.0 || lf > 1.0 + 1e-12 {
        return Err(LfError::InvalidValue(format!("LF {lf} outside (0, 1]")));
    }
    Ok(1.0 / (lf * lf))
}

/// Depth-1 overhead estimates from EPLG: γ_{δ=1} = (1-EPLG)^{-N_γ} and the
/// per-two-qubit normalization γ̄_{δ=1} = (1-EPLG)^{-2}.
pub fn gamma_depth1(eplg: f64, n_gamma: usize) -> Result<(f64, f64)> {
    if n_gamma % 2 != 0 || n_gamma == 0 {
        return Err(LfError::InvalidValue("N_γ must be even".into()));
    }
    let base = 1.0 - eplg;
    if base <= 0.0 {
        return Err(LfError::InvalidValue("EPLG must be below 1".into()));
    }
    Ok((base.powi(-(n_gamma as i32)), base.powi(-2)))
}

pub use crate::gamma::gamma_exact_depolarizing;

/// Per-element fidelities of a linear chain's even/odd structure, indexed by
/// chain position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainFidelities {
    pub n: usize,
    /// edge i joins positions i and i+1.
    pub edge_fidelity: Vec<f64>,
    pub edge_stderr: Vec<f64>,
    /// idle_fidelity[m][q]: the idle factor of position q in sub-layer m
    /// (None when gated there).
    pub idle_fidelity: Vec<Vec<Option<f64>>>,
    pub idle_stderr: Vec<Vec<Option<f64>>>,
}

impl ChainFidelities {
    pub fn validate(&self) -> Result<()> {
        if self.edge_fidelity.len() + 1 != self.n || self.edge_stderr.len() + 1 != self.n {
            return Err(LfError::InvalidValue("edge list length".into()));
        }
        for m in &self.idle_fidelity {
            if m.len() != self.n {
                return Err(LfError::InvalidValue("idle table width".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SubchainEntry {
    pub n: usize,
    pub start: usize,
    pub lf: f64,
    pub lf_err: f64,
    pub eplg: f64,
}

/// Sliding-window layer fidelity of `target_n` contiguous positions:
/// inside-window gates contribute F, gates straddling the boundary
/// contribute F^{1/2} (the fidelity shared equally between subsets), idle
/// factors of in-window qubits are retained. n_2q = N - 1. Ties take the
/// lowest start index.
pub fn best_subchain_lf(chain: &ChainFidelities, target_n: usize) -> Result<SubchainEntry> {
    chain.validate()?;
    if target_n < 2 {
        return Err(LfError::InvalidValue("subchain needs N ≥ 2".into()));
    }
    if target_n > chain.n {
        return Err(LfError::InvalidValue(format!(
            "subchain N = {target_n} exceeds chain length {}",
            chain.n
        )));
    }
    let mut best: Option<SubchainEntry> = None;
    for start in 0..=(chain.n - target_n) {
        let entry = window_lf(chain, start, target_n)?;
        if best.as_ref().map_or(true, |b| entry.lf > b.lf) {
            best = Some(entry);
        }
    }
    Ok(best.unwrap())
}

/// LF of the specific window [start, start + n).
pub fn window_lf(chain: &ChainFidelities, start: usize, target_n: usize) -> Result<SubchainEntry> {
    let end = start + target_n; // exclusive
    if end > chain.n {
        return Err(LfError::InvalidValue("window exceeds chain".into()));
    }
    let mut log_lf = 0.0;
    let mut rel_var = 0.0;
    for e in 0..chain.edge_fidelity.len() {
        let (p, q) = (e, e + 1);
        let inside = (p >= start && p < end) as u8 + (q >= start && q < end) as u8;
        let f = chain.edge_fidelity[e];
        let s = chain.edge_stderr[e];
        match inside {
            2 => {
                log_lf += f.ln();
                rel_var += (s / f).powi(2);
            }
            1 => {
                log_lf += 0.5 * f.ln();
                rel_var += 0.25 * (s / f).powi(2);
            }
            _ => {}
        }
    }
    for (m, row) in chain.idle_fidelity.iter().enumerate() {
        for q in start..end {
            if let Some(f) = row[q] {
                log_lf += f.ln();
                let s = chain.idle_stderr[m][q].unwrap_or(0.0);
                rel_var += (s / f).powi(2);
            }
        }
    }
    let lf = log_lf.exp();
    Ok(SubchainEntry {
        n: target_n,
        start,
        lf,
        lf_err: lf * rel_var.sqrt(),
        eplg: eplg(lf, target_n - 1)?,
    })
}

/// Best-window table for every N from 2 to the chain length.
pub fn subchain_table(chain: &ChainFidelities) -> Result<Vec<SubchainEntry>> {
    (2..=chain.n).map(|n| best_subchain_lf(chain, n)).collect()
}

/// Polarization S from the probability-per-Hamming-distance histogram:
/// S = (4^n/(4^n-1)) Σ_k (-1/2)^k h_k - 1/(4^n-1).
pub fn mirror_polarization(hamming: &[f64], n: usize) -> Result<f64> {
    if hamming.len() != n + 1 {
        return Err(LfError::DimensionMismatch(
            "Hamming histogram length".into(),
        ));
    }
    let total: f64 = hamming.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(LfError::InvalidValue(format!(
            "Hamming histogram sums to {total}"
        )));
    }
    let four_n = 4f64.powi(n as i32);
    let weighted: f64 = hamming
        .iter()
        .enumerate()
        .map(|(k, &h)| (-0.5f64).powi(k as i32) * h)
        .sum();
    Ok(four_n / (four_n - 1.0) * weighted - 1.0 / (four_n - 1.0))
}

/// Full protocol output for one measured layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerFidelityResult {
    pub elements: Vec<ElementFidelity>,
    pub lf_m: Vec<f64>,
    pub lf: f64,
    pub lf_err: f64,
    pub n_2q: usize,
    pub eplg: f64,
    pub gamma: f64,
    pub subchains: Vec<SubchainEntry>,
}

impl LayerFidelityResult {
    pub fn assemble(
        spec: &crate::circuits::LayerSpec,
        mut elements: Vec<ElementFidelity>,
        subchains: Vec<SubchainEntry>,
    ) -> Result<Self> {
        // Deterministic ordering: sub-layer, then unit label.
        elements.sort_by(|a, b| {
            (a.sublayer, a.unit.label()).cmp(&(b.sublayer, b.unit.label()))
        });
        let (lf_m, lf) = layer_fidelity(spec, &elements)?;
        let n_2q = spec.n_2q();
        let rel_var: f64 = elements
            .iter()
            .map(|e| (e.std_err / e.fidelity).powi(2))
            .sum();
        Ok(LayerFidelityResult {
            eplg: eplg(lf, n_2q)?,
            gamma: gamma_from_lf(lf)?,
            lf_err: lf * rel_var.sqrt(),
            elements,
            lf_m,
            lf,
            n_2q,
            subchains,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{GateSpec, LayerSpec, SubLayer};
    use crate::gates::TwoQubitGateKind;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn curve(depths: Vec<u32>, f: impl Fn(f64) -> f64, se: f64) -> DecayCurve {
        let means = depths.iter().map(|&l| f(l as f64)).collect();
        DecayCurve {
            std_errs: vec![se; depths.len()],
            means,
            depths,
            dimension: 4,
            label: "test".into(),
        }
    }

    #[test]
    fn exact_decay_recovered() {
        let c = curve(
            vec![1, 2, 4, 8, 16, 32, 64, 128],
            |l| 0.75 * 0.98f64.powf(l) + 0.25,
            0.0,
        );
        let fit = fit_decay(&c).unwrap();
        assert!((fit.alpha - 0.98).abs() < 1e-6, "alpha = {}", fit.alpha);
        assert!((fit.a - 0.75).abs() < 1e-6);
        assert!((fit.b - 0.25).abs() < 1e-6);
        assert!(!fit.underdriven);
    }

    #[test]
    fn constant_curve_pins_alpha() {
        let c = curve(vec![1, 5, 10, 20], |_| 1.0, 0.0);
        let fit = fit_decay(&c).unwrap();
        assert_eq!(fit.alpha, 1.0);
        assert!(fit.underdriven);
        assert!(fit.alpha_err >= 1e-6);
    }

    #[test]
    fn too_few_depths_rejected() {
        let c = curve(vec![1, 5, 10], |l| 0.75 * 0.98f64.powf(l) + 0.25, 0.0);
        assert!(fit_decay(&c).is_err());
    }

    #[test]
    fn noisy_fit_coverage() {
        // Gaussian noise σ = 0.01 averaged over 6 randomizations; the 3σ
        // interval must cover the true α in at least 95% of 500 trials.
        let mut rng = StdRng::seed_from_u64(12345);
        let depths = vec![1u32, 10, 20, 40, 80, 160];
        let true_alpha: f64 = 0.985;
        let se = 0.01 / 6f64.sqrt();
        let mut covered = 0;
        let trials = 500;
        for _ in 0..trials {
            let means: Vec<f64> = depths
                .iter()
                .map(|&l| {
                    let clean = 0.75 * true_alpha.powi(l as i32) + 0.25;
                    let noise: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
                    (clean + se * noise).clamp(0.0, 1.0)
                })
                .collect();
            let c = DecayCurve {
                depths: depths.clone(),
                means,
                std_errs: vec![se; depths.len()],
                dimension: 4,
                label: "mc".into(),
            };
            let fit = fit_decay(&c).unwrap();
            if (fit.alpha - true_alpha).abs() <= 3.0 * fit.alpha_err {
                covered += 1;
            }
        }
        assert!(
            covered as f64 / trials as f64 >= 0.95,
            "coverage {covered}/{trials}"
        );
    }

    #[test]
    fn fidelity_from_alpha_examples() {
        assert_eq!(fidelity_from_alpha(1.0, 4), 1.0);
        assert!((fidelity_from_alpha(0.99, 4) - 0.990625).abs() < 1e-12);
        assert_eq!(fidelity_from_alpha(0.0, 2), 0.25);
        assert!((alpha_from_fidelity(0.990625, 4) - 0.99).abs() < 1e-12);
    }

    fn two_layer_spec() -> LayerSpec {
        LayerSpec::even_odd_chain(3, TwoQubitGateKind::Cx, 8).unwrap()
    }

    fn elem(unit: Unit, m: usize, f: f64) -> ElementFidelity {
        ElementFidelity {
            unit,
            sublayer: m,
            fidelity: f,
            std_err: 0.0,
            alpha: 0.0,
            alpha_err: 0.0,
            underdriven: false,
        }
    }

    #[test]
    fn layer_fidelity_product_and_completeness() {
        let spec = two_layer_spec();
        // Even: pair (0,1) + idle 2; odd: pair (1,2) + idle 0.
        let els = vec![
            elem(
                Unit::Pair {
                    a: 0,
                    b: 1,
                    kind: TwoQubitGateKind::Cx,
                },
                0,
                0.99,
            ),
            elem(Unit::Idle { q: 2 }, 0, 0.999),
            elem(
                Unit::Pair {
                    a: 1,
                    b: 2,
                    kind: TwoQubitGateKind::Cx,
                },
                1,
                0.99,
            ),
            elem(Unit::Idle { q: 0 }, 1, 0.999),
        ];
        let (lf_m, lf) = layer_fidelity(&spec, &els).unwrap();
        assert!((lf_m[0] - 0.99 * 0.999).abs() < 1e-12);
        assert!((lf - (0.99f64 * 0.999).powi(2)).abs() < 1e-12);
        assert!((lf - 0.97814).abs() < 5e-5);

        // Omitting an idle raises a completeness error.
        let missing = vec![els[0].clone(), els[2].clone(), els[3].clone()];
        assert!(matches!(
            layer_fidelity(&spec, &missing),
            Err(LfError::IncompleteLayer(_))
        ));
    }

    #[test]
    fn eplg_paper_anchors() {
        let e = eplg(0.26, 79).unwrap();
        assert!((e - 1.7e-2).abs() < 0.05e-2, "eplg = {e}");
        let e = eplg(0.61, 79).unwrap();
        assert!((e - 6.2e-3).abs() < 0.05e-3, "eplg = {e}");
        assert_eq!(eplg(1.0, 10).unwrap(), 0.0);
    }

    #[test]
    fn gamma_estimates() {
        assert_eq!(gamma_from_lf(1.0).unwrap(), 1.0);
        assert_eq!(gamma_from_lf(0.5).unwrap(), 4.0);
        let (g, gbar) = gamma_depth1(6.2e-3, 80).unwrap();
        assert!((g - 1.645).abs() < 2e-3, "γ_δ1 = {g}");
        assert!((gbar - (1.0 - 6.2e-3f64).powi(-2)).abs() < 1e-12);
        assert!(gamma_depth1(0.01, 3).is_err());
    }

    fn uniform_chain(n: usize, f_edge: f64) -> ChainFidelities {
        let mut idle_fidelity = vec![vec![None; n], vec![None; n]];
        for q in 0..n {
            // even sub-layer gates (0,1),(2,3)...; odd gates (1,2),(3,4)...
            let gated_even = (q % 2 == 0 && q + 1 < n) || (q % 2 == 1);
            if !gated_even {
                idle_fidelity[0][q] = Some(1.0);
            }
            let gated_odd = (q % 2 == 1 && q + 1 < n) || (q % 2 == 0 && q > 0);
            if !gated_odd {
                idle_fidelity[1][q] = Some(1.0);
            }
        }
        ChainFidelities {
            n,
            edge_fidelity: vec![f_edge; n - 1],
            edge_stderr: vec![0.0; n - 1],
            idle_stderr: idle_fidelity
                .iter()
                .map(|r| r.iter().map(|o| o.map(|_| 0.0)).collect())
                .collect(),
            idle_fidelity,
        }
    }

    #[test]
    fn subchain_window_rules() {
        // 4-qubit chain, F01 = F12 = F23 = 0.99, no idle error: window {1,2}
        // scores √0.99 · 0.99 · √0.99 = 0.9801.
        let chain = uniform_chain(4, 0.99);
        let full = best_subchain_lf(&chain, 4).unwrap();
        assert!((full.lf - 0.99f64.powi(3)).abs() < 1e-12);
        // The interior window {1,2} has straddles on both sides:
        // √0.99 · 0.99 · √0.99 = 0.9801.
        let mid = window_lf(&chain, 1, 2).unwrap();
        assert!((mid.lf - 0.9801).abs() < 1e-9);
        // The best N = 2 window is an end window (one straddle only),
        // ties broken toward the lowest start.
        let w2 = best_subchain_lf(&chain, 2).unwrap();
        assert!((w2.lf - 0.99f64.powf(1.5)).abs() < 1e-12);
        assert_eq!(w2.start, 0);
        assert!(best_subchain_lf(&chain, 1).is_err());
    }

    #[test]
    fn subchain_monotonicity_over_random_chains() {
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..50 {
            let n = rng.gen_range(4..12);
            let mut chain = uniform_chain(n, 0.99);
            for f in chain.edge_fidelity.iter_mut() {
                *f = 0.9 + 0.1 * rng.gen::<f64>();
            }
            for row in chain.idle_fidelity.iter_mut() {
                for o in row.iter_mut() {
                    if o.is_some() {
                        *o = Some(0.95 + 0.05 * rng.gen::<f64>());
                    }
                }
            }
            let table = subchain_table(&chain).unwrap();
            for w in table.windows(2) {
                assert!(
                    w[1].lf <= w[0].lf + 1e-12,
                    "best LF must be non-increasing in N"
                );
            }
        }
    }

    #[test]
    fn mirror_polarization_anchors() {
        // Perfect output.
        let mut h = vec![0.0; 5];
        h[0] = 1.0;
        assert!((mirror_polarization(&h, 4).unwrap() - 1.0).abs() < 1e-12);
        // Uniform distribution over 2^n bitstrings: S = 0.
        let n = 4;
        let mut h = vec![0.0; n + 1];
        for k in 0..=n {
            h[k] = binomial(n, k) as f64 / 2f64.powi(n as i32);
        }
        assert!(mirror_polarization(&h, n).unwrap().abs() < 1e-12);
    }

    fn binomial(n: usize, k: usize) -> u64 {
        (1..=k).fold(1u64, |acc, i| acc * (n - i + 1) as u64 / i as u64)
    }

    #[test]
    fn assemble_orders_and_checks() {
        let spec = LayerSpec::new(
            2,
            vec![SubLayer {
                gates: vec![GateSpec {
                    a: 0,
                    b: 1,
                    kind: TwoQubitGateKind::Cx,
                }],
                idle: vec![],
            }],
            [((0, 1), 8)].into_iter().collect(),
        )
        .unwrap();
        let els = vec![elem(
            Unit::Pair {
                a: 0,
                b: 1,
                kind: TwoQubitGateKind::Cx,
            },
            0,
            0.98,
        )];
        let res = LayerFidelityResult::assemble(&spec, els, vec![]).unwrap();
        assert!((res.lf - 0.98).abs() < 1e-12);
        assert!((res.gamma - 1.0 / (0.98f64 * 0.98)).abs() < 1e-12);
        assert_eq!(res.n_2q, 1);
    }
}
