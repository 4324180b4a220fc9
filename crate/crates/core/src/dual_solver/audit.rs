use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::scheme::{DualSolution, DualStep};
use crate::error::{Error, Result};
use crate::measures::Grid;
use crate::velocity::VelocityField;

/// Dimensional constants of the dual estimates, measured once on the
/// reference suite and frozen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConstants {
    pub gradient: f64,
    pub weighted: f64,
    pub l2_gradient: f64,
    /// prefactor and rate multiplier of the paired L2 bound
    pub l2_pair: f64,
    /// relative slack before a ratio is flagged
    pub slack: f64,
}

impl Default for AuditConstants {
    fn default() -> Self {
        Self { gradient: 1.0, weighted: std::f64::consts::SQRT_2, l2_gradient: 1.0, l2_pair: 2.0, slack: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientAudit {
    pub constant: f64,
    /// `(s, |||grad psi_s||| / envelope_s)`
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
    /// `max_s ln(|||grad psi_s||| / |||grad psi_0|||) / int ||grad E||`
    pub measured_constant: Option<f64>,
    pub flagged: bool,
}

/// `|||grad psi_s||| <= |||grad psi_0||| exp(C int_0^s ||grad E_{T-sigma}||)`.
pub fn audit_gradient_bound(sol: &DualSolution, constants: &AuditConstants) -> GradientAudit {
    let lip0 = sol.history[0].lip;
    let c = constants.gradient;
    let ratios: Vec<(f64, f64)> = sol
        .history
        .iter()
        .map(|h| (h.s, ratio(h.lip, lip0 * (c * h.int_field_grad).exp())))
        .collect();
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let measured_constant = growth_constant(&sol.history, |h| h.lip, lip0);
    GradientAudit { constant: c, ratios, max_ratio, measured_constant, flagged: max_ratio > 1.0 + constants.slack }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeModulus {
    /// `(s, ||(psi_s - psi_0) / (1 + |x|)||)` at `s = T / 2^k`
    pub samples: Vec<(f64, f64)>,
    pub observed_order: Option<f64>,
    /// max over steps of the deviation against
    /// `Lambda (sqrt(d) W s e^{W s} + d (2/sqrt(pi)) sqrt(D s) (1 + sqrt(d) W s))`
    pub envelope_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedAudit {
    pub constant: f64,
    pub max_ratio: f64,
    pub modulus: TimeModulus,
    pub flagged: bool,
}

/// Weighted sup bound and Hölder-in-time modulus of the dual solution.
pub fn audit_weighted_bound(sol: &DualSolution, constants: &AuditConstants) -> WeightedAudit {
    let w0 = sol.history[0].weighted;
    let c = constants.weighted;
    let d = sol.diffusion;
    let max_ratio = sol
        .history
        .iter()
        .map(|h| ratio(h.weighted, c * w0 * (d * h.s + h.int_field_weighted).exp()))
        .fold(0.0, f64::max);

    let dim = sol.grid.dim() as f64;
    let mut lam: f64 = 0.0;
    let mut w: f64 = 0.0;
    let mut envelope_ratio: f64 = 0.0;
    for h in &sol.history {
        lam = lam.max(h.lip);
        w = w.max(h.field_weighted);
        let s = h.s;
        let heat = dim * 2.0 / PI.sqrt() * (d * s).sqrt() * (1.0 + dim.sqrt() * w * s);
        let env = lam * (dim.sqrt() * w * s * (w * s).exp() + heat);
        envelope_ratio = envelope_ratio.max(ratio(h.deviation, env));
    }

    let mut samples = Vec::new();
    for k in 1..=5 {
        let target = sol.horizon / 2f64.powi(k);
        if let Some(h) = nearest(&sol.history, target) {
            samples.push((h.s, h.deviation));
        }
    }
    let observed_order = fit_order(&samples);
    let flagged = max_ratio > 1.0 + constants.slack || envelope_ratio > 1.0 + constants.slack;
    WeightedAudit { constant: c, max_ratio, modulus: TimeModulus { samples, observed_order, envelope_ratio }, flagged }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousDependenceAudit {
    /// `sup_s ||(psi_s - psihat_s) / (1 + |x|)||`
    pub numerator: f64,
    /// `int_0^T ||(E - Ehat) / (1 + |x|)||`
    pub denominator: f64,
    pub ratio: f64,
    /// `Lambda sqrt(d) exp(D T + int (max(||grad E||, ||grad Ehat||) + W))`
    pub envelope: f64,
    pub envelope_ratio: f64,
    pub flagged: bool,
}

/// Points of the time quadrature for integrals of field differences.
const FIELD_QUADRATURE: usize = 200;

pub fn audit_continuous_dependence(
    a: &DualSolution,
    b: &DualSolution,
    field_a: &VelocityField,
    field_b: &VelocityField,
    constants: &AuditConstants,
) -> Result<ContinuousDependenceAudit> {
    check_pair(a, b)?;
    let grid = &a.grid;
    let dim = grid.dim();
    let weights = weights(grid);
    let mut numerator: f64 = 0.0;
    for ((_, pa), (_, pb)) in a.snapshots.iter().zip(&b.snapshots) {
        for k in 0..pa.len() {
            numerator = numerator.max((pa[k] - pb[k]).abs() / weights[k]);
        }
    }
    let t_end = a.horizon;
    let dt = t_end / FIELD_QUADRATURE as f64;
    let mut denominator = 0.0;
    for q in 0..FIELD_QUADRATURE {
        let t = t_end - (q as f64 + 0.5) * dt;
        let ea = field_a.on_grid(t, grid)?;
        let eb = field_b.on_grid(t, grid)?;
        let mut worst: f64 = 0.0;
        for k in 0..grid.len() {
            let diff: f64 = (0..dim).map(|c| (ea[k * dim + c] - eb[k * dim + c]).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(diff / weights[k]);
        }
        denominator += worst * dt;
    }
    let ratio = ratio(numerator, denominator);
    let (la, lb) = (a.history.last().unwrap(), b.history.last().unwrap());
    let lam = a.history[0].lip;
    let exponent = a.diffusion * t_end
        + la.int_field_grad.max(lb.int_field_grad)
        + la.int_field_weighted.max(lb.int_field_weighted);
    let envelope = lam * (dim as f64).sqrt() * exponent.exp();
    let envelope_ratio = self::ratio(ratio, envelope);
    Ok(ContinuousDependenceAudit {
        numerator,
        denominator,
        ratio,
        envelope,
        envelope_ratio,
        flagged: envelope_ratio > 1.0 + constants.slack,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2GradientAudit {
    pub constant: f64,
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
    pub measured_constant: Option<f64>,
    pub flagged: bool,
}

/// `||grad psi_s||_{L2} <= ||grad psi_0||_{L2} exp(C int ||grad E||)`; needs `D > 0`.
pub fn audit_l2_gradient(sol: &DualSolution, constants: &AuditConstants) -> Result<L2GradientAudit> {
    if sol.diffusion <= 0.0 {
        return Err(Error::Unsupported("L2 gradient estimates need D > 0".into()));
    }
    let g0 = sol.history[0].l2_grad;
    let c = constants.l2_gradient;
    let ratios: Vec<(f64, f64)> =
        sol.history.iter().map(|h| (h.s, ratio(h.l2_grad, g0 * (c * h.int_field_grad).exp()))).collect();
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let measured_constant = growth_constant(&sol.history, |h| h.l2_grad, g0);
    Ok(L2GradientAudit { constant: c, ratios, max_ratio, measured_constant, flagged: max_ratio > 1.0 + constants.slack })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2PairAudit {
    /// `(s, ||grad(psi_s - psihat_s)||^2 / envelope_s)` at the common snapshots
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
    pub flagged: bool,
}

/// Paired bound
/// `||grad(psi_s - psihat_s)||^2 <= C e^{C2 s} (1 + 1/D) int_0^s (|grad psi|^2 + |grad psihat|^2) ||E - Ehat||_{W1inf}^2`
/// with `C2 = C (1 + max ||grad E||)`.
pub fn audit_l2_continuous_dependence(
    a: &DualSolution,
    b: &DualSolution,
    field_a: &VelocityField,
    field_b: &VelocityField,
    constants: &AuditConstants,
) -> Result<L2PairAudit> {
    check_pair(a, b)?;
    if a.diffusion <= 0.0 {
        return Err(Error::Unsupported("L2 continuous dependence needs D > 0".into()));
    }
    let grid = &a.grid;
    let dim = grid.dim();
    let c = constants.l2_pair;
    let max_grad = a.history.iter().chain(&b.history).map(|h| h.field_grad).fold(0.0, f64::max);
    let c2 = c * (1.0 + max_grad);
    let t_end = a.horizon;
    let dt = t_end / FIELD_QUADRATURE as f64;
    // cumulative integral at the quadrature nodes
    let mut cumulative = vec![0.0; FIELD_QUADRATURE + 1];
    for q in 0..FIELD_QUADRATURE {
        let sigma = (q as f64 + 0.5) * dt;
        let ea = field_a.on_grid(t_end - sigma, grid)?;
        let eb = field_b.on_grid(t_end - sigma, grid)?;
        let diff: Vec<f64> = ea.iter().zip(&eb).map(|(x, y)| x - y).collect();
        let w1inf = sup_norm(&diff, dim) + jacobian_norm(grid, &diff);
        let ga = step_at(&a.history, sigma).l2_grad;
        let gb = step_at(&b.history, sigma).l2_grad;
        cumulative[q + 1] = cumulative[q] + (ga * ga + gb * gb) * w1inf * w1inf * dt;
    }
    let mut ratios = Vec::new();
    for ((s, pa), (_, pb)) in a.snapshots.iter().zip(&b.snapshots) {
        let diff: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x - y).collect();
        let y = l2_grad_sq(grid, &diff);
        let q = ((s / dt).ceil() as usize).min(FIELD_QUADRATURE);
        let env = c * (c2 * s).exp() * (1.0 + 1.0 / a.diffusion) * cumulative[q];
        ratios.push((*s, ratio(y, env)));
    }
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(L2PairAudit { ratios, max_ratio, flagged: max_ratio > 1.0 + constants.slack })
}

fn check_pair(a: &DualSolution, b: &DualSolution) -> Result<()> {
    let same_snaps = a.snapshots.len() == b.snapshots.len()
        && a.snapshots.iter().zip(&b.snapshots).all(|(x, y)| (x.0 - y.0).abs() <= 1e-12 * (1.0 + x.0));
    if a.grid != b.grid || a.horizon != b.horizon || a.diffusion != b.diffusion || !same_snaps {
        return Err(Error::Config("paired dual solutions differ in grid, horizon, diffusion or snapshots".into()));
    }
    if a.initial() != b.initial() {
        return Err(Error::Config("paired dual solutions must share psi_0".into()));
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn weights(grid: &Grid) -> Vec<f64> {
    let dim = grid.dim();
    (0..grid.len()).map(|k| 1.0 + grid.center(k)[..dim].iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
}

fn nearest(history: &[DualStep], s: f64) -> Option<&DualStep> {
    history.iter().min_by(|a, b| (a.s - s).abs().total_cmp(&(b.s - s).abs()))
}

/// Record in force at time `sigma` (the last one with `s <= sigma`).
fn step_at(history: &[DualStep], sigma: f64) -> &DualStep {
    let k = history.partition_point(|h| h.s <= sigma).max(1) - 1;
    &history[k]
}

/// Least-squares slope of `ln omega` against `ln s`.
fn fit_order(samples: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        samples.iter().filter(|(s, v)| *s > 0.0 && *v > 0.0).map(|(s, v)| (s.ln(), v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn growth_constant(history: &[DualStep], value: impl Fn(&DualStep) -> f64, base: f64) -> Option<f64> {
    if base <= 0.0 {
        return None;
    }
    history
        .iter()
        .filter(|h| h.int_field_grad > 1e-12)
        .map(|h| (value(h) / base).ln() / h.int_field_grad)
        .reduce(f64::max)
}

fn sup_norm(v: &[f64], dim: usize) -> f64 {
    v.chunks(dim).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max)
}

fn jacobian_norm(grid: &Grid, e: &[f64]) -> f64 {
    let dim = grid.dim();
    let mut worst: f64 = 0.0;
    for k in 0..grid.len() {
        let idx = grid.multi_index(k);
        for a in 0..dim {
            if idx[a] + 1 < grid.cells()[a] {
                let hi = k + grid.stride(a);
                let row: f64 = (0..dim).map(|b| (e[hi * dim + b] - e[k * dim + b]).abs()).sum::<f64>() / grid.spacing(a);
                worst = worst.max(row);
            }
        }
    }
    worst
}

fn l2_grad_sq(grid: &Grid, psi: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..grid.len() {
        let idx = grid.multi_index(k);
        for a in 0..grid.dim() {
            if idx[a] + 1 < grid.cells()[a] {
                let d = (psi[k + grid.stride(a)] - psi[k]) / grid.spacing(a);
                acc += d * d;
            }
        }
    }
    acc * grid.cell_volume()
}
