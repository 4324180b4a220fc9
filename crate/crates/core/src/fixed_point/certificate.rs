use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::picard::metric_name;
use crate::dual_solver::{
    audit_gradient_bound, audit_weighted_bound, default_bank, solve_dual, AuditConstants, DualConfig, Probe,
};
use crate::error::{Error, Result};
use crate::measures::{Grid, Measure};
use crate::trajectory::Trajectory;
use crate::velocity::{InteractionKernel, VelocityField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Horizons measured from the trajectory start; empty means the full run.
    #[serde(default)]
    pub horizons: Vec<f64>,
    /// Dual grid; defaults to the trajectory grid or a box around the particles.
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub diffusion: Vec<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    /// Prefactor of the residual tolerance.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub constants: AuditConstants,
}

fn default_cells() -> usize {
    256
}
fn default_cfl() -> f64 {
    0.9
}
fn default_kappa() -> f64 {
    1.0
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            horizons: Vec::new(),
            grid: None,
            cells: default_cells(),
            diffusion: Vec::new(),
            cfl: default_cfl(),
            max_step: None,
            kappa: default_kappa(),
            constants: AuditConstants::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub horizon: f64,
    pub species: usize,
    pub probe: Probe,
    /// `int psi_0 dmu_T`
    pub terminal: f64,
    /// `int psi_T dmu_0`
    pub initial: f64,
    pub residual: f64,
    pub tolerance: f64,
    /// discrete Lipschitz constant of `psi_T`
    pub final_lipschitz: f64,
    pub gradient_audit_ratio: f64,
    pub weighted_audit_ratio: f64,
    pub audit_flagged: bool,
    /// largest excursion of `psi` outside `[min psi_0, max psi_0]`; only for
    /// probes that vanish to first order near the box boundary
    pub max_principle_violation: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyPairCertificate {
    pub horizons: Vec<f64>,
    pub metric: String,
    pub dual_grid: Grid,
    pub bank: Vec<Probe>,
    pub records: Vec<ProbeRecord>,
    pub max_residual: f64,
    pub passed: bool,
}

impl EntropyPairCertificate {
    pub fn failures(&self) -> impl Iterator<Item = &ProbeRecord> {
        self.records.iter().filter(|r| !r.passed)
    }
}

/// Pairs each species of `trajectory` with the dual problem driven by
/// `E^i = -K^i[mu]` and checks the duality identity for every probe.
pub fn certify_entropy_pair(
    trajectory: &Trajectory,
    kernel: &InteractionKernel,
    probes: &[Probe],
    options: &CertifyOptions,
) -> Result<EntropyPairCertificate> {
    let shared = Arc::new(trajectory.clone());
    let fields: Vec<VelocityField> = (0..trajectory.species())
        .map(|i| VelocityField::induced(kernel.clone(), i, shared.clone()))
        .collect::<Result<_>>()?;
    certify_with_fields(trajectory, &fields, probes, options)
}

/// Same certificate for a trajectory transported by prescribed fields.
pub fn certify_with_fields(
    trajectory: &Trajectory,
    fields: &[VelocityField],
    probes: &[Probe],
    options: &CertifyOptions,
) -> Result<EntropyPairCertificate> {
    let n = trajectory.species();
    if fields.len() != n {
        return Err(Error::Config(format!("{} fields for {n} species", fields.len())));
    }
    if options.diffusion.len() > n || options.diffusion.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::Config("certificate diffusion must list nonnegative values per species".into()));
    }
    let grid = match &options.grid {
        Some(g) => g.clone(),
        None => default_dual_grid(trajectory, options.cells)?,
    };
    let bank = if probes.is_empty() { default_bank(&grid) } else { probes.to_vec() };
    for p in &bank {
        p.validate(grid.dim())?;
    }
    let t0 = trajectory.start();
    let full = trajectory.end() - t0;
    let horizons = if options.horizons.is_empty() { vec![full] } else { options.horizons.clone() };
    if let Some(t) = horizons.iter().find(|t| !(**t > 0.0 && **t <= full * (1.0 + 1e-9))) {
        return Err(Error::Config(format!("certificate horizon {t} outside (0, {full}]")));
    }

    let mut jobs: Vec<(f64, usize, &Probe)> = Vec::new();
    for &t in &horizons {
        for i in 0..n {
            jobs.extend(bank.iter().map(|p| (t, i, p)));
        }
    }
    let records: Vec<ProbeRecord> = jobs
        .par_iter()
        .map(|&(horizon, i, probe)| certify_one(trajectory, &fields[i], &grid, horizon, i, probe, options))
        .collect::<Result<_>>()?;
    let max_residual = records.iter().map(|r| r.residual).fold(0.0, f64::max);
    let passed = records.iter().all(|r| r.passed);
    Ok(EntropyPairCertificate {
        horizons,
        metric: metric_name(&trajectory.initial()[0]).to_string(),
        dual_grid: grid,
        bank,
        records,
        max_residual,
        passed,
    })
}

fn certify_one(
    trajectory: &Trajectory,
    field: &VelocityField,
    grid: &Grid,
    horizon: f64,
    species: usize,
    probe: &Probe,
    options: &CertifyOptions,
) -> Result<ProbeRecord> {
    let t0 = trajectory.start();
    let diffusion = options.diffusion.get(species).copied().unwrap_or(0.0);
    let mut config = DualConfig::new(horizon, diffusion, grid.clone());
    config.cfl = options.cfl;
    config.max_step = options.max_step;
    let psi0 = probe.sample(grid)?;
    let field = if t0 != 0.0 { field.shifted(t0) } else { field.clone() };
    let sol = solve_dual(&config, &field, &psi0)?;

    let mu_t = trajectory.state_at(t0 + horizon)?.swap_remove(species);
    let mu_0 = &trajectory.initial()[species];
    let terminal = mu_t.integrate(|x| probe.eval(x));
    let psi_t = sol.last();
    let initial = match mu_0 {
        Measure::Grid(g) if g.grid() == grid => {
            let vol = grid.cell_volume();
            g.values().iter().zip(psi_t).map(|(m, p)| m * p * vol).sum()
        }
        other => other.integrate(|x| grid.interpolate(psi_t, x)),
    };
    let residual = (terminal - initial).abs();

    let last = sol.history.last().expect("dual history is never empty");
    let ds = sol.history.iter().map(|h| h.ds).fold(0.0, f64::max);
    let dx = (0..grid.dim()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    let field_budget = last.int_field_grad + last.int_field_weighted;
    let sup_psi0 = psi0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mass_gap = (mu_t.mass() - mu_0.mass()).abs();
    let tolerance =
        options.kappa * probe.lipschitz() * (dx + ds) * (1.0 + field_budget) + sup_psi0 * mass_gap + 1e-10;

    let gradient = audit_gradient_bound(&sol, &options.constants);
    let weighted = audit_weighted_bound(&sol, &options.constants);
    let (lo, hi) = psi0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let max_principle_violation = probe.flat_near_boundary(grid, 2).then(|| {
        sol.history.iter().map(|h| (lo - h.min).max(h.max - hi)).fold(0.0, f64::max)
    });
    let audit_flagged = gradient.flagged || weighted.flagged;
    Ok(ProbeRecord {
        horizon,
        species,
        probe: probe.clone(),
        terminal,
        initial,
        residual,
        tolerance,
        final_lipschitz: last.lip,
        gradient_audit_ratio: gradient.max_ratio,
        weighted_audit_ratio: weighted.max_ratio,
        audit_flagged,
        max_principle_violation,
        passed: residual <= tolerance && !audit_flagged,
    })
}

/// Box covering every state of the trajectory with a quarter-width margin.
pub fn default_dual_grid(trajectory: &Trajectory, cells: usize) -> Result<Grid> {
    if let Measure::Grid(g) = &trajectory.initial()[0] {
        return Ok(g.grid().clone());
    }
    let dim = trajectory.initial()[0].dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for state in trajectory.states() {
        for m in state {
            let p = m.to_particles()?;
            let (a, b) = p.bounds();
            for k in 0..dim {
                lo[k] = lo[k].min(a[k]);
                hi[k] = hi[k].max(b[k]);
            }
        }
    }
    for k in 0..dim {
        let margin = 0.25 * (hi[k] - lo[k]) + 0.5;
        lo[k] -= margin;
        hi[k] += margin;
    }
    Grid::new(lo, hi, vec![cells; dim])
}
