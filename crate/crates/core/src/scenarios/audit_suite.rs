use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual_solver::{
    audit_continuous_dependence, audit_gradient_bound, audit_l2_continuous_dependence, audit_l2_gradient,
    audit_weighted_bound, solve_dual, AuditConstants, DualConfig, Probe,
};
use crate::error::Result;
use crate::measures::{Grid, GridDensity, Measure};
use crate::trajectory::Trajectory;
use crate::velocity::{InteractionKernel, KernelForm, VelocityField};

/// Allowed excess of a measured ratio over its envelope.
pub const AUDIT_SLACK: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditCase {
    pub field: String,
    pub diffusion: f64,
    pub probe: Probe,
    pub gradient: f64,
    pub weighted: f64,
    pub time_modulus: f64,
    pub observed_order: Option<f64>,
    pub continuous_dependence: f64,
    /// `None` when `D = 0`
    pub l2_gradient: Option<f64>,
    pub l2_pair: Option<f64>,
}

impl AuditCase {
    pub fn worst(&self) -> f64 {
        [self.gradient, self.weighted, self.time_modulus, self.continuous_dependence]
            .into_iter()
            .chain(self.l2_gradient)
            .chain(self.l2_pair)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSuiteReport {
    pub constants: AuditConstants,
    pub cases: Vec<AuditCase>,
    pub max_gradient: f64,
    pub max_weighted: f64,
    pub max_time_modulus: f64,
    pub max_continuous_dependence: f64,
    pub max_l2_gradient: f64,
    pub max_l2_pair: f64,
    /// fitted modulus order of the hat probe with `E = 0, D > 0` (close to 1/2)
    pub heat_order: Option<f64>,
    /// same with a constant field and `D = 0` (close to 1)
    pub transport_order: Option<f64>,
}

impl AuditSuiteReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.worst() <= 1.0 + AUDIT_SLACK)
    }
}

fn reference_fields() -> Result<Vec<(String, VelocityField)>> {
    let grid = Grid::line(-3.0, 3.0, 240)?;
    let blob = GridDensity::from_fn(grid, |x| (-2.0 * x[0] * x[0]).exp())?;
    let traj = Trajectory::frozen(vec![0.0, 1.0], vec![Measure::Grid(blob)])?;
    let gaussian = InteractionKernel::single(KernelForm::Gaussian { amplitude: 1.0, sigma: 0.5 })?;
    Ok(vec![
        ("zero".into(), VelocityField::zero(1)),
        ("constant 0.5".into(), VelocityField::constant(vec![0.5])),
        ("expanding x".into(), VelocityField::linear(vec![1.0], vec![0.0])?),
        ("contracting -x".into(), VelocityField::linear(vec![-1.0], vec![0.0])?),
        ("oscillating cos(3t)".into(), VelocityField::from_fn(1, |t, _, out| out[0] = (3.0 * t).cos())),
        ("gaussian-induced".into(), VelocityField::induced(gaussian, 0, Arc::new(traj))?),
    ])
}

fn reference_probes() -> Vec<Probe> {
    vec![
        Probe::Bump { center: vec![0.0], radius: 1.0 },
        Probe::Hat { center: vec![0.4], radius: 0.8 },
        Probe::ClippedDistance { center: vec![-0.3], clip: 0.7 },
    ]
}

/// Runs every dual estimate audit over reference fields, diffusions and probes.
pub fn run_audit_suite(constants: &AuditConstants) -> Result<AuditSuiteReport> {
    let grid = Grid::line(-4.0, 4.0, 320)?;
    let eps = 0.05;
    let mut jobs = Vec::new();
    for (name, field) in reference_fields()? {
        for diffusion in [0.0, 0.05] {
            for probe in reference_probes() {
                jobs.push((name.clone(), field.clone(), diffusion, probe));
            }
        }
    }
    let cases: Vec<AuditCase> = jobs
        .into_par_iter()
        .map(|(name, field, diffusion, probe)| {
            let mut config = DualConfig::new(1.0, diffusion, grid.clone());
            config.snapshots = (1..=8).map(|k| k as f64 / 8.0).collect();
            let psi0 = probe.sample(&grid)?;
            let sol = solve_dual(&config, &field, &psi0)?;
            let perturbed = field.plus_constant(vec![eps]);
            let other = solve_dual(&config, &perturbed, &psi0)?;
            let gradient = audit_gradient_bound(&sol, constants);
            let weighted = audit_weighted_bound(&sol, constants);
            let cd = audit_continuous_dependence(&sol, &other, &field, &perturbed, constants)?;
            let (l2_gradient, l2_pair) = if diffusion > 0.0 {
                (
                    Some(audit_l2_gradient(&sol, constants)?.max_ratio),
                    Some(audit_l2_continuous_dependence(&sol, &other, &field, &perturbed, constants)?.max_ratio),
                )
            } else {
                (None, None)
            };
            Ok(AuditCase {
                field: name,
                diffusion,
                probe,
                gradient: gradient.max_ratio,
                weighted: weighted.max_ratio,
                time_modulus: weighted.modulus.envelope_ratio,
                observed_order: weighted.modulus.observed_order,
                continuous_dependence: cd.envelope_ratio,
                l2_gradient,
                l2_pair,
            })
        })
        .collect::<Result<_>>()?;
    let max_of = |f: &dyn Fn(&AuditCase) -> Option<f64>| cases.iter().filter_map(f).fold(0.0, f64::max);
    // the kink of the hat is what exposes the sqrt(s) heat modulus
    let order_of = |field: &str, d: f64| {
        cases
            .iter()
            .find(|c| c.field == field && c.diffusion == d && matches!(c.probe, Probe::Hat { .. }))
            .and_then(|c| c.observed_order)
    };
    Ok(AuditSuiteReport {
        constants: *constants,
        max_gradient: max_of(&|c| Some(c.gradient)),
        max_weighted: max_of(&|c| Some(c.weighted)),
        max_time_modulus: max_of(&|c| Some(c.time_modulus)),
        max_continuous_dependence: max_of(&|c| Some(c.continuous_dependence)),
        max_l2_gradient: max_of(&|c| c.l2_gradient),
        max_l2_pair: max_of(&|c| c.l2_pair),
        heat_order: order_of("zero", 0.05),
        transport_order: order_of("constant 0.5", 0.0),
        cases,
    })
}
