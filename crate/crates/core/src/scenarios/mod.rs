//! Preset experiments: the order-of-limits diagram for the point kernel,
//! gradient flows of convex kernels, two coupled species, the heat baseline
//! and the reference suite for the dual estimates.

mod audit_suite;
mod gradient_flow;
mod newtonian;
mod two_species;

pub use audit_suite::{run_audit_suite, AuditCase, AuditSuiteReport, AUDIT_SLACK};
pub use gradient_flow::{run_gradient_flow_comparison, GradientFlowReport};
pub use newtonian::{run_newtonian_diagram, DiagramCell, DiagramRow, NewtonianDiagram};
pub use two_species::{run_two_species, two_species_kernel, TwoSpeciesReport};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dual_solver::AuditConstants;
use crate::error::{Error, Result};
use crate::fixed_point::{certify_entropy_pair, CertifyOptions, EntropyPairCertificate};
use crate::measures::{d1_1d, Grid, GridDensity, Measure, ParticleMeasure};
use crate::primal_solver::{solve_grid, PrimalConfig};
use crate::velocity::{InteractionKernel, KernelForm};

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + libm::erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
}

/// Parameters given as `key=v1:v2,key2=v` on the command line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams(pub BTreeMap<String, Vec<f64>>);

impl ScenarioParams {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, values) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("parameter `{item}` is not key=value")))?;
            let values = values
                .split(':')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("parameter {key}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            map.insert(key.trim().to_string(), values);
        }
        Ok(Self(map))
    }

    pub fn list(&self, key: &str, default: &[f64]) -> Vec<f64> {
        self.0.get(key).cloned().unwrap_or_else(|| default.to_vec())
    }

    pub fn value(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key).map(Vec::as_slice) {
            None => Ok(default),
            Some([v]) => Ok(*v),
            Some(_) => Err(Error::Config(format!("parameter {key} takes a single value"))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!("unknown parameter `{k}`; expected one of {allowed:?}"))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioName {
    NewtonianDiagram,
    GradientFlow,
    TwoSpecies,
    Heat,
    AuditSuite,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::NewtonianDiagram,
        ScenarioName::GradientFlow,
        ScenarioName::TwoSpecies,
        ScenarioName::Heat,
        ScenarioName::AuditSuite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::NewtonianDiagram => "newtonian-diagram",
            ScenarioName::GradientFlow => "gradient-flow",
            ScenarioName::TwoSpecies => "two-species",
            ScenarioName::Heat => "heat",
            ScenarioName::AuditSuite => "audit-suite",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == name).ok_or_else(|| {
            let known: Vec<_> = Self::ALL.iter().map(|n| n.as_str()).collect();
            Error::Scenario(format!("unknown scenario `{name}`; known: {}", known.join(", ")))
        })
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatReport {
    pub diffusion: f64,
    pub horizon: f64,
    pub cells: usize,
    /// d1 to the exact profile averaged over the same cells
    pub d1_error: f64,
    pub boundary_loss: f64,
    pub certificate: EntropyPairCertificate,
}

/// Gaussian of standard deviation 0.3 spreading under pure diffusion on `[-5, 5]`.
pub fn run_heat(diffusion: f64, horizon: f64, cells: usize) -> Result<HeatReport> {
    let sd0 = 0.3;
    let grid = Grid::line(-5.0, 5.0, cells)?;
    let mu0 = GridDensity::from_cdf(grid.clone(), |x| normal_cdf(x, 0.0, sd0))?;
    let config = PrimalConfig::grid(horizon, grid.clone(), vec![diffusion]);
    let kernel = InteractionKernel::zero(1);
    let run = solve_grid(&config, &kernel, &[mu0])?;
    let sd = (sd0 * sd0 + 2.0 * diffusion * horizon).sqrt();
    let exact = GridDensity::from_cdf(grid, |x| normal_cdf(x, 0.0, sd))?;
    let d1_error = d1_1d(&run.trajectory.last()[0], &Measure::Grid(exact))?;
    let options = CertifyOptions { diffusion: vec![diffusion], ..Default::default() };
    let certificate = certify_entropy_pair(&run.trajectory, &kernel, &[], &options)?;
    Ok(HeatReport {
        diffusion,
        horizon,
        cells,
        d1_error,
        boundary_loss: run.ledgers[0].boundary_loss,
        certificate,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioOutcome {
    NewtonianDiagram(NewtonianDiagram),
    GradientFlow(GradientFlowReport),
    TwoSpecies(TwoSpeciesReport),
    Heat(HeatReport),
    AuditSuite(AuditSuiteReport),
}

impl ScenarioOutcome {
    pub fn certificates(&self) -> Vec<&EntropyPairCertificate> {
        match self {
            ScenarioOutcome::NewtonianDiagram(d) => d.certificates.iter().collect(),
            ScenarioOutcome::GradientFlow(r) => vec![&r.certificate],
            ScenarioOutcome::TwoSpecies(r) => vec![&r.certificate],
            ScenarioOutcome::Heat(r) => vec![&r.certificate],
            ScenarioOutcome::AuditSuite(_) => Vec::new(),
        }
    }

    /// Certificates pass and the scenario-specific checks hold.
    pub fn passed(&self) -> bool {
        let own = match self {
            ScenarioOutcome::NewtonianDiagram(d) => d.rows.iter().all(|r| r.dirac_drift == 0.0),
            ScenarioOutcome::GradientFlow(r) => r.support_confined() && r.gradient_decays(),
            ScenarioOutcome::TwoSpecies(r) => r.mirror_gap.map_or(true, |g| g < 1e-8),
            ScenarioOutcome::Heat(_) => true,
            ScenarioOutcome::AuditSuite(r) => r.passed(),
        };
        own && self.certificates().iter().all(|c| c.passed)
    }

    /// Short human-readable summary.
    pub fn report(&self) -> String {
        let mut out = String::new();
        match self {
            ScenarioOutcome::NewtonianDiagram(d) => {
                out += &format!("t = {}, {} atoms\n", d.t, d.atoms);
                out += "k\tm\td1(., delta0)\td1(., spread)\n";
                for c in &d.cells {
                    out += &format!("{:e}\t{}\t{:.6}\t{:.6}\n", c.k, c.m, c.to_dirac, c.to_spread);
                }
                for r in &d.rows {
                    out += &format!(
                        "k = {:e}: delta0 drift {:e}, psi Lipschitz {:.3}, residual {:.2e}\n",
                        r.k, r.dirac_drift, r.psi_lipschitz, r.dirac_certificate_residual
                    );
                }
                for (m, inc) in &d.cauchy_increments {
                    let inc: Vec<String> = inc.iter().map(|v| format!("{v:.3e}")).collect();
                    out += &format!("m = {m}: Cauchy increments in k [{}]\n", inc.join(", "));
                }
                out += &format!(
                    "k first: d1 to delta0 = {:.6}; m first: {:.6}; corner gap {:.6}\n",
                    d.k_first_to_dirac, d.m_first_to_dirac, d.corner_gap
                );
            }
            ScenarioOutcome::GradientFlow(r) => {
                out += &format!("reference: {}\nsup_t d2 = {:.3e}\n", r.reference, r.sup_d2);
                out += &format!("hull [{}, {}], excursion {:.3e}\n", r.hull.0, r.hull.1, r.hull_excursion);
                out += &format!("max gradient ratio {:.6}\n", r.max_gradient_ratio);
            }
            ScenarioOutcome::TwoSpecies(r) => {
                if let Some((t, a, b)) = r.means.last() {
                    out += &format!("t = {t}: means {a:.6}, {b:.6}\n");
                }
                if let Some(g) = r.mirror_gap {
                    out += &format!("mirror gap {g:.3e}\n");
                }
                out += &format!("Picard iterations {}\n", r.picard.iterate);
            }
            ScenarioOutcome::Heat(r) => {
                out += &format!(
                    "D = {}, T = {}, {} cells: d1 error {:.3e}, boundary loss {:.3e}\n",
                    r.diffusion, r.horizon, r.cells, r.d1_error, r.boundary_loss
                );
            }
            ScenarioOutcome::AuditSuite(r) => {
                out += &format!(
                    "max ratios: gradient {:.4}, weighted {:.4}, time modulus {:.4}, continuous dependence {:.4}, L2 gradient {:.4}, L2 pair {:.4}\n",
                    r.max_gradient, r.max_weighted, r.max_time_modulus, r.max_continuous_dependence, r.max_l2_gradient, r.max_l2_pair
                );
                out += &format!("modulus orders: heat {:?}, transport {:?}\n", r.heat_order, r.transport_order);
            }
        }
        for c in self.certificates() {
            out += &format!(
                "certificate: {} probes, max residual {:.3e}, {}\n",
                c.records.len(),
                c.max_residual,
                if c.passed { "pass" } else { "FAIL" }
            );
        }
        out
    }
}

/// Runs a named preset with optional parameter overrides.
pub fn run_scenario(name: ScenarioName, params: &ScenarioParams) -> Result<ScenarioOutcome> {
    match name {
        ScenarioName::NewtonianDiagram => {
            params.check_keys(&["k", "m", "t", "atoms"])?;
            let ks = params.list("k", &[1e2, 1e3, 1e4, 1e5]);
            let ms = params.list("m", &[1.0, 2.0, 4.0, 8.0]);
            let t = params.value("t", 1.0)?;
            let atoms = params.value("atoms", 400.0)? as usize;
            Ok(ScenarioOutcome::NewtonianDiagram(run_newtonian_diagram(&ks, &ms, t, atoms)?))
        }
        ScenarioName::GradientFlow => {
            params.check_keys(&["a", "t", "dt"])?;
            let a = params.value("a", 1.0)?;
            let mu0 = ParticleMeasure::new(1, vec![0.5, 0.5], vec![-1.0, 1.0])?;
            let report = run_gradient_flow_comparison(
                &KernelForm::Quadratic { a },
                &mu0,
                params.value("t", 1.0)?,
                params.value("dt", 0.01)?,
            )?;
            Ok(ScenarioOutcome::GradientFlow(report))
        }
        ScenarioName::TwoSpecies => {
            params.check_keys(&["a1", "a2", "b", "t", "dt"])?;
            let h1 = KernelForm::Quadratic { a: params.value("a1", 1.0)? };
            let h2 = KernelForm::Quadratic { a: params.value("a2", 1.0)? };
            let cross = KernelForm::Quadratic { a: params.value("b", 0.5)? };
            let first = ParticleMeasure::from_quantiles(32, |u| -1.5 + u)?;
            let second = Measure::Particles(first.clone()).reflected()?;
            let config = PrimalConfig::particles(params.value("t", 1.0)?, params.value("dt", 0.01)?);
            Ok(ScenarioOutcome::TwoSpecies(run_two_species(h1, h2, cross, [first.into(), second], config)?))
        }
        ScenarioName::Heat => {
            params.check_keys(&["d", "t", "cells"])?;
            let report = run_heat(params.value("d", 0.1)?, params.value("t", 1.0)?, params.value("cells", 512.0)? as usize)?;
            Ok(ScenarioOutcome::Heat(report))
        }
        ScenarioName::AuditSuite => {
            params.check_keys(&[])?;
            Ok(ScenarioOutcome::AuditSuite(run_audit_suite(&AuditConstants::default())?))
        }
    }
}
