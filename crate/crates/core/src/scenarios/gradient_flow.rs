use serde::{Deserialize, Serialize};

use crate::dual_solver::{default_bank, solve_dual, DualConfig};
use crate::error::{Error, Result};
use crate::fixed_point::{
    certify_entropy_pair, default_dual_grid, picard_solve, CertifyOptions, EntropyPairCertificate, PicardConfig,
};
use crate::measures::{d2_1d, Measure, ParticleMeasure};
use crate::primal_solver::{solve_particles, PrimalConfig};
use crate::trajectory::Trajectory;
use crate::velocity::{InteractionKernel, KernelForm, VelocityField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientFlowReport {
    pub horizon: f64,
    pub dt: f64,
    /// "closed form" or "refined characteristics"
    pub reference: String,
    /// `sup_t d2(mu_t, reference_t)` over the run nodes
    pub sup_d2: f64,
    pub hull: (f64, f64),
    /// largest distance of an atom outside the hull of the initial support
    pub hull_excursion: f64,
    /// `max_s |||grad psi_s||| / |||grad psi_0|||` over the probe bank
    pub max_gradient_ratio: f64,
    pub certificate: EntropyPairCertificate,
}

impl GradientFlowReport {
    pub fn support_confined(&self) -> bool {
        self.hull_excursion <= 1e-12
    }

    pub fn gradient_decays(&self) -> bool {
        self.max_gradient_ratio <= 1.0 + 1e-9
    }
}

/// Solves the interaction flow of a convex kernel by the fixed-point
/// construction and compares it with the gradient-flow trajectory.
pub fn run_gradient_flow_comparison(
    form: &KernelForm,
    mu0: &ParticleMeasure,
    horizon: f64,
    dt: f64,
) -> Result<GradientFlowReport> {
    form.validate()?;
    if !form.is_convex() {
        return Err(Error::Scenario(format!("gradient-flow comparison needs a convex kernel, got {form:?}")));
    }
    if mu0.dim() != 1 {
        return Err(Error::Scenario("gradient-flow comparison runs in one dimension".into()));
    }
    let kernel = InteractionKernel::single(form.clone())?;
    let mut picard = PicardConfig::new(PrimalConfig::particles(horizon, dt));
    picard.tol = 1e-12;
    let solution = picard_solve(&picard, &kernel, &[mu0.clone().into()])?;
    let traj = &solution.trajectory;

    let (reference, label) = match form {
        KernelForm::Quadratic { a } => (quadratic_closed_form(mu0, *a, traj.times())?, "closed form"),
        _ => {
            let fine = PrimalConfig::particles(horizon, dt / 4.0);
            (solve_particles(&fine, &kernel, std::slice::from_ref(mu0))?.trajectory, "refined characteristics")
        }
    };
    let mut sup_d2: f64 = 0.0;
    for (k, &t) in traj.times().iter().enumerate() {
        let r = reference.state_at(t)?;
        sup_d2 = sup_d2.max(d2_1d(&traj.state(k)[0], &r[0])?);
    }

    let (lo, hi) = mu0.bounds();
    let hull = (lo[0], hi[0]);
    let mut hull_excursion: f64 = 0.0;
    for state in traj.states() {
        if let Some(p) = state[0].as_particles() {
            for x in p.positions() {
                hull_excursion = hull_excursion.max(hull.0 - x).max(x - hull.1);
            }
        }
    }

    let options = CertifyOptions::default();
    let grid = default_dual_grid(traj, options.cells)?;
    let bank = default_bank(&grid);
    let field = VelocityField::induced(kernel.clone(), 0, std::sync::Arc::new(traj.clone()))?;
    let mut max_gradient_ratio: f64 = 0.0;
    for probe in bank.iter().filter(|p| p.lipschitz() > 0.0) {
        let sol = solve_dual(&DualConfig::new(horizon, 0.0, grid.clone()), &field, &probe.sample(&grid)?)?;
        let lip0 = sol.history[0].lip;
        for h in &sol.history {
            max_gradient_ratio = max_gradient_ratio.max(h.lip / lip0);
        }
    }
    let certificate =
        certify_entropy_pair(traj, &kernel, &bank, &CertifyOptions { grid: Some(grid), ..options })?;
    Ok(GradientFlowReport {
        horizon,
        dt,
        reference: label.to_string(),
        sup_d2,
        hull,
        hull_excursion,
        max_gradient_ratio,
        certificate,
    })
}

/// Atoms move as `x -> m + (x - m) e^{-a t}` under `W = a |x|^2 / 2`.
fn quadratic_closed_form(mu0: &ParticleMeasure, a: f64, times: &[f64]) -> Result<Trajectory> {
    let m = mu0.mean();
    let states = times
        .iter()
        .map(|&t| {
            let decay = (-a * t).exp();
            let p = mu0.map_positions(|x, y| {
                for c in 0..x.len() {
                    y[c] = m[c] + (x[c] - m[c]) * decay;
                }
            })?;
            Ok(vec![Measure::Particles(p)])
        })
        .collect::<Result<_>>()?;
    Trajectory::new(times.to_vec(), states)
}
