use super::config::{Integrator, MassLedger, PrimalConfig, PrimalRun, Representation, DEFAULT_PARTICLE_DT};
use crate::error::{Error, Result};
use crate::measures::{Measure, ParticleMeasure};
use crate::trajectory::Trajectory;
use crate::velocity::{eval_velocity, InteractionKernel, VelocityField};

pub(crate) enum Drift<'a> {
    Kernel(&'a InteractionKernel),
    Frozen(&'a [VelocityField]),
}

/// Coupled characteristics `dX/dt = E^i_t(X) = -K^i[mu_t](X)` for all species.
pub fn solve_particles(
    config: &PrimalConfig,
    kernel: &InteractionKernel,
    mu0: &[ParticleMeasure],
) -> Result<PrimalRun> {
    if kernel.species() != mu0.len() {
        return Err(Error::Config(format!(
            "kernel couples {} species, {} initial measures given",
            kernel.species(),
            mu0.len()
        )));
    }
    run(config, Drift::Kernel(kernel), mu0)
}

pub(crate) fn run(config: &PrimalConfig, drift: Drift<'_>, mu0: &[ParticleMeasure]) -> Result<PrimalRun> {
    let n = mu0.len();
    config.validate(n)?;
    if n == 0 {
        return Err(Error::Config("no species given".into()));
    }
    if config.representation != Representation::Particle {
        return Err(Error::Config("particle solver called with a grid configuration".into()));
    }
    if let Some(i) = (0..n).find(|&i| config.diffusion_of(i) > 0.0) {
        return Err(Error::Config(format!(
            "species {i} has D > 0; the particle representation needs D = 0"
        )));
    }
    let dim = mu0[0].dim();
    if let Some(bad) = mu0.iter().find(|m| m.dim() != dim) {
        return Err(Error::Dimension { expected: dim, got: bad.dim() });
    }
    if let Drift::Frozen(fields) = &drift {
        if fields.len() != n || fields.iter().any(|f| f.dim() != dim) {
            return Err(Error::Config("one field of matching dimension per species required".into()));
        }
    }

    let steps = (config.horizon / config.dt.unwrap_or(DEFAULT_PARTICLE_DT)).ceil().max(1.0) as usize;
    let dt = config.horizon / steps as f64;
    let rhs = |t: f64, x: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        match &drift {
            Drift::Kernel(kernel) => {
                let state: Vec<Measure> = mu0
                    .iter()
                    .zip(x)
                    .map(|(m, pos)| m.with_positions(pos.clone()).map(Measure::Particles))
                    .collect::<Result<_>>()?;
                (0..n)
                    .map(|i| {
                        let mut v = eval_velocity(kernel, &state, i, &x[i])?;
                        v.iter_mut().for_each(|c| *c = -*c);
                        Ok(v)
                    })
                    .collect()
            }
            Drift::Frozen(fields) => (0..n).map(|i| fields[i].eval_many(t, &x[i])).collect(),
        }
    };
    let axpy = |x: &[Vec<f64>], h: f64, k: &[Vec<f64>]| -> Vec<Vec<f64>> {
        x.iter().zip(k).map(|(xi, ki)| xi.iter().zip(ki).map(|(a, b)| a + h * b).collect()).collect()
    };

    let mut x: Vec<Vec<f64>> = mu0.iter().map(|m| m.positions().to_vec()).collect();
    let t0 = config.start;
    let mut times = vec![t0];
    let mut states = vec![wrap(mu0, &x)?];
    let mut velocities = Vec::new();
    let mut k1 = rhs(t0, &x)?;
    velocities.push(k1.clone());
    for step in 0..steps {
        let t = t0 + step as f64 * dt;
        let next = match config.integrator {
            Integrator::Rk4 => {
                let k2 = rhs(t + 0.5 * dt, &axpy(&x, 0.5 * dt, &k1))?;
                let k3 = rhs(t + 0.5 * dt, &axpy(&x, 0.5 * dt, &k2))?;
                let k4 = rhs(t + dt, &axpy(&x, dt, &k3))?;
                let mut out = x.clone();
                for i in 0..n {
                    for c in 0..out[i].len() {
                        out[i][c] += dt / 6.0 * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
                    }
                }
                out
            }
            Integrator::Heun => {
                let k2 = rhs(t + dt, &axpy(&x, dt, &k1))?;
                let mut out = x.clone();
                for i in 0..n {
                    for c in 0..out[i].len() {
                        out[i][c] += 0.5 * dt * (k1[i][c] + k2[i][c]);
                    }
                }
                out
            }
        };
        x = next;
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Solver(format!("particle positions diverged at t = {}", t + dt)));
        }
        let t_next = if step + 1 == steps { config.end() } else { t0 + (step + 1) as f64 * dt };
        k1 = rhs(t_next, &x)?;
        if (step + 1) % config.record_every == 0 || step + 1 == steps {
            times.push(t_next);
            states.push(wrap(mu0, &x)?);
            velocities.push(k1.clone());
        }
    }
    let trajectory = Trajectory::new(times, states)?.with_velocities(velocities)?;
    let ledgers = vec![MassLedger { initial: 1.0, final_mass: 1.0, ..Default::default() }; n];
    Ok(PrimalRun { trajectory, ledgers, steps })
}

fn wrap(mu0: &[ParticleMeasure], x: &[Vec<f64>]) -> Result<Vec<Measure>> {
    mu0.iter().zip(x).map(|(m, pos)| m.with_positions(pos.clone()).map(Measure::Particles)).collect()
}
