//! Forward solvers for the interacting system and for transport by a given field.
//!
//! Particle runs integrate the coupled characteristics (no diffusion).
//! Grid runs use a positivity-preserving finite-volume scheme.

mod config;
mod grid;
mod particles;

pub use config::{Integrator, MassLedger, PrimalConfig, PrimalRun, Representation, DEFAULT_PARTICLE_DT};
pub use grid::solve_grid;
pub use particles::solve_particles;

use crate::error::{Error, Result};
use crate::measures::{GridDensity, Measure, ParticleMeasure};
use crate::velocity::{InteractionKernel, VelocityField};
use particles::Drift;

/// Runs the coupled system in the configured representation, converting
/// the initial data as needed.
pub fn simulate(config: &PrimalConfig, kernel: &InteractionKernel, mu0: &[Measure]) -> Result<PrimalRun> {
    match config.representation {
        Representation::Particle => solve_particles(config, kernel, &as_particles(mu0)?),
        Representation::Grid => solve_grid(config, kernel, &as_grids(config, mu0)?),
    }
}

/// Transports each species along its own prescribed field (`fields[i]`).
pub fn frozen_field_flow(config: &PrimalConfig, fields: &[VelocityField], mu0: &[Measure]) -> Result<PrimalRun> {
    match config.representation {
        Representation::Particle => particles::run(config, Drift::Frozen(fields), &as_particles(mu0)?),
        Representation::Grid => grid::run(config, Drift::Frozen(fields), &as_grids(config, mu0)?),
    }
}

fn as_particles(mu0: &[Measure]) -> Result<Vec<ParticleMeasure>> {
    mu0.iter().map(|m| m.to_particles()).collect()
}

fn as_grids(config: &PrimalConfig, mu0: &[Measure]) -> Result<Vec<GridDensity>> {
    mu0.iter()
        .map(|m| match (m, &config.grid) {
            (Measure::Grid(g), None) => Ok(g.clone()),
            (Measure::Grid(g), Some(grid)) if g.grid() == grid => Ok(g.clone()),
            (m, Some(grid)) => GridDensity::deposit(grid.clone(), &m.to_particles()?),
            (_, None) => Err(Error::Config("grid representation requires a grid".into())),
        })
        .collect()
}
