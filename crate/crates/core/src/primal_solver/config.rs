use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Grid;
use crate::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    #[default]
    Particle,
    Grid,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Heun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimalConfig {
    pub horizon: f64,
    /// Initial time of the run.
    #[serde(default)]
    pub start: f64,
    /// Diffusion per species; missing entries are zero.
    #[serde(default)]
    pub diffusion: Vec<f64>,
    #[serde(default)]
    pub representation: Representation,
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Particle step; for grids a fixed step that must satisfy the CFL rule.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Keep every `record_every`-th step in the trajectory (the last state is always kept).
    #[serde(default = "default_record")]
    pub record_every: usize,
}

fn default_cfl() -> f64 {
    0.9
}

fn default_record() -> usize {
    1
}

/// Step used by particle runs when none is configured.
pub const DEFAULT_PARTICLE_DT: f64 = 0.01;

impl PrimalConfig {
    pub fn particles(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            start: 0.0,
            diffusion: Vec::new(),
            representation: Representation::Particle,
            grid: None,
            integrator: Integrator::Rk4,
            cfl: default_cfl(),
            dt: Some(dt),
            record_every: 1,
        }
    }

    pub fn grid(horizon: f64, grid: Grid, diffusion: Vec<f64>) -> Self {
        Self {
            horizon,
            start: 0.0,
            diffusion,
            representation: Representation::Grid,
            grid: Some(grid),
            integrator: Integrator::Rk4,
            cfl: default_cfl(),
            dt: None,
            record_every: 1,
        }
    }

    pub fn diffusion_of(&self, species: usize) -> f64 {
        self.diffusion.get(species).copied().unwrap_or(0.0)
    }

    pub fn end(&self) -> f64 {
        self.start + self.horizon
    }

    pub fn validate(&self, species: usize) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) || !self.start.is_finite() {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.diffusion.len() > species {
            return Err(Error::Config(format!(
                "{} diffusion coefficients for {species} species",
                self.diffusion.len()
            )));
        }
        if let Some(d) = self.diffusion.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::Config(format!("diffusion must be nonnegative, got {d}")));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("CFL factor must lie in (0, 1], got {}", self.cfl)));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Config(format!("time step must be positive, got {dt}")));
            }
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mass bookkeeping of one species on a grid run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MassLedger {
    pub initial: f64,
    pub final_mass: f64,
    /// mass that left through the box boundary
    pub boundary_loss: f64,
    /// `max |m_{n+1} - (m_n - outflux_n)|` over steps
    pub max_step_defect: f64,
    pub min_value: f64,
}

#[derive(Clone, Debug)]
pub struct PrimalRun {
    pub trajectory: Trajectory,
    /// one ledger per species (trivial for particle runs)
    pub ledgers: Vec<MassLedger>,
    pub steps: usize,
}
