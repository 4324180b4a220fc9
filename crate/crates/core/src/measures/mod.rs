//! Probability measures and the metrics between them.
//!
//! Two carriers are provided: [`ParticleMeasure`] (weighted atoms, exact for
//! transport without diffusion) and [`GridDensity`] (cell averages on a box).
//! Grid CDFs are piecewise linear inside cells, so 1D distances between any
//! pair of carriers are computed exactly.

mod density;
mod grid;
mod hminus1;
mod metrics;
mod particle;
mod transport;

pub use density::GridDensity;
pub use grid::Grid;
pub use hminus1::hminus1_seminorm;
pub use metrics::{
    d1, d1_1d, d1_particles, d1_particles_with_cap, d2_1d, first_moment, metric_report,
    MetricReport, DEFAULT_ATOM_CAP,
};
pub use particle::ParticleMeasure;
pub use transport::transport_cost;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probability measure in either representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    Particles(ParticleMeasure),
    Grid(GridDensity),
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Particles(p) => p.dim(),
            Measure::Grid(g) => g.dim(),
        }
    }

    pub fn dirac(point: &[f64]) -> Self {
        Measure::Particles(ParticleMeasure::dirac(point))
    }

    pub fn mass(&self) -> f64 {
        match self {
            Measure::Particles(p) => p.weights().iter().sum(),
            Measure::Grid(g) => g.mass(),
        }
    }

    pub fn first_moment(&self) -> f64 {
        match self {
            Measure::Particles(p) => p.first_moment(),
            Measure::Grid(g) => g.first_moment(),
        }
    }

    /// Native quadrature: atom sums for particles, midpoint rule for grids.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        match self {
            Measure::Particles(p) => p.integrate(f),
            Measure::Grid(g) => g.integrate(f),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Measure::Particles(p) => p.mean(),
            Measure::Grid(g) => g.mean(),
        }
    }

    pub fn as_particles(&self) -> Option<&ParticleMeasure> {
        match self {
            Measure::Particles(p) => Some(p),
            Measure::Grid(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridDensity> {
        match self {
            Measure::Grid(g) => Some(g),
            Measure::Particles(_) => None,
        }
    }

    /// Atom view: particles as-is, grids sampled at cell centers.
    pub fn to_particles(&self) -> Result<ParticleMeasure> {
        match self {
            Measure::Particles(p) => Ok(p.clone()),
            Measure::Grid(g) => g.to_particles(),
        }
    }

    /// Mirror image `x -> -x`.
    pub fn reflected(&self) -> Result<Self> {
        match self {
            Measure::Particles(p) => Ok(Measure::Particles(p.map_positions(|x, y| {
                for a in 0..x.len() {
                    y[a] = -x[a];
                }
            })?)),
            Measure::Grid(g) => {
                let grid = g.grid();
                let lower: Vec<f64> = grid.upper().iter().map(|u| -u).collect();
                let upper: Vec<f64> = grid.lower().iter().map(|l| -l).collect();
                let mirrored = Grid::new(lower, upper, grid.cells().to_vec())?;
                let mut values = vec![0.0; grid.len()];
                for (k, v) in g.values().iter().enumerate() {
                    let mut idx = grid.multi_index(k);
                    for a in 0..grid.dim() {
                        idx[a] = grid.cells()[a] - 1 - idx[a];
                    }
                    values[mirrored.flat_index(idx)] = *v;
                }
                Ok(Measure::Grid(GridDensity::new(mirrored, values)?))
            }
        }
    }

    pub(crate) fn check_normalized(&self, tol: f64) -> Result<()> {
        let mass = self.mass();
        if (mass - 1.0).abs() > tol {
            return Err(Error::Normalization { mass });
        }
        Ok(())
    }
}

impl From<ParticleMeasure> for Measure {
    fn from(p: ParticleMeasure) -> Self {
        Measure::Particles(p)
    }
}

impl From<GridDensity> for Measure {
    fn from(g: GridDensity) -> Self {
        Measure::Grid(g)
    }
}
