use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::particle::{norm, ParticleMeasure};
use crate::error::{Error, Result};

pub(crate) const MASS_TOL: f64 = 1e-10;

/// Cell-averaged probability density on a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Invalid(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Invalid(format!("density value {v} is negative or non-finite")));
        }
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Normalization { mass });
        }
        Ok(Self { grid, values })
    }

    pub fn normalized(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Invalid("value count does not match grid".into()));
        }
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Normalization { mass });
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Self::new(grid, values)
    }

    /// Samples `f` at cell centers and normalizes.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|k| f(&grid.center(k)[..dim]).max(0.0)).collect();
        Self::normalized(grid, values)
    }

    /// Exact cell averages of a 1D law given by its CDF.
    pub fn from_cdf(grid: Grid, cdf: impl Fn(f64) -> f64) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::Dimension { expected: 1, got: grid.dim() });
        }
        let h = grid.spacing(0);
        let n = grid.cells()[0];
        let values = (0..n)
            .map(|i| ((cdf(grid.edge_coord(0, i + 1)) - cdf(grid.edge_coord(0, i))) / h).max(0.0))
            .collect();
        Self::normalized(grid, values)
    }

    /// Mass-exact cloud-in-cell deposit of an atom list.
    pub fn deposit(grid: Grid, particles: &ParticleMeasure) -> Result<Self> {
        if particles.dim() != grid.dim() {
            return Err(Error::Dimension { expected: grid.dim(), got: particles.dim() });
        }
        let dim = grid.dim();
        let mut values = vec![0.0; grid.len()];
        let vol = grid.cell_volume();
        for (w, x) in particles.atoms() {
            let mut base = [0usize; 2];
            let mut frac = [0.0f64; 2];
            for a in 0..dim {
                let n = grid.cells()[a];
                let s = (x[a] - grid.lower()[a]) / grid.spacing(a) - 0.5;
                if n == 1 || s <= 0.0 {
                    base[a] = 0;
                    frac[a] = 0.0;
                } else if s >= (n - 1) as f64 {
                    base[a] = n - 2;
                    frac[a] = 1.0;
                } else {
                    base[a] = (s.floor() as usize).min(n - 2);
                    frac[a] = s - base[a] as f64;
                }
            }
            for corner in 0..(1usize << dim) {
                let mut share = w;
                let mut idx = [0usize; 2];
                let mut skip = false;
                for a in 0..dim {
                    let up = (corner >> a) & 1 == 1;
                    if grid.cells()[a] == 1 {
                        skip |= up;
                        continue;
                    }
                    idx[a] = base[a] + usize::from(up);
                    share *= if up { frac[a] } else { 1.0 - frac[a] };
                }
                if !skip && share != 0.0 {
                    values[grid.flat_index(idx)] += share / vol;
                }
            }
        }
        Self::normalized(grid, values)
    }

    /// One atom per nonempty cell, at the cell center.
    pub fn to_particles(&self) -> Result<ParticleMeasure> {
        let dim = self.grid.dim();
        let vol = self.grid.cell_volume();
        let mut weights = Vec::new();
        let mut positions = Vec::new();
        for (k, v) in self.values.iter().enumerate() {
            if *v > 0.0 {
                weights.push(v * vol);
                positions.extend_from_slice(&self.grid.center(k)[..dim]);
            }
        }
        ParticleMeasure::normalized(dim, weights, positions)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Cell masses (value times cell volume).
    pub fn masses(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        self.values.iter().map(|v| v * vol).collect()
    }

    /// Midpoint quadrature against cell centers.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let dim = self.grid.dim();
        let vol = self.grid.cell_volume();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| v * vol * f(&self.grid.center(k)[..dim]))
            .sum()
    }

    /// First moment with the density uniform inside each cell (exact in 1D).
    pub fn first_moment(&self) -> f64 {
        if self.dim() == 1 {
            let h = self.grid.spacing(0);
            self.values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let a = self.grid.edge_coord(0, i);
                    let b = a + h;
                    v * abs_integral(a, b)
                })
                .sum()
        } else {
            self.integrate(norm)
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let dim = self.dim();
        (0..dim).map(|a| self.integrate(|x| x[a])).collect()
    }

    /// Affine pushforward `x -> center + scale (x - center)` in 1D; the result
    /// lives on the correspondingly scaled grid.
    pub fn scaled_1d(&self, center: f64, scale: f64) -> Result<Self> {
        if self.dim() != 1 || !(scale > 0.0) {
            return Err(Error::Invalid("scaled_1d needs a 1D density and positive scale".into()));
        }
        let lo = center + scale * (self.grid.lower()[0] - center);
        let hi = center + scale * (self.grid.upper()[0] - center);
        let grid = Grid::line(lo, hi, self.grid.cells()[0])?;
        let values = self.values.iter().map(|v| v / scale).collect();
        Self::normalized(grid, values)
    }

    /// Density that may have lost mass through the box boundary: values must
    /// be nonnegative with total mass at most 1.
    pub fn sub_probability(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Invalid("value count does not match grid".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Invalid(format!("density value {v} is negative or non-finite")));
        }
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        if mass > 1.0 + MASS_TOL {
            return Err(Error::Normalization { mass });
        }
        Ok(Self { grid, values })
    }
}

/// Integral of |x| over [a, b].
fn abs_integral(a: f64, b: f64) -> f64 {
    let prim = |x: f64| 0.5 * x * x.abs();
    prim(b) - prim(a)
}
