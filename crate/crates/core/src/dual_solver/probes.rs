use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Grid;

/// Lipschitz test function `psi_0` used as initial datum of the dual problem.
///
/// Every non-constant probe has Lipschitz constant 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "snake_case")]
pub enum Probe {
    /// `max(0, r - |x - c|)`
    Hat { center: Vec<f64>, radius: f64 },
    /// `min(|x - c|, clip)`
    ClippedDistance { center: Vec<f64>, clip: f64 },
    /// `(r / pi) (1 + cos(pi |x - c| / r))` inside the ball, 0 outside
    Bump { center: Vec<f64>, radius: f64 },
    /// `x_axis`
    Coordinate { axis: usize },
    Constant { value: f64 },
}

impl Probe {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let center_ok = |c: &Vec<f64>| c.len() == dim && c.iter().all(|v| v.is_finite());
        let ok = match self {
            Probe::Hat { center, radius } | Probe::Bump { center, radius } => {
                center_ok(center) && radius.is_finite() && *radius > 0.0
            }
            Probe::ClippedDistance { center, clip } => center_ok(center) && clip.is_finite() && *clip > 0.0,
            Probe::Coordinate { axis } => *axis < dim,
            Probe::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Probe(format!("invalid probe for dimension {dim}: {self}")))
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Probe::Constant { .. } => 0.0,
            _ => 1.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let dist = |c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        match self {
            Probe::Hat { center, radius } => (radius - dist(center)).max(0.0),
            Probe::ClippedDistance { center, clip } => dist(center).min(*clip),
            Probe::Bump { center, radius } => {
                let rho = dist(center) / radius;
                if rho >= 1.0 {
                    0.0
                } else {
                    radius / PI * (1.0 + (PI * rho).cos())
                }
            }
            Probe::Coordinate { axis } => x[*axis],
            Probe::Constant { value } => *value,
        }
    }

    /// Cell-center samples; fails on invalid parameters or non-finite values.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.validate(grid.dim())?;
        let dim = grid.dim();
        let values: Vec<f64> = (0..grid.len()).map(|k| self.eval(&grid.center(k)[..dim])).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Probe(format!("{self} is not finite on the grid")));
        }
        Ok(values)
    }

    /// True when the probe is constant on the outermost `cells` cell layers of
    /// the box, so the dual boundary closure never sees a slope.
    pub fn flat_near_boundary(&self, grid: &Grid, cells: usize) -> bool {
        let dim = grid.dim();
        let near = |x: &[f64]| {
            (0..dim).any(|a| {
                let m = cells as f64 * grid.spacing(a);
                x[a] < grid.lower()[a] + m || x[a] > grid.upper()[a] - m
            })
        };
        let mut first = None;
        for k in 0..grid.len() {
            let x = &grid.center(k)[..dim];
            if near(x) {
                let v = self.eval(x);
                match first {
                    None => first = Some(v),
                    Some(f) if (f - v).abs() > 0.0 => return false,
                    _ => {}
                }
            }
        }
        true
    }
}

impl fmt::Display for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probe::Hat { center, radius } => write!(f, "hat(c={center:?}, r={radius})"),
            Probe::ClippedDistance { center, clip } => write!(f, "clipped_distance(c={center:?}, clip={clip})"),
            Probe::Bump { center, radius } => write!(f, "bump(c={center:?}, r={radius})"),
            Probe::Coordinate { axis } => write!(f, "coordinate(x{})", axis + 1),
            Probe::Constant { value } => write!(f, "constant({value})"),
        }
    }
}

/// Eight probes adapted to the box: two hats, two clipped distances, two
/// bumps, a coordinate function and the constant 1.
pub fn default_bank(grid: &Grid) -> Vec<Probe> {
    let dim = grid.dim();
    let mid: Vec<f64> = (0..dim).map(|a| 0.5 * (grid.lower()[a] + grid.upper()[a])).collect();
    let width = (0..dim).map(|a| grid.upper()[a] - grid.lower()[a]).fold(f64::INFINITY, f64::min);
    let offset = |f: f64| -> Vec<f64> {
        let mut c = mid.clone();
        c[0] += f * width;
        c
    };
    vec![
        Probe::Hat { center: mid.clone(), radius: 0.2 * width },
        Probe::Hat { center: offset(-0.15), radius: 0.1 * width },
        Probe::ClippedDistance { center: mid.clone(), clip: 0.2 * width },
        Probe::ClippedDistance { center: offset(0.1), clip: 0.15 * width },
        Probe::Bump { center: mid.clone(), radius: 0.25 * width },
        Probe::Bump { center: offset(0.12), radius: 0.12 * width },
        Probe::Coordinate { axis: 0 },
        Probe::Constant { value: 1.0 },
    ]
}
