use rayon::prelude::*;

use super::config::{MassLedger, PrimalConfig, PrimalRun, Representation};
use super::particles::Drift;
use crate::error::{Error, Result};
use crate::measures::{Grid, GridDensity, Measure};
use crate::trajectory::Trajectory;
use crate::velocity::{eval_velocity_on_grid, InteractionKernel};

/// Finite-volume scheme on a box: upwind fluxes from face-averaged center
/// velocities, centered diffusion, explicit Euler, absorbing boundary.
///
/// Each update is written as `mu_j (1 - dt r_j) + dt (inflow)`, so the scheme
/// preserves positivity whenever `dt r_j <= 1`.
pub fn solve_grid(config: &PrimalConfig, kernel: &InteractionKernel, mu0: &[GridDensity]) -> Result<PrimalRun> {
    if kernel.species() != mu0.len() {
        return Err(Error::Config(format!(
            "kernel couples {} species, {} initial densities given",
            kernel.species(),
            mu0.len()
        )));
    }
    run(config, Drift::Kernel(kernel), mu0)
}

pub(crate) fn run(config: &PrimalConfig, drift: Drift<'_>, mu0: &[GridDensity]) -> Result<PrimalRun> {
    let n = mu0.len();
    config.validate(n)?;
    if n == 0 {
        return Err(Error::Config("no species given".into()));
    }
    if config.representation != Representation::Grid {
        return Err(Error::Config("grid solver called with a particle configuration".into()));
    }
    let grid = config.grid.clone().unwrap_or_else(|| mu0[0].grid().clone());
    if let Some(bad) = mu0.iter().find(|m| m.grid() != &grid) {
        return Err(Error::Config(format!(
            "initial density lives on a different grid ({:?} cells, expected {:?})",
            bad.grid().cells(),
            grid.cells()
        )));
    }
    let dim = grid.dim();
    if let Drift::Frozen(fields) = &drift {
        if fields.len() != n || fields.iter().any(|f| f.dim() != dim) {
            return Err(Error::Config("one field of matching dimension per species required".into()));
        }
    }
    let diffusion: Vec<f64> = (0..n).map(|i| config.diffusion_of(i)).collect();
    let vol = grid.cell_volume();

    let mut mu: Vec<Vec<f64>> = mu0.iter().map(|m| m.values().to_vec()).collect();
    let mut ledgers: Vec<MassLedger> = mu0
        .iter()
        .map(|m| {
            let mass = m.mass();
            MassLedger {
                initial: mass,
                final_mass: mass,
                min_value: m.values().iter().copied().fold(f64::INFINITY, f64::min),
                ..Default::default()
            }
        })
        .collect();
    let t0 = config.start;
    let end = config.end();
    let mut times = vec![t0];
    let mut states = vec![wrap(&grid, &mu)?];

    let fixed = config.dt.map(|dt| {
        let steps = (config.horizon / dt).ceil().max(1.0);
        config.horizon / steps
    });
    let mut t = t0;
    let mut steps = 0usize;
    while t < end - 1e-12 * (1.0 + end.abs()) {
        let current = wrap(&grid, &mu)?;
        let centers: Vec<Vec<f64>> = (0..n)
            .map(|i| match &drift {
                Drift::Kernel(kernel) => {
                    let mut v = eval_velocity_on_grid(kernel, &current, i, &grid)?;
                    v.iter_mut().for_each(|c| *c = -*c);
                    Ok(v)
                }
                Drift::Frozen(fields) => fields[i].on_grid(t, &grid),
            })
            .collect::<Result<_>>()?;
        let faces: Vec<Faces> = centers.iter().map(|c| Faces::new(&grid, c)).collect();
        let rate = (0..n)
            .map(|i| faces[i].max_rate(&grid, diffusion[i]))
            .fold(0.0, f64::max);
        let remaining = end - t;
        let dt = match fixed {
            Some(dt) => {
                if dt * rate > 1.0 + 1e-12 {
                    return Err(Error::Solver(format!(
                        "fixed step {dt} violates the CFL bound {} at t = {t}",
                        1.0 / rate
                    )));
                }
                dt.min(remaining)
            }
            None if rate > 0.0 => (config.cfl / rate).min(remaining),
            None => remaining,
        };
        // absorb a sliver left by roundoff into this step
        let dt = if remaining - dt < 1e-9 * dt { remaining } else { dt };
        for i in 0..n {
            let (next, loss) = faces[i].step(&grid, &mu[i], diffusion[i], dt);
            let before: f64 = mu[i].iter().sum::<f64>() * vol;
            let after: f64 = next.iter().sum::<f64>() * vol;
            let ledger = &mut ledgers[i];
            ledger.boundary_loss += loss * vol;
            ledger.max_step_defect = ledger.max_step_defect.max((after - (before - loss * vol)).abs());
            ledger.min_value = next.iter().copied().fold(ledger.min_value, f64::min);
            ledger.final_mass = after;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Solver(format!("density of species {i} diverged at t = {t}")));
            }
            mu[i] = next;
        }
        t = if dt == remaining { end } else { t + dt };
        steps += 1;
        if steps % config.record_every == 0 || t >= end {
            times.push(t);
            states.push(wrap(&grid, &mu)?);
        }
    }
    let trajectory = Trajectory::new(times, states)?;
    Ok(PrimalRun { trajectory, ledgers, steps })
}

fn wrap(grid: &Grid, mu: &[Vec<f64>]) -> Result<Vec<Measure>> {
    mu.iter()
        .map(|v| GridDensity::sub_probability(grid.clone(), v.clone()).map(Measure::Grid))
        .collect()
}

/// Face velocities per axis: `right[a][k]` on the face between cell `k` and its
/// upper neighbour, `left[a][k]` on the face below.
struct Faces {
    right: Vec<Vec<f64>>,
    left: Vec<Vec<f64>>,
}

impl Faces {
    fn new(grid: &Grid, centers: &[f64]) -> Self {
        let dim = grid.dim();
        let len = grid.len();
        let mut right = vec![vec![0.0; len]; dim];
        let mut left = vec![vec![0.0; len]; dim];
        for k in 0..len {
            let idx = grid.multi_index(k);
            for a in 0..dim {
                let s = grid.stride(a);
                let here = centers[k * dim + a];
                right[a][k] = if idx[a] + 1 < grid.cells()[a] {
                    0.5 * (here + centers[(k + s) * dim + a])
                } else {
                    here
                };
                left[a][k] = if idx[a] > 0 { 0.5 * (here + centers[(k - s) * dim + a]) } else { here };
            }
        }
        Self { right, left }
    }

    fn out_rate(&self, grid: &Grid, k: usize, diffusion: f64) -> f64 {
        (0..grid.dim())
            .map(|a| {
                let h = grid.spacing(a);
                (self.right[a][k].max(0.0) + (-self.left[a][k]).max(0.0)) / h + 2.0 * diffusion / (h * h)
            })
            .sum()
    }

    fn max_rate(&self, grid: &Grid, diffusion: f64) -> f64 {
        (0..grid.len()).map(|k| self.out_rate(grid, k, diffusion)).fold(0.0, f64::max)
    }

    /// Returns the new cell values and the outflow density sum through the box boundary.
    fn step(&self, grid: &Grid, mu: &[f64], diffusion: f64, dt: f64) -> (Vec<f64>, f64) {
        let dim = grid.dim();
        let cell = |k: usize| -> (f64, f64) {
            let idx = grid.multi_index(k);
            let mut inflow = 0.0;
            let mut lost = 0.0;
            for a in 0..dim {
                let h = grid.spacing(a);
                let s = grid.stride(a);
                let (l, r) = (self.left[a][k], self.right[a][k]);
                if idx[a] > 0 {
                    inflow += l.max(0.0) * mu[k - s] / h + diffusion * mu[k - s] / (h * h);
                } else {
                    lost += ((-l).max(0.0) / h + diffusion / (h * h)) * mu[k];
                }
                if idx[a] + 1 < grid.cells()[a] {
                    inflow += (-r).max(0.0) * mu[k + s] / h + diffusion * mu[k + s] / (h * h);
                } else {
                    lost += (r.max(0.0) / h + diffusion / (h * h)) * mu[k];
                }
            }
            let keep = (1.0 - dt * self.out_rate(grid, k, diffusion)).max(0.0);
            (mu[k] * keep + dt * inflow, dt * lost)
        };
        let pairs: Vec<(f64, f64)> = if grid.len() >= 4096 {
            (0..grid.len()).into_par_iter().map(cell).collect()
        } else {
            (0..grid.len()).map(cell).collect()
        };
        let loss = pairs.iter().map(|p| p.1).sum();
        (pairs.into_iter().map(|p| p.0).collect(), loss)
    }
}
