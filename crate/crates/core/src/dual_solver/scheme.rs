use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Grid;
use crate::velocity::VelocityField;

/// Cell counts above which the spatial update runs in parallel.
const PAR_CELLS: usize = 8192;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualConfig {
    pub horizon: f64,
    #[serde(default)]
    pub diffusion: f64,
    pub grid: Grid,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Extra `s` values at which to keep `psi_s`; `0` and `T` are always kept.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    /// Upper bound on the step, on top of the CFL rule.
    #[serde(default)]
    pub max_step: Option<f64>,
    /// Subtract `psi_0(0)` before solving.
    #[serde(default)]
    pub normalize_origin: bool,
}

fn default_cfl() -> f64 {
    0.9
}

impl DualConfig {
    pub fn new(horizon: f64, diffusion: f64, grid: Grid) -> Self {
        Self {
            horizon,
            diffusion,
            grid,
            cfl: default_cfl(),
            snapshots: Vec::new(),
            max_step: None,
            normalize_origin: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!("dual horizon must be positive, got {}", self.horizon)));
        }
        if !(self.diffusion.is_finite() && self.diffusion >= 0.0) {
            return Err(Error::Config(format!("diffusion must be nonnegative, got {}", self.diffusion)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("CFL factor must lie in (0, 1], got {}", self.cfl)));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::Config(format!("max_step must be positive, got {h}")));
            }
        }
        if self.snapshots.iter().any(|s| !(0.0..=self.horizon).contains(s)) {
            return Err(Error::Config("snapshot times must lie in [0, T]".into()));
        }
        Ok(())
    }

    /// Largest stable step for a field with per-cell speeds `speed = sum_a |E_a| / h_a`.
    pub fn stable_step(&self, max_speed: f64) -> f64 {
        let g = &self.grid;
        let diff: f64 = (0..g.dim()).map(|a| 2.0 * self.diffusion / g.spacing(a).powi(2)).sum();
        let rate = max_speed + diff;
        let mut ds = if rate > 0.0 { self.cfl / rate } else { f64::INFINITY };
        if let Some(h) = self.max_step {
            ds = ds.min(h);
        }
        ds
    }
}

/// Per-step record of the solution and of the field used for the step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualStep {
    pub s: f64,
    /// step taken from `s` (zero on the final record)
    pub ds: f64,
    pub min: f64,
    pub max: f64,
    pub sup: f64,
    /// `sup_a ||d_a psi||_inf` by forward differences
    pub lip: f64,
    pub weighted: f64,
    /// `||(psi_s - psi_0) / (1 + |x|)||_inf`
    pub deviation: f64,
    pub l2_grad: f64,
    /// `max_a sum_b |d_a E_b|` of `E_{T-s}` on the grid
    pub field_grad: f64,
    pub field_weighted: f64,
    pub field_sup: f64,
    /// `int_0^s field_grad` and `int_0^s field_weighted` by the step rule
    pub int_field_grad: f64,
    pub int_field_weighted: f64,
    /// `ds / (cfl * min(h / |E|, h^2 / (2 d D)))`, at most 1
    pub cfl_usage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub grid: Grid,
    pub horizon: f64,
    pub diffusion: f64,
    /// `(s, psi_s)` in increasing `s`
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub history: Vec<DualStep>,
}

impl DualSolution {
    pub fn initial(&self) -> &[f64] {
        &self.snapshots[0].1
    }

    pub fn last(&self) -> &[f64] {
        &self.snapshots.last().unwrap().1
    }

    pub fn snapshot(&self, s: f64) -> Option<&[f64]> {
        let tol = 1e-9 * (1.0 + s.abs());
        self.snapshots.iter().find(|(t, _)| (t - s).abs() <= tol).map(|(_, v)| v.as_slice())
    }

    /// `psi_T` at an arbitrary point by multilinear interpolation.
    pub fn eval_last(&self, x: &[f64]) -> f64 {
        self.grid.interpolate(self.last(), x)
    }

    pub fn steps(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

/// Solves `d_s psi = E_{T-s} . grad psi + D Lap psi` on `[0, T]` from cell values `psi0`.
///
/// Upwind differences for the transport term and centered differences for
/// diffusion with explicit Euler steps. Ghost cells extrapolate linearly, so
/// affine data are transported exactly up to the boundary.
pub fn solve_dual(config: &DualConfig, field: &VelocityField, psi0: &[f64]) -> Result<DualSolution> {
    config.validate()?;
    let grid = &config.grid;
    let dim = grid.dim();
    if field.dim() != dim {
        return Err(Error::Dimension { expected: dim, got: field.dim() });
    }
    if psi0.len() != grid.len() {
        return Err(Error::Config(format!("psi0 has {} values for {} cells", psi0.len(), grid.len())));
    }
    if psi0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Probe("initial datum has non-finite values".into()));
    }
    let mut psi = psi0.to_vec();
    if config.normalize_origin {
        let at0 = grid.interpolate(&psi, &vec![0.0; dim]);
        psi.iter_mut().for_each(|v| *v -= at0);
    }
    let base = psi.clone();
    let weights: Vec<f64> = (0..grid.len())
        .map(|k| 1.0 + grid.center(k)[..dim].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    let t_end = config.horizon;
    let mut marks: Vec<f64> = config.snapshots.clone();
    marks.push(t_end);
    marks.sort_by(|a, b| a.total_cmp(b));
    marks.dedup();
    let mut snapshots = vec![(0.0, psi.clone())];
    let mut history = Vec::new();
    let mut s = 0.0;
    let (mut int_grad, mut int_weighted) = (0.0, 0.0);
    let mut next_psi = vec![0.0; psi.len()];
    let mut mark = marks.iter().position(|m| *m > 0.0).unwrap_or(marks.len());

    loop {
        let e = field.on_grid(t_end - s, grid)?;
        let stats = field_stats(grid, &e, &weights);
        let mut record = solution_stats(grid, &psi, &base, &weights, s);
        record.field_grad = stats.grad;
        record.field_weighted = stats.weighted;
        record.field_sup = stats.sup;
        record.int_field_grad = int_grad;
        record.int_field_weighted = int_weighted;
        if mark >= marks.len() || s >= t_end * (1.0 - 1e-14) {
            history.push(record);
            break;
        }
        let mut ds = config.stable_step(stats.speed);
        let target = marks[mark];
        if s + ds >= target * (1.0 - 1e-12) {
            ds = target - s;
        }
        record.ds = ds;
        record.cfl_usage = cfl_usage(config, &stats, ds);
        history.push(record);

        step(grid, config.diffusion, &e, &psi, &mut next_psi, ds);
        std::mem::swap(&mut psi, &mut next_psi);
        int_grad += stats.grad * ds;
        int_weighted += stats.weighted * ds;
        s = if (s + ds - target).abs() <= 1e-12 * (1.0 + target) { target } else { s + ds };
        if s == target {
            snapshots.push((s, psi.clone()));
            mark += 1;
        }
    }
    Ok(DualSolution { grid: grid.clone(), horizon: t_end, diffusion: config.diffusion, snapshots, history })
}

/// Convenience wrapper sampling `psi0` at cell centers.
pub fn solve_dual_fn(
    config: &DualConfig,
    field: &VelocityField,
    psi0: impl Fn(&[f64]) -> f64,
) -> Result<DualSolution> {
    let dim = config.grid.dim();
    let values: Vec<f64> = (0..config.grid.len()).map(|k| psi0(&config.grid.center(k)[..dim])).collect();
    solve_dual(config, field, &values)
}

fn cfl_usage(config: &DualConfig, stats: &FieldStats, ds: f64) -> f64 {
    let g = &config.grid;
    let h = g.min_spacing();
    let mut bound = f64::INFINITY;
    if stats.sup > 0.0 {
        bound = bound.min(h / stats.sup);
    }
    if config.diffusion > 0.0 {
        bound = bound.min(h * h / (2.0 * g.dim() as f64 * config.diffusion));
    }
    if bound.is_finite() {
        ds / (config.cfl * bound)
    } else {
        0.0
    }
}

fn step(grid: &Grid, diffusion: f64, e: &[f64], psi: &[f64], out: &mut [f64], ds: f64) {
    let dim = grid.dim();
    let update = |k: usize, o: &mut f64| {
        let idx = grid.multi_index(k);
        let mut rate = 0.0;
        for a in 0..dim {
            let n = grid.cells()[a];
            let h = grid.spacing(a);
            let stride = grid.stride(a);
            let here = psi[k];
            let (left, right) = if n == 1 {
                (here, here)
            } else {
                let left = if idx[a] == 0 { 2.0 * here - psi[k + stride] } else { psi[k - stride] };
                let right = if idx[a] + 1 == n { 2.0 * here - psi[k - stride] } else { psi[k + stride] };
                (left, right)
            };
            let v = e[k * dim + a];
            rate += if v > 0.0 { v * (right - here) / h } else { v * (here - left) / h };
            rate += diffusion * (right - 2.0 * here + left) / (h * h);
        }
        *o = psi[k] + ds * rate;
    };
    if psi.len() >= PAR_CELLS {
        out.par_iter_mut().enumerate().for_each(|(k, o)| update(k, o));
    } else {
        out.iter_mut().enumerate().for_each(|(k, o)| update(k, o));
    }
}

struct FieldStats {
    speed: f64,
    grad: f64,
    weighted: f64,
    sup: f64,
}

fn field_stats(grid: &Grid, e: &[f64], weights: &[f64]) -> FieldStats {
    let dim = grid.dim();
    let mut st = FieldStats { speed: 0.0, grad: 0.0, weighted: 0.0, sup: 0.0 };
    for k in 0..grid.len() {
        let v = &e[k * dim..(k + 1) * dim];
        let speed: f64 = (0..dim).map(|a| v[a].abs() / grid.spacing(a)).sum();
        let mag = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        st.speed = st.speed.max(speed);
        st.sup = st.sup.max(mag);
        st.weighted = st.weighted.max(mag / weights[k]);
        let idx = grid.multi_index(k);
        for a in 0..dim {
            let n = grid.cells()[a];
            if n < 2 {
                continue;
            }
            let stride = grid.stride(a);
            let (lo, hi) = if idx[a] + 1 < n { (k, k + stride) } else { (k - stride, k) };
            let h = grid.spacing(a);
            let row: f64 = (0..dim).map(|b| (e[hi * dim + b] - e[lo * dim + b]).abs() / h).sum();
            st.grad = st.grad.max(row);
        }
    }
    st
}

fn solution_stats(grid: &Grid, psi: &[f64], base: &[f64], weights: &[f64], s: f64) -> DualStep {
    let dim = grid.dim();
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut weighted, mut deviation, mut lip, mut l2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..psi.len() {
        min = min.min(psi[k]);
        max = max.max(psi[k]);
        weighted = weighted.max(psi[k].abs() / weights[k]);
        deviation = deviation.max((psi[k] - base[k]).abs() / weights[k]);
        let idx = grid.multi_index(k);
        for a in 0..dim {
            if idx[a] + 1 < grid.cells()[a] {
                let d = (psi[k + grid.stride(a)] - psi[k]) / grid.spacing(a);
                lip = lip.max(d.abs());
                l2 += d * d;
            }
        }
    }
    DualStep {
        s,
        ds: 0.0,
        min,
        max,
        sup: min.abs().max(max.abs()),
        lip,
        weighted,
        deviation,
        l2_grad: (l2 * grid.cell_volume()).sqrt(),
        field_grad: 0.0,
        field_weighted: 0.0,
        field_sup: 0.0,
        int_field_grad: 0.0,
        int_field_weighted: 0.0,
        cfl_usage: 0.0,
    }
}
