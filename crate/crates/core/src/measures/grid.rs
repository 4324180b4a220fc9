use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform cell-centered box grid in one or two dimensions.
///
/// Cells are stored with axis 0 varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
}

impl Grid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let dim = lower.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if upper.len() != dim || cells.len() != dim {
            return Err(Error::Dimension { expected: dim, got: upper.len().min(cells.len()) });
        }
        for a in 0..dim {
            if !(lower[a].is_finite() && upper[a].is_finite() && upper[a] > lower[a]) {
                return Err(Error::Config(format!(
                    "grid axis {a}: need finite lower < upper, got [{}, {}]",
                    lower[a], upper[a]
                )));
            }
            if cells[a] == 0 {
                return Err(Error::Config(format!("grid axis {a} has zero cells")));
            }
        }
        Ok(Self { lower, upper, cells })
    }

    pub fn line(lower: f64, upper: f64, cells: usize) -> Result<Self> {
        Self::new(vec![lower], vec![upper], vec![cells])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.cells[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Offset in the flat index when moving one cell along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.cells[..axis].iter().product()
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        let mut idx = [0usize; 2];
        let mut rest = flat;
        for (a, slot) in idx.iter_mut().enumerate().take(self.dim()) {
            *slot = rest % self.cells[a];
            rest /= self.cells[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        let mut flat = 0;
        for a in (0..self.dim()).rev() {
            flat = flat * self.cells[a] + idx[a];
        }
        flat
    }

    pub fn center_coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + (i as f64 + 0.5) * self.spacing(axis)
    }

    pub fn edge_coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * self.spacing(axis)
    }

    /// Center of the cell at `flat`, padded with zeros past `dim`.
    pub fn center(&self, flat: usize) -> [f64; 2] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 2];
        for a in 0..self.dim() {
            x[a] = self.center_coord(a, idx[a]);
        }
        x
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|k| self.center(k)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|a| x[a] >= self.lower[a] && x[a] <= self.upper[a])
    }

    /// Same box, `factor` times more cells per axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            cells: self.cells.iter().map(|c| c * factor).collect(),
        }
    }

    /// Box scaled about its center by `1 + margin` with `factor` times the resolution.
    pub fn inflated(&self, margin: f64, factor: usize) -> Self {
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        for a in 0..self.dim() {
            let mid = 0.5 * (lower[a] + upper[a]);
            let half = 0.5 * (upper[a] - lower[a]) * (1.0 + margin);
            lower[a] = mid - half;
            upper[a] = mid + half;
        }
        Self { lower, upper, cells: self.cells.iter().map(|c| c * factor).collect() }
    }

    /// Multilinear interpolation of cell-centered values; points outside the
    /// outermost centers take the value of the nearest boundary cell line.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let dim = self.dim();
        let mut base = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..dim {
            let n = self.cells[a];
            let s = (x[a] - self.lower[a]) / self.spacing(a) - 0.5;
            if n == 1 || s <= 0.0 {
                base[a] = 0;
                frac[a] = 0.0;
            } else if s >= (n - 1) as f64 {
                base[a] = n - 2;
                frac[a] = 1.0;
            } else {
                let i = s.floor() as usize;
                base[a] = i.min(n - 2);
                frac[a] = s - base[a] as f64;
            }
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = [0usize; 2];
            for a in 0..dim {
                let up = (corner >> a) & 1 == 1;
                if self.cells[a] == 1 {
                    if up {
                        w = 0.0;
                    }
                    idx[a] = 0;
                    continue;
                }
                idx[a] = base[a] + usize::from(up);
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * values[self.flat_index(idx)];
            }
        }
        acc
    }
}
