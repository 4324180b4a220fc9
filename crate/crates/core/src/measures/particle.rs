use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const WEIGHT_TOL: f64 = 1e-12;

/// Weighted atom list representing a probability measure.
///
/// Positions are stored flat, `dim` coordinates per atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleMeasure {
    dim: usize,
    weights: Vec<f64>,
    positions: Vec<f64>,
}

impl ParticleMeasure {
    pub fn new(dim: usize, weights: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if positions.len() != dim * weights.len() {
            return Err(Error::Invalid(format!(
                "{} coordinates for {} atoms in dimension {dim}",
                positions.len(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::Normalization { mass: 0.0 });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Invalid(format!("atom weight {w} is negative or non-finite")));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("non-finite atom position".into()));
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Normalization { mass });
        }
        Ok(Self { dim, weights, positions })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(dim: usize, mut weights: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        let mass: f64 = weights.iter().sum();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Normalization { mass });
        }
        weights.iter_mut().for_each(|w| *w /= mass);
        Self::new(dim, weights, positions)
    }

    pub fn dirac(point: &[f64]) -> Self {
        Self { dim: point.len(), weights: vec![1.0], positions: point.to_vec() }
    }

    /// Equal-weight atoms at the mid-quantiles `(k + 1/2)/n` of a 1D law.
    pub fn from_quantiles(n: usize, quantile: impl Fn(f64) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Normalization { mass: 0.0 });
        }
        let positions: Vec<f64> = (0..n).map(|k| quantile((k as f64 + 0.5) / n as f64)).collect();
        Self::normalized(1, vec![1.0; n], positions)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.weights.iter().copied().zip(self.positions.chunks(self.dim))
    }

    /// Same weights, new positions (the pushforward of this measure).
    pub fn with_positions(&self, positions: Vec<f64>) -> Result<Self> {
        if positions.len() != self.positions.len() {
            return Err(Error::Invalid("position count changed".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Solver("non-finite particle position".into()));
        }
        Ok(Self { dim: self.dim, weights: self.weights.clone(), positions })
    }

    pub fn map_positions(&self, f: impl Fn(&[f64], &mut [f64])) -> Result<Self> {
        let mut out = vec![0.0; self.positions.len()];
        for (src, dst) in self.positions.chunks(self.dim).zip(out.chunks_mut(self.dim)) {
            f(src, dst);
        }
        self.with_positions(out)
    }

    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        self.map_positions(|x, y| {
            for a in 0..x.len() {
                y[a] = x[a] + shift[a];
            }
        })
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (w, x) in self.atoms() {
            for a in 0..self.dim {
                m[a] += w * x[a];
            }
        }
        m
    }

    pub fn first_moment(&self) -> f64 {
        self.atoms().map(|(w, x)| w * norm(x)).sum()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.atoms().map(|(w, x)| w * f(x)).sum()
    }

    /// Drops zero-weight atoms.
    pub fn compacted(&self) -> Self {
        let mut weights = Vec::with_capacity(self.len());
        let mut positions = Vec::with_capacity(self.positions.len());
        for (w, x) in self.atoms() {
            if w > 0.0 {
                weights.push(w);
                positions.extend_from_slice(x);
            }
        }
        Self { dim: self.dim, weights, positions }
    }

    /// Bounding box `(min, max)` per axis.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for x in self.positions.chunks(self.dim) {
            for a in 0..self.dim {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
