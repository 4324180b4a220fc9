use std::fmt;
use std::sync::Arc;

use super::convolve::{eval_velocity, eval_velocity_on_grid, flat_centers};
use super::kernel::InteractionKernel;
use crate::error::{Error, Result};
use crate::measures::Grid;
use crate::trajectory::Trajectory;

/// Anything that can evaluate a drift `E_t(x)`.
pub trait FieldSource: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// `E_t` at each point of `points` (`dim` coordinates per point).
    fn eval_many(&self, t: f64, points: &[f64]) -> Result<Vec<f64>>;

    /// `E_t` at every cell center of `grid`.
    fn on_grid(&self, t: f64, grid: &Grid) -> Result<Vec<f64>> {
        self.eval_many(t, &flat_centers(grid))
    }
}

type Closure = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Time-dependent drift `E_t(x)` shared cheaply between solvers.
#[derive(Clone, Debug)]
pub struct VelocityField {
    source: Arc<dyn FieldSource>,
}

#[derive(Debug)]
struct Constant(Vec<f64>);

impl FieldSource for Constant {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn eval_many(&self, _t: f64, points: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.iter().copied().cycle().take(points.len()).collect())
    }
}

/// `E(x) = A x + b`, `A` row-major.
#[derive(Debug)]
struct Linear {
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl FieldSource for Linear {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn eval_many(&self, _t: f64, points: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![0.0; points.len()];
        for (x, o) in points.chunks(d).zip(out.chunks_mut(d)) {
            for r in 0..d {
                o[r] = self.offset[r] + (0..d).map(|c| self.matrix[r * d + c] * x[c]).sum::<f64>();
            }
        }
        Ok(out)
    }
}

struct FromFn {
    dim: usize,
    f: Box<Closure>,
}

impl fmt::Debug for FromFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FromFn").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl FieldSource for FromFn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_many(&self, t: f64, points: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; points.len()];
        for (x, o) in points.chunks(self.dim).zip(out.chunks_mut(self.dim)) {
            (self.f)(t, x, o);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::KernelEval(format!("field returned a non-finite value at t = {t}")));
        }
        Ok(out)
    }
}

/// `E^i_t = -K^i[mu_t]` along a stored trajectory.
#[derive(Debug)]
struct Induced {
    kernel: InteractionKernel,
    species: usize,
    trajectory: Arc<Trajectory>,
}

impl FieldSource for Induced {
    fn dim(&self) -> usize {
        self.trajectory.initial()[0].dim()
    }

    fn eval_many(&self, t: f64, points: &[f64]) -> Result<Vec<f64>> {
        let state = self.trajectory.state_at(t)?;
        let mut k = eval_velocity(&self.kernel, &state, self.species, points)?;
        k.iter_mut().for_each(|v| *v = -*v);
        Ok(k)
    }

    fn on_grid(&self, t: f64, grid: &Grid) -> Result<Vec<f64>> {
        let state = self.trajectory.state_at(t)?;
        let mut k = eval_velocity_on_grid(&self.kernel, &state, self.species, grid)?;
        k.iter_mut().for_each(|v| *v = -*v);
        Ok(k)
    }
}

#[derive(Debug)]
struct Offset {
    inner: Arc<dyn FieldSource>,
    add: Vec<f64>,
}

impl Offset {
    fn apply(&self, mut v: Vec<f64>) -> Vec<f64> {
        for chunk in v.chunks_mut(self.add.len()) {
            chunk.iter_mut().zip(&self.add).for_each(|(a, b)| *a += b);
        }
        v
    }
}

impl FieldSource for Offset {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_many(&self, t: f64, points: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply(self.inner.eval_many(t, points)?))
    }

    fn on_grid(&self, t: f64, grid: &Grid) -> Result<Vec<f64>> {
        Ok(self.apply(self.inner.on_grid(t, grid)?))
    }
}

#[derive(Debug)]
struct Shifted {
    inner: Arc<dyn FieldSource>,
    offset: f64,
}

impl FieldSource for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_many(&self, t: f64, points: &[f64]) -> Result<Vec<f64>> {
        self.inner.eval_many(t + self.offset, points)
    }

    fn on_grid(&self, t: f64, grid: &Grid) -> Result<Vec<f64>> {
        self.inner.on_grid(t + self.offset, grid)
    }
}

impl VelocityField {
    pub fn new(source: Arc<dyn FieldSource>) -> Self {
        Self { source }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(vec![0.0; dim])
    }

    pub fn constant(c: Vec<f64>) -> Self {
        Self::new(Arc::new(Constant(c)))
    }

    /// `E(x) = A x + b` with `A` given row-major.
    pub fn linear(matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if matrix.len() != offset.len() * offset.len() {
            return Err(Error::Dimension { expected: offset.len() * offset.len(), got: matrix.len() });
        }
        Ok(Self::new(Arc::new(Linear { matrix, offset })))
    }

    pub fn from_fn(dim: usize, f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self::new(Arc::new(FromFn { dim, f: Box::new(f) }))
    }

    /// Field generated by a point mass at the origin through the smoothed
    /// Newtonian kernel: `E(x) = x / (|x|^2 + 1/k)^{1/2}`.
    pub fn newtonian_point(dim: usize, k: f64) -> Self {
        Self::from_fn(dim, move |_, x, out| {
            let s = 1.0 / (x.iter().map(|v| v * v).sum::<f64>() + 1.0 / k).sqrt();
            for (o, xi) in out.iter_mut().zip(x) {
                *o = s * xi;
            }
        })
    }

    /// `E^i_t = -K^i[mu_t]` for the given trajectory.
    pub fn induced(kernel: InteractionKernel, species: usize, trajectory: Arc<Trajectory>) -> Result<Self> {
        if species >= kernel.species() || trajectory.species() != kernel.species() {
            return Err(Error::Config(format!(
                "induced field: species {species} of a {}-species kernel on a {}-species trajectory",
                kernel.species(),
                trajectory.species()
            )));
        }
        Ok(Self::new(Arc::new(Induced { kernel, species, trajectory })))
    }

    /// `E + c` for a constant vector `c`.
    pub fn plus_constant(&self, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), self.dim(), "offset dimension");
        Self::new(Arc::new(Offset { inner: self.source.clone(), add: c }))
    }

    /// `t -> E_{t + offset}`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self::new(Arc::new(Shifted { inner: self.source.clone(), offset }))
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.source.eval_many(t, x)
    }

    pub fn eval_many(&self, t: f64, points: &[f64]) -> Result<Vec<f64>> {
        if points.len() % self.dim() != 0 {
            return Err(Error::Dimension { expected: self.dim(), got: points.len() % self.dim() });
        }
        self.source.eval_many(t, points)
    }

    pub fn on_grid(&self, t: f64, grid: &Grid) -> Result<Vec<f64>> {
        if grid.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: grid.dim() });
        }
        let out = self.source.on_grid(t, grid)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::KernelEval(format!("field is not finite on the grid at t = {t}")));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure;
    use crate::velocity::KernelForm;

    #[test]
    fn newtonian_point_matches_induced_field_of_dirac() {
        let k = 50.0;
        let kernel = InteractionKernel::single(KernelForm::SmoothedNewtonian { k }).unwrap();
        let traj = Trajectory::frozen(vec![0.0, 1.0], vec![Measure::dirac(&[0.0])]).unwrap();
        let induced = VelocityField::induced(kernel, 0, Arc::new(traj)).unwrap();
        let direct = VelocityField::newtonian_point(1, k);
        let pts: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.05).collect();
        let a = induced.eval_many(0.5, &pts).unwrap();
        let b = direct.eval_many(0.5, &pts).unwrap();
        for ((x, p), q) in pts.iter().zip(&a).zip(&b) {
            assert!((p - q).abs() < 1e-15);
            assert!((p - x / (x * x + 1.0 / k).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_field_2d() {
        let e = VelocityField::linear(vec![0.0, -1.0, 1.0, 0.0], vec![0.5, 0.0]).unwrap();
        let v = e.eval(0.0, &[2.0, 3.0]).unwrap();
        assert_eq!(v, vec![-2.5, 2.0]);
    }

    #[test]
    fn shift_in_time() {
        let e = VelocityField::from_fn(1, |t, _, out| out[0] = t);
        assert_eq!(e.shifted(2.0).eval(0.5, &[0.0]).unwrap(), vec![2.5]);
    }
}
