use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial interaction potential `W(x) = w(|x|)`.
///
/// Every form is even, so the self-interaction of an atom uses
/// `grad W(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum KernelForm {
    Zero,
    /// `a |x|^2 / 2`
    Quadratic { a: f64 },
    /// `-(|x|^2 + 1/k)^{1/2}`
    SmoothedNewtonian { k: f64 },
    /// `-amplitude exp(-|x|^2 / (2 sigma^2))`
    Gaussian { amplitude: f64, sigma: f64 },
    /// Tabulated radial slope `w'(r)`, interpolated by cubic Hermite splines
    /// and held constant past the last radius.
    TabulatedRadial { radii: Vec<f64>, slopes: Vec<f64> },
}

impl KernelForm {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelForm::Zero => Ok(()),
            KernelForm::Quadratic { a } if a.is_finite() => Ok(()),
            KernelForm::SmoothedNewtonian { k } if k.is_finite() && *k > 0.0 => Ok(()),
            KernelForm::Gaussian { amplitude, sigma }
                if amplitude.is_finite() && sigma.is_finite() && *sigma > 0.0 =>
            {
                Ok(())
            }
            KernelForm::TabulatedRadial { radii, slopes } => {
                if radii.len() < 2 || radii.len() != slopes.len() {
                    return Err(Error::Config("tabulated kernel needs >= 2 matching samples".into()));
                }
                if radii[0] != 0.0 || slopes[0] != 0.0 {
                    return Err(Error::Config("tabulated kernel must start at r = 0 with slope 0".into()));
                }
                if radii.windows(2).any(|w| !(w[1] > w[0])) || slopes.iter().any(|s| !s.is_finite()) {
                    return Err(Error::Config("tabulated radii must increase; slopes finite".into()));
                }
                Ok(())
            }
            other => Err(Error::Config(format!("invalid kernel parameters: {other:?}"))),
        }
    }

    /// Radial slope `w'(r)` for `r >= 0`.
    pub fn radial_slope(&self, r: f64) -> f64 {
        match self {
            KernelForm::Zero => 0.0,
            KernelForm::Quadratic { a } => a * r,
            KernelForm::SmoothedNewtonian { k } => -r / (r * r + 1.0 / k).sqrt(),
            KernelForm::Gaussian { amplitude, sigma } => {
                amplitude * r / (sigma * sigma) * (-r * r / (2.0 * sigma * sigma)).exp()
            }
            KernelForm::TabulatedRadial { radii, slopes } => hermite(radii, slopes, r).0,
        }
    }

    /// `grad W(x)` written into `out`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            KernelForm::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            KernelForm::Quadratic { a } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = a * xi;
                }
            }
            KernelForm::SmoothedNewtonian { k } => {
                let s = -1.0 / (sq(x) + 1.0 / k).sqrt();
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = s * xi;
                }
            }
            KernelForm::Gaussian { amplitude, sigma } => {
                let s2 = sigma * sigma;
                let s = amplitude / s2 * (-sq(x) / (2.0 * s2)).exp();
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = s * xi;
                }
            }
            KernelForm::TabulatedRadial { .. } => {
                let r = sq(x).sqrt();
                let s = if r > 0.0 { self.radial_slope(r) / r } else { 0.0 };
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = s * xi;
                }
            }
        }
    }

    /// `sup |D^2 W|` (operator norm), when finite.
    pub fn hessian_bound(&self) -> Option<f64> {
        match self {
            KernelForm::Zero => Some(0.0),
            KernelForm::Quadratic { a } => Some(a.abs()),
            KernelForm::SmoothedNewtonian { k } => Some(k.sqrt()),
            KernelForm::Gaussian { amplitude, sigma } => Some(amplitude.abs() / (sigma * sigma)),
            KernelForm::TabulatedRadial { radii, slopes } => {
                // eigenvalues of the Hessian of a radial function are w'' and w'/r
                let r_max = *radii.last().unwrap();
                let n = 4096;
                let mut bound: f64 = 0.0;
                for k in 1..=n {
                    let r = r_max * k as f64 / n as f64;
                    let (s, ds) = hermite(radii, slopes, r);
                    bound = bound.max(ds.abs()).max((s / r).abs());
                }
                // past the table w' is constant, so w'/r decays
                Some(bound)
            }
        }
    }

    /// `sup_{|x| <= radius} |grad W(x)|`.
    pub fn gradient_bound(&self, radius: f64) -> f64 {
        match self {
            KernelForm::Zero => 0.0,
            KernelForm::Quadratic { a } => a.abs() * radius,
            KernelForm::SmoothedNewtonian { .. } => self.radial_slope(radius).abs(),
            KernelForm::Gaussian { sigma, .. } => self.radial_slope(radius.min(*sigma)).abs(),
            KernelForm::TabulatedRadial { .. } => {
                let n = 4096;
                (0..=n)
                    .map(|k| self.radial_slope(radius * k as f64 / n as f64).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Convexity of `W` on the whole space.
    pub fn is_convex(&self) -> bool {
        match self {
            KernelForm::Zero => true,
            KernelForm::Quadratic { a } => *a >= 0.0,
            KernelForm::SmoothedNewtonian { .. } => false,
            KernelForm::Gaussian { amplitude, .. } => *amplitude == 0.0,
            KernelForm::TabulatedRadial { radii, slopes } => {
                // radial w is convex iff w' >= 0 and nondecreasing
                let r_max = *radii.last().unwrap();
                let n = 4096;
                (0..=n).all(|k| {
                    let (s, ds) = hermite(radii, slopes, r_max * k as f64 / n as f64);
                    s >= -1e-14 && ds >= -1e-12
                })
            }
        }
    }
}

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Cubic Hermite interpolant of `(radii, slopes)` with finite-difference
/// tangents; returns `(value, derivative)`.
fn hermite(radii: &[f64], values: &[f64], r: f64) -> (f64, f64) {
    let n = radii.len();
    if r >= radii[n - 1] {
        return (values[n - 1], 0.0);
    }
    let k = radii.partition_point(|x| *x <= r).max(1) - 1;
    let (x0, x1) = (radii[k], radii[k + 1]);
    let h = x1 - x0;
    let tangent = |i: usize| -> f64 {
        if i == 0 {
            (values[1] - values[0]) / (radii[1] - radii[0])
        } else if i == n - 1 {
            (values[n - 1] - values[n - 2]) / (radii[n - 1] - radii[n - 2])
        } else {
            (values[i + 1] - values[i - 1]) / (radii[i + 1] - radii[i - 1])
        }
    };
    let (m0, m1) = (tangent(k), tangent(k + 1));
    let s = (r - x0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * values[k]
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * values[k + 1]
        + (s3 - s2) * h * m1;
    let dv = ((6.0 * s2 - 6.0 * s) * values[k]
        + (3.0 * s2 - 4.0 * s + 1.0) * h * m0
        + (-6.0 * s2 + 6.0 * s) * values[k + 1]
        + (3.0 * s2 - 2.0 * s) * h * m1)
        / h;
    (v, dv)
}

/// `n x n` assignment of interaction potentials `W_ij`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionKernel {
    species: usize,
    entries: Vec<KernelForm>,
}

impl InteractionKernel {
    /// Row-major entries: `entries[i * n + j]` is `W_ij`.
    pub fn new(species: usize, entries: Vec<KernelForm>) -> Result<Self> {
        if species == 0 || entries.len() != species * species {
            return Err(Error::Config(format!(
                "kernel matrix for {species} species needs {} entries, got {}",
                species * species,
                entries.len()
            )));
        }
        for e in &entries {
            e.validate()?;
        }
        Ok(Self { species, entries })
    }

    pub fn single(form: KernelForm) -> Result<Self> {
        Self::new(1, vec![form])
    }

    pub fn zero(species: usize) -> Self {
        Self { species, entries: vec![KernelForm::Zero; species * species] }
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn entry(&self, i: usize, j: usize) -> &KernelForm {
        &self.entries[i * self.species + j]
    }

    pub fn entries(&self) -> &[KernelForm] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| matches!(e, KernelForm::Zero))
    }

    /// Constant `L` of the weighted Lipschitz hypothesis implied by the
    /// Hessian bounds: `max_i sum_j sup |D^2 W_ij|`.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.species {
            let mut row = 0.0;
            for j in 0..self.species {
                row += self.entry(i, j).hessian_bound()?;
            }
            worst = worst.max(row);
        }
        Some(worst)
    }

    /// Largest `|K^i|` possible for measures supported in a set of diameter `diam`.
    pub fn velocity_bound(&self, diam: f64) -> f64 {
        (0..self.species)
            .map(|i| (0..self.species).map(|j| self.entry(i, j).gradient_bound(diam)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}
