use serde::{Deserialize, Serialize};

use super::convolve::{eval_velocity, flat_centers};
use super::field::VelocityField;
use super::kernel::InteractionKernel;
use crate::error::{Error, Result};
use crate::measures::{d1, Grid, Measure};

/// Margin and refinement of the audit lattice relative to a solver grid.
pub const AUDIT_MARGIN: f64 = 0.25;
pub const AUDIT_REFINEMENT: usize = 4;

/// Box inflated by 25% with four times the resolution.
pub fn audit_lattice(grid: &Grid) -> Grid {
    grid.inflated(AUDIT_MARGIN, AUDIT_REFINEMENT)
}

/// Components of `||E_t||_{Lip0}` measured on a lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lip0Sample {
    pub t: f64,
    /// max finite-difference `|grad E|` (Frobenius norm of the Jacobian)
    pub gradient: f64,
    /// max `|E| / (1 + |x|)` over the lattice and the origin
    pub weighted: f64,
    pub at_origin: f64,
    pub norm: f64,
}

impl Lip0Sample {
    /// `|E(0)| + ||grad E|| <= norm <= 2 (|E(0)| + ||grad E||)`, with relative slack `tol`.
    pub fn sandwich_holds(&self, tol: f64) -> bool {
        let base = self.at_origin + self.gradient;
        base <= self.norm * (1.0 + tol) + tol && self.norm <= 2.0 * base * (1.0 + tol) + tol
    }
}

pub fn lip0_norm(field: &VelocityField, t: f64, lattice: &Grid) -> Result<Lip0Sample> {
    let dim = lattice.dim();
    if field.dim() != dim {
        return Err(Error::Dimension { expected: field.dim(), got: dim });
    }
    let pts = flat_centers(lattice);
    let e = field.eval_many(t, &pts)?;
    let origin = vec![0.0; dim];
    let e0 = field.eval(t, &origin)?;
    let at_origin = norm(&e0);

    let mut weighted = at_origin;
    for (x, v) in pts.chunks(dim).zip(e.chunks(dim)) {
        weighted = weighted.max(norm(v) / (1.0 + norm(x)));
    }

    let mut gradient: f64 = 0.0;
    for k in 0..lattice.len() {
        let idx = lattice.multi_index(k);
        // forward differences; the last cell on an axis uses the backward one
        let mut frob = 0.0;
        for a in 0..dim {
            let n = lattice.cells()[a];
            if n < 2 {
                continue;
            }
            let stride = lattice.stride(a);
            let (lo, hi) = if idx[a] + 1 < n { (k, k + stride) } else { (k - stride, k) };
            let h = lattice.spacing(a);
            for c in 0..dim {
                let d = (e[hi * dim + c] - e[lo * dim + c]) / h;
                frob += d * d;
            }
        }
        gradient = gradient.max(frob.sqrt());
    }
    Ok(Lip0Sample { t, gradient, weighted, at_origin, norm: gradient + weighted })
}

/// Empirical check of `|K[mu] - K[nu]|(x) / (1 + |x|) <= L sup_j d1(mu_j, nu_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzAudit {
    pub numerator: f64,
    pub distances: Vec<f64>,
    pub ratio: f64,
    pub limit: Option<f64>,
    pub flagged: bool,
}

pub fn lipschitz_audit(
    kernel: &InteractionKernel,
    a: &[Measure],
    b: &[Measure],
    lattice: &Grid,
    limit: Option<f64>,
) -> Result<LipschitzAudit> {
    if a.len() != b.len() {
        return Err(Error::Config("paired states hold different species counts".into()));
    }
    let dim = lattice.dim();
    let mut pts = flat_centers(lattice);
    pts.extend(std::iter::repeat(0.0).take(dim));
    let mut numerator: f64 = 0.0;
    for i in 0..kernel.species() {
        let ka = eval_velocity(kernel, a, i, &pts)?;
        let kb = eval_velocity(kernel, b, i, &pts)?;
        for ((x, p), q) in pts.chunks(dim).zip(ka.chunks(dim)).zip(kb.chunks(dim)) {
            let diff: Vec<f64> = p.iter().zip(q).map(|(u, v)| u - v).collect();
            numerator = numerator.max(norm(&diff) / (1.0 + norm(x)));
        }
    }
    let distances = a.iter().zip(b).map(|(x, y)| d1(x, y)).collect::<Result<Vec<_>>>()?;
    let dist = distances.iter().copied().fold(0.0, f64::max);
    let ratio = if numerator == 0.0 {
        0.0
    } else if dist == 0.0 {
        f64::INFINITY
    } else {
        numerator / dist
    };
    let flagged = limit.is_some_and(|l| ratio > l);
    Ok(LipschitzAudit { numerator, distances, ratio, limit, flagged })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field() {
        let lattice = Grid::line(-3.0, 3.0, 64).unwrap();
        let s = lip0_norm(&VelocityField::constant(vec![-1.5]), 0.0, &lattice).unwrap();
        assert_eq!(s.gradient, 0.0);
        assert!((s.norm - 1.5).abs() < 1e-15);
        assert!(s.sandwich_holds(1e-12));
    }

    #[test]
    fn identity_field_approaches_two() {
        let e = VelocityField::linear(vec![1.0], vec![0.0]).unwrap();
        let mut last = 0.0;
        for half in [5.0, 50.0, 500.0] {
            let s = lip0_norm(&e, 0.0, &Grid::line(-half, half, 200).unwrap()).unwrap();
            assert!((s.gradient - 1.0).abs() < 1e-9);
            assert!(s.norm < 2.0 && s.norm > last);
            last = s.norm;
        }
        assert!(last > 1.99);
    }
}
