use super::{Grid, GridDensity};
use crate::error::{Error, Result};

/// Homogeneous H^-1 seminorm of `mu - nu`.
///
/// In 1D the difference is extended by zero and the whole-line value
/// `||F||_{L2}`, `F' = mu - nu`, is exact. In 2D it is `||grad u||_{L2}` with
/// `-Lap u = mu - nu` and zero Dirichlet data on the box, a surrogate that
/// depends on the box when the difference has mass near the boundary.
pub fn hminus1_seminorm(mu: &GridDensity, nu: &GridDensity) -> Result<f64> {
    if mu.grid() != nu.grid() {
        return Err(Error::Invalid("H^-1 seminorm needs both densities on the same grid".into()));
    }
    let mismatch = mu.mass() - nu.mass();
    if mismatch.abs() > 1e-8 {
        return Err(Error::MassMismatch(mismatch));
    }
    let grid = mu.grid();
    let f: Vec<f64> = mu.values().iter().zip(nu.values()).map(|(a, b)| a - b).collect();
    if f.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    if grid.dim() == 1 {
        return Ok(antiderivative_norm(grid.spacing(0), &f));
    }
    let u = solve_dirichlet_cg(grid, &f)?;
    // energy identity: ||grad u||^2 = int f u
    let energy: f64 = f.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() * grid.cell_volume();
    Ok(energy.max(0.0).sqrt())
}

/// `||F||_{L2}` for the piecewise-linear antiderivative of cell values `f`.
fn antiderivative_norm(h: f64, f: &[f64]) -> f64 {
    let mut left = 0.0;
    let mut sq = 0.0;
    for v in f {
        let right = left + v * h;
        sq += h * (left * left + left * right + right * right) / 3.0;
        left = right;
    }
    sq.sqrt()
}

fn apply_laplacian(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let dim = grid.dim();
    for (k, o) in out.iter_mut().enumerate() {
        let idx = grid.multi_index(k);
        let mut acc = 0.0;
        for a in 0..dim {
            let h2 = grid.spacing(a).powi(2);
            let stride = grid.stride(a);
            let n = grid.cells()[a];
            let left = if idx[a] == 0 { -u[k] } else { u[k - stride] };
            let right = if idx[a] + 1 == n { -u[k] } else { u[k + stride] };
            acc += (2.0 * u[k] - left - right) / h2;
        }
        *o = acc;
    }
}

fn solve_dirichlet_cg(grid: &Grid, f: &[f64]) -> Result<Vec<f64>> {
    let n = f.len();
    let mut u = vec![0.0; n];
    let mut r = f.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut rr = dot(&r, &r);
    let target = 1e-26 * rr.max(1e-300);
    for _ in 0..10 * n + 100 {
        if rr <= target {
            return Ok(u);
        }
        apply_laplacian(grid, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for k in 0..n {
            u[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    if rr <= 1e-16 * dot(f, f) {
        Ok(u)
    } else {
        Err(Error::Solver("Poisson conjugate gradient did not converge".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_densities() {
        let g = Grid::line(-2.0, 2.0, 32).unwrap();
        let mu = GridDensity::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        assert_eq!(hminus1_seminorm(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn line_value_is_antiderivative_norm() {
        // mu - nu = 1 on [0, 1) and -1 on [1, 2): F is a tent of height 1
        let g = Grid::line(0.0, 2.0, 2).unwrap();
        let a = GridDensity::new(g.clone(), vec![1.0, 0.0]).unwrap();
        let b = GridDensity::new(g, vec![0.0, 1.0]).unwrap();
        let tent: f64 = 2.0 / 3.0;
        assert!((hminus1_seminorm(&a, &b).unwrap() - tent.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn square_cg_is_symmetric() {
        let g = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![12, 12]).unwrap();
        let a = GridDensity::from_fn(g.clone(), |x| 1.0 + 0.5 * (6.0 * x[0]).sin()).unwrap();
        let b = GridDensity::from_fn(g.clone(), |x| 1.0 + 0.5 * (6.0 * x[1]).sin()).unwrap();
        let ab = hminus1_seminorm(&a, &b).unwrap();
        assert!(ab > 0.0 && (ab - hminus1_seminorm(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_grids() {
        let a = GridDensity::from_fn(Grid::line(0.0, 1.0, 8).unwrap(), |_| 1.0).unwrap();
        let b = GridDensity::from_fn(Grid::line(0.0, 1.0, 9).unwrap(), |_| 1.0).unwrap();
        assert!(hminus1_seminorm(&a, &b).is_err());
    }
}
