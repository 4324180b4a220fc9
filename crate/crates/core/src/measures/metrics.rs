use serde::{Deserialize, Serialize};

use super::particle::{norm, ParticleMeasure};
use super::transport::transport_cost;
use super::{hminus1_seminorm, Measure};
use crate::error::{Error, Result};

/// Largest atom count per side accepted by the exact transport solver.
pub const DEFAULT_ATOM_CAP: usize = 2000;

/// Slack for mass lost through solver boundaries.
const NORMALIZATION_TOL: f64 = 1e-8;

/// Distances and moments between a pair of measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub d1: f64,
    pub d2: Option<f64>,
    pub hminus1: Option<f64>,
    pub first_moments: (f64, f64),
}

/// Piecewise-affine description of a 1D CDF or quantile function.
enum Profile {
    /// Atoms sorted by position with inclusive cumulative weights.
    Steps { xs: Vec<f64>, cum: Vec<f64> },
    /// Uniform cells `[lo + i h, lo + (i+1) h]` with cumulative masses `cum[0..=n]`.
    Linear { lo: f64, h: f64, cum: Vec<f64> },
}

impl Profile {
    fn of(m: &Measure) -> Result<Self> {
        if m.dim() != 1 {
            return Err(Error::Dimension { expected: 1, got: m.dim() });
        }
        m.check_normalized(NORMALIZATION_TOL)?;
        Ok(match m {
            Measure::Particles(p) => {
                let mut atoms: Vec<(f64, f64)> = p.atoms().map(|(w, x)| (x[0], w)).collect();
                atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut xs = Vec::with_capacity(atoms.len());
                let mut cum = Vec::with_capacity(atoms.len());
                let mut acc = 0.0;
                for (x, w) in atoms {
                    acc += w;
                    if xs.last() == Some(&x) {
                        *cum.last_mut().unwrap() = acc;
                    } else {
                        xs.push(x);
                        cum.push(acc);
                    }
                }
                Profile::Steps { xs, cum }
            }
            Measure::Grid(g) => {
                let grid = g.grid();
                let mut cum = Vec::with_capacity(grid.len() + 1);
                cum.push(0.0);
                let mut acc = 0.0;
                for m in g.masses() {
                    acc += m;
                    cum.push(acc);
                }
                Profile::Linear { lo: grid.lower()[0], h: grid.spacing(0), cum }
            }
        })
    }

    fn cdf_breaks(&self, out: &mut Vec<f64>) {
        match self {
            Profile::Steps { xs, .. } => out.extend_from_slice(xs),
            Profile::Linear { lo, h, cum } => {
                out.extend((0..cum.len()).map(|i| lo + i as f64 * h));
            }
        }
    }

    /// CDF value at `mid` and its slope on the piece containing `mid`.
    fn cdf_piece(&self, mid: f64) -> (f64, f64) {
        match self {
            Profile::Steps { xs, cum } => {
                let k = xs.partition_point(|x| *x <= mid);
                (if k == 0 { 0.0 } else { cum[k - 1] }, 0.0)
            }
            Profile::Linear { lo, h, cum } => {
                let n = cum.len() - 1;
                let s = (mid - lo) / h;
                if s <= 0.0 {
                    (0.0, 0.0)
                } else if s >= n as f64 {
                    (cum[n], 0.0)
                } else {
                    let i = (s.floor() as usize).min(n - 1);
                    let m = cum[i + 1] - cum[i];
                    (cum[i] + m * (s - i as f64), m / h)
                }
            }
        }
    }

    fn quantile_breaks(&self, out: &mut Vec<f64>) {
        match self {
            Profile::Steps { cum, .. } => out.extend_from_slice(cum),
            Profile::Linear { cum, .. } => out.extend_from_slice(cum),
        }
    }

    /// Quantile value at level `mid` and its slope in `u`.
    fn quantile_piece(&self, mid: f64) -> (f64, f64) {
        match self {
            Profile::Steps { xs, cum } => {
                let k = cum.partition_point(|c| *c <= mid).min(xs.len() - 1);
                (xs[k], 0.0)
            }
            Profile::Linear { lo, h, cum } => {
                let n = cum.len() - 1;
                // first cell whose upper cumulative mass exceeds mid
                let mut i = cum[1..].partition_point(|c| *c <= mid).min(n - 1);
                while i > 0 && cum[i + 1] - cum[i] <= 0.0 {
                    i -= 1;
                }
                let m = cum[i + 1] - cum[i];
                if m <= 0.0 {
                    return (lo + i as f64 * h, 0.0);
                }
                let x0 = lo + i as f64 * h;
                (x0 + (mid - cum[i]) / m * h, h / m)
            }
        }
    }
}

fn merged(mut pts: Vec<f64>) -> Vec<f64> {
    pts.retain(|p| p.is_finite());
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts
}

/// Integral over [a, b] of |d| for d affine with endpoint values `da`, `db`.
fn abs_affine_integral(da: f64, db: f64, len: f64) -> f64 {
    if da * db >= 0.0 {
        0.5 * (da.abs() + db.abs()) * len
    } else {
        let (pa, pb) = (da.abs(), db.abs());
        0.5 * (pa * pa + pb * pb) / (pa + pb) * len
    }
}

/// Exact 1-Wasserstein distance between 1D measures, `int |F_mu - F_nu|`.
pub fn d1_1d(mu: &Measure, nu: &Measure) -> Result<f64> {
    let p = Profile::of(mu)?;
    let q = Profile::of(nu)?;
    let mut pts = Vec::new();
    p.cdf_breaks(&mut pts);
    q.cdf_breaks(&mut pts);
    let pts = merged(pts);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let (fp, sp) = p.cdf_piece(mid);
        let (fq, sq) = q.cdf_piece(mid);
        let d_mid = fp - fq;
        let slope = sp - sq;
        total += abs_affine_integral(d_mid - 0.5 * len * slope, d_mid + 0.5 * len * slope, len);
    }
    Ok(total)
}

/// 2-Wasserstein distance between 1D measures via monotone rearrangement.
pub fn d2_1d(mu: &Measure, nu: &Measure) -> Result<f64> {
    let p = Profile::of(mu)?;
    let q = Profile::of(nu)?;
    let mut pts = vec![0.0, 1.0];
    p.quantile_breaks(&mut pts);
    q.quantile_breaks(&mut pts);
    let pts: Vec<f64> = merged(pts).into_iter().map(|u| u.clamp(0.0, 1.0)).collect();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len <= 1e-15 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let (vp, sp) = p.quantile_piece(mid);
        let (vq, sq) = q.quantile_piece(mid);
        let d_mid = vp - vq;
        let slope = sp - sq;
        let da = d_mid - 0.5 * len * slope;
        let db = d_mid + 0.5 * len * slope;
        total += len * (da * da + da * db + db * db) / 3.0;
    }
    Ok(total.max(0.0).sqrt())
}

/// Exact discrete optimal transport cost with Euclidean ground cost.
pub fn d1_particles(mu: &ParticleMeasure, nu: &ParticleMeasure) -> Result<f64> {
    d1_particles_with_cap(mu, nu, DEFAULT_ATOM_CAP)
}

pub fn d1_particles_with_cap(mu: &ParticleMeasure, nu: &ParticleMeasure, cap: usize) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::Dimension { expected: mu.dim(), got: nu.dim() });
    }
    let a = mu.compacted();
    let b = nu.compacted();
    for side in [&a, &b] {
        if side.len() > cap {
            return Err(Error::Size { atoms: side.len(), cap });
        }
    }
    let dim = a.dim();
    let mut diff = vec![0.0; dim];
    transport_cost(a.weights(), b.weights(), |i, j| {
        let (x, y) = (a.position(i), b.position(j));
        for k in 0..dim {
            diff[k] = x[k] - y[k];
        }
        norm(&diff)
    })
}

/// d1 through the best available exact route: the CDF formula in 1D, the
/// transport solver otherwise (grids are viewed as atoms at cell centers).
pub fn d1(mu: &Measure, nu: &Measure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::Dimension { expected: mu.dim(), got: nu.dim() });
    }
    if mu.dim() == 1 {
        return d1_1d(mu, nu);
    }
    d1_particles(&mu.to_particles()?, &nu.to_particles()?)
}

/// First moment `int |x| dmu`, which is also `d1(mu, delta_0)`.
pub fn first_moment(mu: &Measure) -> f64 {
    mu.first_moment()
}

pub fn metric_report(mu: &Measure, nu: &Measure) -> Result<MetricReport> {
    let d1 = d1(mu, nu)?;
    let d2 = if mu.dim() == 1 { Some(d2_1d(mu, nu)?) } else { None };
    let hminus1 = match (mu, nu) {
        (Measure::Grid(a), Measure::Grid(b)) if a.grid() == b.grid() => Some(hminus1_seminorm(a, b)?),
        _ => None,
    };
    Ok(MetricReport { d1, d2, hminus1, first_moments: (mu.first_moment(), nu.first_moment()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Grid, GridDensity};

    fn uniform_grid(lo: f64, hi: f64, n: usize) -> Measure {
        let grid = Grid::line(lo, hi, n).unwrap();
        Measure::Grid(GridDensity::from_fn(grid, |_| 1.0).unwrap())
    }

    #[test]
    fn two_diracs() {
        let a = Measure::dirac(&[0.0]);
        let b = Measure::dirac(&[1.0]);
        assert!((d1_1d(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((d2_1d(&a, &Measure::dirac(&[-3.5])).unwrap() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn dirac_against_uniform_grid() {
        let u = uniform_grid(-1.0, 1.0, 7);
        let delta = Measure::dirac(&[0.0]);
        assert!((d1_1d(&delta, &u).unwrap() - 0.5).abs() < 1e-12);
        assert!((d2_1d(&delta, &u).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn translation_of_uniform() {
        let u = uniform_grid(0.0, 1.0, 10);
        let v = uniform_grid(0.3, 1.3, 10);
        assert!((d1_1d(&u, &v).unwrap() - 0.3).abs() < 1e-12);
        assert!((d2_1d(&u, &v).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let flat = Measure::dirac(&[0.0, 0.0]);
        assert!(matches!(d1_1d(&flat, &flat), Err(Error::Dimension { .. })));
        let p = ParticleMeasure::dirac(&[0.0]);
        let q = ParticleMeasure::dirac(&[0.0, 1.0]);
        assert!(matches!(d1_particles(&p, &q), Err(Error::Dimension { .. })));
    }

    #[test]
    fn cap_is_enforced() {
        let p = ParticleMeasure::from_quantiles(30, |u| u).unwrap();
        let q = ParticleMeasure::dirac(&[0.0]);
        assert!(matches!(d1_particles_with_cap(&p, &q, 10), Err(Error::Size { atoms: 30, cap: 10 })));
    }

    #[test]
    fn grid_first_moment_matches_d1_to_origin() {
        let g = uniform_grid(-0.7, 1.9, 13);
        let d = d1_1d(&g, &Measure::dirac(&[0.0])).unwrap();
        assert!((g.first_moment() - d).abs() < 1e-12);
    }
}
