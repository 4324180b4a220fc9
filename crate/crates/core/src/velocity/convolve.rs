use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::kernel::{InteractionKernel, KernelForm};
use crate::error::{Error, Result};
use crate::measures::{Grid, GridDensity, Measure};

/// Query batches below this size are evaluated on the calling thread.
const PAR_THRESHOLD: usize = 64;

/// `K^i[state](x) = sum_j grad W_ij * state_j` at each query point.
///
/// `points` holds `dim` coordinates per point. Particle states are summed
/// exactly; grid states use midpoint quadrature over cells. The drift of the
/// primal problem is `E = -K`.
pub fn eval_velocity(
    kernel: &InteractionKernel,
    state: &[Measure],
    species: usize,
    points: &[f64],
) -> Result<Vec<f64>> {
    let dim = check_state(kernel, state, species)?;
    if points.len() % dim != 0 {
        return Err(Error::Dimension { expected: dim, got: points.len() % dim });
    }
    let sources: Vec<(&KernelForm, Vec<(f64, [f64; 2])>)> = (0..kernel.species())
        .filter(|&j| !matches!(kernel.entry(species, j), KernelForm::Zero))
        .map(|j| (kernel.entry(species, j), atoms_of(&state[j])))
        .collect();
    let mut out = vec![0.0; points.len()];
    let body = |(x, o): (&[f64], &mut [f64])| {
        let mut g = [0.0; 2];
        let mut diff = [0.0; 2];
        for (form, atoms) in &sources {
            for (w, y) in atoms {
                for a in 0..dim {
                    diff[a] = x[a] - y[a];
                }
                form.gradient(&diff[..dim], &mut g[..dim]);
                for a in 0..dim {
                    o[a] += w * g[a];
                }
            }
        }
    };
    if points.len() / dim >= PAR_THRESHOLD {
        points.par_chunks(dim).zip(out.par_chunks_mut(dim)).for_each(body);
    } else {
        points.chunks(dim).zip(out.chunks_mut(dim)).for_each(body);
    }
    check_finite(&out)?;
    Ok(out)
}

/// `K^i` at every cell center of `grid`, flat with `dim` entries per cell.
///
/// When every species is a grid density on exactly `grid`, the discrete
/// convolution is evaluated by FFT; otherwise by direct summation.
pub fn eval_velocity_on_grid(
    kernel: &InteractionKernel,
    state: &[Measure],
    species: usize,
    grid: &Grid,
) -> Result<Vec<f64>> {
    let dim = check_state(kernel, state, species)?;
    if dim != grid.dim() {
        return Err(Error::Dimension { expected: dim, got: grid.dim() });
    }
    let same_grid = state.iter().all(|m| matches!(m, Measure::Grid(g) if g.grid() == grid));
    if !same_grid {
        let pts = flat_centers(grid);
        return eval_velocity(kernel, state, species, &pts);
    }
    let mut out = vec![0.0; grid.len() * dim];
    for j in 0..kernel.species() {
        let form = kernel.entry(species, j);
        if matches!(form, KernelForm::Zero) {
            continue;
        }
        let Measure::Grid(density) = &state[j] else { unreachable!() };
        for (o, v) in out.iter_mut().zip(convolve_fft(form, density)) {
            *o += v;
        }
    }
    check_finite(&out)?;
    Ok(out)
}

/// Direct `O(N^2)` midpoint convolution `sum_l m_l grad W(x_f - x_l)` at the centers.
pub fn convolve_direct(form: &KernelForm, density: &GridDensity) -> Vec<f64> {
    let grid = density.grid();
    let kernel = InteractionKernel::single(form.clone()).expect("validated form");
    let state = [Measure::Grid(density.clone())];
    eval_velocity(&kernel, &state, 0, &flat_centers(grid)).unwrap_or_else(|_| vec![f64::NAN; grid.len() * grid.dim()])
}

/// Same sum as [`convolve_direct`], computed by zero-padded FFT.
pub fn convolve_fft(form: &KernelForm, density: &GridDensity) -> Vec<f64> {
    let grid = density.grid();
    let dim = grid.dim();
    let n = [grid.cells()[0], if dim == 2 { grid.cells()[1] } else { 1 }];
    let p = [(2 * n[0]).next_power_of_two(), if dim == 2 { (2 * n[1]).next_power_of_two() } else { 1 }];
    let h = [grid.spacing(0), if dim == 2 { grid.spacing(1) } else { 1.0 }];
    let len = p[0] * p[1];

    let mut planner = FftPlanner::<f64>::new();
    let fwd = [planner.plan_fft_forward(p[0]), planner.plan_fft_forward(p[1])];
    let inv = [planner.plan_fft_inverse(p[0]), planner.plan_fft_inverse(p[1])];
    let transform = |buf: &mut [Complex64], plans: &[std::sync::Arc<dyn rustfft::Fft<f64>>; 2]| {
        for row in buf.chunks_mut(p[0]) {
            plans[0].process(row);
        }
        if p[1] > 1 {
            let mut col = vec![Complex64::new(0.0, 0.0); p[1]];
            for c in 0..p[0] {
                for r in 0..p[1] {
                    col[r] = buf[r * p[0] + c];
                }
                plans[1].process(&mut col);
                for r in 0..p[1] {
                    buf[r * p[0] + c] = col[r];
                }
            }
        }
    };

    let mut mass = vec![Complex64::new(0.0, 0.0); len];
    for (k, m) in density.masses().into_iter().enumerate() {
        let idx = grid.multi_index(k);
        mass[idx[1] * p[0] + idx[0]] = Complex64::new(m, 0.0);
    }
    transform(&mut mass, &fwd);

    let mut out = vec![0.0; grid.len() * dim];
    let mut g = [0.0; 2];
    for c in 0..dim {
        let mut taps = vec![Complex64::new(0.0, 0.0); len];
        for o1 in -(n[1] as isize - 1)..=(n[1] as isize - 1) {
            for o0 in -(n[0] as isize - 1)..=(n[0] as isize - 1) {
                let off = [o0 as f64 * h[0], o1 as f64 * h[1]];
                form.gradient(&off[..dim], &mut g[..dim]);
                let r = o1.rem_euclid(p[1] as isize) as usize;
                let s = o0.rem_euclid(p[0] as isize) as usize;
                taps[r * p[0] + s] = Complex64::new(g[c], 0.0);
            }
        }
        transform(&mut taps, &fwd);
        for (t, m) in taps.iter_mut().zip(&mass) {
            *t *= m;
        }
        transform(&mut taps, &inv);
        let scale = 1.0 / len as f64;
        for k in 0..grid.len() {
            let idx = grid.multi_index(k);
            out[k * dim + c] = taps[idx[1] * p[0] + idx[0]].re * scale;
        }
    }
    out
}

pub(crate) fn flat_centers(grid: &Grid) -> Vec<f64> {
    let dim = grid.dim();
    let mut pts = Vec::with_capacity(grid.len() * dim);
    for k in 0..grid.len() {
        pts.extend_from_slice(&grid.center(k)[..dim]);
    }
    pts
}

fn atoms_of(m: &Measure) -> Vec<(f64, [f64; 2])> {
    match m {
        Measure::Particles(p) => p
            .atoms()
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, x)| {
                let mut y = [0.0; 2];
                y[..x.len()].copy_from_slice(x);
                (w, y)
            })
            .collect(),
        Measure::Grid(g) => {
            let grid = g.grid();
            g.masses()
                .into_iter()
                .enumerate()
                .filter(|(_, w)| *w > 0.0)
                .map(|(k, w)| (w, grid.center(k)))
                .collect()
        }
    }
}

fn check_state(kernel: &InteractionKernel, state: &[Measure], species: usize) -> Result<usize> {
    if species >= kernel.species() {
        return Err(Error::Invalid(format!(
            "species index {species} out of range for {} species",
            kernel.species()
        )));
    }
    if state.len() != kernel.species() {
        return Err(Error::Config(format!(
            "kernel couples {} species but the state holds {}",
            kernel.species(),
            state.len()
        )));
    }
    let dim = state[0].dim();
    if let Some(bad) = state.iter().find(|m| m.dim() != dim) {
        return Err(Error::Dimension { expected: dim, got: bad.dim() });
    }
    Ok(dim)
}

fn check_finite(values: &[f64]) -> Result<()> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::KernelEval(format!("non-finite kernel gradient at output entry {pos}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::ParticleMeasure;

    #[test]
    fn quadratic_two_atoms() {
        let k = InteractionKernel::single(KernelForm::Quadratic { a: 1.0 }).unwrap();
        let mu = ParticleMeasure::new(1, vec![0.5, 0.5], vec![-1.0, 1.0]).unwrap();
        let pts = [0.0, 0.7, -2.0];
        let got = eval_velocity(&k, &[mu.into()], 0, &pts).unwrap();
        for (g, x) in got.iter().zip(pts) {
            assert!((g - x).abs() < 1e-15);
        }
    }

    #[test]
    fn fft_matches_direct_1d_and_2d() {
        let forms = [
            KernelForm::Quadratic { a: 0.8 },
            KernelForm::SmoothedNewtonian { k: 40.0 },
            KernelForm::Gaussian { amplitude: 1.3, sigma: 0.4 },
        ];
        let g1 = Grid::line(-2.0, 3.0, 37).unwrap();
        let d1 = GridDensity::from_fn(g1, |x| (-(x[0] - 0.3).powi(2)).exp() * (1.0 + 0.3 * (3.0 * x[0]).sin())).unwrap();
        let g2 = Grid::new(vec![-1.0, -1.5], vec![1.0, 1.0], vec![13, 11]).unwrap();
        let d2 = GridDensity::from_fn(g2, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp() + 0.1).unwrap();
        for form in &forms {
            for d in [&d1, &d2] {
                let a = convolve_direct(form, d);
                let b = convolve_fft(form, d);
                let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(worst < 1e-10, "{form:?}: {worst}");
            }
        }
    }

    #[test]
    fn species_out_of_range() {
        let k = InteractionKernel::zero(1);
        let err = eval_velocity(&k, &[Measure::dirac(&[0.0])], 3, &[0.0]);
        assert!(matches!(err, Err(Error::Invalid(_))));
    }

    #[test]
    fn nan_is_reported() {
        let k = InteractionKernel::single(KernelForm::Quadratic { a: 1.0 }).unwrap();
        let err = eval_velocity(&k, &[Measure::dirac(&[0.0])], 0, &[f64::NAN]);
        assert!(matches!(err, Err(Error::KernelEval(_))));
    }
}
