use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual_solver::Probe;
use crate::error::{Error, Result};
use crate::fixed_point::{certify_entropy_pair, CertifyOptions, EntropyPairCertificate};
use crate::measures::{d1_1d, Grid, Measure, ParticleMeasure};
use crate::primal_solver::{solve_particles, PrimalConfig};
use crate::trajectory::Trajectory;
use crate::velocity::{InteractionKernel, KernelForm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramCell {
    pub k: f64,
    pub m: f64,
    /// `d1(mu^{k,m}_t, delta_0)`
    pub to_dirac: f64,
    /// `d1(mu^{k,m}_t, uniform[-t, t])`
    pub to_spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramRow {
    pub k: f64,
    /// max atom displacement of the run started at `delta_0` (zero when it stays put)
    pub dirac_drift: f64,
    /// discrete Lipschitz constant of `psi_T` for the coordinate probe on that run
    pub psi_lipschitz: f64,
    pub dirac_certificate_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonianDiagram {
    pub t: f64,
    pub ks: Vec<f64>,
    pub ms: Vec<f64>,
    pub atoms: usize,
    pub cells: Vec<DiagramCell>,
    pub rows: Vec<DiagramRow>,
    /// for each `m`, `sup_t d1` between runs at successive `k`
    pub cauchy_increments: Vec<(f64, Vec<f64>)>,
    /// k -> infinity first: Richardson value of `d1(mu^{k_max,m}_t, delta_0)` in `1/m`
    pub k_first_to_dirac: f64,
    /// m -> infinity first: `delta_0`, the distance of the `k_max` row start to itself
    pub m_first_to_dirac: f64,
    /// distance between the two iterated limits
    pub corner_gap: f64,
    pub certificates: Vec<EntropyPairCertificate>,
}

/// Order-of-limits table for the repulsive point kernel `W_k = -(|x|^2 + 1/k)^{1/2}`
/// with `mu_0^m` uniform on `[-1/m, 1/m]`.
pub fn run_newtonian_diagram(ks: &[f64], ms: &[f64], t: f64, atoms: usize) -> Result<NewtonianDiagram> {
    if ks.is_empty() || ms.is_empty() || atoms == 0 {
        return Err(Error::Config("diagram needs nonempty k and m schedules and atoms".into()));
    }
    if ks.iter().chain(ms).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Config("k and m schedules must be positive".into()));
    }
    let width = ms.iter().map(|m| 1.0 / m).fold(0.0, f64::max);
    if !(t >= width) {
        return Err(Error::Config(format!("evaluation time {t} must be at least max 1/m = {width}")));
    }
    let config = PrimalConfig::particles(t, 0.01);
    let dirac = Measure::dirac(&[0.0]);
    let spread: Measure = ParticleMeasure::from_quantiles(4096, |u| t * (2.0 * u - 1.0))?.into();

    let jobs: Vec<(usize, usize)> = (0..ks.len()).flat_map(|a| (0..ms.len()).map(move |b| (a, b))).collect();
    let runs: Vec<Trajectory> = jobs
        .par_iter()
        .map(|&(a, b)| {
            let kernel = InteractionKernel::single(KernelForm::SmoothedNewtonian { k: ks[a] })?;
            let half = 1.0 / ms[b];
            let mu0 = ParticleMeasure::from_quantiles(atoms, |u| half * (2.0 * u - 1.0))?;
            Ok(solve_particles(&config, &kernel, &[mu0])?.trajectory)
        })
        .collect::<Result<_>>()?;
    let run = |a: usize, b: usize| &runs[a * ms.len() + b];

    let mut cells = Vec::with_capacity(jobs.len());
    for &(a, b) in &jobs {
        let last = &run(a, b).last()[0];
        cells.push(DiagramCell { k: ks[a], m: ms[b], to_dirac: d1_1d(last, &dirac)?, to_spread: d1_1d(last, &spread)? });
    }

    let mut cauchy_increments = Vec::new();
    for (b, &m) in ms.iter().enumerate() {
        let inc = (1..ks.len()).map(|a| run(a, b).sup_distance(run(a - 1, b))).collect::<Result<_>>()?;
        cauchy_increments.push((m, inc));
    }

    // odd cell count puts a node on the atom at 0
    let dual_grid = Grid::line(-(t + 2.0), t + 2.0, 401)?;
    let options = CertifyOptions { grid: Some(dual_grid), ..Default::default() };
    let outcomes: Vec<(DiagramRow, EntropyPairCertificate)> = ks
        .par_iter()
        .map(|&k| {
            let kernel = InteractionKernel::single(KernelForm::SmoothedNewtonian { k })?;
            let traj = solve_particles(&config, &kernel, &[ParticleMeasure::dirac(&[0.0])])?.trajectory;
            let dirac_drift = traj
                .states()
                .iter()
                .flat_map(|s| s[0].as_particles().map(|p| p.positions().to_vec()).unwrap_or_default())
                .fold(0.0f64, |acc, x| acc.max(x.abs()));
            let probes = [Probe::Coordinate { axis: 0 }, Probe::Bump { center: vec![0.0], radius: 1.0 }];
            let cert = certify_entropy_pair(&traj, &kernel, &probes, &options)?;
            let row = DiagramRow {
                k,
                dirac_drift,
                psi_lipschitz: cert.records[0].final_lipschitz,
                dirac_certificate_residual: cert.max_residual,
            };
            Ok((row, cert))
        })
        .collect::<Result<_>>()?;
    let (rows, certificates): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();

    // the error of the k_max row is linear in 1/m; extrapolate with the two largest m
    let a_max = ks.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
    let mut by_m: Vec<(f64, f64)> =
        ms.iter().enumerate().map(|(b, &m)| (m, cells[a_max * ms.len() + b].to_dirac)).collect();
    by_m.sort_by(|x, y| x.0.total_cmp(&y.0));
    let k_first_to_dirac = match by_m.as_slice() {
        [.., (m1, d1v), (m2, d2v)] => (m2 * d2v - m1 * d1v) / (m2 - m1),
        [(_, d)] => *d,
        [] => unreachable!(),
    };
    let m_first_to_dirac = rows[a_max].dirac_drift;
    let corner_gap = (k_first_to_dirac - m_first_to_dirac).abs();
    Ok(NewtonianDiagram {
        t,
        ks: ks.to_vec(),
        ms: ms.to_vec(),
        atoms,
        cells,
        rows,
        cauchy_increments,
        k_first_to_dirac,
        m_first_to_dirac,
        corner_gap,
        certificates,
    })
}
