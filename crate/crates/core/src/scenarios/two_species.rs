use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{
    certify_entropy_pair, picard_solve, CertifyOptions, EntropyPairCertificate, PicardConfig, PicardState,
};
use crate::measures::{d1, Measure};
use crate::primal_solver::{MassLedger, PrimalConfig};
use crate::trajectory::Trajectory;
use crate::velocity::{InteractionKernel, KernelForm};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoSpeciesReport {
    /// `(t, mean of species 1, mean of species 2)` in the first coordinate
    pub means: Vec<(f64, f64, f64)>,
    /// `sup_t d1(mu^2_t, reflection of mu^1_t)` when the setup is mirror symmetric
    pub mirror_gap: Option<f64>,
    pub picard: PicardState,
    pub ledgers: Vec<MassLedger>,
    pub certificate: EntropyPairCertificate,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

/// Kernel matrix `[[H1, K], [K, H2]]`.
pub fn two_species_kernel(h1: KernelForm, h2: KernelForm, cross: KernelForm) -> Result<InteractionKernel> {
    InteractionKernel::new(2, vec![h1, cross.clone(), cross, h2])
}

/// Coupled solve and certification of a two-species system.
///
/// `config` carries the horizon, diffusion pair and representation.
pub fn run_two_species(
    h1: KernelForm,
    h2: KernelForm,
    cross: KernelForm,
    mu0: [Measure; 2],
    config: PrimalConfig,
) -> Result<TwoSpeciesReport> {
    if mu0[0].dim() != mu0[1].dim() {
        return Err(Error::Dimension { expected: mu0[0].dim(), got: mu0[1].dim() });
    }
    let mirror = h1 == h2 && mu0[1] == mu0[0].reflected()?;
    let kernel = two_species_kernel(h1, h2, cross)?;
    let diffusion = config.diffusion.clone();
    let solution = picard_solve(&PicardConfig::new(config), &kernel, &mu0)?;
    let traj = &solution.trajectory;

    let means = traj
        .times()
        .iter()
        .zip(traj.states())
        .map(|(t, s)| (*t, s[0].mean()[0], s[1].mean()[0]))
        .collect();
    let mirror_gap = if mirror {
        let mut gap: f64 = 0.0;
        for s in traj.states() {
            gap = gap.max(d1(&s[1], &s[0].reflected()?)?);
        }
        Some(gap)
    } else {
        None
    };
    let options = CertifyOptions { diffusion, ..Default::default() };
    let certificate = certify_entropy_pair(traj, &kernel, &[], &options)?;
    Ok(TwoSpeciesReport {
        means,
        mirror_gap,
        picard: solution.state,
        ledgers: solution.ledgers,
        certificate,
        trajectory: Some(solution.trajectory),
    })
}
