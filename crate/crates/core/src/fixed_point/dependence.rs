use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::d1;
use crate::trajectory::Trajectory;
use crate::velocity::InteractionKernel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub initial_distance: f64,
    /// `(t, max_i d1(mu_t^i, hat mu_t^i))`
    pub distances: Vec<(f64, f64)>,
    /// `(t, distance / initial distance)`; empty when the initial data coincide
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
    /// exponential rate of the envelope `exp(rate t)`
    pub rate: f64,
    pub flagged: bool,
}

/// Compares two runs of the same system started from different data.
///
/// The envelope is `exp(2 L t)` with `L` the Hessian bound of the kernel
/// matrix; growth beyond it (plus 5%) is flagged.
pub fn continuous_dependence_check(
    a: &Trajectory,
    b: &Trajectory,
    kernel: &InteractionKernel,
) -> Result<DependenceReport> {
    if a.len() != b.len() || a.times().iter().zip(b.times()).any(|(s, t)| (s - t).abs() > 1e-9 * (1.0 + s.abs())) {
        return Err(Error::Config("runs must share their time nodes".into()));
    }
    let rate = 2.0 * kernel.lipschitz_constant().unwrap_or(f64::INFINITY);
    let t0 = a.start();
    let mut distances = Vec::with_capacity(a.len());
    for k in 0..a.len() {
        let mut worst: f64 = 0.0;
        for (x, y) in a.state(k).iter().zip(b.state(k)) {
            worst = worst.max(d1(x, y)?);
        }
        distances.push((a.times()[k], worst));
    }
    let initial_distance = distances[0].1;
    let (ratios, max_ratio, flagged) = if initial_distance > 0.0 {
        let ratios: Vec<(f64, f64)> = distances.iter().map(|&(t, d)| (t, d / initial_distance)).collect();
        let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
        let flagged = ratios.iter().any(|&(t, r)| r > 1.05 * (rate * (t - t0)).exp());
        (ratios, max_ratio, flagged)
    } else {
        let flagged = distances.iter().any(|d| d.1 > 1e-12);
        (Vec::new(), 1.0, flagged)
    };
    Ok(DependenceReport { initial_distance, distances, ratios, max_ratio, rate, flagged })
}
