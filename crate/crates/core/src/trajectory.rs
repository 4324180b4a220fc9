use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{d1, GridDensity, Measure};

/// Time-indexed states of an `n`-species system.
///
/// Particle trajectories may carry nodal velocities, in which case
/// intermediate states are cubic Hermite interpolants of the atom paths.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<Measure>>,
    /// `[node][species]` flat velocity per atom coordinate
    #[serde(default, skip_serializing_if = "Option::is_none")]
    velocities: Option<Vec<Vec<Vec<f64>>>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Vec<Measure>>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::Invalid("trajectory needs one state per time".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("trajectory times must increase strictly".into()));
        }
        let n = states[0].len();
        if n == 0 || states.iter().any(|s| s.len() != n) {
            return Err(Error::Invalid("every state must hold the same species count".into()));
        }
        Ok(Self { times, states, velocities: None })
    }

    pub fn with_velocities(mut self, velocities: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if velocities.len() != self.times.len() {
            return Err(Error::Invalid("one velocity set per node required".into()));
        }
        self.velocities = Some(velocities);
        Ok(self)
    }

    /// Constant-in-time trajectory on the given nodes.
    pub fn frozen(times: Vec<f64>, state: Vec<Measure>) -> Result<Self> {
        let states = vec![state; times.len()];
        Self::new(times, states)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<Measure>] {
        &self.states
    }

    pub fn species(&self) -> usize {
        self.states[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn initial(&self) -> &[Measure] {
        &self.states[0]
    }

    pub fn last(&self) -> &[Measure] {
        self.states.last().unwrap()
    }

    pub fn state(&self, k: usize) -> &[Measure] {
        &self.states[k]
    }

    /// Index of the node at time `t` (within `1e-9` relative).
    pub fn node_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * (1.0 + t.abs());
        let k = self.times.partition_point(|s| *s < t - tol);
        (k < self.times.len() && (self.times[k] - t).abs() <= tol).then_some(k)
    }

    /// State at an arbitrary time in `[start, end]` (clamped outside).
    pub fn state_at(&self, t: f64) -> Result<Vec<Measure>> {
        if let Some(k) = self.node_at(t) {
            return Ok(self.states[k].clone());
        }
        if t <= self.start() {
            return Ok(self.states[0].clone());
        }
        if t >= self.end() {
            return Ok(self.last().to_vec());
        }
        let k = self.times.partition_point(|s| *s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let mut out = Vec::with_capacity(self.species());
        for i in 0..self.species() {
            let a = &self.states[k][i];
            let b = &self.states[k + 1][i];
            out.push(match (a, b) {
                (Measure::Particles(pa), Measure::Particles(pb)) if pa.len() == pb.len() => {
                    let xa = pa.positions();
                    let xb = pb.positions();
                    let pos: Vec<f64> = match &self.velocities {
                        Some(v) => {
                            let (va, vb) = (&v[k][i], &v[k + 1][i]);
                            let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
                            let h10 = s.powi(3) - 2.0 * s * s + s;
                            let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
                            let h11 = s.powi(3) - s * s;
                            (0..xa.len())
                                .map(|c| h00 * xa[c] + h10 * h * va[c] + h01 * xb[c] + h11 * h * vb[c])
                                .collect()
                        }
                        None => xa.iter().zip(xb).map(|(p, q)| (1.0 - s) * p + s * q).collect(),
                    };
                    Measure::Particles(pa.with_positions(pos)?)
                }
                (Measure::Grid(ga), Measure::Grid(gb)) if ga.grid() == gb.grid() => {
                    let vals = ga.values().iter().zip(gb.values()).map(|(p, q)| (1.0 - s) * p + s * q).collect();
                    Measure::Grid(GridDensity::sub_probability(ga.grid().clone(), vals)?)
                }
                _ => {
                    return Err(Error::Invalid(
                        "cannot interpolate between states of different representation".into(),
                    ))
                }
            });
        }
        Ok(out)
    }

    /// `sup_{t, i} d1(self_t^i, other_t^i)` over the common nodes.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.times.len() != other.times.len() || self.species() != other.species() {
            return Err(Error::Invalid("trajectories are not on matching nodes".into()));
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.states.iter().zip(&other.states) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max(d1(x, y)?);
            }
        }
        Ok(worst)
    }

    /// Concatenates `next`, whose first node must coincide with this one's last.
    pub fn append(&mut self, next: Trajectory) -> Result<()> {
        if (next.start() - self.end()).abs() > 1e-9 * (1.0 + self.end().abs()) {
            return Err(Error::Invalid("trajectory windows do not join".into()));
        }
        match (&mut self.velocities, next.velocities) {
            (Some(mine), Some(theirs)) => {
                *mine.last_mut().unwrap() = theirs[0].clone();
                mine.extend(theirs.into_iter().skip(1));
            }
            (mine, _) => *mine = None,
        }
        self.times.extend(next.times.into_iter().skip(1));
        self.states.extend(next.states.into_iter().skip(1));
        Ok(())
    }

    /// Nodes restricted to a subset of indices (used for output snapshots).
    pub fn subsample(&self, nodes: &[usize]) -> Result<Trajectory> {
        let times = nodes.iter().map(|&k| self.times[k]).collect();
        let states = nodes.iter().map(|&k| self.states[k].clone()).collect();
        let mut out = Trajectory::new(times, states)?;
        if let Some(v) = &self.velocities {
            out.velocities = Some(nodes.iter().map(|&k| v[k].clone()).collect());
        }
        Ok(out)
    }

    pub fn species_path(&self, i: usize) -> impl Iterator<Item = (f64, &Measure)> + '_ {
        self.times.iter().copied().zip(self.states.iter().map(move |s| &s[i]))
    }
}
