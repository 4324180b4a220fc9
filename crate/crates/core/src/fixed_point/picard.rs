use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{d1, Measure};
use crate::primal_solver::{frozen_field_flow, MassLedger, PrimalConfig, Representation};
use crate::trajectory::Trajectory;
use crate::velocity::{InteractionKernel, VelocityField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub primal: PrimalConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Window length; `None` starts from the full horizon.
    #[serde(default)]
    pub window: Option<f64>,
    /// Halve the window whenever a successive-distance ratio reaches `ratio_target`.
    #[serde(default = "default_true")]
    pub auto_window: bool,
    #[serde(default = "default_ratio_target")]
    pub ratio_target: f64,
    #[serde(default = "default_min_window")]
    pub min_window: f64,
    /// Radius of the first-moment ball; `None` picks `10 (1 + m0)(1 + T)`.
    #[serde(default)]
    pub radius: Option<f64>,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    60
}
fn default_true() -> bool {
    true
}
fn default_ratio_target() -> f64 {
    0.8
}
fn default_min_window() -> f64 {
    1e-3
}

impl PicardConfig {
    pub fn new(primal: PrimalConfig) -> Self {
        Self {
            primal,
            tol: default_tol(),
            max_iter: default_max_iter(),
            window: None,
            auto_window: true,
            ratio_target: default_ratio_target(),
            min_window: default_min_window(),
            radius: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardWindow {
    pub start: f64,
    pub length: f64,
    pub iterations: usize,
    /// `sup_{t, i} d1` between successive iterates (the first against the frozen guess)
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    /// times the window was halved before this one was accepted
    pub halvings: usize,
}

impl PicardWindow {
    /// First successive-distance ratio, the measured contraction of the window map.
    pub fn contraction(&self) -> Option<f64> {
        self.ratios.first().copied()
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.ratios.iter().copied().reduce(f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardState {
    pub iterate: usize,
    pub distances: Vec<f64>,
    /// max first moment over nodes and species, per iterate
    pub radii: Vec<f64>,
    pub radius: f64,
    pub windows: Vec<PicardWindow>,
    /// which d1 evaluation produced the distances
    pub metric: String,
    /// set when some window saw a distance increase after its first iterate
    pub non_monotone: bool,
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub trajectory: Trajectory,
    pub state: PicardState,
    pub ledgers: Vec<MassLedger>,
}

pub fn metric_name(mu: &Measure) -> &'static str {
    if mu.dim() == 1 {
        "d1 via CDF difference (1D)"
    } else {
        "d1 via exact discrete transport"
    }
}

/// Iterates `mu -> S[mu0, -K[mu]]` on successive windows until the iterate
/// distance drops below `tol`.
pub fn picard_solve(config: &PicardConfig, kernel: &InteractionKernel, mu0: &[Measure]) -> Result<PicardSolution> {
    let primal = &config.primal;
    primal.validate(mu0.len())?;
    if kernel.species() != mu0.len() {
        return Err(Error::Config(format!(
            "kernel couples {} species, {} initial measures given",
            kernel.species(),
            mu0.len()
        )));
    }
    if !(config.tol > 0.0) || config.max_iter == 0 {
        return Err(Error::Config("Picard tolerance and iteration budget must be positive".into()));
    }
    for m in mu0 {
        m.check_normalized(1e-6)?;
    }
    let m0 = mu0.iter().map(|m| m.first_moment()).fold(0.0, f64::max);
    if !m0.is_finite() {
        return Err(Error::Config("initial first moment is not finite".into()));
    }
    let radius = config.radius.unwrap_or(10.0 * (1.0 + m0) * (1.0 + primal.horizon));

    let end = primal.end();
    let mut state = PicardState {
        iterate: 0,
        distances: Vec::new(),
        radii: Vec::new(),
        radius,
        windows: Vec::new(),
        metric: metric_name(&mu0[0]).to_string(),
        non_monotone: false,
    };
    let mut window = config.window.unwrap_or(primal.horizon).min(primal.horizon);
    let mut t = primal.start;
    let mut current = mu0.to_vec();
    let mut trajectory: Option<Trajectory> = None;
    let mut ledgers: Vec<Option<MassLedger>> = vec![None; mu0.len()];
    while t < end - 1e-12 * (1.0 + end.abs()) {
        let mut halvings = 0;
        let outcome = loop {
            let length = window.min(end - t);
            let can_halve = config.auto_window && length / 2.0 >= config.min_window;
            let stop_early = can_halve.then_some(config.ratio_target);
            match run_window(config, kernel, &current, t, length, radius, stop_early)? {
                WindowRun::Halve => {
                    window = length / 2.0;
                    halvings += 1;
                }
                WindowRun::Done(out) => break out,
            }
        };
        let WindowOutcome { trajectory: piece, mut record, radii, ledgers: piece_ledgers } = outcome;
        record.halvings = halvings;
        state.iterate += record.iterations;
        state.distances.extend(&record.distances);
        state.radii.extend(radii);
        state.non_monotone |= record.distances.windows(2).skip(1).any(|w| w[1] > w[0] * (1.0 + 1e-9));
        for (slot, l) in ledgers.iter_mut().zip(piece_ledgers) {
            *slot = Some(match slot.take() {
                None => l,
                Some(acc) => MassLedger {
                    initial: acc.initial,
                    final_mass: l.final_mass,
                    boundary_loss: acc.boundary_loss + l.boundary_loss,
                    max_step_defect: acc.max_step_defect.max(l.max_step_defect),
                    min_value: acc.min_value.min(l.min_value),
                },
            });
        }
        t = piece.end();
        current = piece.last().to_vec();
        match &mut trajectory {
            None => trajectory = Some(piece),
            Some(traj) => traj.append(piece)?,
        }
        state.windows.push(record);
    }
    Ok(PicardSolution {
        trajectory: trajectory.expect("at least one window"),
        state,
        ledgers: ledgers.into_iter().map(|l| l.unwrap_or_default()).collect(),
    })
}

/// Runs the Picard iteration on a single window `[start, start + length]` without halving.
pub fn picard_window(
    config: &PicardConfig,
    kernel: &InteractionKernel,
    mu0: &[Measure],
    start: f64,
    length: f64,
) -> Result<PicardWindow> {
    let m0 = mu0.iter().map(|m| m.first_moment()).fold(0.0, f64::max);
    let radius = config.radius.unwrap_or(10.0 * (1.0 + m0) * (1.0 + length));
    match run_window(config, kernel, mu0, start, length, radius, None)? {
        WindowRun::Done(out) => Ok(out.record),
        WindowRun::Halve => unreachable!("halving disabled"),
    }
}

struct WindowOutcome {
    trajectory: Trajectory,
    record: PicardWindow,
    radii: Vec<f64>,
    ledgers: Vec<MassLedger>,
}

enum WindowRun {
    Done(WindowOutcome),
    Halve,
}

fn window_config(config: &PicardConfig, kernel: &InteractionKernel, start: f64, length: f64) -> Result<PrimalConfig> {
    let mut cfg = config.primal.clone();
    cfg.start = start;
    cfg.horizon = length;
    if cfg.representation == Representation::Grid {
        // a step fixed a priori keeps the nodes identical across iterates
        let grid = cfg
            .grid
            .clone()
            .ok_or_else(|| Error::Config("grid representation requires a grid".into()))?;
        let diam = (0..grid.dim()).map(|a| (grid.upper()[a] - grid.lower()[a]).powi(2)).sum::<f64>().sqrt();
        let speed = kernel.velocity_bound(diam);
        let d_max = cfg.diffusion.iter().copied().fold(0.0, f64::max);
        let rate: f64 = (0..grid.dim())
            .map(|a| {
                let h = grid.spacing(a);
                speed / h + 2.0 * d_max / (h * h)
            })
            .sum();
        let mut dt = if rate > 0.0 { cfg.cfl / rate } else { length };
        if let Some(user) = config.primal.dt {
            dt = dt.min(user);
        }
        cfg.dt = Some(dt);
    }
    Ok(cfg)
}

fn run_window(
    config: &PicardConfig,
    kernel: &InteractionKernel,
    mu0: &[Measure],
    start: f64,
    length: f64,
    radius: f64,
    stop_early: Option<f64>,
) -> Result<WindowRun> {
    let cfg = window_config(config, kernel, start, length)?;
    let mut prev = Arc::new(Trajectory::frozen(vec![start, start + length], mu0.to_vec())?);
    let mut distances = Vec::new();
    let mut ratios = Vec::new();
    let mut radii = Vec::new();
    for iteration in 1..=config.max_iter {
        let fields: Vec<VelocityField> = (0..mu0.len())
            .map(|i| VelocityField::induced(kernel.clone(), i, prev.clone()))
            .collect::<Result<_>>()?;
        let run = frozen_field_flow(&cfg, &fields, mu0)?;
        let moment = run
            .trajectory
            .states()
            .iter()
            .flatten()
            .map(|m| m.first_moment())
            .fold(0.0, f64::max);
        radii.push(moment);
        if !(moment <= radius) {
            return Err(Error::BallEscape { moment, radius });
        }
        let distance = if iteration == 1 {
            let mut worst: f64 = 0.0;
            for s in run.trajectory.states() {
                for (a, b) in s.iter().zip(mu0) {
                    worst = worst.max(d1(a, b)?);
                }
            }
            worst
        } else {
            run.trajectory.sup_distance(&prev)?
        };
        if let Some(&last) = distances.last() {
            if last > 0.0 {
                ratios.push(distance / last);
            }
        }
        distances.push(distance);
        if distance < config.tol {
            let record = PicardWindow { start, length, iterations: iteration, distances, ratios, halvings: 0 };
            return Ok(WindowRun::Done(WindowOutcome {
                trajectory: run.trajectory,
                record,
                radii,
                ledgers: run.ledgers,
            }));
        }
        if let (Some(target), Some(&latest)) = (stop_early, ratios.last()) {
            if latest >= target {
                return Ok(WindowRun::Halve);
            }
        }
        prev = Arc::new(run.trajectory);
    }
    Err(Error::NonContraction { iterations: config.max_iter, ratios })
}
