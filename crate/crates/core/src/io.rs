//! Run configuration files, output directories and snapshot files.
//!
//! A run directory holds
//!
//! ```text
//! config.toml            copy of the input
//! summary.json           config hash, step counts, mass ledgers
//! trajectory.json        every recorded state
//! snapshots/times.csv    node index and time
//! snapshots/s{i}_{k}.csv species i at node k
//! certificate.json       entropy-pair certificate
//! report.txt             human-readable certificate summary
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dual_solver::{solve_dual, DualConfig, DualSolution, Probe};
use crate::error::{Error, Result};
use crate::fixed_point::{certify_entropy_pair, picard_solve, CertifyOptions, EntropyPairCertificate, PicardConfig};
use crate::measures::{Grid, GridDensity, Measure, ParticleMeasure};
use crate::primal_solver::{simulate, MassLedger, PrimalConfig, Representation};
use crate::scenarios::normal_cdf;
use crate::trajectory::Trajectory;
use crate::velocity::{InteractionKernel, KernelForm, VelocityField};

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

/// Top-level TOML schema of `simulate` and `dual`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub kernel: KernelSpec,
    pub solver: PrimalConfig,
    /// Present to solve by Picard iteration instead of the coupled integrator.
    #[serde(default)]
    pub picard: Option<PicardSpec>,
    pub species: Vec<SpeciesSpec>,
    #[serde(default)]
    pub certificate: CertificateSpec,
    #[serde(default)]
    pub dual: Option<DualSpec>,
}

/// `W_ij` listed row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub entries: Vec<KernelForm>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSpec {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub window: Option<f64>,
    pub auto_window: Option<bool>,
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub initial: InitialSpec,
}

/// Initial law of one species.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Dirac { point: Vec<f64> },
    /// Explicit atoms; `positions` is flat, weights default to uniform.
    Particles {
        #[serde(default = "one")]
        dim: usize,
        positions: Vec<f64>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// Isotropic normal law.
    Gaussian { mean: Vec<f64>, sd: f64, #[serde(default = "default_atoms")] atoms: usize },
    /// Uniform law on a box.
    Uniform { lower: Vec<f64>, upper: Vec<f64>, #[serde(default = "default_atoms")] atoms: usize },
}

fn one() -> usize {
    1
}

fn default_atoms() -> usize {
    200
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateSpec {
    #[serde(flatten)]
    pub options: CertifyOptions,
    /// Empty means the default bank for the dual grid.
    #[serde(default)]
    pub probes: Vec<Probe>,
}

/// Standalone backward problem for the `dual` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualSpec {
    /// Defaults to the solver horizon.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub diffusion: f64,
    pub grid: Grid,
    pub probe: Probe,
    pub field: FieldSpec,
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant { value: Vec<f64> },
    /// `E(x) = A x + b` with `A` row-major.
    Linear { matrix: Vec<f64>, offset: Vec<f64> },
    /// Field induced on `species` by the simulated system of this config.
    Induced { species: usize },
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = fs::read_to_string(path)?;
        Ok((Self::parse(&text)?, text))
    }

    fn validate(&self) -> Result<()> {
        let n = self.species.len();
        if n == 0 {
            return Err(Error::Config("at least one [[species]] is required".into()));
        }
        if self.kernel.entries.len() != n * n {
            return Err(Error::Config(format!(
                "kernel lists {} entries for {n} species (need {})",
                self.kernel.entries.len(),
                n * n
            )));
        }
        if let Some(g) = &self.solver.grid {
            Grid::new(g.lower().to_vec(), g.upper().to_vec(), g.cells().to_vec())?;
        }
        if self.solver.representation == Representation::Grid && self.solver.grid.is_none() {
            return Err(Error::Config("grid representation needs solver.grid".into()));
        }
        self.solver.validate(n)
    }

    pub fn kernel(&self) -> Result<InteractionKernel> {
        InteractionKernel::new(self.species.len(), self.kernel.entries.clone())
    }

    pub fn initial(&self) -> Result<Vec<Measure>> {
        self.species.iter().map(|s| s.initial.build(&self.solver)).collect()
    }

    /// Certificate options with the solver diffusion filled in.
    pub fn certify_options(&self) -> CertifyOptions {
        let mut options = self.certificate.options.clone();
        if options.diffusion.is_empty() {
            options.diffusion = self.solver.diffusion.clone();
        }
        options
    }

    pub fn picard_config(&self) -> Option<PicardConfig> {
        let spec = self.picard.as_ref()?;
        let mut config = PicardConfig::new(self.solver.clone());
        if let Some(v) = spec.tol {
            config.tol = v;
        }
        if let Some(v) = spec.max_iter {
            config.max_iter = v;
        }
        if let Some(v) = spec.auto_window {
            config.auto_window = v;
        }
        config.window = spec.window.or(config.window);
        config.radius = spec.radius.or(config.radius);
        Some(config)
    }
}

impl InitialSpec {
    fn particles(&self) -> Result<ParticleMeasure> {
        match self {
            InitialSpec::Dirac { point } => Ok(ParticleMeasure::dirac(point)),
            InitialSpec::Particles { dim, positions, weights } => {
                let n = positions.len() / (*dim).max(1);
                let weights = weights.clone().unwrap_or_else(|| vec![1.0; n]);
                ParticleMeasure::normalized(*dim, weights, positions.clone())
            }
            InitialSpec::Gaussian { mean, sd, atoms } => {
                check_sd(*sd)?;
                let axis = axis_atoms(*atoms, mean.len());
                let q = |u: f64| normal_quantile(u) * sd;
                product_quantiles(mean, &vec![axis; mean.len()], q)
            }
            InitialSpec::Uniform { lower, upper, atoms } => {
                if lower.len() != upper.len() {
                    return Err(Error::Dimension { expected: lower.len(), got: upper.len() });
                }
                let axis = axis_atoms(*atoms, lower.len());
                let mut positions = Vec::new();
                for k in 0..axis.pow(lower.len() as u32) {
                    for a in 0..lower.len() {
                        let i = (k / axis.pow(a as u32)) % axis;
                        let u = (i as f64 + 0.5) / axis as f64;
                        positions.push(lower[a] + u * (upper[a] - lower[a]));
                    }
                }
                let n = positions.len() / lower.len();
                ParticleMeasure::new(lower.len(), vec![1.0 / n as f64; n], positions)
            }
        }
    }

    /// Builds the law in the representation of `solver`.
    pub fn build(&self, solver: &PrimalConfig) -> Result<Measure> {
        match (solver.representation, &solver.grid) {
            (Representation::Grid, Some(grid)) => {
                let density = match self {
                    InitialSpec::Gaussian { mean, sd, .. } if grid.dim() == 1 && mean.len() == 1 => {
                        check_sd(*sd)?;
                        GridDensity::from_cdf(grid.clone(), |x| normal_cdf(x, mean[0], *sd))?
                    }
                    InitialSpec::Gaussian { mean, sd, .. } => {
                        check_sd(*sd)?;
                        GridDensity::from_fn(grid.clone(), |x| {
                            let r2: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
                            (-r2 / (2.0 * sd * sd)).exp()
                        })?
                    }
                    InitialSpec::Uniform { lower, upper, .. } if grid.dim() == 1 => {
                        let (lo, hi) = (lower[0], upper[0]);
                        GridDensity::from_cdf(grid.clone(), |x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))?
                    }
                    other => GridDensity::deposit(grid.clone(), &other.particles()?)?,
                };
                Ok(Measure::Grid(density))
            }
            _ => Ok(Measure::Particles(self.particles()?)),
        }
    }
}

fn check_sd(sd: f64) -> Result<()> {
    if sd.is_finite() && sd > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("standard deviation must be positive, got {sd}")))
    }
}

fn axis_atoms(atoms: usize, dim: usize) -> usize {
    let per = (atoms.max(1) as f64).powf(1.0 / dim.max(1) as f64).round() as usize;
    per.max(1)
}

fn product_quantiles(mean: &[f64], per_axis: &[usize], q: impl Fn(f64) -> f64) -> Result<ParticleMeasure> {
    let dim = mean.len();
    let total: usize = per_axis.iter().product();
    let mut positions = Vec::with_capacity(total * dim);
    for k in 0..total {
        let mut rest = k;
        for a in 0..dim {
            let i = rest % per_axis[a];
            rest /= per_axis[a];
            positions.push(mean[a] + q((i as f64 + 0.5) / per_axis[a] as f64));
        }
    }
    ParticleMeasure::new(dim, vec![1.0 / total as f64; total], positions)
}

/// Standard normal quantile by bisection on the CDF.
pub fn normal_quantile(u: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid, 0.0, 1.0) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Outcome of the forward solve of a config.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub ledgers: Vec<MassLedger>,
    pub steps: usize,
    pub picard_iterations: Option<usize>,
}

pub fn run_simulation(config: &RunConfig) -> Result<Simulation> {
    let kernel = config.kernel()?;
    let mu0 = config.initial()?;
    match config.picard_config() {
        Some(picard) => {
            let sol = picard_solve(&picard, &kernel, &mu0)?;
            let steps = sol.trajectory.len().saturating_sub(1);
            Ok(Simulation {
                trajectory: sol.trajectory,
                ledgers: sol.ledgers,
                steps,
                picard_iterations: Some(sol.state.iterate),
            })
        }
        None => {
            let run = simulate(&config.solver, &kernel, &mu0)?;
            Ok(Simulation { trajectory: run.trajectory, ledgers: run.ledgers, steps: run.steps, picard_iterations: None })
        }
    }
}

pub fn certify_run(config: &RunConfig, trajectory: &Trajectory) -> Result<EntropyPairCertificate> {
    certify_entropy_pair(trajectory, &config.kernel()?, &config.certificate.probes, &config.certify_options())
}

pub fn run_dual(config: &RunConfig) -> Result<DualSolution> {
    let spec = config.dual.as_ref().ok_or_else(|| Error::Config("config has no [dual] table".into()))?;
    let grid = Grid::new(spec.grid.lower().to_vec(), spec.grid.upper().to_vec(), spec.grid.cells().to_vec())?;
    let dim = grid.dim();
    let field = match &spec.field {
        FieldSpec::Zero => VelocityField::zero(dim),
        FieldSpec::Constant { value } => VelocityField::constant(value.clone()),
        FieldSpec::Linear { matrix, offset } => VelocityField::linear(matrix.clone(), offset.clone())?,
        FieldSpec::Induced { species } => {
            let sim = run_simulation(config)?;
            VelocityField::induced(config.kernel()?, *species, Arc::new(sim.trajectory))?
        }
    };
    if field.dim() != dim {
        return Err(Error::Dimension { expected: dim, got: field.dim() });
    }
    let mut dual = DualConfig::new(spec.horizon.unwrap_or(config.solver.horizon), spec.diffusion, grid.clone());
    dual.snapshots = spec.snapshots.clone();
    solve_dual(&dual, &field, &spec.probe.sample(&grid)?)
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub species: usize,
    pub representation: Representation,
    pub horizon: f64,
    pub steps: usize,
    pub nodes: usize,
    pub picard_iterations: Option<usize>,
    pub ledgers: Vec<MassLedger>,
    pub final_means: Vec<Vec<f64>>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes config copy, summary, trajectory and snapshots into `dir`.
pub fn write_run(dir: &Path, config_text: &str, config: &RunConfig, sim: &Simulation) -> Result<RunSummary> {
    fs::create_dir_all(dir.join("snapshots"))?;
    fs::write(dir.join("config.toml"), config_text)?;
    let traj = &sim.trajectory;
    let summary = RunSummary {
        config_hash: config_hash(config_text),
        species: traj.species(),
        representation: config.solver.representation,
        horizon: config.solver.horizon,
        steps: sim.steps,
        nodes: traj.len(),
        picard_iterations: sim.picard_iterations,
        ledgers: sim.ledgers.clone(),
        final_means: traj.last().iter().map(Measure::mean).collect(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("trajectory.json"), traj)?;

    let mut times = csv::Writer::from_path(dir.join("snapshots/times.csv"))?;
    times.write_record(["node", "t"])?;
    for (k, t) in traj.times().iter().enumerate() {
        times.write_record([k.to_string(), t.to_string()])?;
        for (i, mu) in traj.state(k).iter().enumerate() {
            write_measure_csv(&dir.join(format!("snapshots/s{i}_{k:05}.csv")), mu)?;
        }
    }
    times.flush()?;
    Ok(summary)
}

pub fn write_certificate(dir: &Path, cert: &EntropyPairCertificate) -> Result<()> {
    write_json(&dir.join("certificate.json"), cert)?;
    fs::write(dir.join("report.txt"), certificate_report(cert))?;
    Ok(())
}

pub fn certificate_report(cert: &EntropyPairCertificate) -> String {
    let mut out = format!(
        "entropy-pair certificate: {}\nmetric {}, {} records, max residual {:.3e}\n",
        if cert.passed { "PASS" } else { "FAIL" },
        cert.metric,
        cert.records.len(),
        cert.max_residual
    );
    out += "horizon\tspecies\tresidual\ttolerance\tpassed\tprobe\n";
    for r in &cert.records {
        out += &format!(
            "{}\t{}\t{:.3e}\t{:.3e}\t{}\t{:?}\n",
            r.horizon, r.species, r.residual, r.tolerance, r.passed, r.probe
        );
    }
    out
}

pub fn load_trajectory(dir: &Path) -> Result<Trajectory> {
    read_json(&dir.join("trajectory.json"))
}

/// Particle files have columns `weight,x[,y]`; grid files `x[,y],density`.
pub fn write_measure_csv(path: &Path, mu: &Measure) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let axes = ["x", "y"];
    match mu {
        Measure::Particles(p) => {
            let mut header = vec!["weight"];
            header.extend(&axes[..p.dim()]);
            w.write_record(&header)?;
            for (weight, x) in p.atoms() {
                let mut row = vec![weight.to_string()];
                row.extend(x.iter().map(f64::to_string));
                w.write_record(&row)?;
            }
        }
        Measure::Grid(g) => {
            let grid = g.grid();
            let mut header: Vec<&str> = axes[..grid.dim()].to_vec();
            header.push("density");
            w.write_record(&header)?;
            for (k, v) in g.values().iter().enumerate() {
                let c = grid.center(k);
                let mut row: Vec<String> = c[..grid.dim()].iter().map(f64::to_string).collect();
                row.push(v.to_string());
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_measure_csv(path: &Path) -> Result<Measure> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let rows: Vec<Vec<f64>> = r
        .records()
        .map(|rec| {
            rec?.iter()
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Invalid(format!("{}: {e}", path.display()))))
                .collect()
        })
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::Invalid(format!("{} has no rows", path.display())));
    }
    let cols = header.len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Invalid(format!("{}: ragged rows", path.display())));
    }
    if header.first().map(String::as_str) == Some("weight") && (2..=3).contains(&cols) {
        let dim = cols - 1;
        let weights = rows.iter().map(|r| r[0]).collect();
        let positions = rows.iter().flat_map(|r| r[1..].to_vec()).collect();
        return Ok(Measure::Particles(ParticleMeasure::normalized(dim, weights, positions)?));
    }
    if header.last().map(String::as_str) == Some("density") && (2..=3).contains(&cols) {
        let dim = cols - 1;
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut cells = Vec::new();
        for a in 0..dim {
            let mut cs: Vec<f64> = rows.iter().map(|r| r[a]).collect();
            cs.sort_by(f64::total_cmp);
            cs.dedup();
            let h = if cs.len() > 1 { cs[1] - cs[0] } else { 1.0 };
            lower.push(cs[0] - h / 2.0);
            upper.push(cs[cs.len() - 1] + h / 2.0);
            cells.push(cs.len());
        }
        let grid = Grid::new(lower, upper, cells)?;
        if grid.len() != rows.len() {
            return Err(Error::Invalid(format!("{}: cell centers do not form a full grid", path.display())));
        }
        let mut values = vec![0.0; grid.len()];
        for row in &rows {
            let mut idx = [0usize; 2];
            for a in 0..dim {
                let s = (row[a] - grid.lower()[a]) / grid.spacing(a) - 0.5;
                idx[a] = s.round().clamp(0.0, (grid.cells()[a] - 1) as f64) as usize;
            }
            values[grid.flat_index(idx)] = row[dim];
        }
        return Ok(Measure::Grid(GridDensity::normalized(grid, values)?));
    }
    Err(Error::Invalid(format!(
        "{}: header must be weight,x[,y] or x[,y],density, got {header:?}",
        path.display()
    )))
}

/// Writes `dual.csv` (cell centers and one `psi` column per snapshot) and
/// `dual_history.json` into `dir`.
pub fn write_dual(dir: &Path, sol: &DualSolution) -> Result<()> {
    fs::create_dir_all(dir)?;
    let grid = &sol.grid;
    let mut w = csv::Writer::from_path(dir.join("dual.csv"))?;
    let mut header: Vec<String> = ["x", "y"][..grid.dim()].iter().map(|s| s.to_string()).collect();
    header.extend(sol.snapshots.iter().map(|(s, _)| format!("psi_{s}")));
    w.write_record(&header)?;
    for k in 0..grid.len() {
        let c = grid.center(k);
        let mut row: Vec<String> = c[..grid.dim()].iter().map(f64::to_string).collect();
        row.extend(sol.snapshots.iter().map(|(_, psi)| psi[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    write_json(&dir.join("dual_history.json"), &sol.history)
}
