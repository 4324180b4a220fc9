use dualflow::dual_solver::Probe;
use dualflow::fixed_point::{
    certify_entropy_pair, certify_with_fields, continuous_dependence_check, picard_solve, picard_window,
    CertifyOptions, PicardConfig,
};
use dualflow::measures::{d1_1d, Grid, GridDensity, Measure, ParticleMeasure};
use dualflow::primal_solver::{frozen_field_flow, solve_grid, solve_particles, PrimalConfig};
use dualflow::velocity::{InteractionKernel, KernelForm, VelocityField};
use dualflow::Error;

fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + libm::erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
}

fn gaussian_setup(amplitude: f64) -> (InteractionKernel, PrimalConfig, Vec<Measure>) {
    let kernel = InteractionKernel::single(KernelForm::Gaussian { amplitude, sigma: 0.5 }).unwrap();
    let grid = Grid::line(-6.0, 6.0, 240).unwrap();
    let mu0 = GridDensity::from_cdf(grid.clone(), |x| normal_cdf(x, 0.3, 0.6)).unwrap();
    (kernel, PrimalConfig::grid(1.0, grid, vec![0.05]), vec![mu0.into()])
}

#[test]
fn zero_kernel_is_fixed_after_one_pass() {
    let grid = Grid::line(-4.0, 4.0, 100).unwrap();
    let mu0 = GridDensity::from_cdf(grid.clone(), |x| normal_cdf(x, 0.0, 0.5)).unwrap();
    let cfg = PicardConfig::new(PrimalConfig::grid(0.5, grid, vec![0.1]));
    let sol = picard_solve(&cfg, &InteractionKernel::zero(1), &[mu0.into()]).unwrap();
    let w = &sol.state.windows[0];
    assert_eq!(w.iterations, 2);
    assert!(w.distances[0] > 0.0);
    assert_eq!(w.distances[1], 0.0);

    let atoms = ParticleMeasure::from_quantiles(20, |u| u).unwrap();
    let cfg = PicardConfig::new(PrimalConfig::particles(1.0, 0.1));
    let sol = picard_solve(&cfg, &InteractionKernel::zero(1), &[atoms.into()]).unwrap();
    assert_eq!(sol.state.windows[0].iterations, 1);
    assert!(sol.state.windows[0].contraction().is_none());
}

#[test]
fn picard_two_atoms_match_closed_form() {
    let kernel = InteractionKernel::single(KernelForm::Quadratic { a: 1.0 }).unwrap();
    let atoms = ParticleMeasure::new(1, vec![0.5, 0.5], vec![-1.0, 1.0]).unwrap();
    let mut cfg = PicardConfig::new(PrimalConfig::particles(1.0, 0.01));
    cfg.tol = 1e-9;
    let sol = picard_solve(&cfg, &kernel, &[atoms.clone().into()]).unwrap();
    for (t, m) in sol.trajectory.species_path(0) {
        let p = m.as_particles().unwrap().positions();
        assert!((p[1] - (-t).exp()).abs() <= cfg.tol + 1e-6, "t {t}: {p:?}");
        assert!((p[0] + (-t).exp()).abs() <= cfg.tol + 1e-6);
    }
    let direct = solve_particles(&cfg.primal, &kernel, &[atoms]).unwrap();
    assert!(d1_1d(&direct.trajectory.last()[0], &sol.trajectory.last()[0]).unwrap() < 1e-6);
}

#[test]
fn window_contraction_scales_with_length() {
    let (kernel, primal, mu0) = gaussian_setup(1.0);
    let cfg = PicardConfig::new(primal);
    let long = picard_window(&cfg, &kernel, &mu0, 0.0, 0.5).unwrap().contraction().unwrap();
    let short = picard_window(&cfg, &kernel, &mu0, 0.0, 0.25).unwrap().contraction().unwrap();
    println!("contraction T2 = 0.5: {long}, T2 = 0.25: {short}");
    assert!(long < 0.8);
    assert!((1.5..=2.6).contains(&(long / short)), "ratio factor {}", long / short);
}

#[test]
fn picard_reproduces_coupled_grid_run() {
    let (kernel, primal, mu0) = gaussian_setup(4.0);
    let mut cfg = PicardConfig::new(primal.clone());
    cfg.tol = 1e-12;
    let sol = picard_solve(&cfg, &kernel, &mu0).unwrap();
    assert!(sol.state.windows.iter().all(|w| w.contraction().map_or(true, |r| r < 0.8)));
    assert!(sol.state.radii.iter().all(|r| *r <= sol.state.radius));
    let grid_mu0: Vec<GridDensity> = mu0.iter().map(|m| m.as_grid().unwrap().clone()).collect();
    let direct = solve_grid(&primal, &kernel, &grid_mu0).unwrap();
    let gap = d1_1d(&direct.trajectory.last()[0], &sol.trajectory.last()[0]).unwrap();
    println!("windows {:?}, gap {gap}", sol.state.windows.iter().map(|w| (w.length, w.iterations)).collect::<Vec<_>>());
    assert!(gap < 1e-3, "gap {gap}");
    assert!(sol.ledgers[0].min_value >= 0.0);
}

#[test]
fn picard_failures_are_typed() {
    let (kernel, primal, mu0) = gaussian_setup(4.0);
    let mut cfg = PicardConfig::new(primal.clone());
    cfg.radius = Some(0.01);
    assert!(matches!(picard_solve(&cfg, &kernel, &mu0), Err(Error::BallEscape { .. })));

    let mut cfg = PicardConfig::new(primal);
    cfg.auto_window = false;
    cfg.max_iter = 2;
    match picard_solve(&cfg, &kernel, &mu0) {
        Err(Error::NonContraction { iterations, ratios }) => {
            assert_eq!(iterations, 2);
            assert_eq!(ratios.len(), 1);
        }
        other => panic!("expected non-contraction, got {other:?}"),
    }
}

#[test]
fn constant_field_certificate() {
    let c = 0.7;
    let atoms = ParticleMeasure::from_quantiles(64, |u| -0.5 + u).unwrap();
    let field = VelocityField::constant(vec![c]);
    let run = frozen_field_flow(&PrimalConfig::particles(1.0, 0.05), &[field.clone()], &[atoms.into()]).unwrap();
    let options = CertifyOptions { grid: Some(Grid::line(-3.0, 3.0, 256).unwrap()), ..Default::default() };
    let cert = certify_with_fields(&run.trajectory, &[field], &[], &options).unwrap();
    assert_eq!(cert.records.len(), 8);
    assert!(cert.passed, "{:#?}", cert.failures().collect::<Vec<_>>());
    for r in &cert.records {
        if matches!(r.probe, Probe::Constant { .. }) {
            assert!(r.residual <= 1e-10);
        }
        if let Some(v) = r.max_principle_violation {
            assert!(v <= 1e-12);
        }
    }
}

#[test]
fn newtonian_dirac_certificate_reports_lipschitz_blow_up() {
    let mut lips = Vec::new();
    for k in [1.0, 1e2, 1e4] {
        let kernel = InteractionKernel::single(KernelForm::SmoothedNewtonian { k }).unwrap();
        let run = solve_particles(&PrimalConfig::particles(1.0, 0.05), &kernel, &[ParticleMeasure::dirac(&[0.0])]).unwrap();
        let options = CertifyOptions { grid: Some(Grid::line(-3.0, 3.0, 400).unwrap()), ..Default::default() };
        let probe = Probe::Coordinate { axis: 0 };
        let cert = certify_entropy_pair(&run.trajectory, &kernel, &[probe], &options).unwrap();
        assert!(cert.max_residual < 1e-6, "k {k}: {}", cert.max_residual);
        lips.push(cert.records[0].final_lipschitz);
    }
    assert!(lips[0] < lips[1] && lips[1] < lips[2], "{lips:?}");
    assert!(lips[2] > 10.0 * lips[0], "{lips:?}");
}

#[test]
fn continuous_dependence_reports() {
    let atoms = ParticleMeasure::from_quantiles(40, |u| u).unwrap();
    let shifted = atoms.translated(&[0.25]).unwrap();
    let cfg = PrimalConfig::particles(1.0, 0.05);

    let zero = InteractionKernel::zero(1);
    let a = solve_particles(&cfg, &zero, &[atoms.clone()]).unwrap();
    let same = continuous_dependence_check(&a.trajectory, &a.trajectory, &zero).unwrap();
    assert_eq!(same.initial_distance, 0.0);
    assert!(same.distances.iter().all(|d| d.1 == 0.0) && !same.flagged);
    let b = solve_particles(&cfg, &zero, &[shifted.clone()]).unwrap();
    let report = continuous_dependence_check(&a.trajectory, &b.trajectory, &zero).unwrap();
    assert!(report.ratios.iter().all(|r| (r.1 - 1.0).abs() < 1e-12));

    let quad = InteractionKernel::single(KernelForm::Quadratic { a: 1.0 }).unwrap();
    let a = solve_particles(&cfg, &quad, &[atoms]).unwrap();
    let b = solve_particles(&cfg, &quad, &[shifted]).unwrap();
    let report = continuous_dependence_check(&a.trajectory, &b.trajectory, &quad).unwrap();
    assert!(report.distances.iter().all(|d| (d.1 - 0.25).abs() < 1e-9), "{:?}", report.distances);
    assert!(!report.flagged);
}

#[test]
fn long_horizon_windows_are_halved() {
    let (kernel, mut primal, mu0) = gaussian_setup(80.0);
    primal.horizon = 0.5;
    let sol = picard_solve(&PicardConfig::new(primal), &kernel, &mu0).unwrap();
    let w = &sol.state.windows;
    assert!(w[0].halvings >= 1);
    assert!(w.iter().all(|w| w.max_ratio().map_or(true, |r| r < 0.8)));
    assert!((sol.trajectory.end() - 0.5).abs() < 1e-12);
    assert!(!sol.state.non_monotone);
}
