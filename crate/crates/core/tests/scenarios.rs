use dualflow::measures::{d1_1d, Measure, ParticleMeasure};
use dualflow::primal_solver::PrimalConfig;
use dualflow::scenarios::{
    run_gradient_flow_comparison, run_heat, run_newtonian_diagram, run_scenario, run_two_species, ScenarioName,
    ScenarioOutcome, ScenarioParams,
};
use dualflow::velocity::KernelForm;
use dualflow::Error;

#[test]
fn newtonian_corners_disagree() {
    let ks = [1e2, 1e3, 1e4, 1e5];
    let ms = [1.0, 2.0, 4.0, 8.0];
    let d = run_newtonian_diagram(&ks, &ms, 1.0, 400).unwrap();
    // k first: the spread profile uniform[-1, 1], at distance 1/2 from delta_0
    assert!((d.k_first_to_dirac - 0.5).abs() < 0.02, "{}", d.k_first_to_dirac);
    assert_eq!(d.m_first_to_dirac, 0.0);
    assert!((0.45..=0.55).contains(&d.corner_gap));
    for r in &d.rows {
        assert_eq!(r.dirac_drift, 0.0);
    }
    for (m, inc) in &d.cauchy_increments {
        assert!(inc.windows(2).all(|w| w[1] < w[0]), "m = {m}: {inc:?}");
    }
    // at large k the start uniform[-1/m, 1/m] spreads to uniform[-(1/m + t), 1/m + t]
    for c in d.cells.iter().filter(|c| c.k == 1e5) {
        assert!((c.to_dirac - (1.0 / c.m + 1.0) / 2.0).abs() < 1e-3, "m = {}", c.m);
    }
    assert!(d.certificates.iter().all(|c| c.passed));
}

#[test]
fn newtonian_rejects_short_horizon() {
    assert!(matches!(run_newtonian_diagram(&[1e2], &[0.5], 1.0, 10), Err(Error::Config(_))));
    assert!(matches!(run_newtonian_diagram(&[], &[1.0], 1.0, 10), Err(Error::Config(_))));
}

#[test]
fn quadratic_gradient_flow_matches_closed_form() {
    let mu0 = ParticleMeasure::from_quantiles(16, |u| 2.0 * u - 1.0).unwrap();
    let r = run_gradient_flow_comparison(&KernelForm::Quadratic { a: 1.0 }, &mu0, 1.0, 0.01).unwrap();
    assert_eq!(r.reference, "closed form");
    assert!(r.sup_d2 <= 1e-6, "{}", r.sup_d2);
    assert!(r.support_confined());
    assert!(r.gradient_decays());
    assert!(r.certificate.passed);
}

#[test]
fn tabulated_linear_slope_is_the_quadratic_kernel() {
    // w'(r) = r on [0, 4] covers every pair distance
    let radii: Vec<f64> = (0..=8).map(|k| k as f64 * 0.5).collect();
    let form = KernelForm::TabulatedRadial { slopes: radii.clone(), radii };
    let mu0 = ParticleMeasure::new(1, vec![0.2, 0.3, 0.5], vec![-1.0, 0.2, 1.0]).unwrap();
    let tab = run_gradient_flow_comparison(&form, &mu0, 1.0, 0.01).unwrap();
    assert_eq!(tab.reference, "refined characteristics");
    assert!(tab.sup_d2 < 1e-8);
    assert!(tab.support_confined() && tab.gradient_decays());
    assert!(tab.certificate.passed);
}

#[test]
fn non_convex_kernel_is_refused() {
    let mu0 = ParticleMeasure::dirac(&[0.0]);
    let err = run_gradient_flow_comparison(&KernelForm::SmoothedNewtonian { k: 10.0 }, &mu0, 1.0, 0.01);
    assert!(matches!(err, Err(Error::Scenario(_))));
    let err = run_gradient_flow_comparison(&KernelForm::Quadratic { a: -1.0 }, &mu0, 1.0, 0.01);
    assert!(matches!(err, Err(Error::Scenario(_))));
}

fn two_atoms(x: f64) -> ParticleMeasure {
    ParticleMeasure::new(1, vec![0.5, 0.5], vec![x - 0.25, x + 0.25]).unwrap()
}

#[test]
fn two_species_means_follow_linear_system() {
    let b = 0.7;
    let (m1, m2) = (-1.2, 0.4);
    let r = run_two_species(
        KernelForm::Quadratic { a: 1.0 },
        KernelForm::Quadratic { a: 2.0 },
        KernelForm::Quadratic { a: b },
        [two_atoms(m1).into(), two_atoms(m2).into()],
        PrimalConfig::particles(1.0, 0.01),
    )
    .unwrap();
    // self terms cancel in the mean; m1 + m2 is conserved and m1 - m2 decays at 2b
    for &(t, a, c) in &r.means {
        let diff = (m1 - m2) * (-2.0 * b * t).exp();
        let sum = m1 + m2;
        assert!((a - (sum + diff) / 2.0).abs() < 1e-5, "t = {t}");
        assert!((c - (sum - diff) / 2.0).abs() < 1e-5, "t = {t}");
    }
    assert!(r.mirror_gap.is_none());
    assert!(r.certificate.passed);
}

#[test]
fn zero_cross_kernel_decouples() {
    let h = KernelForm::Quadratic { a: 1.0 };
    let config = PrimalConfig::particles(1.0, 0.01);
    let coupled = run_two_species(
        h.clone(),
        h.clone(),
        KernelForm::Zero,
        [two_atoms(-1.0).into(), two_atoms(2.0).into()],
        config.clone(),
    )
    .unwrap();
    let traj = coupled.trajectory.unwrap();
    // each species contracts about its own mean: spread 0.25 e^{-t}
    let last = traj.last();
    for (s, x) in [(0, -1.0), (1, 2.0)] {
        let exact = ParticleMeasure::new(1, vec![0.5, 0.5], vec![x - 0.25 / 1f64.exp(), x + 0.25 / 1f64.exp()]).unwrap();
        assert!(d1_1d(&last[s], &Measure::Particles(exact)).unwrap() < 1e-6);
    }
}

#[test]
fn identical_species_stay_identical() {
    let h = KernelForm::Quadratic { a: 1.0 };
    let mu = Measure::from(two_atoms(0.3));
    let r = run_two_species(h.clone(), h.clone(), h, [mu.clone(), mu], PrimalConfig::particles(0.5, 0.01)).unwrap();
    let traj = r.trajectory.unwrap();
    for s in traj.states() {
        assert!(d1_1d(&s[0], &s[1]).unwrap() < 1e-14);
    }
}

#[test]
fn mirrored_default_is_symmetric() {
    let out = run_scenario(ScenarioName::TwoSpecies, &ScenarioParams::default()).unwrap();
    let ScenarioOutcome::TwoSpecies(r) = &out else { panic!() };
    assert!(r.mirror_gap.unwrap() < 1e-12);
    let (_, a, c) = *r.means.last().unwrap();
    assert!((a + (-1.0f64).exp()).abs() < 1e-5 && (c - (-1.0f64).exp()).abs() < 1e-5);
    assert!(out.passed());
}

#[test]
fn heat_scenario_converges() {
    let coarse = run_heat(0.1, 1.0, 128).unwrap();
    let fine = run_heat(0.1, 1.0, 512).unwrap();
    assert!(fine.d1_error < coarse.d1_error);
    assert!(fine.d1_error <= 2e-3);
    assert!(fine.certificate.passed);
}

#[test]
fn audit_suite_envelopes_hold() {
    let out = run_scenario(ScenarioName::AuditSuite, &ScenarioParams::default()).unwrap();
    let ScenarioOutcome::AuditSuite(r) = &out else { panic!() };
    assert!(r.passed());
    assert!(r.max_gradient <= 1.05 && r.max_weighted <= 1.05 && r.max_continuous_dependence <= 1.05);
    let heat = r.heat_order.unwrap();
    let transport = r.transport_order.unwrap();
    assert!((0.35..0.75).contains(&heat), "{heat}");
    assert!((0.85..1.15).contains(&transport), "{transport}");
    // the L2 audits only exist with diffusion
    assert!(r.cases.iter().all(|c| c.l2_gradient.is_some() == (c.diffusion > 0.0)));
}

#[test]
fn scenario_params_parse_and_check() {
    let p = ScenarioParams::parse("k=1:10, m=2").unwrap();
    assert_eq!(p.list("k", &[]), vec![1.0, 10.0]);
    assert_eq!(p.value("m", 0.0).unwrap(), 2.0);
    assert!(p.value("k", 0.0).is_err());
    assert!(ScenarioParams::parse("k").is_err());
    assert!(ScenarioParams::parse("k=x").is_err());
    assert!(matches!(ScenarioName::parse("nope"), Err(Error::Scenario(_))));
    let bad = ScenarioParams::parse("zzz=1").unwrap();
    assert!(matches!(run_scenario(ScenarioName::Heat, &bad), Err(Error::Config(_))));
    for n in ScenarioName::ALL {
        assert_eq!(ScenarioName::parse(n.as_str()).unwrap(), n);
    }
}
