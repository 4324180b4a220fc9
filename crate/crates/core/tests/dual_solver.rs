use dualflow::dual_solver::*;
use dualflow::measures::Grid;
use dualflow::velocity::VelocityField;
use dualflow::Error;

fn line(lo: f64, hi: f64, n: usize) -> Grid {
    Grid::line(lo, hi, n).unwrap()
}

fn bump(c: f64, r: f64) -> Probe {
    Probe::Bump { center: vec![c], radius: r }
}

fn centers(grid: &Grid) -> Vec<f64> {
    (0..grid.len()).map(|k| grid.center(k)[0]).collect()
}

#[test]
fn zero_field_without_diffusion_is_stationary() {
    let grid = line(-3.0, 3.0, 120);
    let psi0 = bump(0.3, 1.0).sample(&grid).unwrap();
    let mut cfg = DualConfig::new(1.0, 0.0, grid);
    cfg.max_step = Some(0.1);
    let sol = solve_dual(&cfg, &VelocityField::zero(1), &psi0).unwrap();
    assert_eq!(sol.last(), psi0.as_slice());
}

fn shift_error(n: usize) -> f64 {
    let c = 0.5;
    let grid = line(-4.0, 4.0, n);
    let probe = bump(0.0, 1.0);
    let sol = solve_dual(&DualConfig::new(1.0, 0.0, grid.clone()), &VelocityField::constant(vec![c]), &probe.sample(&grid).unwrap())
        .unwrap();
    centers(&grid)
        .iter()
        .zip(sol.last())
        .map(|(y, v)| (v - probe.eval(&[y + c])).abs())
        .fold(0.0, f64::max)
}

#[test]
fn constant_field_shift_converges_at_first_order() {
    let errs: Vec<f64> = [100, 200, 400].iter().map(|&n| shift_error(n)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 0.8, "errors {errs:?}");
    }
    // error <= C dx with C of order one
    assert!(errs[2] <= 2.0 * 8.0 / 400.0, "{errs:?}");
}

#[test]
fn newtonian_field_pushes_characteristics_away_from_origin() {
    let k = 1e4;
    let grid = line(-4.0, 4.0, 1600);
    let probe = Probe::Hat { center: vec![0.5], radius: 1.5 };
    let sol = solve_dual(&DualConfig::new(1.0, 0.0, grid.clone()), &VelocityField::newtonian_point(1, k), &probe.sample(&grid).unwrap())
        .unwrap();
    let band = 1.0 / k.sqrt() + 0.1;
    for (y, v) in centers(&grid).iter().zip(sol.last()) {
        if y.abs() > band {
            let exact = probe.eval(&[y + y.signum()]);
            assert!((v - exact).abs() < 0.03, "y = {y}: {v} vs {exact}");
        }
    }
}

#[test]
fn discrete_maximum_principle_and_positivity() {
    let grid = line(-3.0, 3.0, 300);
    let fields = [
        VelocityField::constant(vec![0.8]),
        VelocityField::linear(vec![1.0], vec![0.0]).unwrap(),
        VelocityField::newtonian_point(1, 100.0),
        VelocityField::from_fn(1, |t, x, o| o[0] = (2.0 * x[0] + t).sin()),
    ];
    for probe in [bump(0.0, 1.0), Probe::Hat { center: vec![-0.4], radius: 0.7 }] {
        assert!(probe.flat_near_boundary(&grid, 2));
        let psi0 = probe.sample(&grid).unwrap();
        let (lo, hi) = psi0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        for field in &fields {
            for d in [0.0, 0.05] {
                let sol = solve_dual(&DualConfig::new(1.0, d, grid.clone()), field, &psi0).unwrap();
                for h in &sol.history {
                    assert!(h.min >= lo - 1e-12 && h.max <= hi + 1e-12, "{h:?}");
                    assert!(h.min >= -1e-12);
                    assert!(h.sup <= psi0.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1e-8);
                    assert!(h.cfl_usage <= 1.0 + 1e-12);
                }
            }
        }
    }
}

#[test]
fn constants_are_preserved_exactly() {
    let grid = line(-2.0, 2.0, 64);
    let field = VelocityField::from_fn(1, |t, x, o| o[0] = x[0] * x[0] - t);
    let sol = solve_dual(&DualConfig::new(1.0, 0.2, grid.clone()), &field, &vec![1.0; 64]).unwrap();
    for (_, snap) in &sol.snapshots {
        assert!(snap.iter().all(|v| *v == 1.0));
    }
}

#[test]
fn comparison_and_linearity() {
    let grid = line(-3.0, 3.0, 150);
    let field = VelocityField::from_fn(1, |t, x, o| o[0] = (x[0] - 0.2 * t).tanh());
    let cfg = DualConfig::new(0.8, 0.03, grid.clone());
    let a = bump(0.0, 1.0).sample(&grid).unwrap();
    let b = Probe::Hat { center: vec![0.5], radius: 1.0 }.sample(&grid).unwrap();
    let upper: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
    let sa = solve_dual(&cfg, &field, &a).unwrap();
    let sb = solve_dual(&cfg, &field, &b).unwrap();
    let su = solve_dual(&cfg, &field, &upper).unwrap();
    for k in 0..grid.len() {
        assert!(sa.last()[k] <= su.last()[k] + 1e-15);
        assert!(sb.last()[k] <= su.last()[k] + 1e-15);
    }
    let (alpha, beta) = (2.5, -0.75);
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
    let sm = solve_dual(&cfg, &field, &mix).unwrap();
    for k in 0..grid.len() {
        let lin = alpha * sa.last()[k] + beta * sb.last()[k];
        assert!((sm.last()[k] - lin).abs() < 1e-12);
    }
}

#[test]
fn cfl_outside_unit_interval_is_rejected() {
    let mut cfg = DualConfig::new(1.0, 0.0, line(0.0, 1.0, 10));
    cfg.cfl = 1.5;
    assert!(matches!(solve_dual(&cfg, &VelocityField::zero(1), &[0.0; 10]), Err(Error::Config(_))));
}

#[test]
fn nan_field_is_a_kernel_error() {
    let cfg = DualConfig::new(1.0, 0.0, line(0.0, 1.0, 10));
    let field = VelocityField::from_fn(1, |_, _, o| o[0] = f64::NAN);
    assert!(matches!(solve_dual(&cfg, &field, &[0.0; 10]), Err(Error::KernelEval(_))));
}

#[test]
fn gradient_audit_examples() {
    let k = AuditConstants::default();
    let grid = line(-4.0, 4.0, 400);
    let psi0 = bump(0.0, 1.0).sample(&grid).unwrap();
    // E = 0 with diffusion: gradients contract
    let sol = solve_dual(&DualConfig::new(1.0, 0.1, grid.clone()), &VelocityField::zero(1), &psi0).unwrap();
    assert!(audit_gradient_bound(&sol, &k).max_ratio <= 1.0 + 1e-12);
    // E = +x stretches: psi_s(y) = psi0(y e^s), gradient grows like e^s
    let grow = VelocityField::linear(vec![1.0], vec![0.0]).unwrap();
    let sol = solve_dual(&DualConfig::new(1.0, 0.0, grid.clone()), &grow, &psi0).unwrap();
    let audit = audit_gradient_bound(&sol, &k);
    assert!(!audit.flagged && audit.max_ratio <= 1.0 + 1e-9, "{}", audit.max_ratio);
    let growth = sol.history.last().unwrap().lip / sol.history[0].lip;
    // numerical diffusion trims the peak slope, never adds to it
    assert!(growth <= 1f64.exp() && growth >= 0.85 * 1f64.exp(), "growth {growth}");
    // E = -x contracts characteristics: no growth at all
    let shrink = VelocityField::linear(vec![-1.0], vec![0.0]).unwrap();
    let sol = solve_dual(&DualConfig::new(1.0, 0.0, grid), &shrink, &psi0).unwrap();
    assert!(sol.history.iter().all(|h| h.lip <= sol.history[0].lip + 1e-12));
}

#[test]
fn weighted_audit_and_time_orders() {
    let k = AuditConstants::default();
    let grid = line(-4.0, 4.0, 800);
    // bounded data, E = 0, D = 0: weighted norm constant
    let psi0 = bump(0.5, 1.0).sample(&grid).unwrap();
    let mut cfg = DualConfig::new(1.0, 0.0, grid.clone());
    cfg.max_step = Some(0.05);
    let sol = solve_dual(&cfg, &VelocityField::zero(1), &psi0).unwrap();
    assert!(sol.history.iter().all(|h| h.weighted == sol.history[0].weighted));

    // pure heat on clipped identity: modulus of order 1/2
    let clipped: Vec<f64> = centers(&grid).iter().map(|y| y.clamp(-1.0, 1.0)).collect();
    let sol = solve_dual(&DualConfig::new(1.0, 0.1, grid.clone()), &VelocityField::zero(1), &clipped).unwrap();
    let audit = audit_weighted_bound(&sol, &k);
    let order = audit.modulus.observed_order.unwrap();
    assert!((order - 0.5).abs() < 0.1, "heat order {order}");
    assert!(!audit.flagged, "{audit:?}");

    // constant field: modulus linear in s
    let sol = solve_dual(&DualConfig::new(1.0, 0.0, grid), &VelocityField::constant(vec![0.7]), &clipped).unwrap();
    let audit = audit_weighted_bound(&sol, &k);
    let order = audit.modulus.observed_order.unwrap();
    assert!((order - 1.0).abs() < 0.1, "transport order {order}");
    assert!(!audit.flagged, "{audit:?}");
}

#[test]
fn continuous_dependence_examples() {
    let k = AuditConstants::default();
    let grid = line(-4.0, 4.0, 400);
    let psi0 = Probe::Hat { center: vec![0.0], radius: 1.0 }.sample(&grid).unwrap();
    let mut cfg = DualConfig::new(1.0, 0.0, grid);
    cfg.snapshots = (1..10).map(|i| i as f64 * 0.1).collect();
    cfg.max_step = Some(0.002);
    let (c, eps) = (0.5, 0.05);
    let fa = VelocityField::constant(vec![c]);
    let fb = VelocityField::constant(vec![c + eps]);
    let sa = solve_dual(&cfg, &fa, &psi0).unwrap();
    let same = audit_continuous_dependence(&sa, &sa, &fa, &fa, &k).unwrap();
    assert_eq!(same.numerator, 0.0);
    let sb = solve_dual(&cfg, &fb, &psi0).unwrap();
    let audit = audit_continuous_dependence(&sa, &sb, &fa, &fb, &k).unwrap();
    // sup of eps / (1 + |x|) over centers, the nearest one sits at h/2
    let h = 8.0 / 400.0;
    assert!((audit.denominator - eps / (1.0 + h / 2.0)).abs() < 1e-12, "{}", audit.denominator);
    // Lip(psi0) = 1 bounds the ratio
    assert!(audit.ratio <= 1.0 + 1e-9, "{audit:?}");
    assert!(!audit.flagged);
}

#[test]
fn l2_gradient_examples() {
    let k = AuditConstants::default();
    let grid = line(-5.0, 5.0, 500);
    let psi0 = bump(0.0, 1.0).sample(&grid).unwrap();
    let no_diffusion = solve_dual(&DualConfig::new(0.5, 0.0, grid.clone()), &VelocityField::zero(1), &psi0).unwrap();
    assert!(matches!(audit_l2_gradient(&no_diffusion, &k), Err(Error::Unsupported(_))));

    let heat = solve_dual(&DualConfig::new(1.0, 0.05, grid.clone()), &VelocityField::zero(1), &psi0).unwrap();
    assert!(heat.history.windows(2).all(|w| w[1].l2_grad <= w[0].l2_grad + 1e-14));

    let shift = solve_dual(&DualConfig::new(1.0, 1e-3, grid.clone()), &VelocityField::constant(vec![1.0]), &psi0).unwrap();
    let (first, last) = (shift.history[0].l2_grad, shift.history.last().unwrap().l2_grad);
    assert!(last <= first && last >= 0.9 * first, "{first} -> {last}");

    let grow = VelocityField::linear(vec![1.0], vec![0.0]).unwrap();
    let sol = solve_dual(&DualConfig::new(1.0, 0.01, grid), &grow, &psi0).unwrap();
    let audit = audit_l2_gradient(&sol, &k).unwrap();
    assert!(!audit.flagged, "{audit:?}");
    let c = audit.measured_constant.unwrap();
    assert!(c > 0.3 && c <= 1.0, "measured constant {c}");
}
