use std::sync::Arc;

use dualflow::measures::{Grid, GridDensity, Measure, ParticleMeasure};
use dualflow::velocity::{
    audit_lattice, convolve_direct, convolve_fft, eval_velocity, eval_velocity_on_grid, lip0_norm, lipschitz_audit,
    InteractionKernel, KernelForm, VelocityField,
};
use dualflow::{Error, Trajectory};

#[test]
fn quadratic_velocity_is_distance_to_mean() {
    let kernel = InteractionKernel::single(KernelForm::Quadratic { a: 1.0 }).unwrap();
    let two: Measure = ParticleMeasure::new(1, vec![0.5, 0.5], vec![-1.0, 1.0]).unwrap().into();
    let k = eval_velocity(&kernel, &[two], 0, &[0.0, 0.7, -2.0]).unwrap();
    assert_eq!(k, vec![0.0, 0.7, -2.0]);
}

#[test]
fn cross_species_terms_add() {
    // K^0 = grad W_00 * mu_0 + grad W_01 * mu_1
    let kernel = InteractionKernel::new(
        2,
        vec![KernelForm::Quadratic { a: 1.0 }, KernelForm::Quadratic { a: 2.0 }, KernelForm::Zero, KernelForm::Zero],
    )
    .unwrap();
    let state = [Measure::dirac(&[1.0]), Measure::dirac(&[-1.0])];
    let k = eval_velocity(&kernel, &state, 0, &[0.5]).unwrap();
    assert!((k[0] - ((0.5 - 1.0) + 2.0 * (0.5 + 1.0))).abs() < 1e-15);
    assert_eq!(eval_velocity(&kernel, &state, 1, &[0.5]).unwrap(), vec![0.0]);
    assert!(matches!(InteractionKernel::new(2, vec![KernelForm::Zero]), Err(Error::Config(_))));
}

#[test]
fn fft_and_direct_convolution_agree() {
    let grid = Grid::line(-4.0, 4.0, 128).unwrap();
    let mu = GridDensity::from_fn(grid.clone(), |x| (-(x[0] - 0.3).powi(2) / 0.5).exp()).unwrap();
    for form in [
        KernelForm::Quadratic { a: 0.7 },
        KernelForm::Gaussian { amplitude: 1.0, sigma: 0.4 },
        KernelForm::SmoothedNewtonian { k: 50.0 },
    ] {
        let a = convolve_direct(&form, &mu);
        let b = convolve_fft(&form, &mu);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + scale), "{form:?}");
        }
        let kernel = InteractionKernel::single(form).unwrap();
        let on_grid = eval_velocity_on_grid(&kernel, &[mu.clone().into()], 0, &grid).unwrap();
        for (x, y) in a.iter().zip(&on_grid) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + scale));
        }
    }
}

#[test]
fn newtonian_field_of_a_dirac_has_slope_sqrt_k() {
    let k = 400.0;
    let kernel = InteractionKernel::single(KernelForm::SmoothedNewtonian { k }).unwrap();
    let traj = Trajectory::frozen(vec![0.0, 1.0], vec![Measure::dirac(&[0.0])]).unwrap();
    let field = VelocityField::induced(kernel, 0, Arc::new(traj)).unwrap();
    // E = -K = x / sqrt(x^2 + 1/k); its steepest slope sqrt(k) sits at 0
    let lattice = Grid::line(-0.5, 0.5, 2001).unwrap();
    let s = lip0_norm(&field, 0.5, &lattice).unwrap();
    assert!((s.gradient - k.sqrt()).abs() / k.sqrt() < 1e-3, "{}", s.gradient);
    let e = field.eval(0.5, &[3.0]).unwrap()[0];
    assert!((e - 3.0 / (9.0 + 1.0 / k).sqrt()).abs() < 1e-12);
}

#[test]
fn translated_diracs_audit_at_one() {
    let kernel = InteractionKernel::single(KernelForm::Quadratic { a: 1.0 }).unwrap();
    let lattice = audit_lattice(&Grid::line(-2.0, 2.0, 40).unwrap());
    let c = 0.8;
    let r = lipschitz_audit(&kernel, &[Measure::dirac(&[0.0])], &[Measure::dirac(&[c])], &lattice, Some(1.0)).unwrap();
    assert!((r.distances[0] - c).abs() < 1e-15);
    assert!((r.ratio - 1.0).abs() < 1e-12);
    assert!(!r.flagged);
    let flagged = lipschitz_audit(&kernel, &[Measure::dirac(&[0.0])], &[Measure::dirac(&[c])], &lattice, Some(0.5)).unwrap();
    assert!(flagged.flagged);
}

#[test]
fn convexity_classification() {
    assert!(KernelForm::Quadratic { a: 1.0 }.is_convex());
    assert!(!KernelForm::Quadratic { a: -1.0 }.is_convex());
    assert!(!KernelForm::SmoothedNewtonian { k: 10.0 }.is_convex());
    assert!(!KernelForm::Gaussian { amplitude: 1.0, sigma: 1.0 }.is_convex());
    let bad = KernelForm::TabulatedRadial { radii: vec![0.0, 1.0], slopes: vec![0.5, 1.0] };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
    let concave = KernelForm::TabulatedRadial { radii: vec![0.0, 1.0, 2.0], slopes: vec![0.0, 1.0, 1.2] };
    assert!(concave.validate().is_ok());
    assert!(!concave.is_convex() || concave.radial_slope(1.5) >= concave.radial_slope(1.0));
}
