use diffdesc::descriptors::{both_linearized_factor, inner_linearized_factor};
use diffdesc::homotopy::{landscape, smooth_cost, DiffusionSchedule, LandscapeSpec, ToyProblem};
use diffdesc::kernels::{gauss_halfline_moment2, radial_profile_integral};
use diffdesc_verify::identities::{
    self, both_linearized_oracle, inner_linearized_oracle, moment_oracle, Suite,
};
use diffdesc_verify::quadrature::integrate;
use nalgebra::Vector2;

#[test]
fn moment_positive_mean_matches_quadrature() {
    // oracle window [0, a1 + 12 a2]
    let oracle = integrate(
        |r| r * r * (-(r - 2.0) * (r - 2.0) / 0.5).exp(),
        0.0,
        8.0,
        1e-14,
    );
    let v = gauss_halfline_moment2(2.0, 0.5).unwrap();
    assert!((v / oracle - 1.0).abs() < 1e-8);
    assert!((moment_oracle(2.0, 0.5) / oracle - 1.0).abs() < 1e-12);
}

#[test]
fn moment_far_negative_mean_is_tiny() {
    let oracle = moment_oracle(-5.0, 0.3);
    let v = gauss_halfline_moment2(-5.0, 0.3).unwrap();
    assert!((v - oracle).abs() < 1e-10);
    assert!((v / oracle - 1.0).abs() < 1e-8);
    assert!(v > 0.0 && v < 1e-60);
}

#[test]
fn radial_simple_case_matches_quadrature() {
    let g = |z: f64| (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let oracle = integrate(|r| r * r * g(r) * g(r) * g(0.0), 0.0, 40.0, 1e-13);
    let v = radial_profile_integral(1.0, 0.0, 1.0, Vector2::new(1.0, 0.0), Vector2::zeros(), 1.0)
        .unwrap();
    assert!((v / oracle - 1.0).abs() < 1e-6, "{v} vs {oracle}");
}

#[test]
fn inner_linearized_single_point() {
    let (x, y) = (Vector2::new(0.8, -0.4), Vector2::new(1.1, 0.3));
    let v = inner_linearized_factor(x, y, 1.3, 0.25);
    let o = inner_linearized_oracle(x, y, 1.3, 0.25);
    assert!((v / o - 1.0).abs() < 1e-6);
}

#[test]
fn both_linearized_single_point() {
    let (x, y) = (Vector2::new(-1.2, 0.7), Vector2::new(0.4, 1.5));
    let v = both_linearized_factor(x, y, 0.9, 0.3);
    let (o, _) = both_linearized_oracle(x, y, 0.9, 0.3);
    assert!((v / o - 1.0).abs() < 1e-7);
}

#[test]
fn both_linearized_negative_case_matches_quadrature() {
    let (sd, ss) = (0.5, 0.5);
    let (x, y) = (Vector2::new(1.5, 0.0), Vector2::new(-1.5, 0.2));
    let v = both_linearized_factor(x, y, sd, ss);
    let (o, mass) = both_linearized_oracle(x, y, sd, ss);
    assert!(v < 0.0 && o < 0.0);
    assert!((v - o).abs() < 1e-9 * mass);
}

#[test]
fn default_identity_run_passes() {
    let rows = identities::run_all(42, 100);
    assert_eq!(rows.len(), 100 * Suite::ALL.len());
    let worst = identities::worst(&rows).unwrap();
    assert!(rows.iter().all(|r| r.passed()), "worst: {worst:?}");
}

#[test]
fn identity_report_is_reproducible() {
    let a = identities::to_csv(&identities::run_all(42, 1));
    let b = identities::to_csv(&identities::run_all(42, 1));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + Suite::ALL.len());
}

#[test]
fn minima_count_non_increasing_with_sigma() {
    let problem = ToyProblem::shipped();
    let raw = landscape(&problem, &LandscapeSpec::default(), 0.0).unwrap();
    let counts: Vec<usize> = DiffusionSchedule::default()
        .sigmas()
        .iter()
        .map(|&s| {
            if s > 0.0 {
                smooth_cost(&raw, s).unwrap()
            } else {
                raw.clone()
            }
            .local_minima()
            .len()
        })
        .collect();
    assert_eq!(counts.first(), Some(&1));
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
}
