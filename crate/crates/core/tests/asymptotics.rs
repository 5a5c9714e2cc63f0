use std::f64::consts::PI;
use std::sync::OnceLock;

use approx::assert_relative_eq;
use lattice_spectra::asymptotics::*;
use lattice_spectra::torus_quad::Weight;
use lattice_spectra::*;
use proptest::prelude::*;

fn laplacian() -> &'static ModelContext {
    static CTX: OnceLock<ModelContext> = OnceLock::new();
    CTX.get_or_init(|| ModelContext::new(DispersionModel::laplacian()).unwrap())
}

#[test]
fn laplacian_leading_coefficients() {
    let c = leading_coefficients(laplacian(), 1.0, 1.0).unwrap();
    assert_relative_eq!(c.es_exponent_rate.unwrap(), 2.0 * PI / 5.0, max_relative = 1e-10);
    assert_relative_eq!(c.lambda.unwrap(), 0.25 * 2.0 * PI / 5.0, max_relative = 1e-7);
    assert!(c.c_ea.unwrap() > 0.0);
    assert_relative_eq!(c.c_os.unwrap(), c.c_oa.unwrap(), max_relative = 1e-10);
    // a + 4b < 0 with ab < 0: no exponential branch, but the emerging root has a rate
    let m = leading_coefficients(laplacian(), -8.0, 1.0).unwrap();
    assert_eq!(m.es_exponent_rate, None);
    assert!(m.lambda.unwrap() > 0.0);
    assert!(m.c_os.is_some());
    let neg = leading_coefficients(laplacian(), 1.0, -1.0).unwrap();
    assert_eq!((neg.c_os, neg.c_ea), (None, None));
}

#[test]
fn lambda_closed_form() {
    // Θ** = 0 for the Laplacian: Λ = γ_es²Θ*²a/(J0 b (a + 4b)) = 2π·a/(4b(a + 4b))
    for (a, b) in [(1.0, 1.0), (2.0, 0.5), (-8.0, 1.0), (3.0, 7.0)] {
        let l = leading_coefficients(laplacian(), a, b).unwrap().lambda.unwrap();
        assert_relative_eq!(l, 2.0 * PI * a / (4.0 * b * (a + 4.0 * b)), max_relative = 1e-7);
    }
}

#[test]
fn non_diagonal_hessian_has_no_log_coefficient() {
    let m = DispersionModel::exponential_hopping(HoppingTable::new([
        ([0, 0], 2.0),
        ([1, 0], -0.5),
        ([-1, 0], -0.5),
        ([0, 1], -0.5),
        ([0, -1], -0.5),
        ([1, 1], 0.05),
        ([-1, -1], 0.05),
    ]))
    .unwrap();
    let ctx = ModelContext::new(m).unwrap();
    assert!(matches!(leading_coefficient(&ctx, Sector::Os, 1.0), Err(Error::NonDiagonalHessian)));
    assert!(leading_coefficient(&ctx, Sector::Ea, 1.0).unwrap() > 0.0);
}

#[test]
fn log_coefficient_examples() {
    let alphas = geometric_offsets(1e-3, 1e-9, 12);
    let one = extract_log_coefficient(laplacian(), &Weight::unit(), &alphas).unwrap();
    assert_relative_eq!(one.predicted, -2.0 * PI, max_relative = 1e-12);
    assert!((one.measured / one.predicted - 1.0).abs() < 1e-2);
    let two = extract_log_coefficient(laplacian(), &Weight::constant(2.0), &alphas).unwrap();
    assert_relative_eq!(two.measured, 2.0 * one.measured, max_relative = 1e-8);
    let flat = extract_log_coefficient(laplacian(), &Weight::cos_sum_plus_two(), &alphas).unwrap();
    assert!(flat.measured.abs() < 1e-3);
    assert_eq!(flat.predicted, 0.0);
    assert!(extract_log_coefficient(laplacian(), &Weight::unit(), &alphas[..4]).is_err());
}

#[test]
fn es_lambda_branch() {
    let spec = SampleSpec {
        target: FitTarget::EsLambda,
        min: 0.015,
        max: 0.065,
        points: 12,
        geometric: false,
        offset_window: Some((1e-10, 1e-2)),
    };
    let r = fit_eigenvalue_asymptotics(laplacian(), Sector::Es, 1.0, 1.0, &spec, &RootOptions::default()).unwrap();
    assert!(r.relative_error < 0.05, "{r:?}");
    assert!(r.intercept.is_some());
}

#[test]
fn fit_argument_checks() {
    let o = RootOptions::default();
    let bad = SampleSpec { target: FitTarget::RankOneLinear, min: 1e-3, max: 1e-4, points: 4, geometric: true, offset_window: None };
    assert!(fit_eigenvalue_asymptotics(laplacian(), Sector::Ea, 1.0, 1.0, &bad, &o).is_err());
    let wrong = SampleSpec { target: FitTarget::EsExponential, min: 0.1, max: 0.2, points: 4, geometric: false, offset_window: None };
    assert!(fit_eigenvalue_asymptotics(laplacian(), Sector::Os, 1.0, 1.0, &wrong, &o).is_err());
}

#[test]
fn rank_one_samples_carry_predictions() {
    let spec = SampleSpec { target: FitTarget::RankOneLinear, min: 1e-5, max: 1e-3, points: 5, geometric: true, offset_window: None };
    let r = fit_eigenvalue_asymptotics(laplacian(), Sector::Ea, 1.0, 1.0, &spec, &RootOptions::default()).unwrap();
    assert_eq!(r.samples.len(), 5);
    let ratios: Vec<f64> = r.samples.iter().map(|s| s.ratio.unwrap()).collect();
    // the ratio tends to 1 as λ shrinks
    for w in ratios.windows(2) {
        assert!((w[0] - 1.0).abs() < (w[1] - 1.0).abs(), "{ratios:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lambda_scaling(a in 0.1f64..5.0, b in 0.1f64..5.0, t in 0.1f64..10.0) {
        let l1 = leading_coefficients(laplacian(), a, b).unwrap().lambda.unwrap();
        let l2 = leading_coefficients(laplacian(), t * a, t * b).unwrap().lambda.unwrap();
        prop_assert!((t * l2 - l1).abs() < 1e-10 * l1);
    }

    #[test]
    fn c_ea_is_linear_in_b(b in 0.05f64..20.0) {
        let c1 = leading_coefficient(laplacian(), Sector::Ea, b).unwrap();
        let c2 = leading_coefficient(laplacian(), Sector::Ea, 2.0 * b).unwrap();
        prop_assert!(c1 > 0.0);
        prop_assert!((c2 / c1 - 2.0).abs() < 1e-10);
    }

    #[test]
    fn log_coefficient_is_additive(s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let alphas = geometric_offsets(1e-3, 1e-8, 8);
        let v = Weight::unit();
        let w = Weight::cos_sum();
        let pv = extract_log_coefficient(laplacian(), &v, &alphas).unwrap().measured;
        let pw = extract_log_coefficient(laplacian(), &w, &alphas).unwrap().measured;
        let both = extract_log_coefficient(laplacian(), &v.combine(s, &w, t), &alphas).unwrap().measured;
        prop_assert!((both - s * pv - t * pw).abs() < 1e-8 * (1.0 + (s * pv).abs() + (t * pw).abs()));
    }
}
