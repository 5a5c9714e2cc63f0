use std::f64::consts::PI;
use std::sync::OnceLock;

use lattice_spectra::determinant::{find_eigenvalues_es, multiplicity_check};
use lattice_spectra::spectrum::*;
use lattice_spectra::thresholds::gammas;
use lattice_spectra::*;

fn laplacian() -> &'static ModelContext {
    static CTX: OnceLock<ModelContext> = OnceLock::new();
    CTX.get_or_init(|| ModelContext::new(DispersionModel::laplacian()).unwrap())
}

fn opts() -> RootOptions {
    RootOptions::default()
}

#[test]
fn solve_examples() {
    let ctx = laplacian();
    for mu in [0.1, 1.0, 20.0] {
        assert_eq!(solve(ctx, -1.0, -1.0, mu, &opts()).unwrap().total_count, 0);
    }
    let r = solve(ctx, 1.0, 3.0, 1.0, &opts()).unwrap();
    assert_eq!(r.total_count, 4);
    for s in Sector::ALL {
        assert_eq!(r.sector_count(s), 1, "{s}");
    }
    assert!(r.unresolved.is_empty());
    assert_eq!(r.total_count, r.records.iter().map(|x| x.multiplicity).sum::<u32>());
    let g = gammas(ctx).unwrap();
    let just_above = solve(ctx, -8.0, 1.0, g.gamma_os + 1e-4, &opts()).unwrap();
    assert_eq!(just_above.sector_count(Sector::Os), 1);
    assert_eq!(just_above.sector_count(Sector::Oa), 1);
    assert_eq!(just_above.sector_count(Sector::Ea), 0);
    assert!(matches!(solve(ctx, 0.0, 1.0, 1.0, &opts()), Err(Error::ZeroCoupling { .. })));
    assert!(matches!(solve(ctx, 1.0, 1.0, -1.0, &opts()), Err(Error::InvalidArgument(_))));
}

#[test]
fn resolved_counts_follow_the_sign_table() {
    let ctx = laplacian();
    let mut checked = 0;
    for a in [-6.0, -2.0, -0.5, 0.5, 2.0, 6.0] {
        for b in [-3.0, -1.0, 0.4, 1.0, 3.0] {
            for mu in [0.3, 1.0, 2.5, 6.0] {
                let r = solve(ctx, a, b, mu, &opts()).unwrap();
                let expected = expected_counts(ctx, a, b, mu).unwrap();
                for (i, s) in Sector::ALL.iter().enumerate() {
                    let unresolved = r.unresolved.iter().filter(|&&u| u == *s).count() as u32;
                    assert_eq!(r.sector_count(*s) + unresolved, expected[i], "a={a} b={b} mu={mu} {s}");
                }
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 120);
}

#[test]
fn phase_diagram_structure() {
    let ctx = laplacian();
    let a_grid = [-3.0, -1.0, 1.0, 3.0];
    let b_grid = [-2.0, -0.5, 0.5, 1.0, 1.5, 2.0, 3.0];
    let mu = 1.0;
    let pd = phase_diagram(ctx, mu, &a_grid, &b_grid, &opts()).unwrap();
    assert_eq!(pd.cells.len(), a_grid.len() * b_grid.len());
    let cell = |a: f64, b: f64| pd.cells.iter().find(|c| c.a == a && c.b == b).unwrap();
    for c in &pd.cells {
        assert!(c.count <= 5);
        if c.a < 0.0 && c.b < 0.0 {
            assert_eq!(c.count, 0);
        }
        let e = expected_counts(ctx, c.a, c.b, mu).unwrap();
        assert_eq!(c.count, e.iter().sum::<u32>());
    }
    for a in [1.0, 3.0] {
        let along: Vec<u32> = b_grid.iter().filter(|&&b| b > 0.0).map(|&b| cell(a, b).count).collect();
        assert!(along.windows(2).all(|w| w[1] >= w[0]), "a = {a}: {along:?}");
    }
    // b = γ_os/μ ≈ 1.376 lies between 1.0 and 1.5
    let line = pd.overlays.rank_one_lines.iter().find(|l| l.0 == Sector::Os).unwrap().1;
    assert!(line > 1.0 && line < 1.5);
    for a in a_grid {
        assert!(cell(a, 1.5).count > cell(a, 1.0).count);
    }
    for &(a, b) in &pd.overlays.es_hyperbola {
        if b > 0.0 {
            assert!(((a + 4.0 * b) * 0.5 / (a * b) - mu).abs() < 1e-8);
        }
    }
    assert!(phase_diagram(ctx, mu, &[0.0], &[1.0], &opts()).is_err());
}

#[test]
fn rank_one_curves_increase_and_are_convex() {
    let ctx = laplacian();
    let g = gammas(ctx).unwrap();
    let b = 1.0;
    for s in Sector::RANK_ONE {
        let mu0 = g.get(s) / b;
        let grid: Vec<f64> = (1..=30).map(|i| mu0 + 0.05 * i as f64).collect();
        let c = eigenvalue_curve(ctx, s, 1.0, b, &grid, &opts()).unwrap();
        assert!(c.strictly_increasing, "{s}");
        assert_eq!(c.convex, Some(true), "{s}: {}", c.min_second_difference);
        let near = eigenvalue_curve(ctx, s, 1.0, b, &[mu0 + 1e-7, mu0 + 2e-7], &opts()).unwrap();
        assert!(near.points[0].offset < 1e-5, "{s}: {}", near.points[0].offset);
    }
}

#[test]
fn es_curves() {
    let ctx = laplacian();
    let grid: Vec<f64> = (1..=20).map(|i| 0.5 + 0.25 * i as f64).collect();
    let mixed = eigenvalue_curve(ctx, Sector::Es, -2.0, 3.0, &grid, &opts()).unwrap();
    assert!(mixed.strictly_increasing);
    assert_eq!(mixed.convex, Some(true));
    let both = eigenvalue_curve(ctx, Sector::Es, 1.0, 1.0, &grid, &opts()).unwrap();
    assert!(both.strictly_increasing);
    assert_eq!(both.convex, None);
    assert!(eigenvalue_curve(ctx, Sector::Es, 1.0, 1.0, &[2.0, 1.0], &opts()).is_err());
}

#[test]
fn curves_refine_continuously() {
    let ctx = laplacian();
    let mut prev_jump = f64::INFINITY;
    for n in [5, 10, 20] {
        let grid: Vec<f64> = (0..=n).map(|i| 2.0 + i as f64 / n as f64).collect();
        let c = eigenvalue_curve(ctx, Sector::Ea, 1.0, 1.0, &grid, &opts()).unwrap();
        let jump = c.points.windows(2).map(|w| w[1].energy - w[0].energy).fold(0.0, f64::max);
        assert!(jump < prev_jump);
        prev_jump = jump;
    }
}

#[test]
fn triple_emergence() {
    let r = triple_emergence_check(laplacian(), 1.0, 0.1, &opts()).unwrap();
    assert!((r.a - (2.0 * PI - 4.0)).abs() < 1e-8);
    assert!((r.mu_os0 - r.mu_es0).abs() < 1e-10 * r.mu_os0);
    assert_eq!(r.count_below, 1);
    assert_eq!(r.jump, 3);
    assert_eq!(r.unresolved_above + r.unresolved_below, 0);
    // a diagonal hopping keeps swap symmetry but breaks evenness in each coordinate
    let skew = DispersionModel::exponential_hopping(HoppingTable::new([
        ([0, 0], 2.0),
        ([1, 0], -0.5),
        ([-1, 0], -0.5),
        ([0, 1], -0.5),
        ([0, -1], -0.5),
        ([1, 1], 0.05),
        ([-1, -1], 0.05),
    ]))
    .unwrap();
    assert!(!skew.is_even_per_coordinate());
    let ctx = ModelContext::new(skew).unwrap();
    assert!(matches!(triple_emergence_check(&ctx, 1.0, 0.1, &opts()), Err(Error::NotEvenPerCoordinate)));
}

#[test]
fn stepped_sign_change() {
    for z0 in [1.3, 2.0] {
        assert!(g_stepped(0.0, z0).unwrap() < 0.0);
        assert!(g_stepped(1.0, z0).unwrap() > 0.0);
    }
}

#[test]
fn multiplicity_two_construction() {
    let c = multiplicity_two_construct(1.5, 1.0, &opts()).unwrap();
    assert!(c.a_profile > 0.0 && c.a_profile < 1.0);
    assert!(g_stepped(c.a_profile, 1.5).unwrap().abs() < 1e-10);
    assert!(c.multiplicity_two);
    for v in [c.verification.delta1, c.verification.delta2, c.verification.delta3] {
        assert!(v.abs() < 1e-8);
    }
    let ctx = ModelContext::new(DispersionModel::stepped_phi_a(c.a_profile).unwrap()).unwrap();
    assert!(multiplicity_check(&ctx, c.a0, c.b0, 1.0, 1.5, &opts()).unwrap());
    let roots = find_eigenvalues_es(&ctx, c.a0, c.b0, 1.0, &opts()).unwrap();
    let double = roots.iter().find(|r| (r.energy - 1.5).abs() < 1e-6).expect("double root at z0");
    assert_eq!(double.multiplicity, 2);
    assert_eq!((double.c1, double.c2), (None, None));
    let ef = determinant::eigenfunction_es(&ctx, double, c.a0, c.b0, &opts());
    assert_eq!(ef, determinant::EsEigenfunction::Double);
    assert!(multiplicity_two_construct(0.9, 1.0, &opts()).is_err());
}

#[test]
fn construction_is_continuous_in_z0() {
    let z: Vec<f64> = (0..=9).map(|i| 1.2 + 0.2 * i as f64).collect();
    let a0: Vec<f64> = z.iter().map(|&z0| multiplicity_two_construct(z0, 1.0, &opts()).unwrap().a_profile).collect();
    for w in a0.windows(2) {
        assert!((w[1] - w[0]).abs() < 0.05, "{a0:?}");
    }
    for w in a0.windows(3) {
        assert!((w[2] - 2.0 * w[1] + w[0]).abs() < 0.02, "{a0:?}");
    }
}
