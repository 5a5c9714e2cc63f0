use std::f64::consts::PI;
use std::sync::OnceLock;

use approx::assert_relative_eq;
use lattice_spectra::determinant::*;
use lattice_spectra::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn laplacian() -> &'static ModelContext {
    static CTX: OnceLock<ModelContext> = OnceLock::new();
    CTX.get_or_init(|| ModelContext::new(DispersionModel::laplacian()).unwrap())
}

fn opts() -> RootOptions {
    RootOptions::default()
}

/// `(1/4π²) ∫ f` by an `n×n` midpoint rule, accurate for integrands analytic on the torus.
fn mean(f: impl Fn([f64; 2]) -> f64, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += f([-PI + (i as f64 + 0.5) * h, -PI + (j as f64 + 0.5) * h]);
        }
    }
    s / (n * n) as f64
}

fn profile(sector: Sector, p: [f64; 2]) -> f64 {
    match sector {
        Sector::Os => p[0].sin() + p[1].sin(),
        Sector::Oa => p[0].sin() - p[1].sin(),
        Sector::Ea => p[0].cos() - p[1].cos(),
        Sector::Es => p[0].cos() + p[1].cos(),
    }
}

/// Applies `H = e + μV` to `Ψ` at `p`, with `V f(p) = v̂ ⋆ f` for `v(p) = a + 2b(cos p1 + cos p2)`.
fn apply_hamiltonian(psi: &dyn Fn([f64; 2]) -> f64, e: &dyn Fn([f64; 2]) -> f64, a: f64, b: f64, mu: f64, p: [f64; 2]) -> f64 {
    // (1/4π²)∫ v(p − q) Ψ(q) dq with cos(p_i − q_i) expanded
    let n = 768;
    let m0 = mean(psi, n);
    let mc = [mean(|q| q[0].cos() * psi(q), n), mean(|q| q[1].cos() * psi(q), n)];
    let ms = [mean(|q| q[0].sin() * psi(q), n), mean(|q| q[1].sin() * psi(q), n)];
    let mut conv = a * m0;
    for i in 0..2 {
        conv += 2.0 * b * (p[i].cos() * mc[i] + p[i].sin() * ms[i]);
    }
    e(p) * psi(p) + mu * conv
}

fn check_eigen_equation(rec: &EigenvalueRecord, a: f64, b: f64) {
    let m = DispersionModel::laplacian();
    let e = |p: [f64; 2]| m.eval(p);
    let (c1, c2) = (rec.c1.unwrap_or(0.0), rec.c2.unwrap());
    let sector = rec.sector;
    let energy = rec.energy;
    let psi = |p: [f64; 2]| {
        let w = if sector == Sector::Es { c1 + c2 * profile(sector, p) } else { profile(sector, p) };
        w / (energy - m.eval(p))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let p = [rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)];
        let lhs = apply_hamiltonian(&psi, &e, a, b, rec.mu, p);
        let rhs = rec.energy * psi(p);
        let scale = psi(p).abs().max(1e-3);
        assert!((lhs - rhs).abs() < 1e-6 * scale * energy, "{:?} at {p:?}: {lhs} vs {rhs}", rec.sector);
    }
}

#[test]
fn eigenfunctions_solve_the_eigenvalue_equation() {
    for (a, b, mu) in [(1.0, 1.0, 5.0), (-2.0, 3.0, 2.0), (4.0, -1.0, 2.0)] {
        let res = spectrum::solve(laplacian(), a, b, mu, &opts()).unwrap();
        assert!(!res.records.is_empty());
        for r in &res.records {
            assert!(r.offset > 0.3, "{r:?}");
            check_eigen_equation(r, a, b);
        }
    }
}

#[test]
fn rank_one_determinant_basics() {
    let ctx = laplacian();
    for s in Sector::RANK_ONE {
        assert_eq!(delta_rank_one(ctx, s, 2.0, 0.0, 4.3).unwrap(), 1.0);
        assert!((delta_rank_one(ctx, s, 0.2, 1.0, 1e8).unwrap() - 1.0).abs() < 1e-8);
        // above the threshold the determinant turns negative near the band edge
        let mu0 = thresholds::gammas(ctx).unwrap().get(s) / 2.0;
        assert!(delta_rank_one(ctx, s, 2.0, 1.1 * mu0, 4.0 + 1e-9).unwrap() < 0.0);
        assert!(delta_rank_one(ctx, s, 2.0, 0.9 * mu0, 4.0 + 1e-9).unwrap() > 0.0);
    }
    assert!(matches!(delta_rank_one(ctx, Sector::Os, 1.0, 1.0, 3.5), Err(Error::BelowThreshold { .. })));
}

#[test]
fn rank_one_root_examples() {
    let ctx = laplacian();
    assert_eq!(find_eigenvalue_rank_one(ctx, Sector::Os, -1.0, 3.0, &opts()).unwrap(), None);
    let mu0 = thresholds::gammas(ctx).unwrap().gamma_os / 3.0;
    assert_eq!(find_eigenvalue_rank_one(ctx, Sector::Os, 3.0, mu0, &opts()).unwrap(), None);
    let r = find_eigenvalue_rank_one(ctx, Sector::Os, 3.0, 1.0, &opts()).unwrap().unwrap();
    assert!(r.energy > 4.0 && r.energy < 4.0 + upper_offset(1.0, 3.0, 1.0));
    assert_eq!(r.multiplicity, 1);
    assert_eq!((r.c1, r.c2), (None, Some(1.0)));
    assert!(delta_rank_one(ctx, Sector::Os, 3.0, 1.0, r.energy).unwrap().abs() < 1e-10);
}

#[test]
fn es_determinant_basics() {
    let ctx = laplacian();
    let p = delta_es(ctx, 1.0, 1.0, 0.0, 4.2).unwrap();
    assert_eq!(p.combined, 1.0);
    for (a, b, mu) in [(1.0, 1.0, 1.0), (-3.0, 2.0, 4.0), (2.0, -0.5, 10.0)] {
        let z = 1e6;
        let p = delta_es(ctx, a, b, mu, 4.0 + z).unwrap();
        assert!((p.combined - 1.0).abs() < 2.0 * mu * (a.abs() + b.abs()) / z);
        let q = delta_es(ctx, a, b, mu, 4.5).unwrap();
        assert_relative_eq!(q.combined, q.delta1 * q.delta2 - mu * mu * a * b * q.delta3 * q.delta3, max_relative = 1e-14);
    }
    for z in [4.0 + 1e-10, 4.001, 4.5, 6.0, 20.0, 1e3] {
        assert!(delta_es(ctx, 1.0, 1.0, 1.0, z).unwrap().delta3 < 0.0, "z = {z}");
        assert!(delta_es(ctx, -1.0, -2.0, 7.0, z).unwrap().combined > 0.0, "z = {z}");
    }
    assert!(matches!(delta_es(ctx, 0.0, 1.0, 1.0, 5.0), Err(Error::ZeroCoupling { .. })));
}

#[test]
fn es_root_examples() {
    let ctx = laplacian();
    assert!(find_eigenvalues_es(ctx, -1.0, -2.0, 7.0, &opts()).unwrap().is_empty());
    let two = find_eigenvalues_es(ctx, 1.0, 1.0, 3.0, &opts()).unwrap();
    assert_eq!(two.len(), 2);
    assert!(two[0].energy > two[1].energy);
    let one = find_eigenvalues_es(ctx, 1.0, 1.0, 1.0, &opts()).unwrap();
    assert_eq!(one.len(), 1);
    for r in two.iter().chain(&one) {
        assert_eq!(r.multiplicity, 1);
        let c = eigenfunction_es(ctx, r, 1.0, 1.0, &opts());
        let parts = delta_es_offset(ctx, 1.0, 1.0, r.mu, r.offset);
        assert_eq!(c, EsEigenfunction::Simple { c1: parts.delta2 / r.mu, c2: parts.delta3 });
    }
}

#[test]
fn es_coefficient_branches() {
    let s = [1.0; 3];
    let p = |d1: f64, d2: f64, d3: f64| EsDeterminantParts { delta1: d1, delta2: d2, delta3: d3, combined: d1 * d2 - d3 * d3 };
    assert_eq!(es_coefficients(&p(0.0, 0.5, 0.0), &s, 1.0, 1.0, 1e-9), EsEigenfunction::Simple { c1: 1.0, c2: 0.0 });
    assert_eq!(es_coefficients(&p(0.5, 0.0, 0.0), &s, 1.0, 1.0, 1e-9), EsEigenfunction::Simple { c1: 0.0, c2: 1.0 });
    assert_eq!(es_coefficients(&p(0.0, 0.0, 1e-12), &s, 1.0, 1.0, 1e-9), EsEigenfunction::Double);
    // the null vector of [[Δ1, −μaΔ3], [−μbΔ3, Δ2]] when Δ1Δ2 = μ²abΔ3²
    let (mu, a, b, d3, d2) = (2.0, 0.5, 3.0, 0.2, 0.7);
    let d1 = mu * mu * a * b * d3 * d3 / d2;
    if let EsEigenfunction::Simple { c1, c2 } = es_coefficients(&p(d1, d2, d3), &s, mu, b, 1e-9) {
        assert!((d1 * c1 - mu * a * d3 * c2).abs() < 1e-14);
        assert!((d2 * c2 - mu * b * d3 * c1).abs() < 1e-14);
    } else {
        panic!("expected a simple eigenfunction");
    }
}

#[test]
fn laplacian_zeros_are_simple() {
    let ctx = laplacian();
    for (a, b, mu) in [(1.0, 1.0, 5.0), (1.0, 1.0, 1.0), (-2.0, 3.0, 2.0)] {
        for r in find_eigenvalues_es(ctx, a, b, mu, &opts()).unwrap() {
            assert!(!multiplicity_check(ctx, a, b, mu, r.energy, &opts()).unwrap());
        }
    }
    assert!(!multiplicity_check(ctx, 1.0, 1.0, 0.0, 4.5, &opts()).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn roots_are_bounded_and_accurate(a in -6.0f64..6.0, b in -6.0f64..6.0, mu in 0.2f64..6.0) {
        prop_assume!(a.abs() > 0.05 && b.abs() > 0.05);
        let ctx = laplacian();
        let res = find_eigenvalues_es_detailed(ctx, a, b, mu, &opts()).unwrap();
        prop_assert!(res.records.len() + res.unresolved <= 2);
        let mut rank: Vec<EigenvalueRecord> = Vec::new();
        for s in Sector::RANK_ONE {
            if let Ok(Some(r)) = find_eigenvalue_rank_one(ctx, s, b, mu, &opts()) {
                rank.push(r);
            }
        }
        for r in res.records.iter().chain(&rank) {
            prop_assert!(r.offset > 0.0 && r.offset <= upper_offset(a, b, mu) + 1e-9);
            let f = |al: f64| if r.sector == Sector::Es {
                delta_es_offset(ctx, a, b, mu, al).combined
            } else {
                delta_rank_one_offset(ctx, r.sector, b, mu, al)
            };
            let h = 1e-3 * r.offset;
            let slope = (f(r.offset + h) - f(r.offset - h)) / (2.0 * h);
            prop_assert!(f(r.offset).abs() < 1e-10 * (1.0 + slope.abs() * r.offset), "{r:?}");
        }
    }
}
