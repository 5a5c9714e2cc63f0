//! Fredholm determinants and their zeros above the band.
//!
//! Energies are handled through the offset `α = z − e_max`, which keeps roots
//! a few ulps above the threshold distinguishable. Roots are refined in
//! `ln α`, where the determinants' logarithmic threshold behaviour becomes
//! nearly linear.

use serde::Serialize;

use crate::context::ModelContext;
use crate::error::{Error, Result};
use crate::roots::brent;
use crate::sector::Sector;
use crate::thresholds::{check_couplings, coupling_thresholds, Threshold};

/// Numerical tolerances for root location and zero tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootOptions {
    /// Smallest resolvable `E − e_max`.
    pub floor: f64,
    /// Relative tolerance on `E − e_max`.
    pub rel_tol: f64,
    /// Relative zero test for the determinant components.
    pub zero_tol: f64,
    /// Absolute bound for the multiplicity-two test.
    pub multiplicity_tol: f64,
    /// Bound on `|∂Δ/∂z|` at a double zero.
    pub derivative_tol: f64,
    /// Gap below which two es eigenvalues are flagged as nearly degenerate.
    pub degeneracy_gap: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            floor: 1e-13,
            rel_tol: 1e-12,
            zero_tol: 1e-9,
            multiplicity_tol: 1e-8,
            derivative_tol: 1e-6,
            degeneracy_gap: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EsDeterminantParts {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub combined: f64,
}

/// A discrete eigenvalue above the band.
///
/// Rank-one sectors carry `c2 = 1` (eigenfunction `w_ω/(E − e)`). Simple es
/// eigenvalues carry `(c1, c2)` for `(c1 + c2(cos p1 + cos p2))/(E − e)`; a
/// double es eigenvalue leaves both empty, its eigenspace being spanned by
/// `1/(E − e)` and `(cos p1 + cos p2)/(E − e)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvalueRecord {
    pub sector: Sector,
    pub mu: f64,
    pub energy: f64,
    /// `E − e_max`, kept separately because it can be far below `ulp(E)`.
    pub offset: f64,
    pub multiplicity: u32,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// `|Δ|` at the returned root.
    pub residual: f64,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub near_degenerate: bool,
}

/// Upper bound on `E − e_max` from the norm of the potential.
pub fn upper_offset(a: f64, b: f64, mu: f64) -> f64 {
    mu * a.abs().max(b.abs()) + 1.0
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    Ok(())
}

fn offset_of(ctx: &ModelContext, z: f64) -> Result<f64> {
    let alpha = z - ctx.e_max();
    if !(alpha > 0.0) {
        return Err(Error::BelowThreshold { z, e_max: ctx.e_max() });
    }
    Ok(alpha)
}

/// `1 − (bμ/4π²) ∫ w_ω² / (α + gap)`.
pub fn delta_rank_one_offset(ctx: &ModelContext, sector: Sector, b: f64, mu: f64, alpha: f64) -> f64 {
    1.0 - b * mu * ctx.rank_one_integral(sector, alpha)
}

pub fn delta_rank_one(ctx: &ModelContext, sector: Sector, b: f64, mu: f64, z: f64) -> Result<f64> {
    if sector == Sector::Es {
        return Err(Error::InvalidArgument("es is not a rank-one sector".into()));
    }
    Ok(delta_rank_one_offset(ctx, sector, b, mu, offset_of(ctx, z)?))
}

pub fn delta_es_offset(ctx: &ModelContext, a: f64, b: f64, mu: f64, alpha: f64) -> EsDeterminantParts {
    let [i1, ic, icc] = ctx.es_integrals(alpha);
    let delta1 = 1.0 - a * mu * i1;
    let delta2 = 1.0 - b * mu * icc;
    EsDeterminantParts { delta1, delta2, delta3: ic, combined: delta1 * delta2 - mu * mu * a * b * ic * ic }
}

pub fn delta_es(ctx: &ModelContext, a: f64, b: f64, mu: f64, z: f64) -> Result<EsDeterminantParts> {
    check_couplings(a, b)?;
    Ok(delta_es_offset(ctx, a, b, mu, offset_of(ctx, z)?))
}

enum Bracket {
    Found(f64, f64),
    BelowFloor,
}

/// Walks down from `start` over `2^-k` offsets looking for a sign change of `f`.
fn descend(f: &impl Fn(f64) -> f64, start: f64, floor: f64) -> Bracket {
    let s0 = f(start).signum();
    let mut prev = start;
    let mut k = 0;
    loop {
        let mut alpha = 0.5f64.powi(k);
        k += 1;
        if alpha >= prev {
            continue;
        }
        if alpha < floor {
            alpha = floor;
        }
        let s = f(alpha).signum();
        if s != s0 {
            return Bracket::Found(alpha, prev);
        }
        if alpha <= floor {
            return Bracket::BelowFloor;
        }
        prev = alpha;
    }
}

/// Refines a sign change on `[lo, hi]` in the variable `ln α`.
fn refine(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    let g = |s: f64| f(s.exp());
    brent(g, lo.ln(), hi.ln(), rel_tol, 400)
        .map(f64::exp)
        .ok_or_else(|| Error::BracketFailure(format!("no sign change on [{lo:e}, {hi:e}]")))
}

/// Zero of a determinant that is positive at `start` and negative near threshold.
fn root_from_above(f: &impl Fn(f64) -> f64, start: f64, opts: &RootOptions) -> Result<Option<f64>> {
    match descend(f, start, opts.floor) {
        Bracket::Found(lo, hi) => refine(f, lo, hi, opts.rel_tol).map(Some),
        Bracket::BelowFloor => Ok(None),
    }
}

fn record(sector: Sector, mu: f64, e_max: f64, offset: f64, residual: f64) -> EigenvalueRecord {
    EigenvalueRecord {
        sector,
        mu,
        energy: e_max + offset,
        offset,
        multiplicity: 1,
        c1: None,
        c2: Some(1.0),
        residual,
        near_degenerate: false,
    }
}

pub fn find_eigenvalue_rank_one(
    ctx: &ModelContext,
    sector: Sector,
    b: f64,
    mu: f64,
    opts: &RootOptions,
) -> Result<Option<EigenvalueRecord>> {
    if sector == Sector::Es {
        return Err(Error::InvalidArgument("es is not a rank-one sector".into()));
    }
    check_mu(mu)?;
    if b == 0.0 {
        return Err(Error::ZeroCoupling { a: f64::NAN, b });
    }
    if b < 0.0 {
        return Ok(None);
    }
    let mu0 = crate::thresholds::gammas(ctx)?.get(sector) / b;
    if !above_threshold(mu, mu0) {
        return Ok(None);
    }
    let f = |alpha: f64| delta_rank_one_offset(ctx, sector, b, mu, alpha);
    let hi = upper_offset(0.0, b, mu);
    match root_from_above(&f, hi, opts)? {
        Some(alpha) => Ok(Some(record(sector, mu, ctx.e_max(), alpha, f(alpha).abs()))),
        None => Err(Error::UnresolvableRoots { floor: opts.floor }),
    }
}

/// es roots together with the number of roots known to exist below the floor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EsRoots {
    pub records: Vec<EigenvalueRecord>,
    pub unresolved: usize,
}

/// `mu > mu0`, treating values within rounding of the threshold as at the threshold.
pub fn above_threshold(mu: f64, mu0: f64) -> bool {
    mu > mu0 + 1e-12 * mu0.abs()
}

/// Expected number of es eigenvalues above the band.
pub fn es_expected_count(a: f64, b: f64, mu: f64, mu0: f64) -> usize {
    match (a > 0.0, b > 0.0) {
        (false, false) => 0,
        (true, true) => {
            if above_threshold(mu, mu0) {
                2
            } else {
                1
            }
        }
        _ => {
            if a + 4.0 * b >= 0.0 || above_threshold(mu, mu0) {
                1
            } else {
                0
            }
        }
    }
}

fn component_scales(ctx: &ModelContext, a: f64, b: f64, mu: f64, alpha: f64) -> [f64; 3] {
    let [i1, _, icc] = ctx.es_integrals(alpha);
    [1.0 + (a * mu * i1).abs(), 1.0 + (b * mu * icc).abs(), (i1 * icc).abs().sqrt()]
}

fn es_record(
    ctx: &ModelContext,
    a: f64,
    b: f64,
    mu: f64,
    alpha: f64,
    opts: &RootOptions,
) -> EigenvalueRecord {
    let parts = delta_es_offset(ctx, a, b, mu, alpha);
    let scales = component_scales(ctx, a, b, mu, alpha);
    let (c1, c2, multiplicity) = match es_coefficients(&parts, &scales, mu, b, opts.zero_tol) {
        EsEigenfunction::Simple { c1, c2 } => (Some(c1), Some(c2), 1),
        EsEigenfunction::Double => (None, None, 2),
    };
    EigenvalueRecord {
        sector: Sector::Es,
        mu,
        energy: ctx.e_max() + alpha,
        offset: alpha,
        multiplicity,
        c1,
        c2,
        residual: parts.combined.abs(),
        near_degenerate: false,
    }
}

/// es eigenvalues with the count of roots lying below the resolution floor.
pub fn find_eigenvalues_es_detailed(
    ctx: &ModelContext,
    a: f64,
    b: f64,
    mu: f64,
    opts: &RootOptions,
) -> Result<EsRoots> {
    check_couplings(a, b)?;
    check_mu(mu)?;
    let mu0 = match coupling_thresholds(ctx, a, b)?.es {
        Threshold::Value(v) => v,
        Threshold::NoThreshold => 0.0,
    };
    let expected = es_expected_count(a, b, mu, mu0);
    if expected == 0 {
        return Ok(EsRoots::default());
    }
    let hi = upper_offset(a, b, mu);
    let f = |alpha: f64| delta_es_offset(ctx, a, b, mu, alpha).combined;
    let mut offsets: Vec<f64> = Vec::new();
    let mut unresolved = 0;

    if a < 0.0 || b < 0.0 {
        match root_from_above(&f, hi, opts)? {
            Some(x) => offsets.push(x),
            None => unresolved += 1,
        }
    } else {
        let d1 = |alpha: f64| delta_es_offset(ctx, a, b, mu, alpha).delta1;
        let d2 = |alpha: f64| delta_es_offset(ctx, a, b, mu, alpha).delta2;
        let z1 = root_from_above(&d1, hi, opts)?;
        let z2 = root_from_above(&d2, hi, opts)?;
        let top = z1.unwrap_or(opts.floor).max(z2.unwrap_or(opts.floor));
        let bottom = match (z1, z2) {
            (Some(x), Some(y)) => Some(x.min(y)),
            _ => None,
        };
        if let (Some(x), Some(y)) = (z1, z2) {
            if (x - y).abs() <= 1e-6 * x.max(y) {
                let z = 0.5 * (x + y);
                if multiplicity_check_offset(ctx, a, b, mu, z, opts) {
                    let mut r = es_record(ctx, a, b, mu, z, opts);
                    r.multiplicity = 2;
                    r.c1 = None;
                    r.c2 = None;
                    return Ok(EsRoots { records: vec![r], unresolved: 0 });
                }
            }
        }
        // upper root: Δ ≤ 0 at the larger component zero, → 1 at infinity
        if f(top) <= 0.0 {
            offsets.push(refine(&f, top, hi, opts.rel_tol)?);
        } else {
            match root_from_above(&f, hi, opts)? {
                Some(x) => offsets.push(x),
                None => unresolved += 1,
            }
        }
        if expected == 2 {
            match bottom {
                Some(bot) if f(bot) <= 0.0 => match root_from_above_neg(&f, bot, opts)? {
                    Some(x) => offsets.push(x),
                    None => unresolved += 1,
                },
                _ => unresolved += 1,
            }
        }
    }
    let mut records: Vec<EigenvalueRecord> =
        offsets.iter().map(|&x| es_record(ctx, a, b, mu, x, opts)).collect();
    records.sort_by(|p, q| q.offset.partial_cmp(&p.offset).unwrap());
    if records.len() == 2 && (records[0].offset - records[1].offset).abs() < opts.degeneracy_gap {
        records[0].near_degenerate = true;
        records[1].near_degenerate = true;
    }
    Ok(EsRoots { records, unresolved })
}

/// Lower es root: `Δ ≤ 0` at `start`, positive close to threshold.
fn root_from_above_neg(f: &impl Fn(f64) -> f64, start: f64, opts: &RootOptions) -> Result<Option<f64>> {
    let mut prev = start;
    let mut alpha = start;
    loop {
        alpha *= 0.5;
        if alpha < opts.floor {
            alpha = opts.floor;
        }
        if f(alpha) > 0.0 {
            return refine(f, alpha, prev, opts.rel_tol).map(Some);
        }
        if alpha <= opts.floor {
            return Ok(None);
        }
        prev = alpha;
    }
}

pub fn find_eigenvalues_es(
    ctx: &ModelContext,
    a: f64,
    b: f64,
    mu: f64,
    opts: &RootOptions,
) -> Result<Vec<EigenvalueRecord>> {
    let roots = find_eigenvalues_es_detailed(ctx, a, b, mu, opts)?;
    if roots.unresolved > 0 {
        return Err(Error::UnresolvableRoots { floor: opts.floor });
    }
    Ok(roots.records)
}

/// Eigenfunction data of an es eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EsEigenfunction {
    /// `(c1 + c2(cos p1 + cos p2))/(E − e)`.
    Simple { c1: f64, c2: f64 },
    /// Both `1/(E − e)` and `(cos p1 + cos p2)/(E − e)`.
    Double,
}

/// Coefficients from the determinant components at a root.
///
/// The null vector of the 2×2 system satisfies `c1·Δ1 = μaΔ3·c2` and
/// `c2·Δ2 = μbΔ3·c1`; with `Δ3 ≠ 0` we normalize to `c2 = Δ3`, `c1 = Δ2/(μb)`.
pub fn es_coefficients(
    parts: &EsDeterminantParts,
    scales: &[f64; 3],
    mu: f64,
    b: f64,
    zero_tol: f64,
) -> EsEigenfunction {
    let zero = |v: f64, s: f64| v.abs() <= zero_tol * s;
    if !zero(parts.delta3, scales[2]) {
        EsEigenfunction::Simple { c1: parts.delta2 / (mu * b), c2: parts.delta3 }
    } else if !zero(parts.delta1, scales[0]) {
        EsEigenfunction::Simple { c1: 0.0, c2: 1.0 }
    } else if !zero(parts.delta2, scales[1]) {
        EsEigenfunction::Simple { c1: 1.0, c2: 0.0 }
    } else {
        EsEigenfunction::Double
    }
}

pub fn eigenfunction_es(ctx: &ModelContext, rec: &EigenvalueRecord, a: f64, b: f64, opts: &RootOptions) -> EsEigenfunction {
    let parts = delta_es_offset(ctx, a, b, rec.mu, rec.offset);
    let scales = component_scales(ctx, a, b, rec.mu, rec.offset);
    es_coefficients(&parts, &scales, rec.mu, b, opts.zero_tol)
}

fn multiplicity_check_offset(ctx: &ModelContext, a: f64, b: f64, mu: f64, alpha: f64, opts: &RootOptions) -> bool {
    let p = delta_es_offset(ctx, a, b, mu, alpha);
    let t = opts.multiplicity_tol;
    if !(p.delta1.abs() < t && p.delta2.abs() < t && p.delta3.abs() < t) {
        return false;
    }
    let h = 1e-4 * alpha;
    let dp = delta_es_offset(ctx, a, b, mu, alpha + h).combined;
    let dm = delta_es_offset(ctx, a, b, mu, alpha - h).combined;
    ((dp - dm) / (2.0 * h)).abs() < opts.derivative_tol
}

/// Whether `z0` is a double zero of the es determinant.
pub fn multiplicity_check(ctx: &ModelContext, a: f64, b: f64, mu: f64, z0: f64, opts: &RootOptions) -> Result<bool> {
    check_couplings(a, b)?;
    let alpha = offset_of(ctx, z0)?;
    if mu == 0.0 {
        return Ok(false);
    }
    Ok(multiplicity_check_offset(ctx, a, b, mu, alpha, opts))
}
