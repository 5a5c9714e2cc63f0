//! Spectrum assembly across sectors, eigenvalue curves, phase diagrams and the
//! stepped-profile multiplicity-two construction.

use rayon::prelude::*;
use serde::Serialize;

use crate::context::{ModelContext, TORUS_AREA};
use crate::determinant::{
    delta_es_offset, find_eigenvalue_rank_one, find_eigenvalues_es_detailed, multiplicity_check,
    EigenvalueRecord, EsDeterminantParts, RootOptions,
};
use crate::dispersion::DispersionModel;
use crate::error::{Error, Result};
use crate::roots::brent;
use crate::sector::Sector;
use crate::thresholds::{check_couplings, coupling_thresholds, gammas, Threshold};
use crate::torus_quad::{QuadratureSpec, TorusQuadrature, Weight};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub e_max: f64,
    pub records: Vec<EigenvalueRecord>,
    /// Multiplicity-weighted count of the resolved records.
    pub total_count: u32,
    /// One entry per eigenvalue known to exist but lying below the resolution floor.
    pub unresolved: Vec<Sector>,
}

impl SpectrumResult {
    pub fn sector_count(&self, s: Sector) -> u32 {
        self.records.iter().filter(|r| r.sector == s).map(|r| r.multiplicity).sum()
    }

    /// Resolved plus unresolved eigenvalues.
    pub fn full_count(&self) -> u32 {
        self.total_count + self.unresolved.len() as u32
    }
}

pub fn solve(ctx: &ModelContext, a: f64, b: f64, mu: f64, opts: &RootOptions) -> Result<SpectrumResult> {
    check_couplings(a, b)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    let mut records = Vec::new();
    let mut unresolved = Vec::new();
    for s in Sector::RANK_ONE {
        match find_eigenvalue_rank_one(ctx, s, b, mu, opts) {
            Ok(Some(r)) => records.push(r),
            Ok(None) => {}
            Err(Error::UnresolvableRoots { .. }) => unresolved.push(s),
            Err(e) => return Err(e),
        }
    }
    let es = find_eigenvalues_es_detailed(ctx, a, b, mu, opts)?;
    records.extend(es.records);
    unresolved.extend(std::iter::repeat_n(Sector::Es, es.unresolved));
    let total_count = records.iter().map(|r| r.multiplicity).sum();
    Ok(SpectrumResult { a, b, mu, e_max: ctx.e_max(), records, total_count, unresolved })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseDiagramCell {
    pub a: f64,
    pub b: f64,
    /// Number of eigenvalues above the band, resolved or not.
    pub count: u32,
    pub unresolved: u32,
}

/// Analytic boundaries of the count regions at fixed `μ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseOverlays {
    /// Horizontal lines `b = γ_ω/μ` for os, oa, ea.
    pub rank_one_lines: Vec<(Sector, f64)>,
    /// Points `(a, b)` on `μ = (a + 4b)γ_es/(ab)` sampled at the grid's `a`.
    pub es_hyperbola: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagram {
    pub mu: f64,
    pub cells: Vec<PhaseDiagramCell>,
    pub overlays: PhaseOverlays,
}

pub fn phase_diagram(
    ctx: &ModelContext,
    mu: f64,
    a_grid: &[f64],
    b_grid: &[f64],
    opts: &RootOptions,
) -> Result<PhaseDiagram> {
    if a_grid.iter().chain(b_grid).any(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("grids must exclude zero couplings".into()));
    }
    let g = gammas(ctx)?;
    let pairs: Vec<(f64, f64)> = a_grid.iter().flat_map(|&a| b_grid.iter().map(move |&b| (a, b))).collect();
    let cells = pairs
        .par_iter()
        .map(|&(a, b)| {
            solve(ctx, a, b, mu, opts).map(|s| PhaseDiagramCell {
                a,
                b,
                count: s.full_count(),
                unresolved: s.unresolved.len() as u32,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rank_one_lines = Sector::RANK_ONE.iter().map(|&s| (s, g.get(s) / mu)).collect();
    let es_hyperbola = a_grid
        .iter()
        .filter_map(|&a| {
            let den = mu * a - 4.0 * g.gamma_es;
            (den != 0.0).then(|| (a, a * g.gamma_es / den))
        })
        .collect();
    Ok(PhaseDiagram { mu, cells, overlays: PhaseOverlays { rank_one_lines, es_hyperbola } })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub mu: f64,
    pub energy: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvalueCurve {
    pub sector: Sector,
    pub a: f64,
    pub b: f64,
    pub points: Vec<CurvePoint>,
    pub strictly_increasing: bool,
    /// Checked for rank-one sectors and for es with `ab < 0`.
    pub convex: Option<bool>,
    /// Smallest second divided difference of `E(μ)`.
    pub min_second_difference: f64,
}

fn sector_root(ctx: &ModelContext, sector: Sector, a: f64, b: f64, mu: f64, opts: &RootOptions) -> Result<EigenvalueRecord> {
    let missing = || Error::InvalidArgument(format!("no {sector} eigenvalue at mu = {mu}"));
    if sector == Sector::Es {
        let es = find_eigenvalues_es_detailed(ctx, a, b, mu, opts)?;
        match es.records.into_iter().next() {
            Some(r) => Ok(r),
            None if es.unresolved > 0 => Err(Error::UnresolvableRoots { floor: opts.floor }),
            None => Err(missing()),
        }
    } else {
        find_eigenvalue_rank_one(ctx, sector, b, mu, opts)?.ok_or_else(missing)
    }
}

/// Samples the top eigenvalue of `sector` along increasing `mu_grid`.
pub fn eigenvalue_curve(
    ctx: &ModelContext,
    sector: Sector,
    a: f64,
    b: f64,
    mu_grid: &[f64],
    opts: &RootOptions,
) -> Result<EigenvalueCurve> {
    check_couplings(a, b)?;
    if mu_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("mu grid must be strictly increasing".into()));
    }
    let points = mu_grid
        .par_iter()
        .map(|&mu| sector_root(ctx, sector, a, b, mu, opts).map(|r| CurvePoint { mu, energy: r.energy, offset: r.offset }))
        .collect::<Result<Vec<_>>>()?;
    let strictly_increasing = points.windows(2).all(|w| w[1].offset > w[0].offset);
    let mut min_sd = f64::INFINITY;
    for w in points.windows(3) {
        let s0 = (w[1].offset - w[0].offset) / (w[1].mu - w[0].mu);
        let s1 = (w[2].offset - w[1].offset) / (w[2].mu - w[1].mu);
        min_sd = min_sd.min((s1 - s0) / (0.5 * (w[2].mu - w[0].mu)));
    }
    let convex = (sector != Sector::Es || a * b < 0.0).then_some(min_sd >= -1e-10);
    Ok(EigenvalueCurve { sector, a, b, points, strictly_increasing, convex, min_second_difference: min_sd })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleEmergenceReport {
    pub a: f64,
    pub b: f64,
    pub mu_os0: f64,
    pub mu_es0: f64,
    pub relative_delta: f64,
    pub count_below: u32,
    pub count_above: u32,
    pub unresolved_below: u32,
    pub unresolved_above: u32,
    pub jump: i64,
}

/// Picks `a` so the os and es thresholds coincide, then counts on both sides.
pub fn triple_emergence_check(ctx: &ModelContext, b: f64, relative_delta: f64, opts: &RootOptions) -> Result<TripleEmergenceReport> {
    if !ctx.model().is_even_per_coordinate() {
        return Err(Error::NotEvenPerCoordinate);
    }
    if !(b > 0.0) {
        return Err(Error::InvalidArgument("b must be positive".into()));
    }
    let g = gammas(ctx)?;
    if !(g.gamma_os > g.gamma_es) {
        return Err(Error::InvalidArgument("os and es thresholds never coincide".into()));
    }
    let a = 4.0 * b * g.gamma_es / (g.gamma_os - g.gamma_es);
    let th = coupling_thresholds(ctx, a, b)?;
    let mu_os0 = g.gamma_os / b;
    let mu_es0 = th.es.value().unwrap_or(0.0);
    let below = solve(ctx, a, b, mu_os0 * (1.0 - relative_delta), opts)?;
    let above = solve(ctx, a, b, mu_os0 * (1.0 + relative_delta), opts)?;
    Ok(TripleEmergenceReport {
        a,
        b,
        mu_os0,
        mu_es0,
        relative_delta,
        count_below: below.total_count,
        count_above: above.total_count,
        unresolved_below: below.unresolved.len() as u32,
        unresolved_above: above.unresolved.len() as u32,
        jump: above.total_count as i64 - below.total_count as i64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityTwoConstruction {
    pub z0: f64,
    #[serde(rename = "A0")]
    pub a_profile: f64,
    pub a0: f64,
    pub b0: f64,
    pub mu: f64,
    /// `(Δ1, Δ2, Δ3)` at `z0`.
    pub verification: EsDeterminantParts,
    pub multiplicity_two: bool,
    /// All sign changes of `G` seen on the fallback scan.
    pub roots_found: usize,
}

/// `G_z(A) = ∫ (cos q1 + cos q2)/(z − e_A(q)) dq` for the stepped profile.
pub fn g_stepped(a_profile: f64, z0: f64) -> Result<f64> {
    let model = DispersionModel::stepped_phi_a(a_profile)?;
    let spec = QuadratureSpec::for_model(&model);
    let quad = TorusQuadrature::new(model, spec);
    Ok(quad.integrate_resolvent(&Weight::cos_sum(), z0, 1)?.value)
}

/// Finds `A` with `G_{z0}(A) = 0` and the couplings making `z0` a double es eigenvalue.
pub fn multiplicity_two_construct(z0: f64, mu: f64, opts: &RootOptions) -> Result<MultiplicityTwoConstruction> {
    if !(z0 > 1.0) {
        return Err(Error::BelowThreshold { z: z0, e_max: 1.0 });
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    let g = |a: f64| g_stepped(a, z0);
    let (g0, g1) = (g(0.0)?, g(1.0)?);
    if !(g0 < 0.0 && g1 > 0.0) {
        return Err(Error::SignChangeAbsent { g0, g1 });
    }
    // cheap trapezoid scan for sign changes, then an accurate solve on the smallest
    let n = 1000;
    let samples = (0..=n)
        .into_par_iter()
        .map(|i| g_stepped_coarse(i as f64 / n as f64, z0))
        .collect::<Result<Vec<_>>>()?;
    let brackets: Vec<usize> = (0..n).filter(|&i| samples[i] * samples[i + 1] <= 0.0 && samples[i] != samples[i + 1]).collect();
    let i = *brackets.first().ok_or(Error::SignChangeAbsent { g0, g1 })?;
    let (mut lo, mut hi) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
    while g(lo)? > 0.0 && lo > 0.0 {
        lo = (lo - 1.0 / n as f64).max(0.0);
    }
    while g(hi)? < 0.0 && hi < 1.0 {
        hi = (hi + 1.0 / n as f64).min(1.0);
    }
    let cell = std::sync::Mutex::new(None);
    let a_profile = brent(
        |x| match g(x) {
            Ok(v) => v,
            Err(e) => {
                cell.lock().unwrap().get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        1e-15,
        200,
    )
    .ok_or(Error::SignChangeAbsent { g0, g1 })?;
    if let Some(e) = cell.into_inner().unwrap() {
        return Err(e);
    }
    let ctx = ModelContext::new(DispersionModel::stepped_phi_a(a_profile)?)?;
    let alpha = z0 - ctx.e_max();
    let [i1, _, icc] = ctx.es_integrals(alpha);
    let a0 = 1.0 / (mu * i1);
    let b0 = 1.0 / (mu * icc);
    let verification = delta_es_offset(&ctx, a0, b0, mu, alpha);
    let multiplicity_two = multiplicity_check(&ctx, a0, b0, mu, z0, opts)?;
    Ok(MultiplicityTwoConstruction {
        z0,
        a_profile,
        a0,
        b0,
        mu,
        verification,
        multiplicity_two,
        roots_found: brackets.len(),
    })
}

/// Trapezoid estimate of `G_z(A)` on a 256² grid, good enough to locate sign changes.
fn g_stepped_coarse(a_profile: f64, z0: f64) -> Result<f64> {
    let model = DispersionModel::stepped_phi_a(a_profile)?;
    let alpha = z0 - model.value_at_pi();
    let n = 256;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let d1 = -std::f64::consts::PI + (i as f64 + 0.5) * h;
        for j in 0..n {
            let d2 = -std::f64::consts::PI + (j as f64 + 0.5) * h;
            sum += -(d1.cos() + d2.cos()) / (alpha + model.gap([d1, d2]));
        }
    }
    Ok(sum * h * h)
}

/// `G` normalized by the torus area, for reporting.
pub fn g_stepped_normalized(a_profile: f64, z0: f64) -> Result<f64> {
    g_stepped(a_profile, z0).map(|v| v / TORUS_AREA)
}

/// Count expected from the sign table, independent of root finding.
pub fn expected_counts(ctx: &ModelContext, a: f64, b: f64, mu: f64) -> Result<[u32; 4]> {
    let th = coupling_thresholds(ctx, a, b)?;
    let rank = |t: Threshold| match t {
        Threshold::Value(v) if crate::determinant::above_threshold(mu, v) => 1,
        _ => 0,
    };
    let mu0 = th.es.value().unwrap_or(0.0);
    Ok([
        rank(th.os),
        rank(th.oa),
        rank(th.ea),
        crate::determinant::es_expected_count(a, b, mu, mu0) as u32,
    ])
}
