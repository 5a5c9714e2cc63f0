//! Sector constants, coupling thresholds, and threshold-solution classification.
//!
//! With `B₀[v] = (1/4π²) ∫ v / (e_max − e)`:
//!
//! * `γ_ω = 1 / B₀[w_ω²]` for the four sector profiles,
//! * `Θ* = B₀[2 + c]`, `Θ** = B₀[2c(2 + c)]`, `κ₁ = B₀[4 − c²]` with `c = cos q1 + cos q2`.
//!
//! A constant `κ₀` is sometimes quoted next to `κ₁` but has no defining formula;
//! it is not computed.

use std::f64::consts::PI;

use serde::Serialize;

use crate::context::{ModelContext, TORUS_AREA};
use crate::error::{Error, Result};
use crate::fit::line_fit;
use crate::sector::Sector;
use crate::torus_quad::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorConstants {
    pub gamma_os: f64,
    pub gamma_oa: f64,
    pub gamma_ea: f64,
    pub gamma_es: f64,
}

impl SectorConstants {
    pub fn get(&self, s: Sector) -> f64 {
        match s {
            Sector::Os => self.gamma_os,
            Sector::Oa => self.gamma_oa,
            Sector::Ea => self.gamma_ea,
            Sector::Es => self.gamma_es,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EsConstants {
    pub theta_star: f64,
    pub theta_2star: f64,
    pub kappa1: f64,
}

/// A coupling threshold, or the statement that the sector never binds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Value(f64),
    NoThreshold,
}

impl Threshold {
    pub fn value(self) -> Option<f64> {
        match self {
            Threshold::Value(v) => Some(v),
            Threshold::NoThreshold => None,
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threshold::Value(v) => s.serialize_f64(*v),
            Threshold::NoThreshold => s.serialize_str("none"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingThresholds {
    pub a: f64,
    pub b: f64,
    pub os: Threshold,
    pub oa: Threshold,
    pub ea: Threshold,
    pub es: Threshold,
    pub even_per_coordinate: bool,
}

impl CouplingThresholds {
    pub fn get(&self, s: Sector) -> Threshold {
        match s {
            Sector::Os => self.os,
            Sector::Oa => self.oa,
            Sector::Ea => self.ea,
            Sector::Es => self.es,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdSolution {
    Resonance { profile: String },
    ThresholdEigenfunction { profile: String },
    NoSolution,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdClassification {
    pub os: ThresholdSolution,
    pub oa: ThresholdSolution,
    pub ea: ThresholdSolution,
    pub es: ThresholdSolution,
}

pub fn check_couplings(a: f64, b: f64) -> Result<()> {
    if a == 0.0 || b == 0.0 || !a.is_finite() || !b.is_finite() {
        return Err(Error::ZeroCoupling { a, b });
    }
    Ok(())
}

fn threshold_integral(ctx: &ModelContext, v: &Weight, k: u32) -> Result<f64> {
    Ok(ctx.quadrature().integrate_threshold(v, k)?.value / TORUS_AREA)
}

pub fn gammas(ctx: &ModelContext) -> Result<SectorConstants> {
    ctx.gammas
        .get_or_init(|| {
            let g = |s: Sector| threshold_integral(ctx, &s.weight().square(), 1).map(|v| 1.0 / v);
            Ok(SectorConstants {
                gamma_os: g(Sector::Os)?,
                gamma_oa: g(Sector::Oa)?,
                gamma_ea: g(Sector::Ea)?,
                gamma_es: g(Sector::Es)?,
            })
        })
        .clone()
}

pub fn es_constants(ctx: &ModelContext) -> Result<EsConstants> {
    ctx.es
        .get_or_init(|| {
            let p = Weight::cos_sum_plus_two();
            let c = Weight::cos_sum();
            Ok(EsConstants {
                theta_star: threshold_integral(ctx, &p, 1)?,
                theta_2star: threshold_integral(ctx, &c.times(&p).scaled(2.0), 1)?,
                kappa1: threshold_integral(ctx, &Weight::two_minus_cos_sum().times(&p), 1)?,
            })
        })
        .clone()
}

pub fn coupling_thresholds(ctx: &ModelContext, a: f64, b: f64) -> Result<CouplingThresholds> {
    check_couplings(a, b)?;
    let g = gammas(ctx)?;
    let even = ctx.model().is_even_per_coordinate();
    if even && (g.gamma_os - g.gamma_oa).abs() > 1e-8 * g.gamma_os {
        return Err(Error::NoConvergence {
            estimate: (g.gamma_os - g.gamma_oa).abs(),
            target: 1e-8 * g.gamma_os,
        });
    }
    let rank_one = |gamma: f64| if b > 0.0 { Threshold::Value(gamma / b) } else { Threshold::NoThreshold };
    let ratio = (a + 4.0 * b) / (a * b);
    Ok(CouplingThresholds {
        a,
        b,
        os: rank_one(g.gamma_os),
        oa: rank_one(g.gamma_oa),
        ea: rank_one(g.gamma_ea),
        es: Threshold::Value(if ratio > 0.0 { ratio * g.gamma_es } else { 0.0 }),
        even_per_coordinate: even,
    })
}

/// Whether `Θ*a = Θ**b` holds to the relative tolerance `tol`.
pub fn es_balance_holds(es: &EsConstants, a: f64, b: f64, tol: f64) -> bool {
    let (x, y) = (es.theta_star * a, es.theta_2star * b);
    let scale = x.abs() + y.abs();
    scale == 0.0 || (x - y).abs() / scale <= tol
}

pub fn classify_threshold_solutions(
    ctx: &ModelContext,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<ThresholdClassification> {
    check_couplings(a, b)?;
    let es = es_constants(ctx)?;
    let rank = |profile: &str, eigen: bool| {
        if b <= 0.0 {
            ThresholdSolution::NotApplicable
        } else if eigen {
            ThresholdSolution::ThresholdEigenfunction { profile: profile.into() }
        } else {
            ThresholdSolution::Resonance { profile: profile.into() }
        }
    };
    let es_sol = if (a + 4.0 * b) / (a * b) > 0.0 {
        if es_balance_holds(&es, a, b, tol) {
            ThresholdSolution::ThresholdEigenfunction {
                profile: "(2 + cos p1 + cos p2)/(e_max - e(p))".into(),
            }
        } else {
            ThresholdSolution::NoSolution
        }
    } else {
        ThresholdSolution::NotApplicable
    };
    Ok(ThresholdClassification {
        os: rank("(sin p1 + sin p2)/(e_max - e(p))", false),
        oa: rank("(sin p1 - sin p2)/(e_max - e(p))", false),
        ea: rank("(cos p1 - cos p2)/(e_max - e(p))", true),
        es: es_sol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    LogDivergent,
    Convergent,
}

/// Behaviour of `I(r) = ∫_{|q−π⃗|>r} |Φ_ω|² dq/4π²` as `r → 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceProbe {
    pub sector: Sector,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Fit of `I` against `ln(1/r)`.
    pub log_slope: f64,
    pub log_intercept: f64,
    pub r_squared: f64,
    /// `|I(r_k) − I(r_{k+1})|` along the sequence.
    pub cauchy: Vec<f64>,
    pub growth: Growth,
}

/// Geometric radii `r_max, r_max/2, …` down to `r_min`.
pub fn halving_radii(r_max: f64, r_min: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = r_max;
    while r >= r_min * (1.0 - 1e-12) {
        out.push(r);
        r *= 0.5;
    }
    out
}

/// Measures `I(r)` for `Φ_ω = w_ω/(e_max − e)`, normalized by the torus area.
pub fn resonance_integrability_probe(
    ctx: &ModelContext,
    sector: Sector,
    radii: &[f64],
) -> Result<ResonanceProbe> {
    if radii.len() < 3 {
        return Err(Error::InvalidArgument("need at least three radii".into()));
    }
    let w = sector.weight().square();
    let values: Vec<f64> = radii
        .iter()
        .map(|&r| ctx.quadrature().integrate_excised(&w, 2, r).value / TORUS_AREA)
        .collect();
    let x: Vec<f64> = radii.iter().map(|r| (1.0 / r).ln()).collect();
    let fit = line_fit(&x, &values);
    let cauchy: Vec<f64> = values.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    let n = cauchy.len();
    // log divergence gives constant increments per halving, convergence gives shrinking ones
    let shrinking = n >= 2 && cauchy[n - 1] < 0.6 * cauchy[n - 2];
    let growth = if shrinking { Growth::Convergent } else { Growth::LogDivergent };
    Ok(ResonanceProbe {
        sector,
        radii: radii.to_vec(),
        values,
        log_slope: fit.slope,
        log_intercept: fit.intercept,
        r_squared: fit.r_squared,
        cauchy,
        growth,
    })
}

/// The closed-form Laplacian constants, for reference output.
pub fn laplacian_reference() -> (SectorConstants, EsConstants) {
    (
        SectorConstants {
            gamma_os: PI / (2.0 * PI - 4.0),
            gamma_oa: PI / (2.0 * PI - 4.0),
            gamma_ea: PI / (8.0 - 2.0 * PI),
            gamma_es: 0.5,
        },
        EsConstants { theta_star: 1.0, theta_2star: 0.0, kappa1: 2.0 },
    )
}
