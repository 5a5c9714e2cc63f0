//! Leading near-threshold coefficients and their comparison with measured
//! eigenvalue curves.
//!
//! Scaling variables: `λ = μ − μ_ω⁰` and `τ = λ/(−ln λ)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::context::{ModelContext, TORUS_AREA};
use crate::determinant::{find_eigenvalue_rank_one, find_eigenvalues_es_detailed, RootOptions};
use crate::error::{Error, Result};
use crate::fit::{least_squares, line_fit};
use crate::sector::Sector;
use crate::thresholds::{check_couplings, coupling_thresholds, es_constants, gammas};
use crate::torus_quad::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeadingCoefficients {
    pub a: f64,
    pub b: f64,
    /// Present for diagonal Hessians and `b > 0`.
    pub c_os: Option<f64>,
    pub c_oa: Option<f64>,
    pub c_ea: Option<f64>,
    /// `1/(J0(a + 4b))` when `a + 4b > 0`.
    pub es_exponent_rate: Option<f64>,
    /// `γ_es²(Θ*a − Θ**b)²/(J0 ab (a + 4b))` when `(a + 4b)/(ab) > 0`.
    pub lambda: Option<f64>,
    pub c_es_linear: Option<f64>,
}

fn normalized_threshold(ctx: &ModelContext, v: &Weight, k: u32) -> Result<f64> {
    Ok(ctx.quadrature().integrate_threshold(v, k)?.value / TORUS_AREA)
}

/// `c_ω` for a rank-one sector, `b > 0`.
pub fn leading_coefficient(ctx: &ModelContext, sector: Sector, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::InvalidArgument("rank-one sectors need b > 0".into()));
    }
    let g = gammas(ctx)?;
    let mu0 = g.get(sector) / b;
    match sector {
        Sector::Os | Sector::Oa => {
            let psi = ctx.morse().psi_deriv_sq.ok_or(Error::NonDiagonalHessian)?;
            Ok(2.0 / (b * ctx.morse().j0 * mu0 * mu0) / (psi[0] + psi[1]))
        }
        Sector::Ea => {
            let i = normalized_threshold(ctx, &Weight::cos_diff().square(), 2)?;
            Ok(1.0 / (b * mu0 * mu0 * i))
        }
        Sector::Es => Err(Error::InvalidArgument("es has no rank-one coefficient".into())),
    }
}

pub fn leading_coefficients(ctx: &ModelContext, a: f64, b: f64) -> Result<LeadingCoefficients> {
    check_couplings(a, b)?;
    let g = gammas(ctx)?;
    let es = es_constants(ctx)?;
    let j0 = ctx.morse().j0;
    let rank = |s: Sector| -> Result<Option<f64>> {
        if b <= 0.0 {
            return Ok(None);
        }
        match leading_coefficient(ctx, s, b) {
            Ok(c) => Ok(Some(c)),
            Err(Error::NonDiagonalHessian) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let s = a + 4.0 * b;
    let binds = s / (a * b) > 0.0;
    let lambda = binds.then(|| {
        let d = es.theta_star * a - es.theta_2star * b;
        g.gamma_es * g.gamma_es * d * d / (j0 * a * b * s)
    });
    let c_es_linear = if binds {
        let i = normalized_threshold(ctx, &Weight::cos_sum_plus_two().square(), 2)?;
        Some(a * b / (s * g.gamma_es * g.gamma_es) / i)
    } else {
        None
    };
    Ok(LeadingCoefficients {
        a,
        b,
        c_os: rank(Sector::Os)?,
        c_oa: rank(Sector::Oa)?,
        c_ea: rank(Sector::Ea)?,
        es_exponent_rate: (s > 0.0).then(|| 1.0 / (j0 * s)),
        lambda,
        c_es_linear,
    })
}

/// Which near-threshold law to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTarget {
    /// `E − e_max ≈ c_ω λ` (ea sector).
    RankOneLinear,
    /// `E − e_max ≈ c_ω τ` (os, oa sectors).
    RankOneLog,
    /// `ln(E − e_max) ≈ −rate/μ + const` for the top es eigenvalue as `μ → 0`.
    EsExponential,
    /// `ln(E − e_max) ≈ −Λ/λ + const` for the es eigenvalue emerging at `μ_es⁰`.
    EsLambda,
    /// `E − e_max ≈ c_es λ` on the balanced es branch.
    EsLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSpec {
    pub target: FitTarget,
    /// Range of `λ` (or of `μ` for [`FitTarget::EsExponential`]).
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Geometric spacing when true, linear otherwise.
    pub geometric: bool,
    /// Keep only samples with `E − e_max` in this window (es log-linear fits).
    pub offset_window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitSample {
    /// `λ` or `μ`.
    pub x: f64,
    pub offset: f64,
    /// Leading-order prediction of `E − e_max`, when it is explicit.
    pub predicted_offset: Option<f64>,
    /// Pointwise ratio of measured to predicted coefficient.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub sector: Sector,
    pub target: FitTarget,
    pub predicted: f64,
    pub measured: f64,
    pub relative_error: f64,
    pub sample_range: (f64, f64),
    pub residual: f64,
    pub intercept: Option<f64>,
    pub samples: Vec<FitSample>,
}

fn grid(spec: &SampleSpec) -> Result<Vec<f64>> {
    if !(spec.min > 0.0 && spec.max > spec.min && spec.points >= 2) {
        return Err(Error::InvalidArgument("sample range must satisfy 0 < min < max, points >= 2".into()));
    }
    let n = spec.points;
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            if spec.geometric {
                spec.min * (spec.max / spec.min).powf(t)
            } else {
                spec.min + (spec.max - spec.min) * t
            }
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn report(sector: Sector, target: FitTarget, predicted: f64, measured: f64, range: (f64, f64), residual: f64, intercept: Option<f64>, samples: Vec<FitSample>) -> FitReport {
    FitReport {
        sector,
        target,
        predicted,
        measured,
        relative_error: (measured - predicted).abs() / predicted.abs(),
        sample_range: range,
        residual,
        intercept,
        samples,
    }
}

pub fn fit_eigenvalue_asymptotics(
    ctx: &ModelContext,
    sector: Sector,
    a: f64,
    b: f64,
    spec: &SampleSpec,
    opts: &RootOptions,
) -> Result<FitReport> {
    check_couplings(a, b)?;
    let xs = grid(spec)?;
    let range = (spec.min, spec.max);
    let coeffs = leading_coefficients(ctx, a, b)?;
    let th = coupling_thresholds(ctx, a, b)?;
    let need = |o: Option<f64>, what: &str| o.ok_or_else(|| Error::InvalidArgument(format!("{what} undefined for a = {a}, b = {b}")));
    match spec.target {
        FitTarget::RankOneLinear | FitTarget::RankOneLog => {
            if sector == Sector::Es {
                return Err(Error::InvalidArgument("rank-one fit requested for es".into()));
            }
            let c = leading_coefficient(ctx, sector, b)?;
            let mu0 = need(th.get(sector).value(), "threshold")?;
            let offsets = xs
                .par_iter()
                .map(|&lam| {
                    find_eigenvalue_rank_one(ctx, sector, b, mu0 + lam, opts)?
                        .map(|r| r.offset)
                        .ok_or_else(|| Error::InvalidArgument(format!("no eigenvalue at lambda = {lam}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let scale = |lam: f64| match spec.target {
                FitTarget::RankOneLinear => lam,
                _ => lam / (-lam.ln()),
            };
            let samples: Vec<FitSample> = xs
                .iter()
                .zip(&offsets)
                .map(|(&lam, &off)| FitSample { x: lam, offset: off, predicted_offset: Some(c * scale(lam)), ratio: Some(off / (c * scale(lam))) })
                .collect();
            // measured coefficient at the smallest λ
            let i = xs.iter().enumerate().min_by(|p, q| p.1.partial_cmp(q.1).unwrap()).unwrap().0;
            let measured = offsets[i] / scale(xs[i]);
            let ratios: Vec<f64> = samples.iter().map(|s| s.ratio.unwrap()).collect();
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            let spread = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / ratios.len() as f64).sqrt();
            Ok(report(sector, spec.target, c, measured, range, spread, None, samples))
        }
        FitTarget::EsExponential | FitTarget::EsLambda | FitTarget::EsLinear => {
            if sector != Sector::Es {
                return Err(Error::InvalidArgument("es fit requested for a rank-one sector".into()));
            }
            let mu0 = th.es.value().unwrap_or(0.0);
            let (predicted, mu_of): (f64, Box<dyn Fn(f64) -> f64 + Sync>) = match spec.target {
                FitTarget::EsExponential => (need(coeffs.es_exponent_rate, "exponential rate")?, Box::new(|m| m)),
                FitTarget::EsLambda => (need(coeffs.lambda, "Lambda")?, Box::new(move |l| mu0 + l)),
                _ => (need(coeffs.c_es_linear, "linear es coefficient")?, Box::new(move |l| mu0 + l)),
            };
            let top = spec.target == FitTarget::EsExponential;
            let offsets = xs
                .par_iter()
                .map(|&x| {
                    let roots = find_eigenvalues_es_detailed(ctx, a, b, mu_of(x), opts)?;
                    let wanted_missing = if top { roots.records.is_empty() } else { roots.unresolved > 0 };
                    if wanted_missing {
                        return Err(Error::UnresolvableRoots { floor: opts.floor });
                    }
                    let r = if top { roots.records.first() } else { roots.records.last() };
                    r.map(|r| r.offset).ok_or_else(|| Error::InvalidArgument(format!("no es eigenvalue at {x}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if spec.target == FitTarget::EsLinear {
                let samples: Vec<FitSample> = xs
                    .iter()
                    .zip(&offsets)
                    .map(|(&l, &o)| FitSample { x: l, offset: o, predicted_offset: Some(predicted * l), ratio: Some(o / (predicted * l)) })
                    .collect();
                let f = line_fit(&xs, &offsets);
                return Ok(report(sector, spec.target, predicted, f.slope, range, f.rms, Some(f.intercept), samples));
            }
            let (lo, hi) = spec.offset_window.unwrap_or((0.0, f64::INFINITY));
            let samples: Vec<FitSample> = xs
                .iter()
                .zip(&offsets)
                .filter(|(_, &o)| o >= lo && o <= hi)
                .map(|(&v, &o)| FitSample { x: v, offset: o, predicted_offset: None, ratio: None })
                .collect();
            if samples.len() < 3 {
                return Err(Error::InvalidArgument("fewer than three samples inside the offset window".into()));
            }
            let x: Vec<f64> = samples.iter().map(|s| -1.0 / s.x).collect();
            let y: Vec<f64> = samples.iter().map(|s| s.offset.ln()).collect();
            let f = line_fit(&x, &y);
            Ok(report(sector, spec.target, predicted, f.slope, range, f.rms, Some(f.intercept), samples))
        }
    }
}

/// Fit of `B(e_max + α) = ∫ v/(e_max + α − e) dq` against `p ln α + q + rα`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogCoefficientReport {
    pub predicted: f64,
    pub measured: f64,
    pub absolute_error: f64,
    pub constant: f64,
    pub linear: f64,
    pub residual: f64,
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
}

/// Regresses the resolvent integral of `v` on `ln α`; the prediction is `−π J(ψ(0)) v(π⃗)`.
pub fn extract_log_coefficient(ctx: &ModelContext, v: &Weight, alphas: &[f64]) -> Result<LogCoefficientReport> {
    if alphas.len() < 6 || alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidArgument("need at least six positive offsets".into()));
    }
    let values = alphas
        .iter()
        .map(|&al| ctx.quadrature().integrate_resolvent_offset(v, al, 1).map(|r| r.value))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = alphas.iter().map(|&al| vec![al.ln(), 1.0, al]).collect();
    let (c, residual) = least_squares(&rows, &values);
    let predicted = -std::f64::consts::PI * ctx.morse().j_psi0 * v.at_offset([0.0, 0.0]);
    Ok(LogCoefficientReport {
        predicted,
        measured: c[0],
        absolute_error: (c[0] - predicted).abs(),
        constant: c[1],
        linear: c[2],
        residual,
        alphas: alphas.to_vec(),
        values,
    })
}

/// Geometric offsets from `hi` down to `lo`.
pub fn geometric_offsets(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| hi * (lo / hi).powf(i as f64 / (n - 1) as f64)).collect()
}
