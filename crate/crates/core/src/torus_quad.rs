//! Quadrature of `∫ v(q) / (z − e(q))^k dq` over the torus.
//!
//! Resolvent integrals use a polar rule centred at π⃗ covering the whole
//! fundamental square. Angles are split into sectors at the square's corners
//! and at every angle where a ray passes through an intersection of kink
//! lines; along each ray the radial variable is split at a geometric mesh
//! down to `r_min` (resolving peaks of width `√(z − e_max)`), at kink
//! crossings, and into uniform panels beyond `patch_radius`. Every panel
//! carries Gauss–Legendre nodes, so the rule is spectrally accurate for
//! piecewise-analytic dispersions and can be evaluated directly at the
//! threshold when the integrand stays bounded there.
//!
//! Nodes depend only on the model, so a [`Kernel`] caches
//! `(gap_j, w_j v_j)` and every later evaluation is a single pass.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc, OnceLock};

use gauss_quad::legendre::GaussLegendre;

use crate::dispersion::DispersionModel;
use crate::error::{Error, Result};

type OffsetFn = dyn Fn([f64; 2]) -> f64 + Send + Sync;

/// A weight function on the torus, evaluated in offset coordinates `d = q − π⃗`.
///
/// The standard weights are written in forms that keep full relative precision
/// as `d → 0`, which matters once they are divided by powers of the gap.
#[derive(Clone)]
pub struct Weight {
    f: Arc<OffsetFn>,
    label: String,
}

impl std::fmt::Debug for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Weight({})", self.label)
    }
}

impl Weight {
    pub fn from_offset(label: impl Into<String>, f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), label: label.into() }
    }

    /// Wraps a function of the torus point `q` itself.
    pub fn from_torus(label: impl Into<String>, f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_offset(label, move |d| f([PI + d[0], PI + d[1]]))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn at_offset(&self, d: [f64; 2]) -> f64 {
        (self.f)(d)
    }

    pub fn at(&self, q: [f64; 2]) -> f64 {
        (self.f)([q[0] - PI, q[1] - PI])
    }

    pub fn unit() -> Self {
        Self::from_offset("1", |_| 1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::from_offset(format!("{c}"), move |_| c)
    }

    /// `sin q1 + sin q2`.
    pub fn sin_sum() -> Self {
        Self::from_offset("sin q1 + sin q2", |d| -(d[0].sin() + d[1].sin()))
    }

    /// `sin q1 − sin q2`.
    pub fn sin_diff() -> Self {
        Self::from_offset("sin q1 - sin q2", |d| d[1].sin() - d[0].sin())
    }

    /// `cos q1 + cos q2`.
    pub fn cos_sum() -> Self {
        Self::from_offset("cos q1 + cos q2", |d| -(d[0].cos() + d[1].cos()))
    }

    /// `cos q1 − cos q2`.
    pub fn cos_diff() -> Self {
        Self::from_offset("cos q1 - cos q2", |d| {
            2.0 * (0.5 * (d[0] + d[1])).sin() * (0.5 * (d[0] - d[1])).sin()
        })
    }

    /// `2 + cos q1 + cos q2`.
    pub fn cos_sum_plus_two() -> Self {
        Self::from_offset("2 + cos q1 + cos q2", |d| {
            let (s1, s2) = ((0.5 * d[0]).sin(), (0.5 * d[1]).sin());
            2.0 * (s1 * s1 + s2 * s2)
        })
    }

    /// `2 − cos q1 − cos q2`.
    pub fn two_minus_cos_sum() -> Self {
        Self::from_offset("2 - cos q1 - cos q2", |d| 2.0 + d[0].cos() + d[1].cos())
    }

    pub fn square(&self) -> Self {
        let f = self.f.clone();
        Self::from_offset(format!("({})^2", self.label), move |d| {
            let v = f(d);
            v * v
        })
    }

    pub fn times(&self, other: &Weight) -> Self {
        let (f, g) = (self.f.clone(), other.f.clone());
        Self::from_offset(format!("({})({})", self.label, other.label), move |d| f(d) * g(d))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let f = self.f.clone();
        Self::from_offset(format!("{c}({})", self.label), move |d| c * f(d))
    }

    /// `s·self + t·other`.
    pub fn combine(&self, s: f64, other: &Weight, t: f64) -> Self {
        let (f, g) = (self.f.clone(), other.f.clone());
        Self::from_offset(
            format!("{s}({}) + {t}({})", self.label, other.label),
            move |d| s * f(d) + t * g(d),
        )
    }
}

/// Discretization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    /// Points per axis of the periodic trapezoid used by [`integrate_smooth`].
    pub grid_n: usize,
    /// Radius up to which the radial mesh is geometrically graded; also the
    /// width of the uniform outer panels.
    pub patch_radius: f64,
    /// Innermost radial breakpoint.
    pub r_min: f64,
    /// Gauss–Legendre nodes per radial panel at refinement level 0.
    pub radial_order: usize,
    /// Gauss–Legendre nodes per angular sector at refinement level 0.
    pub angular_order: usize,
    /// Relative tolerance targeted by the adaptive resolvent integral.
    pub radial_tol: f64,
    pub max_refine: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            grid_n: 256,
            patch_radius: 0.5,
            r_min: 1e-9,
            radial_order: 10,
            angular_order: 16,
            radial_tol: 1e-10,
            max_refine: 4,
        }
    }
}

impl QuadratureSpec {
    pub fn for_model(model: &DispersionModel) -> Self {
        let mut s = Self::default();
        if !model.is_analytic() {
            s.grid_n = 1024;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 32 || !self.grid_n.is_multiple_of(2) {
            return Err(Error::InvalidArgument("grid_n must be even and at least 32".into()));
        }
        if !(self.patch_radius > 0.0 && self.patch_radius < 1.0) {
            return Err(Error::InvalidArgument("patch_radius must lie in (0,1)".into()));
        }
        if !(self.r_min > 0.0 && self.r_min < self.patch_radius) {
            return Err(Error::InvalidArgument("r_min must lie in (0, patch_radius)".into()));
        }
        if self.radial_order < 2 || self.angular_order < 2 {
            return Err(Error::InvalidArgument("quadrature orders must be at least 2".into()));
        }
        if !(self.radial_tol > 0.0) {
            return Err(Error::InvalidArgument("radial_tol must be positive".into()));
        }
        Ok(())
    }
}

/// A value with an error estimate from two refinement levels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
}

/// Gauss–Legendre nodes and weights on [−1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let Some(deg) = NonZeroUsize::new(n) else {
        return (Vec::new(), Vec::new());
    };
    let mut pairs = GaussLegendre::new(deg).into_node_weight_pairs().into_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Periodic trapezoid on the offset grid, with the estimate from halving the grid.
pub fn integrate_smooth(v: impl Fn([f64; 2]) -> f64, spec: &QuadratureSpec) -> IntegralResult {
    let rule = |n: usize| {
        let h = 2.0 * PI / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let p1 = -PI + (i as f64 + 0.5) * h;
            for j in 0..n {
                s += v([p1, -PI + (j as f64 + 0.5) * h]);
            }
        }
        s * h * h
    };
    let fine = rule(2 * spec.grid_n);
    let coarse = rule(spec.grid_n);
    IntegralResult { value: fine, error_estimate: (fine - coarse).abs() }
}

/// Quadrature nodes of the polar rule.
#[derive(Debug, Clone)]
pub struct PolarRule {
    pub offsets: Vec<[f64; 2]>,
    pub gaps: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PolarRule {
    /// Builds the rule on `{ |d| > r_inner }` at the given refinement level.
    pub fn build(model: &DispersionModel, spec: &QuadratureSpec, level: usize, r_inner: f64) -> Self {
        let n_theta = spec.angular_order + 4 * level;
        let n_r = spec.radial_order + 2 * level;
        let (xt, wt) = gauss_legendre(n_theta);
        let (xr, wr) = gauss_legendre(n_r);
        let kinks = model.profile_kinks();
        let angles = sector_angles(&kinks);

        let mut rule = PolarRule { offsets: Vec::new(), gaps: Vec::new(), weights: Vec::new() };
        let mut breaks: Vec<f64> = Vec::new();
        for win in angles.windows(2) {
            let (t0, t1) = (win[0], win[1]);
            let (tm, th) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
            for (&x, &w) in xt.iter().zip(&wt) {
                let theta = tm + th * x;
                let wtheta = th * w;
                let (s, c) = theta.sin_cos();
                let rmax = PI / c.abs().max(s.abs());
                radial_breaks(&mut breaks, rmax, &kinks, c, s, spec, r_inner);
                for seg in breaks.windows(2) {
                    let (r0, r1) = (seg[0], seg[1]);
                    let (rm, rh) = (0.5 * (r0 + r1), 0.5 * (r1 - r0));
                    for (&y, &v) in xr.iter().zip(&wr) {
                        let r = rm + rh * y;
                        let d = [r * c, r * s];
                        rule.offsets.push(d);
                        rule.gaps.push(model.gap(d));
                        rule.weights.push(wtheta * rh * v * r);
                    }
                }
            }
        }
        rule
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Sector boundaries in [0, 2π]: axes, corners, and kink-grid intersections.
fn sector_angles(kinks: &[f64]) -> Vec<f64> {
    let mut levels: Vec<f64> = kinks.to_vec();
    levels.push(PI);
    let mut first = vec![0.0, PI / 2.0];
    for &u in &levels {
        for &v in &levels {
            first.push(v.atan2(u));
        }
    }
    let mut all = Vec::new();
    for &t in &first {
        all.extend([t, PI - t, PI + t, 2.0 * PI - t]);
    }
    all.push(2.0 * PI);
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    all.retain(|&t| (-1e-15..=2.0 * PI + 1e-15).contains(&t));
    all
}

fn radial_breaks(
    out: &mut Vec<f64>,
    rmax: f64,
    kinks: &[f64],
    c: f64,
    s: f64,
    spec: &QuadratureSpec,
    r_inner: f64,
) {
    out.clear();
    let delta = spec.patch_radius;
    let start = r_inner.max(0.0);
    out.push(start);
    let mut r = if start > 0.0 { 2.0 * start } else { spec.r_min };
    while r < delta {
        out.push(r);
        r *= 2.0;
    }
    let from = start.max(delta);
    let panels = ((rmax - from) / delta).ceil().max(1.0) as usize;
    for j in 0..panels {
        out.push(from + (rmax - from) * j as f64 / panels as f64);
    }
    out.push(rmax);
    for &k in kinks {
        for t in [c.abs(), s.abs()] {
            if t > 1e-14 {
                let x = k / t;
                if x > start && x < rmax {
                    out.push(x);
                }
            }
        }
    }
    out.retain(|&x| x >= start && x <= rmax);
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * rmax);
}

/// Weight values cached on two consecutive refinement levels.
#[derive(Debug, Clone)]
pub struct Kernel {
    coarse: (Arc<PolarRule>, Vec<f64>),
    fine: (Arc<PolarRule>, Vec<f64>),
}

impl Kernel {
    fn sum(rule: &PolarRule, wv: &[f64], alpha: f64, k: u32) -> (f64, f64) {
        let (mut s, mut a) = (0.0, 0.0);
        match k {
            1 => {
                for (g, w) in rule.gaps.iter().zip(wv) {
                    let t = w / (alpha + g);
                    s += t;
                    a += t.abs();
                }
            }
            2 => {
                for (g, w) in rule.gaps.iter().zip(wv) {
                    let den = alpha + g;
                    let t = w / (den * den);
                    s += t;
                    a += t.abs();
                }
            }
            _ => {
                for (g, w) in rule.gaps.iter().zip(wv) {
                    let t = w / (alpha + g).powi(k as i32);
                    s += t;
                    a += t.abs();
                }
            }
        }
        (s, a)
    }

    /// `∫ v / (α + gap)^k` on the finer level.
    pub fn eval(&self, alpha: f64, k: u32) -> f64 {
        Self::sum(&self.fine.0, &self.fine.1, alpha, k).0
    }

    /// Value, error estimate, and `∫ |v| / (α + gap)^k`.
    pub fn eval_full(&self, alpha: f64, k: u32) -> (IntegralResult, f64) {
        let (f, abs) = Self::sum(&self.fine.0, &self.fine.1, alpha, k);
        let (c, _) = Self::sum(&self.coarse.0, &self.coarse.1, alpha, k);
        (IntegralResult { value: f, error_estimate: (f - c).abs() }, abs)
    }
}

/// Resolvent quadrature bound to a model; node sets are built lazily per level.
#[derive(Debug)]
pub struct TorusQuadrature {
    model: DispersionModel,
    spec: QuadratureSpec,
    e_max: f64,
    rules: Vec<OnceLock<Arc<PolarRule>>>,
}

impl TorusQuadrature {
    pub fn new(model: DispersionModel, spec: QuadratureSpec) -> Self {
        let e_max = model.value_at_pi();
        let rules = (0..spec.max_refine + 2).map(|_| OnceLock::new()).collect();
        Self { model, spec, e_max, rules }
    }

    pub fn with_default_spec(model: DispersionModel) -> Self {
        let spec = QuadratureSpec::for_model(&model);
        Self::new(model, spec)
    }

    pub fn model(&self) -> &DispersionModel {
        &self.model
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn rule(&self, level: usize) -> Arc<PolarRule> {
        self.rules[level]
            .get_or_init(|| Arc::new(PolarRule::build(&self.model, &self.spec, level, 0.0)))
            .clone()
    }

    fn values(rule: &PolarRule, v: &Weight) -> Vec<f64> {
        rule.offsets
            .iter()
            .zip(&rule.weights)
            .map(|(d, w)| w * v.at_offset(*d))
            .collect()
    }

    /// Cached kernel on levels `level` and `level + 1`.
    pub fn kernel_at(&self, v: &Weight, level: usize) -> Kernel {
        let c = self.rule(level);
        let f = self.rule(level + 1);
        let cv = Self::values(&c, v);
        let fv = Self::values(&f, v);
        Kernel { coarse: (c, cv), fine: (f, fv) }
    }

    pub fn kernel(&self, v: &Weight) -> Kernel {
        self.kernel_at(v, 0)
    }

    /// `∫ v / (z − e)^k` for `z > e_max`.
    pub fn integrate_resolvent(&self, v: &Weight, z: f64, k: u32) -> Result<IntegralResult> {
        if !(z > self.e_max) {
            return Err(Error::BelowThreshold { z, e_max: self.e_max });
        }
        self.integrate_resolvent_offset(v, z - self.e_max, k)
    }

    /// Same as [`Self::integrate_resolvent`] with `z = e_max + alpha`.
    pub fn integrate_resolvent_offset(&self, v: &Weight, alpha: f64, k: u32) -> Result<IntegralResult> {
        if !(alpha > 0.0) {
            return Err(Error::BelowThreshold { z: self.e_max + alpha, e_max: self.e_max });
        }
        self.refine(v, alpha, k)
    }

    fn refine(&self, v: &Weight, alpha: f64, k: u32) -> Result<IntegralResult> {
        let mut last = None;
        for level in 0..=self.spec.max_refine {
            let (res, abs) = self.kernel_at(v, level).eval_full(alpha, k);
            let target = self.spec.radial_tol * abs.max(f64::MIN_POSITIVE);
            if res.error_estimate <= target {
                return Ok(res);
            }
            last = Some((res, target));
        }
        let (res, target) = last.unwrap();
        Err(Error::NoConvergence { estimate: res.error_estimate, target })
    }

    /// Numerical order of vanishing of `v` at π⃗ from two rings.
    pub fn vanishing_order(v: &Weight) -> f64 {
        let ring = |r: f64| {
            (0..64)
                .map(|j| {
                    let t = 2.0 * PI * (j as f64 + 0.5) / 64.0;
                    v.at_offset([r * t.cos(), r * t.sin()]).abs()
                })
                .fold(0.0, f64::max)
        };
        let (big, small) = (ring(1e-2), ring(5e-3));
        if big == 0.0 {
            return f64::INFINITY;
        }
        if small == 0.0 {
            return f64::INFINITY;
        }
        (big / small).log2()
    }

    /// `∫ v / (e_max − e)^k`, evaluated directly on the polar rule after
    /// checking integrability on the sequence `α = 10^-3, …, 10^-9`.
    pub fn integrate_threshold(&self, v: &Weight, k: u32) -> Result<IntegralResult> {
        let order = Self::vanishing_order(v);
        let need = 2.0 * k as f64 - 2.0;
        if order < need + 0.5 {
            return Err(Error::NotIntegrable(format!(
                "weight '{}' vanishes to order {order:.2} at pi, need more than {need}",
                v.label()
            )));
        }
        let kern = self.kernel(v);
        let seq: Vec<f64> = (3..=9).map(|j| kern.eval(10f64.powi(-j), k)).collect();
        let first = (seq[1] - seq[0]).abs();
        let last = (seq[6] - seq[5]).abs();
        if last > 0.3 * first && last > 1e-9 * seq[6].abs().max(1e-300) {
            return Err(Error::NotIntegrable(format!(
                "values keep growing as alpha decreases (last step {last:e})"
            )));
        }
        let (res, _) = kern.eval_full(0.0, k);
        Ok(res)
    }

    /// `∫_{|q − π⃗| > r} v / (e_max − e)^k` on an annular rule.
    pub fn integrate_excised(&self, v: &Weight, k: u32, r: f64) -> IntegralResult {
        let eval = |level: usize| {
            let rule = PolarRule::build(&self.model, &self.spec, level, r);
            rule.offsets
                .iter()
                .zip(&rule.weights)
                .zip(&rule.gaps)
                .map(|((d, w), g)| w * v.at_offset(*d) / g.powi(k as i32))
                .sum::<f64>()
        };
        let (c, f) = (eval(0), eval(1));
        IntegralResult { value: f, error_estimate: (f - c).abs() }
    }
}
