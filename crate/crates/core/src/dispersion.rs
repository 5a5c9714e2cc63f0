//! Dispersion relations on the torus and their maximum-point data.
//!
//! All kinds share the normalization `e(p) = sum_x ê(x) exp(i p·x)`, so the
//! discrete Laplacian `2 - cos p1 - cos p2` has `ê(0) = 2`, `ê(±e_i) = -1/2`.
//! Evaluation near the maximizer goes through [`DispersionModel::gap`], which
//! returns `e_max - e(π⃗ + d)` without cancellation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The point (π, π).
pub const PI_VEC: [f64; 2] = [PI, PI];

/// Reduce an angle to (−π, π].
pub fn wrap(t: f64) -> f64 {
    let mut r = t - 2.0 * PI * (t / (2.0 * PI)).round();
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Finite hopping table `ê(x)` keyed by lattice vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HoppingTable {
    entries: Vec<([i64; 2], f64)>,
}

impl HoppingTable {
    /// Builds a table, summing duplicate keys and dropping exact zeros.
    pub fn new(entries: impl IntoIterator<Item = ([i64; 2], f64)>) -> Self {
        let mut v: Vec<([i64; 2], f64)> = entries.into_iter().collect();
        v.sort_by_key(|a| a.0);
        let mut out: Vec<([i64; 2], f64)> = Vec::with_capacity(v.len());
        for (x, c) in v {
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 += c,
                _ => out.push((x, c)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        Self { entries: out }
    }

    pub fn laplacian() -> Self {
        Self::new([
            ([0, 0], 2.0),
            ([1, 0], -0.5),
            ([-1, 0], -0.5),
            ([0, 1], -0.5),
            ([0, -1], -0.5),
        ])
    }

    pub fn entries(&self) -> &[([i64; 2], f64)] {
        &self.entries
    }

    pub fn get(&self, x: [i64; 2]) -> f64 {
        self.entries
            .binary_search_by(|e| e.0.cmp(&x))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Largest `|x|∞` carrying a nonzero coefficient.
    pub fn radius(&self) -> i64 {
        self.entries
            .iter()
            .map(|(x, _)| x[0].abs().max(x[1].abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1.abs()).sum()
    }

    /// Sum of `|ê(x)|` over the shell `|x|∞ = r`.
    pub fn shell_mass(&self, r: i64) -> f64 {
        self.entries
            .iter()
            .filter(|(x, _)| x[0].abs().max(x[1].abs()) == r)
            .map(|e| e.1.abs())
            .sum()
    }

    /// Restriction to `|x|∞ ≤ r`.
    pub fn truncate(&self, r: i64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(x, _)| x[0].abs().max(x[1].abs()) <= r)
                .copied()
                .collect(),
        }
    }

    pub fn is_even(&self, tol: f64) -> bool {
        self.entries
            .iter()
            .all(|&(x, c)| (self.get([-x[0], -x[1]]) - c).abs() <= tol * c.abs().max(1.0))
    }

    pub fn is_swap_symmetric(&self, tol: f64) -> bool {
        self.entries
            .iter()
            .all(|&(x, c)| (self.get([x[1], x[0]]) - c).abs() <= tol * c.abs().max(1.0))
    }

    pub fn is_even_per_coordinate(&self, tol: f64) -> bool {
        self.entries
            .iter()
            .all(|&(x, c)| (self.get([-x[0], x[1]]) - c).abs() <= tol * c.abs().max(1.0))
    }

    /// Evaluates `sum ê(x) cos(p·x)`.
    pub fn symbol(&self, p: [f64; 2]) -> f64 {
        self.entries
            .iter()
            .map(|&(x, c)| c * (p[0] * x[0] as f64 + p[1] * x[1] as f64).cos())
            .sum()
    }
}

/// The supported dispersion families.
#[derive(Debug, Clone, PartialEq)]
pub enum DispersionKind {
    DiscreteLaplacian,
    ExponentialHopping(HoppingTable),
    /// `φ(p1) + φ(p2)` with `φ(t) = -cos t - cos ε` for `|t| > π - ε`, else 0.
    PiecewisePhi { eps: f64 },
    /// `(φ_A(p1) + φ_A(p2)) / 2` with the stepped profile `φ_A`.
    SteppedPhiA { a: f64 },
}

/// A dispersion relation together with cached evaluation data.
#[derive(Debug, Clone)]
pub struct DispersionModel {
    kind: DispersionKind,
    e_pi: f64,
    // (x1, x2, ê(x), (-1)^{x1+x2} ê(x)) for hopping tables
    terms: Vec<(f64, f64, f64, f64)>,
}

impl PartialEq for DispersionModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

/// Maximum-point data of a dispersion relation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorseData {
    pub e_max: f64,
    pub e_min: f64,
    pub maximizer: [f64; 2],
    pub hessian: [[f64; 2]; 2],
    pub j_psi0: f64,
    pub j0: f64,
    pub psi_deriv_sq: Option<[f64; 2]>,
}

/// Clause of the standing hypothesis checked by [`DispersionModel::validate_hypothesis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisClause {
    Evenness,
    SwapSymmetry,
    UniqueMaximum,
    NegativeDefiniteHessian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub failures: Vec<(HypothesisClause, String)>,
}

/// Fourier coefficients returned by [`DispersionModel::fourier_coefficients`].
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    pub table: HoppingTable,
    pub cutoff: usize,
    /// Sum of `|ê|` on the outermost shell `|x|∞ = R`.
    pub shell_tail: f64,
    /// ℓ¹ mass of all coefficients with `|x|∞ > R`.
    pub l1_beyond: f64,
}

/// JSON model description `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl DispersionModel {
    fn build(kind: DispersionKind) -> Self {
        let mut terms = Vec::new();
        let e_pi = match &kind {
            DispersionKind::DiscreteLaplacian => 4.0,
            DispersionKind::ExponentialHopping(t) => {
                for &(x, c) in t.entries() {
                    let s = if (x[0] + x[1]).rem_euclid(2) == 0 { c } else { -c };
                    terms.push((x[0] as f64, x[1] as f64, c, s));
                }
                terms.iter().map(|t| t.3).sum()
            }
            DispersionKind::PiecewisePhi { eps } => 2.0 * (1.0 - eps.cos()),
            DispersionKind::SteppedPhiA { .. } => 1.0,
        };
        Self { kind, e_pi, terms }
    }

    pub fn laplacian() -> Self {
        Self::build(DispersionKind::DiscreteLaplacian)
    }

    /// Custom hopping; the table must be even (`ê(x) = ê(−x)`).
    pub fn exponential_hopping(table: HoppingTable) -> Result<Self> {
        if table.entries().is_empty() {
            return Err(Error::InvalidModel("empty hopping table".into()));
        }
        if !table.is_even(1e-14) {
            return Err(Error::InvalidModel(
                "hopping table must satisfy ê(x) = ê(-x)".into(),
            ));
        }
        Ok(Self::build(DispersionKind::ExponentialHopping(table)))
    }

    pub fn piecewise_phi(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidModel(format!("epsilon must lie in (0,1), got {eps}")));
        }
        Ok(Self::build(DispersionKind::PiecewisePhi { eps }))
    }

    /// Stepped family; `A = 1` is accepted so that validation can reject it.
    pub fn stepped_phi_a(a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidModel(format!("A must lie in [0,1], got {a}")));
        }
        Ok(Self::build(DispersionKind::SteppedPhiA { a }))
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let num = |key: &str| -> Result<f64> {
            spec.params
                .get(key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::InvalidModel(format!("missing numeric parameter '{key}'")))
        };
        match spec.kind.as_str() {
            "laplacian" | "discrete_laplacian" => Ok(Self::laplacian()),
            "piecewise_phi" => Self::piecewise_phi(num("epsilon")?),
            "stepped_phi_a" => Self::stepped_phi_a(num("A")?),
            "exponential_hopping" => {
                let rows = spec
                    .params
                    .get("table")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| Error::InvalidModel("missing 'table'".into()))?;
                let mut entries = Vec::with_capacity(rows.len());
                for row in rows {
                    let r = row.as_array().filter(|r| r.len() == 3).ok_or_else(|| {
                        Error::InvalidModel("table rows must be [x1, x2, value]".into())
                    })?;
                    let int = |v: &serde_json::Value| {
                        v.as_i64()
                            .ok_or_else(|| Error::InvalidModel("lattice indices must be integers".into()))
                    };
                    let val = r[2]
                        .as_f64()
                        .ok_or_else(|| Error::InvalidModel("coefficient must be numeric".into()))?;
                    entries.push(([int(&r[0])?, int(&r[1])?], val));
                }
                Self::exponential_hopping(HoppingTable::new(entries))
            }
            other => Err(Error::InvalidModel(format!("unknown model kind '{other}'"))),
        }
    }

    pub fn to_spec(&self) -> ModelSpec {
        let (kind, params) = match &self.kind {
            DispersionKind::DiscreteLaplacian => ("laplacian", serde_json::json!({})),
            DispersionKind::PiecewisePhi { eps } => ("piecewise_phi", serde_json::json!({ "epsilon": eps })),
            DispersionKind::SteppedPhiA { a } => ("stepped_phi_a", serde_json::json!({ "A": a })),
            DispersionKind::ExponentialHopping(t) => {
                let rows: Vec<_> = t
                    .entries()
                    .iter()
                    .map(|&(x, c)| serde_json::json!([x[0], x[1], c]))
                    .collect();
                ("exponential_hopping", serde_json::json!({ "table": rows }))
            }
        };
        ModelSpec { kind: kind.into(), params }
    }

    pub fn kind(&self) -> &DispersionKind {
        &self.kind
    }

    /// Short label used in tabular output.
    pub fn name(&self) -> String {
        match &self.kind {
            DispersionKind::DiscreteLaplacian => "laplacian".into(),
            DispersionKind::ExponentialHopping(t) => format!("hopping[{}]", t.entries().len()),
            DispersionKind::PiecewisePhi { eps } => format!("piecewise_phi({eps})"),
            DispersionKind::SteppedPhiA { a } => format!("stepped_phi_a({a})"),
        }
    }

    /// Whether `e` is real-analytic on the whole torus.
    pub fn is_analytic(&self) -> bool {
        matches!(
            self.kind,
            DispersionKind::DiscreteLaplacian | DispersionKind::ExponentialHopping(_)
        )
    }

    /// Offsets `0 < κ < π` from π at which the one-dimensional profile has kinks.
    pub fn profile_kinks(&self) -> Vec<f64> {
        match self.kind {
            DispersionKind::PiecewisePhi { eps } => vec![eps],
            DispersionKind::SteppedPhiA { .. } => vec![PI / 4.0, PI / 2.0],
            _ => Vec::new(),
        }
    }

    pub fn is_even_per_coordinate(&self) -> bool {
        match &self.kind {
            DispersionKind::ExponentialHopping(t) => t.is_even_per_coordinate(1e-14),
            _ => true,
        }
    }

    /// `e(π⃗)`; equals `e_max` for models satisfying the hypothesis.
    pub fn value_at_pi(&self) -> f64 {
        self.e_pi
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match &self.kind {
            DispersionKind::DiscreteLaplacian => 2.0 - p[0].cos() - p[1].cos(),
            DispersionKind::ExponentialHopping(_) => self
                .terms
                .iter()
                .map(|&(x1, x2, c, _)| c * (p[0] * x1 + p[1] * x2).cos())
                .sum(),
            _ => self.e_pi - self.gap([wrap(p[0] - PI), wrap(p[1] - PI)]),
        }
    }

    /// `e(π⃗) − e(π⃗ + d)`, accurate to relative precision as `d → 0`.
    pub fn gap(&self, d: [f64; 2]) -> f64 {
        match self.kind {
            DispersionKind::DiscreteLaplacian => {
                let s1 = (0.5 * d[0]).sin();
                let s2 = (0.5 * d[1]).sin();
                2.0 * (s1 * s1 + s2 * s2)
            }
            DispersionKind::ExponentialHopping(_) => self
                .terms
                .iter()
                .map(|&(x1, x2, _, s)| {
                    let h = (0.5 * (d[0] * x1 + d[1] * x2)).sin();
                    2.0 * s * h * h
                })
                .sum(),
            DispersionKind::PiecewisePhi { eps } => {
                let g = |t: f64| {
                    let t = wrap(t).abs();
                    let u = if t < eps { t } else { eps };
                    let s = (0.5 * u).sin();
                    2.0 * s * s
                };
                g(d[0]) + g(d[1])
            }
            DispersionKind::SteppedPhiA { a } => {
                let g = |t: f64| {
                    let t = wrap(t).abs();
                    if t <= PI / 4.0 {
                        let s = t.sin();
                        2.0 * s * s
                    } else if t < PI / 2.0 {
                        1.0
                    } else {
                        1.0 + a * t.cos()
                    }
                };
                0.5 * (g(d[0]) + g(d[1]))
            }
        }
    }

    /// Analytic Hessian of `e` at π⃗.
    pub fn hessian_at_pi(&self) -> [[f64; 2]; 2] {
        match &self.kind {
            DispersionKind::DiscreteLaplacian | DispersionKind::PiecewisePhi { .. } => {
                [[-1.0, 0.0], [0.0, -1.0]]
            }
            DispersionKind::SteppedPhiA { .. } => [[-2.0, 0.0], [0.0, -2.0]],
            DispersionKind::ExponentialHopping(_) => {
                let mut h = [[0.0; 2]; 2];
                for &(x1, x2, _, s) in &self.terms {
                    h[0][0] -= s * x1 * x1;
                    h[0][1] -= s * x1 * x2;
                    h[1][1] -= s * x2 * x2;
                }
                h[1][0] = h[0][1];
                h
            }
        }
    }

    /// Central finite-difference Hessian of `e` at `π⃗ + d` with one Richardson step.
    pub fn hessian_fd(&self, d: [f64; 2], step: f64) -> [[f64; 2]; 2] {
        let f = |x: f64, y: f64| -self.gap([d[0] + x, d[1] + y]);
        let raw = |h: f64| {
            let f0 = f(0.0, 0.0);
            let hxx = (f(h, 0.0) - 2.0 * f0 + f(-h, 0.0)) / (h * h);
            let hyy = (f(0.0, h) - 2.0 * f0 + f(0.0, -h)) / (h * h);
            let hxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
            [hxx, hxy, hyy]
        };
        let c = raw(step);
        let r = raw(0.5 * step);
        let e = |i: usize| (4.0 * r[i] - c[i]) / 3.0;
        [[e(0), e(1)], [e(1), e(2)]]
    }

    fn gradient_fd(&self, d: [f64; 2], h: f64) -> [f64; 2] {
        let f = |x: f64, y: f64| -self.gap([d[0] + x, d[1] + y]);
        [
            (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h),
            (f(0.0, h) - f(0.0, -h)) / (2.0 * h),
        ]
    }

    /// Locates the maximizer (grid scan plus Newton), returning its offset from π⃗.
    pub fn locate_maximizer(&self) -> [f64; 2] {
        let n = 64;
        let mut best = ([0.0, 0.0], self.gap([0.0, 0.0]));
        for i in 0..n {
            for j in 0..n {
                let d = [
                    -PI + 2.0 * PI * i as f64 / n as f64,
                    -PI + 2.0 * PI * j as f64 / n as f64,
                ];
                let g = self.gap(d);
                if g < best.1 - 1e-14 {
                    best = (d, g);
                }
            }
        }
        let mut d = best.0;
        for _ in 0..50 {
            let g = self.gradient_fd(d, 1e-5);
            let h = self.hessian_fd(d, 1e-4);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if det.abs() < 1e-300 {
                break;
            }
            let s = [
                (h[1][1] * g[0] - h[0][1] * g[1]) / det,
                (-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ];
            let nd = [wrap(d[0] - s[0]), wrap(d[1] - s[1])];
            if self.gap(nd) > self.gap(d) + 1e-15 {
                break;
            }
            d = nd;
            if s[0].abs().max(s[1].abs()) < 1e-14 {
                break;
            }
        }
        d
    }

    pub fn morse_data(&self) -> Result<MorseData> {
        let d = self.locate_maximizer();
        if d[0].abs().max(d[1].abs()) > 1e-8 && self.gap(d) < -1e-12 {
            return Err(Error::NonMaxAtPi { found: [wrap(PI + d[0]), wrap(PI + d[1])] });
        }
        let h = self.hessian_at_pi();
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det.abs() < 1e-10 {
            return Err(Error::DegenerateHessian { det });
        }
        if !(h[0][0] < 0.0 && det > 0.0) {
            return Err(Error::NonMaxAtPi { found: PI_VEC });
        }
        let j_psi0 = 2.0 / det.sqrt();
        let psi_deriv_sq = (h[0][1].abs() < 1e-10).then(|| [2.0 / h[0][0].abs(), 2.0 / h[1][1].abs()]);
        let n = 256;
        let mut e_min = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let p = [
                    -PI + 2.0 * PI * i as f64 / n as f64,
                    -PI + 2.0 * PI * j as f64 / n as f64,
                ];
                e_min = e_min.min(self.eval(p));
            }
        }
        Ok(MorseData {
            e_max: self.e_pi,
            e_min,
            maximizer: PI_VEC,
            hessian: h,
            j_psi0,
            j0: j_psi0 / (4.0 * PI),
            psi_deriv_sq,
        })
    }

    pub fn validate_hypothesis(&self) -> ValidationReport {
        let mut failures = Vec::new();
        let tol = if self.is_analytic() { 1e-12 } else { 1e-9 };
        let n = 128;
        let grid = |i: usize| -PI + 2.0 * PI * (i as f64 + 0.37) / n as f64;
        let (mut odd, mut asym) = (0.0f64, 0.0f64);
        for i in 0..n {
            for j in 0..n {
                let p = [grid(i), grid(j)];
                let e = self.eval(p);
                odd = odd.max((e - self.eval([-p[0], -p[1]])).abs());
                asym = asym.max((e - self.eval([p[1], p[0]])).abs());
            }
        }
        if odd > tol {
            failures.push((HypothesisClause::Evenness, format!("max |e(p) - e(-p)| = {odd:e}")));
        }
        if asym > tol {
            failures.push((HypothesisClause::SwapSymmetry, format!("max |e(p) - e(p2,p1)| = {asym:e}")));
        }
        let mut rival: Option<([f64; 2], f64)> = None;
        for i in 0..n {
            for j in 0..n {
                let d = [-PI + 2.0 * PI * i as f64 / n as f64, -PI + 2.0 * PI * j as f64 / n as f64];
                if d[0].hypot(d[1]) < 0.25 {
                    continue;
                }
                let g = self.gap(d);
                if g < 1e-9 && rival.is_none_or(|r| g < r.1) {
                    rival = Some((d, g));
                }
            }
        }
        if let Some((d, g)) = rival {
            failures.push((
                HypothesisClause::UniqueMaximum,
                format!(
                    "e({:.6}, {:.6}) is within {:e} of e(pi, pi)",
                    wrap(PI + d[0]),
                    wrap(PI + d[1]),
                    g.max(0.0)
                ),
            ));
        }
        let h = self.hessian_at_pi();
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if !(h[0][0] < 0.0 && det > 1e-10) {
            failures.push((
                HypothesisClause::NegativeDefiniteHessian,
                format!("Hessian {h:?} is not negative definite"),
            ));
        }
        ValidationReport { passed: failures.is_empty(), failures }
    }

    /// One-dimensional coefficients `φ̂(n) = (1/2π) ∫ φ(t) cos(nt) dt` of separable kinds,
    /// with the scale `s` such that `e = s (φ(p1) + φ(p2))`.
    fn profile_coefficient(&self, n: u64) -> Option<(f64, f64)> {
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let m = n as f64;
        match self.kind {
            DispersionKind::PiecewisePhi { eps } => {
                let i = 0.5 * (cos_integral(m - 1.0, 0.0, eps) + cos_integral(m + 1.0, 0.0, eps))
                    - eps.cos() * cos_integral(m, 0.0, eps);
                Some((sign * i / PI, 1.0))
            }
            DispersionKind::SteppedPhiA { a } => {
                let q = PI / 4.0;
                let inner = 0.5 * (cos_integral(m - 2.0, 0.0, q) + cos_integral(m + 2.0, 0.0, q));
                let outer = 0.5
                    * (cos_integral(m - 1.0, PI / 2.0, PI) + cos_integral(m + 1.0, PI / 2.0, PI));
                Some((sign * (inner - a * outer) / PI, 0.5))
            }
            _ => None,
        }
    }

    /// Fourier coefficients on `|x|∞ ≤ R`.
    ///
    /// Separable kinds use closed-form profile coefficients; hopping tables are
    /// recovered by a discrete Fourier analysis on an `N×N` grid with `N ≥ 8R`
    /// (exact for trigonometric polynomials once `N` exceeds twice the degree).
    pub fn fourier_coefficients(&self, cutoff: usize, tol: Option<f64>) -> Result<FourierTable> {
        if cutoff < 1 {
            return Err(Error::InvalidArgument("cutoff must be at least 1".into()));
        }
        let r = cutoff as i64;
        let out = match &self.kind {
            DispersionKind::DiscreteLaplacian => FourierTable {
                table: HoppingTable::laplacian(),
                cutoff,
                shell_tail: if cutoff == 1 { 2.0 } else { 0.0 },
                l1_beyond: 0.0,
            },
            DispersionKind::ExponentialHopping(t) => {
                let deg = t.radius() as usize;
                let n = (8 * cutoff).max(2 * deg + 2);
                let table = self.dft_coefficients(cutoff, n);
                let beyond: f64 = t
                    .entries()
                    .iter()
                    .filter(|(x, _)| x[0].abs().max(x[1].abs()) > r)
                    .map(|e| e.1.abs())
                    .sum();
                FourierTable { shell_tail: table.shell_mass(r), table, cutoff, l1_beyond: beyond }
            }
            _ => {
                let mut entries = Vec::new();
                let (c0, s) = self.profile_coefficient(0).unwrap();
                entries.push(([0, 0], 2.0 * s * c0));
                for n in 1..=cutoff as u64 {
                    let (c, _) = self.profile_coefficient(n).unwrap();
                    let k = n as i64;
                    for x in [[k, 0], [-k, 0], [0, k], [0, -k]] {
                        entries.push((x, s * c));
                    }
                }
                let mut beyond = 0.0;
                let mut envelope = 0.0f64;
                let last = cutoff as u64 + 100_000;
                for n in cutoff as u64 + 1..=last {
                    let c = self.profile_coefficient(n).unwrap().0.abs();
                    beyond += c;
                    if n + 1000 > last {
                        envelope = envelope.max(c * (n * n) as f64);
                    }
                }
                // coefficients decay like n^-2 past the sum
                beyond = 4.0 * s * (beyond + envelope / last as f64);
                let table = HoppingTable::new(entries);
                FourierTable { shell_tail: table.shell_mass(r), table, cutoff, l1_beyond: beyond }
            }
        };
        if let Some(tol) = tol {
            if out.shell_tail > tol {
                return Err(Error::CutoffTooSmall { cutoff, tail: out.shell_tail, tol });
            }
        }
        Ok(out)
    }

    /// Coefficients `ê(x)`, `|x|∞ ≤ R`, from samples of `e` on an `n×n` grid.
    pub fn dft_coefficients(&self, cutoff: usize, n: usize) -> HoppingTable {
        let r = cutoff as i64;
        let h = 2.0 * PI / n as f64;
        let samples: Vec<f64> = (0..n * n)
            .map(|idx| self.eval([(idx / n) as f64 * h, (idx % n) as f64 * h]))
            .collect();
        let width = (2 * r + 1) as usize;
        // partial transform along the second axis: rows[i][k] = Σ_j e(i,j) cos/sin(k p_j)
        let mut re = vec![0.0; n * width];
        let mut im = vec![0.0; n * width];
        for i in 0..n {
            for (kk, k) in (-r..=r).enumerate() {
                let (mut sr, mut si) = (0.0, 0.0);
                for j in 0..n {
                    let ph = k as f64 * j as f64 * h;
                    sr += samples[i * n + j] * ph.cos();
                    si -= samples[i * n + j] * ph.sin();
                }
                re[i * width + kk] = sr;
                im[i * width + kk] = si;
            }
        }
        let mut entries = Vec::new();
        let norm = 1.0 / (n * n) as f64;
        for l in -r..=r {
            for (kk, k) in (-r..=r).enumerate() {
                let mut acc = 0.0;
                for i in 0..n {
                    let ph = l as f64 * i as f64 * h;
                    acc += re[i * width + kk] * ph.cos() + im[i * width + kk] * ph.sin();
                }
                let c = acc * norm;
                if c.abs() > 1e-15 {
                    entries.push(([l, k], c));
                }
            }
        }
        HoppingTable::new(entries)
    }
}

/// `∫_lo^hi cos(m t) dt`.
fn cos_integral(m: f64, lo: f64, hi: f64) -> f64 {
    if m == 0.0 {
        hi - lo
    } else {
        ((m * hi).sin() - (m * lo).sin()) / m
    }
}
