//! Finite-box truncation of the coordinate-space operator, used as an
//! independent check of the determinant roots.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::dispersion::{DispersionModel, HoppingTable};
use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::lanczos::{block_lanczos, LanczosOptions};
use crate::sector::Sector;

/// Dimensions up to which a dense eigensolver is used.
pub const DENSE_MAX: usize = 1200;

/// `Ĥ0 + μV̂` on `[−L, L]²` with hopping truncated at `|x|∞ ≤ R`.
#[derive(Debug, Clone)]
pub struct TruncatedHamiltonian {
    pub l: usize,
    pub r: usize,
    pub hopping: HoppingTable,
    /// ℓ¹ mass of the dropped hopping coefficients.
    pub tail_bound: f64,
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub e_max: f64,
    side: usize,
}

impl TruncatedHamiltonian {
    pub fn build(model: &DispersionModel, l: usize, r: usize, a: f64, b: f64, mu: f64) -> Result<Self> {
        if r < 1 || l < r {
            return Err(Error::InvalidArgument(format!("need L >= R >= 1, got L = {l}, R = {r}")));
        }
        let f = model.fourier_coefficients(r, None)?;
        Ok(Self {
            l,
            r,
            hopping: f.table,
            tail_bound: f.l1_beyond,
            a,
            b,
            mu,
            e_max: model.value_at_pi(),
            side: 2 * l + 1,
        })
    }

    pub fn dimension(&self) -> usize {
        self.side * self.side
    }

    pub fn index(&self, x: [i64; 2]) -> usize {
        let l = self.l as i64;
        ((x[0] + l) as usize) * self.side + (x[1] + l) as usize
    }

    pub fn site(&self, idx: usize) -> [i64; 2] {
        let l = self.l as i64;
        [(idx / self.side) as i64 - l, (idx % self.side) as i64 - l]
    }

    pub fn potential(&self, x: [i64; 2]) -> f64 {
        match x[0].abs() + x[1].abs() {
            0 => self.mu * self.a,
            1 => self.mu * self.b,
            _ => 0.0,
        }
    }

    pub fn entry(&self, x: [i64; 2], y: [i64; 2]) -> f64 {
        let h = self.hopping.get([x[0] - y[0], x[1] - y[1]]);
        if x == y {
            h + self.potential(x)
        } else {
            h
        }
    }

    /// `y = H f`, one output row per task.
    pub fn matvec(&self, f: &[f64], y: &mut [f64]) {
        let side = self.side;
        let l = self.l as i64;
        y.par_chunks_mut(side).enumerate().for_each(|(row, out)| {
            out.iter_mut().for_each(|v| *v = 0.0);
            let x1 = row as i64 - l;
            for &([h1, h2], v) in self.hopping.entries() {
                let s1 = x1 - h1;
                if s1 < -l || s1 > l {
                    continue;
                }
                let src = &f[((s1 + l) as usize) * side..((s1 + l) as usize + 1) * side];
                // out[x2] += v · src[x2 − h2] over the overlap
                let (lo, hi) = ((h2.max(0)) as usize, (side as i64 + h2.min(0)) as usize);
                if lo >= hi {
                    continue;
                }
                let shift = h2;
                for (o, s) in out[lo..hi].iter_mut().zip(&src[(lo as i64 - shift) as usize..(hi as i64 - shift) as usize]) {
                    *o += v * s;
                }
            }
        });
        for x in [[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]] {
            let i = self.index(x);
            y[i] += self.potential(x) * f[i];
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.dimension();
        DMatrix::from_fn(n, n, |i, j| self.entry(self.site(i), self.site(j)))
    }

    /// `P_ω f` for the sector characters under negation and swap.
    pub fn project(&self, sector: Sector, f: &mut [f64]) {
        let sn = sector.negation_sign();
        let ss = sector.swap_sign();
        let src = f.to_vec();
        for (idx, v) in f.iter_mut().enumerate() {
            let [x1, x2] = self.site(idx);
            *v = 0.25
                * (src[idx]
                    + sn * src[self.index([-x1, -x2])]
                    + ss * src[self.index([x2, x1])]
                    + sn * ss * src[self.index([-x2, -x1])]);
        }
    }

    /// `‖P_ω f‖²` for the four sectors.
    pub fn sector_weights(&self, f: &[f64]) -> [f64; 4] {
        Sector::ALL.map(|s| {
            let mut g = f.to_vec();
            self.project(s, &mut g);
            g.iter().map(|v| v * v).sum()
        })
    }

    fn lanczos_options(&self) -> LanczosOptions {
        LanczosOptions { max_basis: 1600, ..LanczosOptions::default() }
    }

    /// The `k` largest eigenvalues, descending.
    pub fn top_eigenvalues(&self, k: usize) -> Result<Vec<f64>> {
        let n = self.dimension();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("k must lie in 1..={n}")));
        }
        if n <= DENSE_MAX {
            let mut ev: Vec<f64> = SymmetricEigen::new(self.dense()).eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
            ev.truncate(k);
            return Ok(ev);
        }
        let res = block_lanczos(n, k, |x, y| self.matvec(x, y), |_| {}, &self.lanczos_options())?;
        Ok(res.values)
    }

    /// The `k` largest eigenvalues within one symmetry sector.
    pub fn top_sector_eigenvalues(&self, sector: Sector, k: usize) -> Result<Vec<f64>> {
        self.sector_lanczos(sector, k, None)
    }

    fn sector_lanczos(&self, sector: Sector, k: usize, cut: Option<f64>) -> Result<Vec<f64>> {
        let opts = LanczosOptions { cut, ..self.lanczos_options() };
        let res = block_lanczos(self.dimension(), k, |x, y| self.matvec(x, y), |v| self.project(sector, v), &opts)?;
        Ok(res.values)
    }

    /// Eigenvalues above `e_max + margin`, attributed to sectors.
    pub fn sector_count_above(&self, margin: f64) -> Result<SectorCounts> {
        if !(margin > 0.0) {
            return Err(Error::InvalidArgument("margin must be positive".into()));
        }
        let cut = self.e_max + margin;
        let mut values: [Vec<f64>; 4] = Default::default();
        let mut ambiguous = Vec::new();
        if self.dimension() <= DENSE_MAX {
            let eig = SymmetricEigen::new(self.dense());
            for (i, &ev) in eig.eigenvalues.iter().enumerate() {
                if ev <= cut {
                    continue;
                }
                let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                let w = self.sector_weights(&v);
                let total: f64 = w.iter().sum();
                match w.iter().position(|&x| x > 0.99 * total) {
                    Some(s) => values[s].push(ev),
                    None => ambiguous.push(ev),
                }
            }
            for v in values.iter_mut() {
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            }
        } else {
            for (slot, s) in Sector::ALL.iter().enumerate() {
                let mut k = 3;
                loop {
                    let ev = self.sector_lanczos(*s, k, Some(cut))?;
                    let above: Vec<f64> = ev.iter().copied().filter(|&e| e > cut).collect();
                    if above.len() < ev.len() || ev.len() < k {
                        values[slot] = above;
                        break;
                    }
                    k += 3;
                }
            }
        }
        let counts = [0, 1, 2, 3].map(|i| values[i].len() as u32);
        Ok(SectorCounts {
            threshold: cut,
            os: counts[0],
            oa: counts[1],
            ea: counts[2],
            es: counts[3],
            total: counts.iter().sum::<u32>() + ambiguous.len() as u32,
            values,
            ambiguous,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorCounts {
    pub threshold: f64,
    pub os: u32,
    pub oa: u32,
    pub ea: u32,
    pub es: u32,
    pub total: u32,
    /// Eigenvalues per sector in `Sector::ALL` order, descending.
    pub values: [Vec<f64>; 4],
    /// Eigenvalues whose eigenvectors carry no dominant sector.
    pub ambiguous: Vec<f64>,
}

impl SectorCounts {
    pub fn get(&self, s: Sector) -> u32 {
        match s {
            Sector::Os => self.os,
            Sector::Oa => self.oa,
            Sector::Ea => self.ea,
            Sector::Es => self.es,
        }
    }

    pub fn sector_values(&self, s: Sector) -> &[f64] {
        let i = Sector::ALL.iter().position(|&t| t == s).unwrap();
        &self.values[i]
    }
}

/// `E(L) = E∞ + c·ρ^L` fitted to a sequence of box sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub rho: f64,
    pub amplitude: f64,
    /// RMS residual of the fit.
    pub residual: f64,
    /// Size of the correction at the largest box plus the residual.
    pub error_bar: f64,
}

fn exp_fit(ls: &[f64], values: &[f64], rho: f64) -> (f64, f64, f64) {
    let l0 = ls[0];
    let rows: Vec<Vec<f64>> = ls.iter().map(|&l| vec![1.0, rho.powf(l - l0)]).collect();
    let (c, rms) = least_squares(&rows, values);
    (c[0], c[1], rms)
}

pub fn extrapolate(ls: &[usize], values: &[f64]) -> Result<Extrapolation> {
    if ls.len() < 3 || ls.len() != values.len() {
        return Err(Error::InvalidArgument("need at least three (L, E) pairs".into()));
    }
    if ls.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("L must increase".into()));
    }
    let lmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = lmax - lmin;
    let last = *values.last().unwrap();
    if spread <= 1e-15 * last.abs().max(1.0) {
        return Ok(Extrapolation { limit: last, rho: 0.0, amplitude: 0.0, residual: 0.0, error_bar: 0.0 });
    }
    let x: Vec<f64> = ls.iter().map(|&l| l as f64).collect();
    let cost = |rho: f64| exp_fit(&x, values, rho).2;
    let n = 999;
    let mut best = (f64::INFINITY, 0.5);
    for i in 1..=n {
        let rho = i as f64 / (n + 1) as f64;
        let c = cost(rho);
        if c < best.0 {
            best = (c, rho);
        }
    }
    // golden-section polish inside the neighbouring grid cells
    let h = 1.0 / (n + 1) as f64;
    let (mut lo, mut hi) = ((best.1 - h).max(1e-6), (best.1 + h).min(1.0 - 1e-9));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if cost(m1) < cost(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let rho = 0.5 * (lo + hi);
    let (limit, amplitude, residual) = exp_fit(&x, values, rho);
    if residual > spread {
        return Err(Error::FitFailure(format!("residual {residual:e} exceeds spread {spread:e}")));
    }
    let correction = (amplitude * rho.powf(x[x.len() - 1] - x[0])).abs();
    Ok(Extrapolation { limit, rho, amplitude, residual, error_bar: correction + residual })
}

/// One line of the oracle CSV dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub index: usize,
    pub value: f64,
    pub sector: Sector,
}

pub fn oracle_rows(h: &TruncatedHamiltonian, counts: &SectorCounts) -> Vec<OracleRow> {
    let mut rows = Vec::new();
    for s in Sector::ALL {
        for (i, &v) in counts.sector_values(s).iter().enumerate() {
            rows.push(OracleRow { l: h.l, index: i, value: v, sector: s });
        }
    }
    rows
}
