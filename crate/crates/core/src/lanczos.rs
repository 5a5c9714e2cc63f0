//! Block Lanczos with full reorthogonalization for the largest eigenvalues of
//! a symmetric operator given only through its action.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub block: usize,
    pub max_basis: usize,
    /// Residual tolerance relative to the largest Ritz value magnitude.
    pub tol: f64,
    pub check_every: usize,
    pub seed: u64,
    /// Stop once every Ritz value above this level has converged and the next
    /// one lies below it by more than its residual.
    pub cut: Option<f64>,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { block: 2, max_basis: 1200, tol: 1e-11, check_every: 10, seed: 0x5eed, cut: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosResult {
    /// Largest Ritz values, descending.
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub basis_size: usize,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthonormalizes `w` against `basis` (twice) and among itself.
/// Returns the coefficient matrix `R` with `w_in = basis·C + Q·R`, dropping
/// columns that become numerically dependent.
fn orthonormalize(basis: &[Vec<f64>], w: &mut Vec<Vec<f64>>) -> DMatrix<f64> {
    let p = w.len();
    for _ in 0..2 {
        for v in basis {
            for wi in w.iter_mut() {
                let c = dot(v, wi);
                axpy(-c, v, wi);
            }
        }
    }
    let mut r = DMatrix::zeros(p, p);
    let mut kept = Vec::with_capacity(p);
    let norms0: Vec<f64> = w.iter().map(|x| dot(x, x).sqrt()).collect();
    for j in 0..p {
        let mut x = std::mem::take(&mut w[j]);
        for _ in 0..2 {
            for (slot, q) in kept.iter().enumerate() {
                let q: &Vec<f64> = q;
                let c = dot(q, &x);
                axpy(-c, q, &mut x);
                r[(slot, j)] += c;
            }
        }
        let nrm = dot(&x, &x).sqrt();
        let scale = norms0.iter().cloned().fold(0.0, f64::max).max(1e-300);
        if nrm > 1e-10 * scale {
            r[(kept.len(), j)] = nrm;
            x.iter_mut().for_each(|v| *v /= nrm);
            kept.push(x);
        }
    }
    let k = kept.len();
    *w = kept;
    r.rows(0, k).into_owned()
}

/// Largest `k` eigenvalues of the symmetric operator `apply` restricted to the
/// range of the projector `project`.
pub fn block_lanczos(
    n: usize,
    k: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    project: impl Fn(&mut [f64]),
    opts: &LanczosOptions,
) -> Result<LanczosResult> {
    let p = opts.block.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<Vec<f64>> = (0..p)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            project(&mut v);
            v
        })
        .collect();
    orthonormalize(&[], &mut start);
    if start.is_empty() {
        return Ok(LanczosResult { values: vec![], residuals: vec![], basis_size: 0 });
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    // projected matrix, filled block by block
    let mut t_entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut current = start;
    let mut iter = 0;
    loop {
        let offset = basis.len();
        let width = current.len();
        let mut w: Vec<Vec<f64>> = current
            .iter()
            .map(|q| {
                let mut y = vec![0.0; n];
                apply(q, &mut y);
                project(&mut y);
                y
            })
            .collect();
        basis.extend(current);
        // T[i][j] = q_iᵀ H q_j against every stored vector touched by w
        for (j, wj) in w.iter().enumerate() {
            let lo = offset.saturating_sub(p);
            for (i, q) in basis.iter().enumerate().skip(lo) {
                let c = dot(q, wj);
                if i >= offset + j || i < offset {
                    t_entries.push((i, offset + j, c));
                }
            }
        }
        let r = orthonormalize(&basis, &mut w);
        let m = basis.len();
        iter += 1;
        let exhausted = w.is_empty() || m + w.len() > opts.max_basis.min(n);
        if iter % opts.check_every == 0 || exhausted || m >= n {
            let mut t = DMatrix::zeros(m, m);
            for &(i, j, c) in &t_entries {
                t[(i, j)] = c;
                t[(j, i)] = c;
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[y].partial_cmp(&eig.eigenvalues[x]).unwrap());
            let kk = k.min(m);
            let scale = eig.eigenvalues.iter().fold(1.0f64, |s, v| s.max(v.abs()));
            let mut values = Vec::with_capacity(kk);
            let mut residuals = Vec::with_capacity(kk);
            for &idx in order.iter().take(kk) {
                let y = eig.eigenvectors.column(idx);
                // residual ‖R · y_last‖ over the final block
                let mut res = 0.0;
                for row in 0..r.nrows() {
                    let mut s = 0.0;
                    for col in 0..width {
                        s += r[(row, col)] * y[offset + col];
                    }
                    res += s * s;
                }
                values.push(eig.eigenvalues[idx]);
                residuals.push(res.sqrt());
            }
            let ok = |i: usize| residuals[i] <= opts.tol * scale;
            let mut converged = kk == k && (0..kk).all(ok);
            if let Some(cut) = opts.cut {
                if let Some(j) = (0..kk).find(|&i| values[i] + residuals[i] < cut) {
                    if (0..j).all(ok) {
                        converged = true;
                        values.truncate(j + 1);
                        residuals.truncate(j + 1);
                    }
                }
            }
            let out = LanczosResult { values, residuals, basis_size: m };
            if converged || w.is_empty() || m >= n {
                return Ok(out);
            }
            if exhausted {
                let worst = out.residuals.iter().cloned().fold(0.0, f64::max);
                return Err(Error::NoConvergence { estimate: worst, target: opts.tol * scale });
            }
        }
        current = w;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator() {
        let n = 400;
        let d: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64).sin()).collect();
        let res = block_lanczos(
            n,
            3,
            |x, y| y.iter_mut().zip(x).zip(&d).for_each(|((yi, xi), di)| *yi = di * xi),
            |_| {},
            &LanczosOptions::default(),
        )
        .unwrap();
        let mut sorted = d.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (v, s) in res.values.iter().zip(&sorted[..3]) {
            assert!((v - s).abs() < 1e-10, "{:?}", res.values);
        }
    }
}
