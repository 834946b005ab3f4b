//! Compressed sparse rows, ILU(0) and restarted GMRES.

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entries; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (col, v) in row {
                if last == Some(col) {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(col);
                    data.push(v);
                    last = Some(col);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        par::for_each_mut(y, |i, yi| {
            let mut s = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[p] * x[self.indices[p]];
            }
            *yi = s;
        });
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match row.binary_search(&j) {
            Ok(p) => self.data[self.indptr[i] + p],
            Err(_) => 0.0,
        }
    }
}

/// Incomplete LU with the sparsity pattern of the matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for p in lu.indptr[i]..lu.indptr[i + 1] {
                if lu.indices[p] == i {
                    diag[i] = p;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::LinearSolve(format!("zero diagonal in row {i}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (lo, hi) = (lu.indptr[i], lu.indptr[i + 1]);
            for p in lo..hi {
                pos[lu.indices[p]] = p;
            }
            for p in lo..hi {
                let k = lu.indices[p];
                if k >= i {
                    break;
                }
                let pivot = lu.data[diag[k]];
                let lik = lu.data[p] / pivot;
                lu.data[p] = lik;
                for q in diag[k] + 1..lu.indptr[k + 1] {
                    let j = lu.indices[q];
                    let target = pos[j];
                    if target != usize::MAX {
                        lu.data[target] -= lik * lu.data[q];
                    }
                }
            }
            for p in lo..hi {
                pos[lu.indices[p]] = usize::MAX;
            }
            if lu.data[diag[i]] == 0.0 || !lu.data[diag[i]].is_finite() {
                return Err(Error::LinearSolve(format!("ILU(0) breakdown at row {i}")));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// Solves `L U x = b` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = x[i];
            for p in lu.indptr[i]..self.diag[i] {
                s -= lu.data[p] * x[lu.indices[p]];
            }
            x[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = x[i];
            for p in self.diag[i] + 1..lu.indptr[i + 1] {
                s -= lu.data[p] * x[lu.indices[p]];
            }
            x[i] = s / lu.data[self.diag[i]];
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub rel_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            rel_tol: 1e-10,
            restart: 60,
            max_iter: 3000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Right-preconditioned restarted GMRES with modified Gram-Schmidt and Givens rotations.
/// Starts from `x` and overwrites it; errors if `rel_tol` is not reached.
pub fn gmres(a: &CsrMatrix, pc: &Ilu0, b: &[f64], x: &mut [f64], opts: GmresOptions) -> Result<GmresOutcome> {
    let n = a.n;
    let bnorm = par::norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(GmresOutcome {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let m = opts.restart.max(1);
    let mut total = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    loop {
        a.matvec(x, &mut r);
        par::for_each_mut(&mut r, |i, ri| *ri = b[i] - *ri);
        let beta = par::norm2(&r);
        let mut rel = beta / bnorm;
        if rel <= opts.rel_tol {
            return Ok(GmresOutcome {
                iterations: total,
                rel_residual: rel,
            });
        }
        if total >= opts.max_iter {
            return Err(Error::LinearSolve(format!(
                "GMRES stalled at relative residual {rel:.3e} after {total} iterations"
            )));
        }
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut hmat = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut z = v[k].clone();
            pc.apply(&mut z);
            a.matvec(&z, &mut w);
            for (j, vj) in v.iter().enumerate() {
                let hjk = par::dot(&w, vj);
                hmat[j][k] = hjk;
                par::axpy(-hjk, vj, &mut w);
            }
            let hn = par::norm2(&w);
            hmat[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * hmat[j][k] + sn[j] * hmat[j + 1][k];
                hmat[j + 1][k] = -sn[j] * hmat[j][k] + cs[j] * hmat[j + 1][k];
                hmat[j][k] = t;
            }
            let denom = hmat[k][k].hypot(hmat[k + 1][k]);
            if denom == 0.0 {
                return Err(Error::LinearSolve("GMRES breakdown: singular Hessenberg matrix".into()));
            }
            cs[k] = hmat[k][k] / denom;
            sn[k] = hmat[k + 1][k] / denom;
            hmat[k][k] = denom;
            hmat[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= opts.rel_tol || hn == 0.0 || total >= opts.max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hmat[i][j] * y[j];
            }
            y[i] = s / hmat[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            par::axpy(*yj, &v[j], &mut update);
        }
        pc.apply(&mut update);
        par::axpy(1.0, &update, x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, -2.0)];
                if i > 0 {
                    r.push((i - 1, 1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, 1.0));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_rows(vec![vec![(1, 1.0), (0, 2.0), (1, 3.0)], vec![(1, 1.0)]]);
        assert_eq!(a.get(0, 1), 4.0);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let a = laplacian_1d(20);
        let pc = Ilu0::new(&a).unwrap();
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; 20];
        a.matvec(&x, &mut b);
        pc.apply(&mut b);
        for i in 0..20 {
            assert!((b[i] - x[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 200;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 4.0)];
                if i > 0 {
                    r.push((i - 1, -1.5));
                }
                if i + 1 < n {
                    r.push((i + 1, -0.5));
                }
                if i + 7 < n {
                    r.push((i + 7, 0.3));
                }
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i % 5) as f64).collect();
        let pc = Ilu0::new(&a).unwrap();
        let mut x = vec![0.0; n];
        let out = gmres(&a, &pc, &b, &mut x, GmresOptions::default()).unwrap();
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(err / par::norm2(&b) < 1e-9);
        assert!(out.rel_residual <= 1e-10);
    }
}
