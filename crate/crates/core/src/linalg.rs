//! Small dense Hermitian helpers shared by the per-point kernels.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub use nalgebra::Complex;
pub type C64 = Complex<f64>;
/// Dense complex matrix; used for Hermitian metric components at a point.
pub type CMat = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(m: &DMatrix<f64>) -> CMat {
    m.map(|x| c(x, 0.0))
}

pub fn real_diag(d: &[f64]) -> CMat {
    let mut m = CMat::zeros(d.len(), d.len());
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = c(x, 0.0);
    }
    m
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Rejects non-square or non-Hermitian input; `tol` is relative to the max entry.
pub fn check_hermitian(m: &CMat, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Argument(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let defect = hermitian_defect(m);
    if defect > tol * scale {
        return Err(Error::Argument(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// Averages `m` with its conjugate transpose.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Eigenvalues in ascending order together with the matching unit eigenvectors
/// (columns of the returned matrix).
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 1 {
        return (vec![m[(0, 0)].re], identity(1));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// `U diag(d) U*`.
pub fn reassemble(vectors: &CMat, d: &[f64]) -> CMat {
    let n = d.len();
    let mut scaled = vectors.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= d[j];
        }
    }
    scaled * vectors.adjoint()
}

/// Lower-triangular factor `L` with `m = L L*`.
pub fn cholesky_lower(m: &CMat) -> Result<CMat> {
    Cholesky::new(hermitian_part(m))
        .map(|ch| ch.l())
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))
}

/// Inverse of the lower Cholesky factor of a positive-definite Hermitian matrix.
pub fn inverse_cholesky_lower(m: &CMat) -> Result<CMat> {
    let l = cholesky_lower(m)?;
    let n = l.nrows();
    // forward substitution against the identity
    let mut inv = CMat::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { c(1.0, 0.0) } else { c(0.0, 0.0) };
            for k in col..i {
                s -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    Ok(inv)
}

/// log det of a positive-definite Hermitian matrix through its Cholesky factor.
pub fn log_det_pd(m: &CMat) -> Result<f64> {
    let l = cholesky_lower(m)?;
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
}

pub fn det(m: &CMat) -> C64 {
    m.clone().determinant()
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("matrix inverse does not exist".into()))
}

/// Cofactor matrix `det(m) (m^{-1})^T`.
pub fn cofactor(m: &CMat) -> Result<CMat> {
    let d = det(m);
    Ok(inverse(m)?.transpose().map(|z| z * d))
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// `Re tr(a b)` for Hermitian `a`, `b`: the real pairing used by all gradients.
pub fn pairing(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

/// Eigenvalues of `b^{-1} a` for Hermitian `a` and positive-definite `b`.
pub fn generalized_eigenvalues(a: &CMat, b: &CMat) -> Result<Vec<f64>> {
    let linv = inverse_cholesky_lower(b)?;
    Ok(hermitian_eigenvalues(&(&linv * a * linv.adjoint())))
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)[0]
}

pub fn max_abs_entry(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn real_vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMat {
        CMat::from_row_slice(
            3,
            3,
            &[
                c(4.0, 0.0),
                c(1.0, 0.5),
                c(0.0, -0.3),
                c(1.0, -0.5),
                c(3.0, 0.0),
                c(0.2, 0.1),
                c(0.0, 0.3),
                c(0.2, -0.1),
                c(2.0, 0.0),
            ],
        )
    }

    #[test]
    fn eigen_sorted_and_reassembles() {
        let m = sample();
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let back = reassemble(&vecs, &vals);
        assert!((back - &m).norm() < 1e-12);
    }

    #[test]
    fn inverse_cholesky_whitens() {
        let m = sample();
        let linv = inverse_cholesky_lower(&m).unwrap();
        let w = &linv * &m * linv.adjoint();
        assert!((w - identity(3)).norm() < 1e-12);
        let ld = log_det_pd(&m).unwrap();
        assert!((ld - det(&m).re.ln()).abs() < 1e-12);
    }

    #[test]
    fn cofactor_of_diagonal() {
        let m = real_diag(&[2.0, 3.0]);
        let cf = cofactor(&m).unwrap();
        assert!((cf - real_diag(&[3.0, 2.0])).norm() < 1e-14);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = sample();
        m[(0, 1)] = c(5.0, 0.0);
        assert!(check_hermitian(&m, 1e-12).is_err());
        assert!(check_hermitian(&sample(), 1e-12).is_ok());
    }
}
