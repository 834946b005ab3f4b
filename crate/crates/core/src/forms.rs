//! `(n−1, n−1)`-forms stored by their coefficient matrices, the Hodge star in
//! orthonormal frames, and the reduction of the form-type `(n−1)` Monge-Ampère
//! equation to a Hermitian tensor.
//!
//! A form `Θ` with coefficients `Θ_{pq̄}` stands for
//! `(√−1)^{n−1}(n−1)! Σ s(p,q) Θ_{pq̄} dz^1∧dz̄^1 ⋯ (dz^p omitted) ⋯ (dz̄^q omitted) ⋯ dz^n∧dz̄^n`
//! with `s(p,q) = −1` for `p > q` and `1` otherwise.

use crate::eigen_ops::Cone;
use crate::error::{Error, Result};
use crate::grid::{HermitianField, PointClass, ScalarField};
use crate::discretize::{HessianKind, HessianMap};
use crate::linalg::{self, CMat};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct FormN1N1 {
    pub n: usize,
    pub coeffs: CMat,
}

impl FormN1N1 {
    pub fn new(coeffs: CMat) -> Result<Self> {
        let n = coeffs.nrows();
        if n < 2 {
            return Err(Error::Argument("(n-1,n-1)-forms need n >= 2".into()));
        }
        linalg::check_hermitian(&coeffs, 1e-12)?;
        Ok(FormN1N1 { n, coeffs })
    }

    /// `det(Θ_{pq̄})`.
    pub fn det(&self) -> f64 {
        linalg::det(&self.coeffs).re
    }
}

/// Sign `s(p, q)` of the basis monomial with `dz^p` and `dz̄^q` removed.
pub fn sign_convention(p: usize, q: usize) -> f64 {
    if p > q {
        -1.0
    } else {
        1.0
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `ω^{n−1}`: coefficients `det(g)·(g⁻¹)ᵀ`, i.e. the cofactor matrix of `g`.
pub fn power_n_minus_1(omega: &CMat) -> Result<FormN1N1> {
    linalg::check_hermitian(omega, 1e-12)?;
    if linalg::min_eigenvalue(omega) <= 0.0 {
        return Err(Error::Argument("metric must be positive definite".into()));
    }
    let cof = linalg::cofactor(omega).map_err(|_| Error::Argument("singular metric".into()))?;
    FormN1N1::new(linalg::hermitian_part(&cof))
}

/// Orthonormalizing frame of a metric `ω = L L*`.
#[derive(Debug, Clone)]
pub struct Frame {
    l: CMat,
    linv: CMat,
}

impl Frame {
    pub fn of(omega: &CMat) -> Result<Self> {
        let l = linalg::cholesky_lower(omega)?;
        let linv = linalg::inverse_cholesky_lower(omega)?;
        Ok(Frame { l, linv })
    }

    /// `(1,1)`-form coefficients in the orthonormal frame: `L⁻¹ H L⁻*`.
    pub fn to_frame_11(&self, h: &CMat) -> CMat {
        &self.linv * h * self.linv.adjoint()
    }

    pub fn from_frame_11(&self, h: &CMat) -> CMat {
        &self.l * h * self.l.adjoint()
    }

    /// `(n−1,n−1)`-form coefficients in the orthonormal frame: `cof(L⁻¹) Θ cof(L⁻*)`.
    pub fn to_frame_n1(&self, theta: &FormN1N1) -> Result<FormN1N1> {
        let a = linalg::cofactor(&self.linv)?;
        let b = linalg::cofactor(&self.linv.adjoint())?;
        FormN1N1::new(linalg::hermitian_part(&(a * &theta.coeffs * b)))
    }

    pub fn from_frame_n1(&self, theta: &FormN1N1) -> Result<FormN1N1> {
        let a = linalg::cofactor(&self.l)?;
        let b = linalg::cofactor(&self.l.adjoint())?;
        FormN1N1::new(linalg::hermitian_part(&(a * &theta.coeffs * b)))
    }
}

/// `*Θ = √−1 (n−1)! Σ Θ_{pq̄} dz^q∧dz̄^p`, returned as the `(1,1)` coefficient
/// matrix `(n−1)!·Θᵀ`. Only defined in a frame where `ω_{ij̄} = δ_ij`.
pub fn hodge_star(theta: &FormN1N1, orthonormal: bool) -> Result<CMat> {
    if !orthonormal {
        return Err(Error::Precondition(
            "the Hodge star is evaluated only in an orthonormal frame".into(),
        ));
    }
    Ok(theta.coeffs.transpose().map(|z| z * factorial(theta.n - 1)))
}

/// Star of a `(1,1)`-form in an orthonormal frame; inverse of [`hodge_star`].
pub fn hodge_star_11(a: &CMat, orthonormal: bool) -> Result<FormN1N1> {
    if !orthonormal {
        return Err(Error::Precondition(
            "the Hodge star is evaluated only in an orthonormal frame".into(),
        ));
    }
    let n = a.nrows();
    if n < 2 {
        return Err(Error::Argument("(n-1,n-1)-forms need n >= 2".into()));
    }
    FormN1N1::new(a.transpose().map(|z| z / factorial(n - 1)))
}

/// `ω_h = *(Θ)/(n−1)!` computed in the frame of `ω` and mapped back.
pub fn omega_h(theta: &FormN1N1, omega: &CMat) -> Result<CMat> {
    let frame = Frame::of(omega)?;
    let local = frame.to_frame_n1(theta)?;
    let star = hodge_star(&local, true)?;
    let n = theta.n;
    Ok(linalg::hermitian_part(
        &frame.from_frame_11(&star.map(|z| z / factorial(n - 1))),
    ))
}

/// `g̃ = ω_h + ((Δv)ω − ∂∂̄v)/(n−1)` with `Δv = tr(ω⁻¹ ∂∂̄v)`, on interior points
/// (`ω_h` elsewhere).
pub fn nm1_reduce(v: &ScalarField, omega: &HermitianField, omega0: &[FormN1N1]) -> Result<HermitianField> {
    let d = v.domain.clone();
    if omega.domain.len() != d.len() || omega0.len() != d.len() {
        return Err(Error::Argument("fields differ in grid size".into()));
    }
    let n = omega.n();
    if n < 2 {
        return Err(Error::Argument("reduction needs n >= 2".into()));
    }
    if let Some(&bad) = d.interior().iter().find(|&&i| !d.has_stencil(i)) {
        return Err(Error::Argument(format!("stencil margin violated at point {bad}")));
    }
    let map = HessianMap::new(&d, HessianKind::Complex)?;
    let values = par::map_indexed(d.len(), |idx| {
        let w = &omega.values[idx];
        let base = omega_h(&omega0[idx], w)?;
        if d.class(idx) != PointClass::Interior {
            return Ok(base);
        }
        let h = map.hessian_at(&v.values, idx);
        let lap = linalg::trace(&(linalg::inverse(w)? * &h)).re;
        let corr = (w.map(|z| z * lap) - h).map(|z| z / (n as f64 - 1.0));
        Ok(base + corr)
    });
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(HermitianField {
        domain: d,
        values,
        positive_definite: None,
    })
}

/// Positivity of a reduced tensor checked two ways: positive-definiteness of
/// `ω⁻¹g̃`, and membership of the spectrum of `P⁻¹(ω⁻¹g̃)` in the `P`-transformed orthant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedPositivity {
    pub positive_definite: bool,
    pub cone_member: bool,
    pub min_eigenvalue: f64,
}

pub fn reduced_positivity(g_tilde: &HermitianField, omega: &HermitianField) -> Result<ReducedPositivity> {
    let pts = g_tilde.domain.interior();
    let n = g_tilde.n();
    let cone = Cone::PTransformed(Box::new(Cone::PositiveOrthant { n }));
    let per = par::map_indexed(pts.len(), |k| {
        let idx = pts[k];
        let mu = linalg::generalized_eigenvalues(&g_tilde.values[idx], &omega.values[idx])?;
        // P⁻¹(μ)_k = Σμ − (n−1) μ_k
        let total: f64 = mu.iter().sum();
        let lam: Vec<f64> = mu.iter().map(|m| total - (n as f64 - 1.0) * m).collect();
        Ok::<_, Error>((mu[0], cone.margin(&lam) > 0.0))
    });
    let mut out = ReducedPositivity {
        positive_definite: true,
        cone_member: true,
        min_eigenvalue: f64::INFINITY,
    };
    for r in per {
        let (m, c): (f64, bool) = r?;
        out.min_eigenvalue = out.min_eigenvalue.min(m);
        out.positive_definite &= m > 0.0;
        out.cone_member &= c;
    }
    Ok(out)
}

pub mod exterior {
    //! Exterior algebra on `dz^1, dz̄^1, …, dz^n, dz̄^n`, used to cross-check the
    //! coefficient conventions by brute-force expansion.
    //! Generator `dz^i` has index `2i`, `dz̄^i` index `2i + 1`.

    use std::collections::BTreeMap;

    use crate::linalg::{c, CMat, C64};

    #[derive(Debug, Clone, Default)]
    pub struct Element(pub BTreeMap<u32, C64>);

    pub fn dz(i: usize) -> u32 {
        1 << (2 * i)
    }

    pub fn dzb(i: usize) -> u32 {
        1 << (2 * i + 1)
    }

    /// Sign of `m1 ∧ m2` relative to the sorted monomial, or `None` if they overlap.
    pub fn wedge_sign(m1: u32, m2: u32) -> Option<f64> {
        if m1 & m2 != 0 {
            return None;
        }
        // count pairs (a in m1, b in m2) with a > b
        let mut inversions = 0;
        for a in 0..32 {
            if m1 & (1 << a) != 0 {
                inversions += (m2 & ((1u32 << a) - 1)).count_ones();
            }
        }
        Some(if inversions % 2 == 0 { 1.0 } else { -1.0 })
    }

    impl Element {
        pub fn monomial(m: u32, coeff: C64) -> Self {
            let mut e = Element::default();
            e.0.insert(m, coeff);
            e
        }

        pub fn one() -> Self {
            Element::monomial(0, c(1.0, 0.0))
        }

        pub fn wedge(&self, other: &Element) -> Element {
            let mut out = Element::default();
            for (&m1, &c1) in &self.0 {
                for (&m2, &c2) in &other.0 {
                    if let Some(s) = wedge_sign(m1, m2) {
                        *out.0.entry(m1 | m2).or_insert(c(0.0, 0.0)) += c1 * c2 * s;
                    }
                }
            }
            out
        }

        pub fn coeff(&self, m: u32) -> C64 {
            self.0.get(&m).copied().unwrap_or(c(0.0, 0.0))
        }
    }

    /// Ordered product `dz^1∧dz̄^1∧…` with `dz^p` and `dz̄^q` left out.
    pub fn basis_monomial(n: usize, p: usize, q: usize) -> Element {
        let mut e = Element::one();
        for i in 0..n {
            if i != p {
                e = e.wedge(&Element::monomial(dz(i), c(1.0, 0.0)));
            }
            if i != q {
                e = e.wedge(&Element::monomial(dzb(i), c(1.0, 0.0)));
            }
        }
        e
    }

    pub fn volume(n: usize) -> u32 {
        (0..n).fold(0, |m, i| m | dz(i) | dzb(i))
    }

    /// `√−1 Σ g_ij dz^i∧dz̄^j`.
    pub fn one_one_form(g: &CMat) -> Element {
        let n = g.nrows();
        let mut omega = Element::default();
        for i in 0..n {
            for j in 0..n {
                let m = Element::monomial(dz(i), c(1.0, 0.0)).wedge(&Element::monomial(dzb(j), c(1.0, 0.0)));
                for (&k, &v) in &m.0 {
                    *omega.0.entry(k).or_insert(c(0.0, 0.0)) += v * c(0.0, 1.0) * g[(i, j)];
                }
            }
        }
        omega
    }

    /// Coefficients `Θ_pq` of `ω^{n−1}` read off the expanded wedge power, given the
    /// sign table `sign(p, q)` of the `(n−1,n−1)` basis.
    pub fn power_coefficients(g: &CMat, sign: impl Fn(usize, usize) -> f64) -> CMat {
        let n = g.nrows();
        let omega = one_one_form(g);
        let mut power = Element::one();
        for _ in 0..n - 1 {
            power = power.wedge(&omega);
        }
        let fact: f64 = (1..n).map(|k| k as f64).product();
        let pref = c(0.0, 1.0).powu(n as u32 - 1) * fact;
        CMat::from_fn(n, n, |p, q| {
            let basis = basis_monomial(n, p, q);
            let (&m, &s) = basis.0.iter().next().expect("basis monomial is nonzero");
            power.coeff(m) / (s * pref * sign(p, q))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::exterior::*;
    use super::*;
    use crate::grid::GridDomain;
    use crate::linalg::c;
    use std::sync::Arc;

    fn random_hermitian_pd(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let b = CMat::from_fn(n, n, |_, _| c(next(), next()));
        &b * b.adjoint() + linalg::identity(n).map(|z| z * 0.5)
    }

    #[test]
    fn sign_convention_reproduces_volume_form() {
        for n in [2usize, 3] {
            for p in 0..n {
                for q in 0..n {
                    let lhs = Element::monomial(dz(p), c(1.0, 0.0))
                        .wedge(&Element::monomial(dzb(q), c(1.0, 0.0)))
                        .wedge(&basis_monomial(n, p, q));
                    let v = lhs.coeff(volume(n)) * sign_convention(p, q);
                    assert!((v - c(1.0, 0.0)).norm() < 1e-15, "n={n} p={p} q={q}");
                }
            }
        }
    }

    #[test]
    fn power_matches_exterior_expansion() {
        for n in [2usize, 3] {
            let g = random_hermitian_pd(n, 7 + n as u64);
            let theta = power_n_minus_1(&g).unwrap();
            let oracle = power_coefficients(&g, sign_convention);
            assert!((oracle - &theta.coeffs).norm() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn power_examples_and_determinant() {
        let t = power_n_minus_1(&linalg::identity(3)).unwrap();
        assert!((t.coeffs - linalg::identity(3)).norm() < 1e-14);
        let t = power_n_minus_1(&linalg::real_diag(&[2.0, 3.0])).unwrap();
        assert!((t.coeffs - linalg::real_diag(&[3.0, 2.0])).norm() < 1e-14);
        for n in [2usize, 3, 4] {
            let g = random_hermitian_pd(n, 100 + n as u64);
            let t = power_n_minus_1(&g).unwrap();
            let expect = linalg::det(&g).re.powi(n as i32 - 1);
            assert!((t.det() - expect).abs() < 1e-10 * expect.abs());
        }
    }

    #[test]
    fn star_is_transpose_with_factorial() {
        // rank-one Θ = v v*: the star lands on dz^q∧dz̄^p
        let n = 2;
        let v = [c(1.0, 0.5), c(-0.3, 2.0)];
        let theta = FormN1N1::new(CMat::from_fn(n, n, |p, q| v[p] * v[q].conj())).unwrap();
        let star = hodge_star(&theta, true).unwrap();
        let mut expansion = Element::default();
        for p in 0..n {
            for q in 0..n {
                let m = Element::monomial(dz(q), c(1.0, 0.0)).wedge(&Element::monomial(dzb(p), c(1.0, 0.0)));
                for (&k, &s) in &m.0 {
                    *expansion.0.entry(k).or_insert(c(0.0, 0.0)) += s * c(0.0, 1.0) * theta.coeffs[(p, q)];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let m = dz(i) | dzb(j);
                let sign = wedge_sign(dz(i), dzb(j)).unwrap();
                let a_ij = expansion.coeff(m) / (c(0.0, 1.0) * sign);
                assert!((a_ij - star[(i, j)]).norm() < 1e-14);
            }
        }
        assert!(hodge_star(&theta, false).is_err());
    }

    #[test]
    fn star_involution() {
        for k in 0..50 {
            let g = random_hermitian_pd(3, k);
            let theta = FormN1N1::new(g).unwrap();
            let back = hodge_star_11(&hodge_star(&theta, true).unwrap(), true).unwrap();
            assert!((back.coeffs - &theta.coeffs).norm() < 1e-12);
        }
        let id = power_n_minus_1(&linalg::identity(3)).unwrap();
        let s = hodge_star(&id, true).unwrap();
        assert!((s - linalg::identity(3).map(|z| z * 2.0)).norm() < 1e-14);
    }

    #[test]
    fn frame_change_of_power_is_identity() {
        let g = random_hermitian_pd(3, 41);
        let frame = Frame::of(&g).unwrap();
        let local = frame.to_frame_n1(&power_n_minus_1(&g).unwrap()).unwrap();
        assert!((local.coeffs - linalg::identity(3)).norm() < 1e-12);
        assert!((omega_h(&power_n_minus_1(&g).unwrap(), &g).unwrap() - &g).norm() < 1e-12);
    }

    #[test]
    fn reduction_examples() {
        let d = Arc::new(GridDomain::cube(4, 5, -1.0, 1.0).unwrap());
        let omega = HermitianField::constant(d.clone(), &linalg::identity(2));
        let g0 = random_hermitian_pd(2, 5);
        let forms = vec![power_n_minus_1(&g0).unwrap(); d.len()];
        let zero = nm1_reduce(&ScalarField::zeros(d.clone()), &omega, &forms).unwrap();
        let wh = omega_h(&forms[0], &linalg::identity(2)).unwrap();
        assert!(zero.values.iter().all(|m| (m - &wh).norm() < 1e-14));
        let v = ScalarField::from_fn(d.clone(), |x| x.iter().map(|t| t * t).sum());
        let red = nm1_reduce(&v, &omega, &forms).unwrap();
        let centre = d.flat_index(&[2, 2, 2, 2]);
        assert!((&red.values[centre] - (&wh + linalg::identity(2))).norm() < 1e-12);
        let pos = reduced_positivity(&red, &omega).unwrap();
        assert!(pos.positive_definite && pos.cone_member);
    }
}
