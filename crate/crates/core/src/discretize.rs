//! Second-order centered finite differences on [`GridDomain`]s.
//!
//! Every Hessian is written as `H = Σ_{a≤b} D_ab u · M_ab`, where `D_ab` is the
//! centered second difference along real axes `a, b` and `M_ab` a constant
//! Hermitian coefficient matrix. The same decomposition gives the
//! linearization: `d/du Re tr(G H) = Σ Re tr(G M_ab) D_ab`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::eigen_ops::OperatorSpec;
use crate::error::{Error, Result};
use crate::grid::{GridDomain, HermitianField, PointClass, ScalarField};
use crate::linalg::{self, c, CMat, C64};
use crate::par;
use crate::solver::Rhs;

/// A centered difference along one or two real axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stencil {
    pub order: usize,
    pub axes: (usize, usize),
}

impl Stencil {
    /// Second difference `D_ab`; `a == b` is the 3-point rule, otherwise the 4-corner rule.
    pub fn second(a: usize, b: usize) -> Self {
        Stencil {
            order: 2,
            axes: (a.min(b), a.max(b)),
        }
    }

    /// Flat offsets and weights on `domain`.
    pub fn weights(&self, domain: &GridDomain) -> Vec<(isize, f64)> {
        let (a, b) = self.axes;
        let st = domain.strides();
        let h = domain.spacing();
        if a == b {
            let s = st[a] as isize;
            let w = 1.0 / (h[a] * h[a]);
            vec![(s, w), (0, -2.0 * w), (-s, w)]
        } else {
            let (sa, sb) = (st[a] as isize, st[b] as isize);
            let w = 1.0 / (4.0 * h[a] * h[b]);
            vec![(sa + sb, w), (sa - sb, -w), (-sa + sb, -w), (-sa - sb, w)]
        }
    }
}

/// Centered first difference along `axis`.
pub fn first_difference(domain: &GridDomain, values: &[f64], idx: usize, axis: usize) -> f64 {
    let s = domain.strides()[axis];
    (values[idx + s] - values[idx - s]) / (2.0 * domain.spacing()[axis])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HessianKind {
    /// `u_{ij̄}` on a grid over ℂⁿ.
    Complex,
    /// Real Hessian `u_ij` on a grid over ℝⁿ.
    Real,
}

#[derive(Debug, Clone)]
struct Term {
    offsets: Vec<(isize, f64)>,
    coeff: CMat,
}

/// Precomputed Hessian stencil for one grid.
#[derive(Debug, Clone)]
pub struct HessianMap {
    pub kind: HessianKind,
    /// Matrix size.
    pub n: usize,
    terms: Vec<Term>,
}

impl HessianMap {
    pub fn new(domain: &GridDomain, kind: HessianKind) -> Result<Self> {
        let dim = domain.dim();
        let n = match kind {
            HessianKind::Complex => domain.complex_dim()?,
            HessianKind::Real => dim,
        };
        let mut coeffs = vec![vec![CMat::zeros(n, n); dim]; dim];
        match kind {
            HessianKind::Complex => {
                // u_{ij̄} = ¼[(D_{x_i x_j} + D_{y_i y_j}) + √−1 (D_{x_i y_j} − D_{y_i x_j})]
                let quarter = c(0.25, 0.0);
                let iq = c(0.0, 0.25);
                for i in 0..n {
                    for j in 0..n {
                        let (xi, yi, xj, yj) = (i, n + i, j, n + j);
                        let mut add = |a: usize, b: usize, z: C64| {
                            let (a, b) = (a.min(b), a.max(b));
                            coeffs[a][b][(i, j)] += z;
                        };
                        add(xi, xj, quarter);
                        add(yi, yj, quarter);
                        add(xi, yj, iq);
                        add(yi, xj, -iq);
                    }
                }
            }
            HessianKind::Real => {
                for a in 0..n {
                    for b in 0..n {
                        let (lo, hi) = (a.min(b), a.max(b));
                        coeffs[lo][hi][(a, b)] += c(1.0, 0.0);
                    }
                }
            }
        }
        let mut terms = Vec::new();
        for a in 0..dim {
            for b in a..dim {
                let m = &coeffs[a][b];
                if linalg::max_abs_entry(m) == 0.0 {
                    continue;
                }
                terms.push(Term {
                    offsets: Stencil::second(a, b).weights(domain),
                    coeff: m.clone(),
                });
            }
        }
        Ok(HessianMap { kind, n, terms })
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Second differences `D_ab u` at `idx`, in term order.
    pub fn differences(&self, values: &[f64], idx: usize) -> Vec<f64> {
        self.terms
            .iter()
            .map(|t| {
                t.offsets
                    .iter()
                    .map(|&(o, w)| w * values[(idx as isize + o) as usize])
                    .sum()
            })
            .collect()
    }

    /// Hessian at `idx`; the caller guarantees the stencil fits.
    pub fn hessian_at(&self, values: &[f64], idx: usize) -> CMat {
        let mut h = CMat::zeros(self.n, self.n);
        for (t, d) in self.terms.iter().zip(self.differences(values, idx)) {
            h += t.coeff.map(|z| z * d);
        }
        h
    }

    /// `Re tr(G M_ab)` per term: coefficients of the linearization.
    pub fn coefficients(&self, g: &CMat) -> Vec<f64> {
        self.terms.iter().map(|t| linalg::pairing(g, &t.coeff)).collect()
    }

    /// Flat offsets and weights of every term, in term order.
    pub fn term_offsets(&self) -> impl Iterator<Item = &[(isize, f64)]> {
        self.terms.iter().map(|t| t.offsets.as_slice())
    }
}

fn require_stencil(domain: &GridDomain, idx: usize) -> Result<()> {
    if idx >= domain.len() || !domain.has_stencil(idx) {
        return Err(Error::Boundary { point: idx });
    }
    Ok(())
}

/// `u_{ij̄}` at grid point `idx`.
pub fn complex_hessian(u: &ScalarField, idx: usize) -> Result<CMat> {
    require_stencil(&u.domain, idx)?;
    let map = HessianMap::new(&u.domain, HessianKind::Complex)?;
    Ok(map.hessian_at(&u.values, idx))
}

/// Real Hessian `u_ij` at grid point `idx` (real entries stored as complex).
pub fn real_hessian(u: &ScalarField, idx: usize) -> Result<CMat> {
    require_stencil(&u.domain, idx)?;
    let map = HessianMap::new(&u.domain, HessianKind::Real)?;
    Ok(map.hessian_at(&u.values, idx))
}

/// Hessian at every interior point; zero elsewhere.
pub fn hessian_field(u: &ScalarField, kind: HessianKind) -> Result<HermitianField> {
    let map = HessianMap::new(&u.domain, kind)?;
    let domain = u.domain.clone();
    let values = par::map_indexed(domain.len(), |idx| {
        if domain.class(idx) == PointClass::Interior {
            map.hessian_at(&u.values, idx)
        } else {
            CMat::zeros(map.n, map.n)
        }
    });
    Ok(HermitianField {
        domain,
        values,
        positive_definite: None,
    })
}

/// Per-interior-point inverse Cholesky factors `L⁻¹` of `α = L L*`.
#[derive(Debug, Clone)]
pub struct Frames {
    pub linv: Vec<CMat>,
}

impl Frames {
    pub fn new(alpha: &HermitianField) -> Result<Self> {
        let pts = alpha.domain.interior();
        let linv = par::map_indexed(pts.len(), |k| linalg::inverse_cholesky_lower(&alpha.values[pts[k]]));
        let linv = linv
            .into_iter()
            .enumerate()
            .map(|(k, r)| {
                r.map_err(|_| {
                    Error::Domain(format!("alpha is not positive definite at point {}", pts[k]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Frames { linv })
    }

    /// `L⁻¹ g L⁻*` for interior slot `k`.
    pub fn whiten(&self, k: usize, g: &CMat) -> CMat {
        let l = &self.linv[k];
        linalg::hermitian_part(&(l * g * l.adjoint()))
    }

    /// Pulls a gradient `∂F/∂A` back to `∂F/∂g = L⁻* G L⁻¹`.
    pub fn pull_back(&self, k: usize, grad: &CMat) -> CMat {
        let l = &self.linv[k];
        l.adjoint() * grad * l
    }
}

fn check_same_domain(a: &Arc<GridDomain>, b: &Arc<GridDomain>) -> Result<()> {
    if Arc::ptr_eq(a, b) || (a.shape() == b.shape() && a.classes() == b.classes()) {
        Ok(())
    } else {
        Err(Error::Argument("fields live on different grids".into()))
    }
}

/// `A = L⁻¹ (χ + ∂∂̄u) L⁻*` per interior point (interior-slot order).
pub fn assemble_a(u: &ScalarField, alpha: &HermitianField, chi: &HermitianField) -> Result<Vec<CMat>> {
    check_same_domain(&u.domain, &alpha.domain)?;
    check_same_domain(&u.domain, &chi.domain)?;
    let frames = Frames::new(alpha)?;
    let map = HessianMap::new(&u.domain, HessianKind::Complex)?;
    Ok(assemble_with(&frames, &map, u, chi))
}

pub(crate) fn assemble_with(frames: &Frames, map: &HessianMap, u: &ScalarField, chi: &HermitianField) -> Vec<CMat> {
    let pts = u.domain.interior();
    par::map_indexed(pts.len(), |k| {
        let idx = pts[k];
        let g = &chi.values[idx] + map.hessian_at(&u.values, idx);
        frames.whiten(k, &g)
    })
}

/// `F(A(u)) − h(x, u)` on interior points, `u` on the Dirichlet layer, 0 outside.
pub fn residual_field(
    op: &OperatorSpec,
    u: &ScalarField,
    alpha: &HermitianField,
    chi: &HermitianField,
    h: &Rhs,
) -> Result<ScalarField> {
    let a = assemble_a(u, alpha, chi)?;
    let values = spectra_values(op, &a, &u.domain)?;
    let pts = u.domain.interior();
    let mut out: Vec<f64> = u
        .domain
        .classes()
        .iter()
        .zip(&u.values)
        .map(|(cl, &v)| if *cl == PointClass::Boundary { v } else { 0.0 })
        .collect();
    for (k, &idx) in pts.iter().enumerate() {
        out[idx] = values[k] - h.eval(idx, u.values[idx]);
    }
    Ok(ScalarField {
        domain: u.domain.clone(),
        values: out,
    })
}

/// `F(A_k)` per interior slot, or an admissibility error naming the worst point.
pub(crate) fn spectra_values(op: &OperatorSpec, a: &[CMat], domain: &GridDomain) -> Result<Vec<f64>> {
    let evals = par::map_slice(a, |m| {
        let lam = linalg::hermitian_eigenvalues(m);
        (op.cone.margin(&lam), op.matrix_value(m).ok())
    });
    let mut count = 0;
    let mut worst = (0usize, f64::INFINITY);
    for (k, (margin, v)) in evals.iter().enumerate() {
        if v.is_none() {
            count += 1;
            if *margin < worst.1 {
                worst = (domain.interior()[k], *margin);
            }
        }
    }
    if count > 0 {
        return Err(Error::Admissibility {
            count,
            worst_point: worst.0,
            worst_margin: worst.1,
        });
    }
    Ok(evals.into_iter().map(|(_, v)| v.unwrap_or(f64::NAN)).collect())
}

/// `ω^{ij̄} u_{ij̄}` on interior points, 0 elsewhere.
pub fn trace_laplacian(u: &ScalarField, omega: &HermitianField) -> Result<ScalarField> {
    check_same_domain(&u.domain, &omega.domain)?;
    let map = HessianMap::new(&u.domain, HessianKind::Complex)?;
    let domain = u.domain.clone();
    let values = par::map_indexed(domain.len(), |idx| {
        if domain.class(idx) != PointClass::Interior {
            return Ok(0.0);
        }
        let inv = linalg::inverse(&omega.values[idx])?;
        // ω^{ij̄} u_{ij̄} = tr(ω⁻¹ H) with ω^{-1} the matrix inverse of (ω_{ij̄})
        Ok(linalg::trace(&(inv * map.hessian_at(&u.values, idx))).re)
    });
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(ScalarField { domain, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;

    fn grid(n: usize, nodes: usize) -> Arc<GridDomain> {
        Arc::new(GridDomain::cube(2 * n, nodes, -1.0, 1.0).unwrap())
    }

    fn centre(d: &GridDomain) -> usize {
        d.flat_index(&vec![d.shape()[0] / 2; d.dim()])
    }

    #[test]
    fn stencil_weights_sum_to_zero() {
        let d = grid(2, 5);
        for a in 0..4 {
            for b in 0..4 {
                let s: f64 = Stencil::second(a, b).weights(&d).iter().map(|w| w.1).sum();
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hessian_of_modulus_squared() {
        let d = grid(1, 7);
        let u = ScalarField::from_fn(d.clone(), |x| x[0] * x[0] + x[1] * x[1]);
        let h = complex_hessian(&u, centre(&d)).unwrap();
        assert!((h[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pluriharmonic_gives_zero() {
        let d = grid(1, 7);
        let u = ScalarField::from_fn(d.clone(), |x| x[0] * x[0] - x[1] * x[1]);
        let h = complex_hessian(&u, centre(&d) + 1).unwrap();
        assert!(h[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn mixed_term() {
        // x_1 y_2 in ℂ²: axes (x1, x2, y1, y2)
        let d = grid(2, 5);
        let u = ScalarField::from_fn(d.clone(), |x| x[0] * x[3]);
        let h = complex_hessian(&u, centre(&d)).unwrap();
        assert!((h[(0, 1)] - c(0.0, 0.25)).norm() < 1e-12);
        assert!((h[(1, 0)] - c(0.0, -0.25)).norm() < 1e-12);
        assert!(h[(0, 0)].norm() < 1e-12 && h[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn edge_point_rejected() {
        let d = grid(1, 5);
        let u = ScalarField::zeros(d);
        assert!(matches!(complex_hessian(&u, 0), Err(Error::Boundary { .. })));
    }

    #[test]
    fn real_hessian_of_quadratic() {
        let d = Arc::new(GridDomain::cube(2, 5, 0.0, 1.0).unwrap());
        let u = ScalarField::from_fn(d.clone(), |x| 3.0 * x[0] * x[0] + x[0] * x[1]);
        let h = real_hessian(&u, centre(&d)).unwrap();
        assert!((h[(0, 0)].re - 6.0).abs() < 1e-10);
        assert!((h[(0, 1)].re - 1.0).abs() < 1e-10);
        assert!((h[(1, 0)].re - 1.0).abs() < 1e-10);
        assert!(h[(1, 1)].re.abs() < 1e-10);
    }

    #[test]
    fn trace_laplacian_of_modulus_squared() {
        let d = grid(2, 5);
        let u = ScalarField::from_fn(d.clone(), |x| x.iter().map(|t| t * t).sum());
        let id = HermitianField::constant(d.clone(), &linalg::identity(2));
        let two = id.scaled(2.0);
        let k = centre(&d);
        assert!((trace_laplacian(&u, &id).unwrap().values[k] - 2.0).abs() < 1e-12);
        assert!((trace_laplacian(&u, &two).unwrap().values[k] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assemble_identity() {
        let d = grid(1, 5);
        let u = ScalarField::zeros(d.clone());
        let a = HermitianField::constant(d, &linalg::real_diag(&[2.5]));
        let out = assemble_a(&u, &a, &a).unwrap();
        assert!(out.iter().all(|m| (m[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14));
    }
}
