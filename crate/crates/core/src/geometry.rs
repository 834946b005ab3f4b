//! Metrics built from defining functions, Chern-Ricci curvature, Kähler
//! potentials, the cutoff function used for Einstein metrics, and uniform
//! equivalence of metric fields.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::discretize::{self, HessianKind, HessianMap};
use crate::error::{Error, Result};
use crate::grid::{HermitianField, PointClass, ScalarField};
use crate::linalg::{self, c, CMat, C64};
use crate::par;

/// A function `φ` with `Ω = {φ < 0}`.
#[derive(Debug, Clone)]
pub enum DefiningFunction {
    /// `φ = |z|² − r²` in ℂⁿ.
    Ball { radius: f64, n: usize },
    /// `φ = Σ_i (−arctan(Im z_i + tan(nπ/(2n+2))) + nπ/(2n+2))`, an unbounded domain.
    ArctanDomain { n: usize },
    /// Samples of `φ` differentiated with the centered stencils.
    Tabulated(Arc<ScalarField>),
}

/// `φ`, `φ_i = ∂φ/∂z_i` and `φ_{ij̄}` at a point.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: f64,
    pub d: Vec<C64>,
    pub dd: CMat,
}

impl DefiningFunction {
    pub fn ball(radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0) || n == 0 {
            return Err(Error::Argument("ball needs positive radius and dimension".into()));
        }
        Ok(DefiningFunction::Ball { radius, n })
    }

    pub fn arctan(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("dimension must be positive".into()));
        }
        Ok(DefiningFunction::ArctanDomain { n })
    }

    pub fn tabulated(field: ScalarField) -> Result<Self> {
        field.domain.complex_dim()?;
        Ok(DefiningFunction::Tabulated(Arc::new(field)))
    }

    /// Complex dimension.
    pub fn n(&self) -> usize {
        match self {
            DefiningFunction::Ball { n, .. } | DefiningFunction::ArctanDomain { n } => *n,
            DefiningFunction::Tabulated(f) => f.domain.dim() / 2,
        }
    }

    /// Number of real coordinates expected at evaluation points.
    pub fn real_dim(&self) -> Option<usize> {
        Some(2 * self.n())
    }

    pub fn describe(&self) -> String {
        match self {
            DefiningFunction::Ball { radius, n } => format!("ball(radius={radius}, n={n})"),
            DefiningFunction::ArctanDomain { n } => format!("arctan-domain(n={n})"),
            DefiningFunction::Tabulated(f) => format!("tabulated({} points)", f.values.len()),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != 2 * self.n() {
            return Err(Error::Argument(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                2 * self.n()
            )));
        }
        Ok(())
    }

    fn node(&self, f: &ScalarField, x: &[f64]) -> Result<usize> {
        f.domain
            .node_at(x)
            .ok_or_else(|| Error::Argument(format!("{x:?} is not a node of the tabulated grid")))
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(match self {
            DefiningFunction::Ball { radius, .. } => x.iter().map(|t| t * t).sum::<f64>() - radius * radius,
            DefiningFunction::ArctanDomain { n } => {
                let (t, off) = arctan_constants(*n);
                (0..*n).map(|i| -(x[n + i] + t).atan() + off).sum()
            }
            DefiningFunction::Tabulated(f) => f.values[self.node(f, x)?],
        })
    }

    /// Value and complex derivatives up to order two.
    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        self.check_point(x)?;
        let n = self.n();
        match self {
            DefiningFunction::Ball { .. } => Ok(Jet {
                value: self.value(x)?,
                // ∂|z|²/∂z_i = z̄_i
                d: (0..n).map(|i| c(x[i], -x[n + i])).collect(),
                dd: linalg::identity(n),
            }),
            DefiningFunction::ArctanDomain { .. } => {
                let (t, _) = arctan_constants(n);
                let s: Vec<f64> = (0..n).map(|i| x[n + i] + t).collect();
                Ok(Jet {
                    value: self.value(x)?,
                    d: s.iter().map(|s| c(0.0, 0.5 / (1.0 + s * s))).collect(),
                    dd: linalg::real_diag(
                        &s.iter()
                            .map(|s| s / (2.0 * (1.0 + s * s) * (1.0 + s * s)))
                            .collect::<Vec<_>>(),
                    ),
                })
            }
            DefiningFunction::Tabulated(f) => {
                let idx = self.node(f, x)?;
                let d = &f.domain;
                if !d.has_stencil(idx) {
                    return Err(Error::Boundary { point: idx });
                }
                let grad = (0..n)
                    .map(|i| {
                        let dx = discretize::first_difference(d, &f.values, idx, i);
                        let dy = discretize::first_difference(d, &f.values, idx, n + i);
                        c(0.5 * dx, -0.5 * dy)
                    })
                    .collect();
                Ok(Jet {
                    value: f.values[idx],
                    d: grad,
                    dd: discretize::complex_hessian(f, idx)?,
                })
            }
        }
    }

    /// Euclidean norm of the real gradient, `2|∂φ|`.
    pub fn real_gradient_norm(&self, x: &[f64]) -> Result<f64> {
        let j = self.jet(x)?;
        Ok(2.0 * j.d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
    }
}

/// `(tan(nπ/(2n+2)), nπ/(2n+2))`.
fn arctan_constants(n: usize) -> (f64, f64) {
    let off = n as f64 * PI / (2.0 * n as f64 + 2.0);
    (off.tan(), off)
}

fn inside_jet(phi: &DefiningFunction, x: &[f64]) -> Result<Jet> {
    let value = phi.value(x)?;
    if !(value < 0.0) {
        return Err(Error::OutsideDomain { value });
    }
    phi.jet(x)
}

/// `g_{ij̄} = φ_{ij̄}/(−φ) + φ_i φ_j̄ / φ²`, the metric of `−log(−φ)`.
pub fn defining_metric(phi: &DefiningFunction, x: &[f64]) -> Result<CMat> {
    let j = inside_jet(phi, x)?;
    let n = j.d.len();
    let mut g = j.dd.map(|z| z / (-j.value));
    let p2 = j.value * j.value;
    for a in 0..n {
        for b in 0..n {
            g[(a, b)] += j.d[a] * j.d[b].conj() / p2;
        }
    }
    Ok(g)
}

/// Closed-form inverse of [`defining_metric`]:
/// `(−φ)(Φ⁻¹ + Φ⁻¹ v v* Φ⁻¹ / (φ − v*Φ⁻¹v))` with `Φ = (φ_{ij̄})`, `v = (φ_i)`.
pub fn defining_metric_inverse(phi: &DefiningFunction, x: &[f64]) -> Result<CMat> {
    let j = inside_jet(phi, x)?;
    let n = j.d.len();
    let pinv = j
        .dd
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("complex Hessian of the defining function".into()))?;
    let v = nalgebra::DVector::from_vec(j.d.clone());
    let w = &pinv * &v;
    let dphi2 = v.dotc(&w).re;
    let denom = j.value - dphi2;
    if denom == 0.0 {
        return Err(Error::Singular("degenerate defining-function metric".into()));
    }
    let mut out = pinv.clone();
    let wt = v.adjoint() * &pinv;
    for a in 0..n {
        for b in 0..n {
            out[(a, b)] += w[a] * wt[b] / denom;
        }
    }
    Ok(out.map(|z| z * (-j.value)))
}

/// Analytic metric field of a defining function on every point where `φ < 0`
/// (identity placeholder elsewhere).
pub fn defining_metric_field(phi: &DefiningFunction, domain: Arc<crate::grid::GridDomain>) -> Result<HermitianField> {
    let n = phi.n();
    let values = par::map_indexed(domain.len(), |idx| {
        if domain.class(idx) == PointClass::Exterior {
            return Ok(linalg::identity(n));
        }
        defining_metric(phi, &domain.coords(idx))
    });
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(HermitianField {
        domain,
        values,
        positive_definite: None,
    }
    .flag_positive_definite())
}

/// `R_{ij̄} = −∂_i∂_j̄ log det g` on interior points; zero elsewhere.
pub fn chern_ricci(g: &HermitianField) -> Result<HermitianField> {
    let domain = g.domain.clone();
    let n = g.n();
    let logdet = par::map_indexed(domain.len(), |idx| match domain.class(idx) {
        PointClass::Exterior => Ok(0.0),
        _ => linalg::log_det_pd(&g.values[idx])
            .map_err(|_| Error::Domain(format!("det g is not positive at point {idx}"))),
    });
    let logdet = ScalarField {
        domain: domain.clone(),
        values: logdet.into_iter().collect::<Result<Vec<_>>>()?,
    };
    let map = HessianMap::new(&domain, HessianKind::Complex)?;
    let values = par::map_indexed(domain.len(), |idx| {
        if domain.class(idx) == PointClass::Interior {
            -map.hessian_at(&logdet.values, idx)
        } else {
            CMat::zeros(n, n)
        }
    });
    Ok(HermitianField {
        domain,
        values,
        positive_definite: None,
    })
}

/// `∂∂̄φ` by the complex-Hessian stencil, flagged for positive-definiteness.
pub fn kahler_potential_field(phi: &ScalarField) -> Result<HermitianField> {
    Ok(discretize::hessian_field(phi, HessianKind::Complex)?.flag_positive_definite())
}

/// Smooth step `e^{−1/x} / (e^{−1/x} + e^{−1/(1−x)})`, 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let p = (-1.0 / x).exp();
        let q = (-1.0 / (1.0 - x)).exp();
        p / (p + q)
    }
}

/// Cutoff profile `ψ`: 0 up to `1−κ+κ²`, 1 from `1−κ+2κ²`, smooth in between.
pub fn cutoff_psi(s: f64, kappa: f64) -> f64 {
    let a = 1.0 - kappa + kappa * kappa;
    smooth_step((s - a) / (kappa * kappa))
}

/// `f(τ) = −log(1 − ((τ−1+κ)/κ)²)`.
pub fn cutoff_profile(tau: f64, kappa: f64) -> f64 {
    let w = (tau - 1.0 + kappa) / kappa;
    -(1.0 - w * w).ln()
}

/// `f′(τ)`.
pub fn cutoff_profile_derivative(tau: f64, kappa: f64) -> f64 {
    let w = (tau - 1.0 + kappa) / kappa;
    2.0 * w / (kappa * (1.0 - w * w))
}

fn check_cutoff_args(s: f64, kappa: f64) -> Result<()> {
    if !(0.0..1.0).contains(&s) || !(kappa > 0.0 && kappa < 0.125) {
        return Err(Error::Argument(format!(
            "cutoff needs 0 <= s < 1 and 0 < kappa < 1/8, got s={s}, kappa={kappa}"
        )));
    }
    Ok(())
}

/// `𝔉(s) = ∫₀ˢ ψ(τ) f′(τ) dτ`, by adaptive Simpson on the transition layer
/// and the closed form `f(s) − f(b)` beyond it.
pub fn cutoff_f(s: f64, kappa: f64) -> Result<f64> {
    check_cutoff_args(s, kappa)?;
    let a = 1.0 - kappa + kappa * kappa;
    let b = 1.0 - kappa + 2.0 * kappa * kappa;
    if s <= a {
        return Ok(0.0);
    }
    let integrand = |t: f64| cutoff_psi(t, kappa) * cutoff_profile_derivative(t, kappa);
    let upper = s.min(b);
    let mut total = adaptive_simpson(&integrand, a, upper, 1e-13, 40);
    if s > b {
        total += cutoff_profile(s, kappa) - cutoff_profile(b, kappa);
    }
    Ok(total)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Smallest `c ≥ 1` with `c⁻¹ b ≤ a ≤ c b` at every interior point.
pub fn uniform_equivalence_ratio(a: &HermitianField, b: &HermitianField) -> Result<f64> {
    if a.n() != b.n() || a.domain.len() != b.domain.len() {
        return Err(Error::Argument("metric fields differ in dimension or grid".into()));
    }
    let pts = a.domain.interior();
    let per_point = par::map_indexed(pts.len(), |k| {
        let ev = linalg::generalized_eigenvalues(&a.values[pts[k]], &b.values[pts[k]])?;
        let lo = ev[0];
        let hi = ev[ev.len() - 1];
        if !(lo > 0.0) {
            return Err(Error::Domain(format!("metric not positive definite at point {}", pts[k])));
        }
        Ok(hi.max(1.0 / lo))
    });
    let mut worst = 1.0f64;
    for r in per_point {
        worst = worst.max(r?);
    }
    Ok(worst)
}
