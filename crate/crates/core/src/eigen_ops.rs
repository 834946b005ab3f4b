//! Symmetric concave functions of eigenvalues and their admissible cones.
//!
//! An operator is a symmetric function `f` on an open symmetric cone `Γ ⊂ ℝⁿ`
//! that contains the positive orthant. The matrix operator `F(A)` is `f` applied
//! to the eigenvalues of a Hermitian `A`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Eigenvalue vector `(λ_1, …, λ_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("spectrum must have at least one entry".into()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("spectrum entries must be finite".into()));
        }
        Ok(Spectrum(values))
    }

    /// `(1, …, 1)` scaled by `t`.
    pub fn diagonal(n: usize, t: f64) -> Self {
        Spectrum(vec![t; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

impl std::ops::Index<usize> for Spectrum {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// All elementary symmetric polynomials `σ_0 = 1, σ_1, …, σ_n` by the
/// incremental-product recurrence `σ_j ← σ_j + x σ_{j-1}`.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (i, &x) in values.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// `σ_k(λ)` for `1 ≤ k ≤ n`.
pub fn sigma_k(lambda: &Spectrum, k: usize) -> Result<f64> {
    let n = lambda.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("sigma_k needs 1 <= k <= {n}, got {k}")));
    }
    Ok(elementary_symmetric(lambda.values())[k])
}

/// `σ_j(λ|i)`, the elementary symmetric polynomials with entry `i` deleted.
fn deleted_sigmas(values: &[f64], i: usize) -> Vec<f64> {
    let rest: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &x)| x)
        .collect();
    elementary_symmetric(&rest)
}

/// The map `μ_k = (1/(n−1)) Σ_{i≠k} λ_i` induced by the P-transform on diagonal matrices.
pub fn p_map(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let total: f64 = values.iter().sum();
    let scale = 1.0 / (n as f64 - 1.0);
    values.iter().map(|&x| (total - x) * scale).collect()
}

/// `P(M) = (Tr(M) I − M)/(n−1)`.
pub fn p_transform(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::Argument("the P-transform needs n >= 2".into()));
    }
    if m.ncols() != n {
        return Err(Error::Argument("the P-transform needs a square matrix".into()));
    }
    let tr = linalg::trace(m);
    let scale = 1.0 / (n as f64 - 1.0);
    let mut out = m.map(|z| -z * scale);
    for i in 0..n {
        out[(i, i)] += tr * scale;
    }
    Ok(out)
}

/// Admissible cone of an operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// `Γ_k = {σ_1 > 0, …, σ_k > 0}`.
    GammaK { k: usize, n: usize },
    PositiveOrthant { n: usize },
    /// `{λ : P(λ) ∈ inner}`.
    PTransformed(Box<Cone>),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match self {
            Cone::GammaK { n, .. } | Cone::PositiveOrthant { n } => *n,
            Cone::PTransformed(inner) => inner.dim(),
        }
    }

    /// Smallest defining quantity: `min_{j≤k} σ_j` for `Γ_k`, `min λ_i` for the
    /// orthant, the inner margin of `P(λ)` for a transformed cone.
    pub fn margin(&self, lambda: &[f64]) -> f64 {
        match self {
            Cone::GammaK { k, .. } => {
                let e = elementary_symmetric(lambda);
                e[1..=*k].iter().copied().fold(f64::INFINITY, f64::min)
            }
            Cone::PositiveOrthant { .. } => lambda.iter().copied().fold(f64::INFINITY, f64::min),
            Cone::PTransformed(inner) => inner.margin(&p_map(lambda)),
        }
    }

    /// Margin of the spectrum rescaled to unit max-norm; scale free, used by the solver.
    pub fn normalized_margin(&self, lambda: &[f64]) -> f64 {
        let s = lambda.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if s == 0.0 {
            return 0.0;
        }
        let scaled: Vec<f64> = lambda.iter().map(|x| x / s).collect();
        self.margin(&scaled)
    }

    /// Strict test `margin(λ) > margin`. A zero margin is the open-cone test and
    /// is subject to floating-point rounding at the boundary.
    pub fn contains(&self, lambda: &Spectrum, margin: f64) -> bool {
        lambda.len() == self.dim() && self.margin(lambda.values()) > margin
    }

    /// Names the first violated defining inequality.
    fn violation(&self, lambda: &[f64]) -> Option<String> {
        match self {
            Cone::GammaK { k, .. } => {
                let e = elementary_symmetric(lambda);
                (1..=*k)
                    .find(|&j| e[j] <= 0.0)
                    .map(|j| format!("sigma_{j} = {:.6e} <= 0", e[j]))
            }
            Cone::PositiveOrthant { .. } => lambda
                .iter()
                .position(|&x| x <= 0.0)
                .map(|i| format!("lambda_{} = {:.6e} <= 0", i + 1, lambda[i])),
            Cone::PTransformed(inner) => {
                let mu = p_map(lambda);
                inner.violation(&mu).map(|v| {
                    let v = v.replace("lambda_", "mu_");
                    format!("after P-transform: {v}")
                })
            }
        }
    }

    /// Whether `λ + t d` lies in the cone for all sufficiently large `t`.
    pub fn ray_enters(&self, lambda: &[f64], dir: &[f64]) -> bool {
        match self {
            Cone::PositiveOrthant { .. } => lambda
                .iter()
                .zip(dir)
                .all(|(&x, &d)| d > 0.0 || (d == 0.0 && x > 0.0)),
            Cone::GammaK { k, .. } => {
                let polys = sigma_ray_polynomials(lambda, dir);
                (1..=*k).all(|j| leading_term(&polys[j], j, lambda, dir).is_some_and(|(_, c)| c > 0.0))
            }
            Cone::PTransformed(inner) => inner.ray_enters(&p_map(lambda), &p_map(dir)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Cone::GammaK { k, n } if k == n => format!("Gamma_{k} (= positive orthant)"),
            Cone::GammaK { k, .. } => format!("Gamma_{k}"),
            Cone::PositiveOrthant { n } => format!("Gamma_{n} (positive orthant)"),
            Cone::PTransformed(inner) => format!("P^-1({})", inner.label()),
        }
    }
}

/// Coefficients in `t` of `σ_j(λ + t d)` for `j = 0..=n`; `out[j][m]` multiplies `t^m`.
pub fn sigma_ray_polynomials(lambda: &[f64], dir: &[f64]) -> Vec<Vec<f64>> {
    let n = lambda.len();
    let mut p = vec![vec![0.0; n + 1]; n + 1];
    p[0][0] = 1.0;
    for i in 0..n {
        for j in (1..=i + 1).rev() {
            for m in (0..=j).rev() {
                let mut add = lambda[i] * p[j - 1][m];
                if m > 0 {
                    add += dir[i] * p[j - 1][m - 1];
                }
                p[j][m] += add;
            }
        }
    }
    p
}

/// Highest-degree coefficient above round-off, as `(degree, coefficient)`.
fn leading_term(poly: &[f64], j: usize, lambda: &[f64], dir: &[f64]) -> Option<(usize, f64)> {
    let scale = lambda
        .iter()
        .chain(dir)
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let n = lambda.len() as f64;
    let tol = 1e-12 * n.powi(j as i32) * scale.powi(j as i32);
    poly.iter()
        .enumerate()
        .rev()
        .find(|(_, c)| c.abs() > tol)
        .map(|(m, &c)| (m, c))
}

/// Operator families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    /// `f = log(λ_1 ⋯ λ_n)` on the positive orthant.
    LogDet,
    /// `f = σ_k^{1/k}` on `Γ_k`.
    SigmaKRoot(usize),
    /// `f = (σ_k/σ_l)^{1/(k−l)}` on `Γ_k`, `1 ≤ l < k`.
    SigmaQuotient(usize, usize),
    /// `f(λ) = base(P(λ))`.
    NMinusOneMA(Box<Family>),
}

impl Family {
    pub fn id(&self) -> String {
        match self {
            Family::LogDet => "log-det".into(),
            Family::SigmaKRoot(k) => format!("sigma-k:{k}"),
            Family::SigmaQuotient(k, l) => format!("sigma-quotient:{k}:{l}"),
            Family::NMinusOneMA(base) => format!("nm1-ma:{}", base.id()),
        }
    }

    pub fn parse(id: &str) -> Result<Family> {
        let bad = || Error::Parse(format!("unknown operator id '{id}'"));
        if id == "log-det" {
            return Ok(Family::LogDet);
        }
        if let Some(base) = id.strip_prefix("nm1-ma:") {
            return Ok(Family::NMinusOneMA(Box::new(Family::parse(base)?)));
        }
        let parts: Vec<&str> = id.split(':').collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["sigma-k", k] => Ok(Family::SigmaKRoot(num(k)?)),
            ["sigma-quotient", k, l] => Ok(Family::SigmaQuotient(num(k)?, num(l)?)),
            _ => Err(bad()),
        }
    }

    fn cone(&self, n: usize) -> Result<Cone> {
        match self {
            Family::LogDet => Ok(Cone::PositiveOrthant { n }),
            Family::SigmaKRoot(k) => {
                if *k == 0 || *k > n {
                    return Err(Error::Argument(format!("sigma-k needs 1 <= k <= {n}")));
                }
                Ok(Cone::GammaK { k: *k, n })
            }
            Family::SigmaQuotient(k, l) => {
                if !(1 <= *l && l < k && *k <= n) {
                    return Err(Error::Argument(format!(
                        "sigma-quotient needs 1 <= l < k <= {n}, got k={k}, l={l}"
                    )));
                }
                Ok(Cone::GammaK { k: *k, n })
            }
            Family::NMinusOneMA(base) => {
                if n < 2 {
                    return Err(Error::Argument("nm1-ma needs n >= 2".into()));
                }
                Ok(Cone::PTransformed(Box::new(base.cone(n)?)))
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// A concrete operator: family, dimension and its cone.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub family: Family,
    pub n: usize,
    pub cone: Cone,
}

impl OperatorSpec {
    pub fn new(family: Family, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("dimension must be positive".into()));
        }
        let cone = family.cone(n)?;
        Ok(OperatorSpec { family, n, cone })
    }

    /// Parses `"log-det"`, `"sigma-k:<k>"`, `"sigma-quotient:<k>:<l>"` or `"nm1-ma:<base>"`.
    pub fn parse(id: &str, n: usize) -> Result<Self> {
        OperatorSpec::new(Family::parse(id)?, n)
    }

    pub fn id(&self) -> String {
        self.family.id()
    }

    fn check_in_cone(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.n {
            return Err(Error::Argument(format!(
                "spectrum has length {}, operator dimension is {}",
                lambda.len(),
                self.n
            )));
        }
        match self.cone.violation(lambda) {
            Some(v) => Err(Error::Domain(v)),
            None => Ok(()),
        }
    }

    /// `f(λ)`; errors outside the open cone.
    pub fn eval(&self, lambda: &Spectrum) -> Result<f64> {
        self.check_in_cone(lambda.values())?;
        Ok(eval_family(&self.family, lambda.values()))
    }

    /// `(f_1, …, f_n)`.
    pub fn grad(&self, lambda: &Spectrum) -> Result<Spectrum> {
        self.check_in_cone(lambda.values())?;
        Ok(Spectrum(grad_family(&self.family, lambda.values())))
    }

    /// `(f(λ), ∇f(λ))` in one pass.
    pub fn eval_grad(&self, lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_in_cone(lambda)?;
        Ok((eval_family(&self.family, lambda), grad_family(&self.family, lambda)))
    }

    /// `lim_{t→∞} f(λ + t e_i)`, possibly `+∞`.
    pub fn limit_at_infinity(&self, lambda: &Spectrum, i: usize) -> Result<f64> {
        if i >= self.n || lambda.len() != self.n {
            return Err(Error::Argument(format!(
                "direction {i} invalid for dimension {}",
                self.n
            )));
        }
        let mut dir = vec![0.0; self.n];
        dir[i] = 1.0;
        self.limit_along(lambda.values(), &dir)
    }

    /// `lim_{t→∞} f(λ + t d)` for a direction `d`; domain error if the ray never
    /// enters the cone.
    pub fn limit_along(&self, lambda: &[f64], dir: &[f64]) -> Result<f64> {
        if !self.cone.ray_enters(lambda, dir) {
            return Err(Error::Domain(format!(
                "the ray from {lambda:?} along {dir:?} never enters {}",
                self.cone.label()
            )));
        }
        Ok(limit_family(&self.family, lambda, dir))
    }

    /// `F(A)` and its gradient `∂F/∂A` (so that `dF = Re tr(grad · dA)`).
    pub fn matrix_f(&self, a: &CMat) -> Result<(f64, CMat)> {
        linalg::check_hermitian(a, 1e-12)?;
        if a.nrows() != self.n {
            return Err(Error::Argument(format!(
                "matrix is {}x{}, operator dimension is {}",
                a.nrows(),
                a.ncols(),
                self.n
            )));
        }
        let (values, vectors) = linalg::hermitian_eigen(a);
        let (f, g) = self.eval_grad(&values)?;
        Ok((f, linalg::reassemble(&vectors, &g)))
    }

    /// Value only; skips the gradient reassembly.
    pub fn matrix_value(&self, a: &CMat) -> Result<f64> {
        let values = linalg::hermitian_eigenvalues(a);
        self.check_in_cone(&values)?;
        Ok(eval_family(&self.family, &values))
    }

    /// `N > 0` with `f(N·𝟏) = σ`, by bisection along the diagonal ray.
    pub fn find_n_one_vector(&self, sigma: f64) -> Result<f64> {
        let f_at = |t: f64| eval_family(&self.family, &vec![t; self.n]);
        let unreachable = || {
            Error::Domain(format!(
                "value {sigma} is not attained by {} on the diagonal ray",
                self.id()
            ))
        };
        if !sigma.is_finite() {
            return Err(unreachable());
        }
        let mut lo = 1.0;
        let mut hi = 1.0;
        while f_at(lo) > sigma {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(unreachable());
            }
        }
        while f_at(hi) < sigma {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(unreachable());
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f_at(mid) < sigma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn eval_family(family: &Family, x: &[f64]) -> f64 {
    match family {
        Family::LogDet => x.iter().map(|v| v.ln()).sum(),
        Family::SigmaKRoot(k) => elementary_symmetric(x)[*k].powf(1.0 / *k as f64),
        Family::SigmaQuotient(k, l) => {
            let e = elementary_symmetric(x);
            (e[*k] / e[*l]).powf(1.0 / (*k - *l) as f64)
        }
        Family::NMinusOneMA(base) => eval_family(base, &p_map(x)),
    }
}

fn grad_family(family: &Family, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    match family {
        Family::LogDet => x.iter().map(|v| 1.0 / v).collect(),
        Family::SigmaKRoot(k) => {
            let k = *k;
            let e = elementary_symmetric(x);
            let pre = e[k].powf(1.0 / k as f64 - 1.0) / k as f64;
            (0..n).map(|i| pre * deleted_sigmas(x, i)[k - 1]).collect()
        }
        Family::SigmaQuotient(k, l) => {
            let (k, l) = (*k, *l);
            let e = elementary_symmetric(x);
            let q = e[k] / e[l];
            let p = 1.0 / (k - l) as f64;
            let pre = p * q.powf(p - 1.0);
            (0..n)
                .map(|i| {
                    let d = deleted_sigmas(x, i);
                    pre * (d[k - 1] * e[l] - e[k] * d[l - 1]) / (e[l] * e[l])
                })
                .collect()
        }
        Family::NMinusOneMA(base) => {
            let g = grad_family(base, &p_map(x));
            // ∂μ_k/∂λ_i = 1/(n−1) for k ≠ i
            let total: f64 = g.iter().sum();
            let scale = 1.0 / (n as f64 - 1.0);
            g.iter().map(|gi| (total - gi) * scale).collect()
        }
    }
}

fn limit_family(family: &Family, x: &[f64], dir: &[f64]) -> f64 {
    match family {
        Family::LogDet => {
            if dir.iter().any(|&d| d > 0.0) {
                f64::INFINITY
            } else {
                eval_family(family, x)
            }
        }
        Family::SigmaKRoot(k) => {
            let polys = sigma_ray_polynomials(x, dir);
            match leading_term(&polys[*k], *k, x, dir) {
                Some((m, _)) if m >= 1 => f64::INFINITY,
                Some((_, c)) => c.powf(1.0 / *k as f64),
                None => 0.0,
            }
        }
        Family::SigmaQuotient(k, l) => {
            let polys = sigma_ray_polynomials(x, dir);
            let num = leading_term(&polys[*k], *k, x, dir);
            let den = leading_term(&polys[*l], *l, x, dir);
            match (num, den) {
                (Some((mk, ck)), Some((ml, cl))) => {
                    if mk > ml {
                        f64::INFINITY
                    } else if mk == ml {
                        (ck / cl).powf(1.0 / (*k - *l) as f64)
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            }
        }
        Family::NMinusOneMA(base) => limit_family(base, &p_map(x), &p_map(dir)),
    }
}

/// One row of the operator registry.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorInfo {
    pub id: &'static str,
    pub formula: &'static str,
    pub cone: &'static str,
    pub limit_along_axes: &'static str,
}

/// Registered families with their cones and limits along coordinate rays.
pub fn registry() -> Vec<OperatorInfo> {
    vec![
        OperatorInfo {
            id: "log-det",
            formula: "log(l_1 ... l_n)",
            cone: "Gamma_n (positive orthant)",
            limit_along_axes: "+inf",
        },
        OperatorInfo {
            id: "sigma-k:<k>",
            formula: "sigma_k^(1/k)",
            cone: "Gamma_k",
            limit_along_axes: "+inf",
        },
        OperatorInfo {
            id: "sigma-quotient:<k>:<l>",
            formula: "(sigma_k/sigma_l)^(1/(k-l))",
            cone: "Gamma_k",
            limit_along_axes: "(sigma_{k-1}(l|i)/sigma_{l-1}(l|i))^(1/(k-l))",
        },
        OperatorInfo {
            id: "nm1-ma:log-det",
            formula: "base(P(l)), P(l)_k = sum_{i!=k} l_i/(n-1); any base id",
            cone: "P-transformed base cone",
            limit_along_axes: "base limit along P(e_i)",
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_k(&spec(&[1.0, 1.0, 1.0]), 2).unwrap(), 3.0);
        assert_eq!(sigma_k(&spec(&[0.0, 5.0, 7.0]), 3).unwrap(), 0.0);
        assert_eq!(sigma_k(&spec(&[1.0, 2.0, 3.0]), 2).unwrap(), 11.0);
        assert!(sigma_k(&spec(&[1.0, 2.0]), 3).is_err());
        assert!(sigma_k(&spec(&[1.0, 2.0]), 0).is_err());
    }

    #[test]
    fn spectrum_rejects_bad_input() {
        assert!(Spectrum::new(vec![]).is_err());
        assert!(Spectrum::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn eval_examples() {
        let ld2 = OperatorSpec::parse("log-det", 2).unwrap();
        assert_eq!(ld2.eval(&spec(&[1.0, 1.0])).unwrap(), 0.0);
        let q = OperatorSpec::parse("sigma-quotient:2:1", 3).unwrap();
        let v = q.eval(&spec(&[1.0, 2.0, 3.0])).unwrap();
        assert!((v - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn eval_outside_cone_names_violation() {
        let op = OperatorSpec::parse("sigma-k:2", 3).unwrap();
        let err = op.eval(&spec(&[-1.0, 2.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::Domain(ref s) if s.contains("sigma_2")), "{err}");
        let nm = OperatorSpec::parse("nm1-ma:log-det", 3).unwrap();
        let err = nm.eval(&spec(&[5.0, -4.0, -4.0])).unwrap_err();
        assert!(matches!(err, Error::Domain(ref s) if s.contains("mu_1")), "{err}");
    }

    #[test]
    fn logdet_gradient() {
        let op = OperatorSpec::parse("log-det", 2).unwrap();
        let g = op.grad(&spec(&[2.0, 4.0])).unwrap();
        assert_eq!(g.values(), &[0.5, 0.25]);
    }

    #[test]
    fn cone_examples() {
        let g3 = Cone::GammaK { k: 3, n: 3 };
        assert!(g3.contains(&spec(&[1.0, 1.0, 1.0]), 0.0));
        let g2 = Cone::GammaK { k: 2, n: 3 };
        assert!(!g2.contains(&spec(&[-1.0, 2.0, 2.0]), 0.0));
        let g1 = Cone::GammaK { k: 1, n: 3 };
        assert!(!g1.contains(&spec(&[-5.0, 1.0, 1.0]), 0.0));
    }

    #[test]
    fn limits() {
        let ld = OperatorSpec::parse("log-det", 3).unwrap();
        assert_eq!(ld.limit_at_infinity(&spec(&[1.0, 2.0, 3.0]), 0).unwrap(), f64::INFINITY);
        let q = OperatorSpec::parse("sigma-quotient:2:1", 3).unwrap();
        let l = q.limit_at_infinity(&spec(&[1.0, 2.0, 3.0]), 0).unwrap();
        assert!((l - 5.0).abs() < 1e-14);
        let l = q.limit_at_infinity(&spec(&[1.0, 1.0, 1.0]), 2).unwrap();
        assert!((l - 2.0).abs() < 1e-14);
        // orthant ray along e_1 from a point with a negative second entry never enters
        assert!(ld.limit_at_infinity(&spec(&[1.0, -1.0, 1.0]), 0).is_err());
        let sk = OperatorSpec::parse("sigma-k:2", 3).unwrap();
        assert_eq!(sk.limit_at_infinity(&spec(&[1.0, 1.0, 1.0]), 1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn nm1_limit_for_logdet_base() {
        let op = OperatorSpec::parse("nm1-ma:log-det", 3).unwrap();
        assert_eq!(
            op.limit_at_infinity(&spec(&[1.0, 1.0, 1.0]), 0).unwrap(),
            f64::INFINITY
        );
        // μ_1 = (λ_2+λ_3)/2 stays fixed along e_1; negative means the ray misses the cone
        assert!(op.limit_at_infinity(&spec(&[10.0, -1.0, -1.0]), 0).is_err());
    }

    #[test]
    fn p_transform_basics() {
        let m = linalg::real_diag(&[3.0, 1.0, 1.0]);
        let p = p_transform(&m).unwrap();
        assert!((p - linalg::real_diag(&[1.0, 2.0, 2.0])).norm() < 1e-15);
        let i3 = linalg::identity(3);
        assert!((p_transform(&i3).unwrap() - &i3).norm() < 1e-15);
        assert!(p_transform(&linalg::identity(1)).is_err());
    }

    #[test]
    fn n_one_vector() {
        let ld2 = OperatorSpec::parse("log-det", 2).unwrap();
        assert!((ld2.find_n_one_vector(0.0).unwrap() - 1.0).abs() < 1e-14);
        let ld3 = OperatorSpec::parse("log-det", 3).unwrap();
        assert!((ld3.find_n_one_vector(3.0).unwrap() - std::f64::consts::E).abs() < 1e-13);
        let sk = OperatorSpec::parse("sigma-k:2", 3).unwrap();
        assert!((sk.find_n_one_vector(3f64.sqrt()).unwrap() - 1.0).abs() < 1e-13);
        assert!(sk.find_n_one_vector(-1.0).is_err());
    }

    #[test]
    fn parse_roundtrip_and_errors() {
        for id in ["log-det", "sigma-k:2", "sigma-quotient:3:1", "nm1-ma:log-det", "nm1-ma:sigma-k:2"] {
            assert_eq!(OperatorSpec::parse(id, 3).unwrap().id(), id);
        }
        assert!(matches!(OperatorSpec::parse("sigma-k:x", 3), Err(Error::Parse(_))));
        assert!(matches!(OperatorSpec::parse("bogus", 3), Err(Error::Parse(_))));
        assert!(matches!(OperatorSpec::parse("sigma-quotient:1:2", 3), Err(Error::Argument(_))));
        assert!(matches!(OperatorSpec::parse("sigma-k:4", 3), Err(Error::Argument(_))));
    }

    #[test]
    fn matrix_f_examples() {
        let op = OperatorSpec::parse("log-det", 2).unwrap();
        let (v, g) = op.matrix_f(&linalg::identity(2)).unwrap();
        assert_eq!(v, 0.0);
        assert!((g - linalg::identity(2)).norm() < 1e-15);
        let (v, g) = op.matrix_f(&linalg::real_diag(&[2.0, 4.0])).unwrap();
        assert!((v - 8f64.ln()).abs() < 1e-15);
        assert!((g - linalg::real_diag(&[0.5, 0.25])).norm() < 1e-15);
        let mut bad = linalg::identity(2);
        bad[(0, 1)] = linalg::c(1.0, 0.0);
        assert!(matches!(op.matrix_f(&bad), Err(Error::Argument(_))));
    }
}
