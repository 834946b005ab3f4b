//! Seeded identity and property sweeps: operator algebra, the P-transform, form
//! conventions, defining metrics, the cutoff integral, linearization and the lift.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretize::HessianKind;
use crate::eigen_ops::{self, Cone, OperatorSpec, Spectrum};
use crate::error::{Error, Result};
use crate::forms::{self, exterior, FormN1N1, Frame};
use crate::geometry::{self, DefiningFunction};
use crate::grid::{GridDomain, HermitianField, ScalarField};
use crate::hessian_affine::{self, RMat, RealMetricField};
use crate::linalg::{self, c, CMat};
use crate::solver::{HuSpec, Problem, Rhs};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub samples: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, samples: usize, max_error: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.into(),
            samples,
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }

    /// A count of violations that must be zero.
    fn count(name: impl Into<String>, samples: usize, violations: usize) -> Self {
        CheckResult::new(name, samples, violations as f64, 0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    fn new(suite: &str, seed: u64, checks: Vec<CheckResult>) -> Self {
        SuiteReport {
            suite: suite.to_string(),
            seed,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

pub const SUITES: [&str; 7] = [
    "operators",
    "p-transform",
    "forms",
    "defining-metric",
    "cutoff",
    "linearization",
    "lift",
];

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    match name {
        "operators" => operator_algebra(seed),
        "p-transform" => p_transform_law(seed),
        "forms" => form_identities(seed),
        "defining-metric" => defining_metric_identities(),
        "cutoff" => cutoff_properties(),
        "linearization" => linearization(seed),
        "lift" => lift(),
        other => Err(Error::Parse(format!(
            "unknown suite '{other}' (expected one of {})",
            SUITES.join(", ")
        ))),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_hermitian(r: &mut impl Rng, n: usize) -> CMat {
    let b = CMat::from_fn(n, n, |_, _| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
    linalg::hermitian_part(&b)
}

pub fn random_positive(r: &mut impl Rng, n: usize) -> CMat {
    let b = CMat::from_fn(n, n, |_, _| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
    linalg::hermitian_part(&(&b * b.adjoint() + linalg::identity(n).map(|z| z * 0.3)))
}

/// `σ_k` by summing products over all `k`-subsets.
pub fn sigma_by_subsets(lambda: &[f64], k: usize) -> f64 {
    let n = lambda.len();
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| lambda[i]).product::<f64>())
        .sum()
}

/// Every family registered for dimension `n`.
pub fn families_for(n: usize) -> Vec<OperatorSpec> {
    let mut ids = vec!["log-det".to_string()];
    for k in 1..=n {
        ids.push(format!("sigma-k:{k}"));
        for l in 1..k {
            ids.push(format!("sigma-quotient:{k}:{l}"));
        }
    }
    if n >= 2 {
        ids.push("nm1-ma:log-det".to_string());
        ids.push("nm1-ma:sigma-k:2".to_string());
    }
    ids.iter().map(|id| OperatorSpec::parse(id, n).expect("registered id")).collect()
}

fn sample_in_cone(r: &mut impl Rng, op: &OperatorSpec) -> Option<Vec<f64>> {
    for _ in 0..1000 {
        let v: Vec<f64> = (0..op.n).map(|_| r.gen_range(-0.5..3.0)).collect();
        if op.cone.normalized_margin(&v) > 1e-3 {
            return Some(v);
        }
    }
    None
}

fn scale(f: f64) -> f64 {
    1.0 + f.abs()
}

fn operator_algebra(seed: u64) -> Result<SuiteReport> {
    let mut r = rng(seed);
    let mut checks = Vec::new();
    let samples = 10_000;
    for n in 1..=6usize {
        // Newton recurrence and cone membership against subset enumeration
        let mut sigma_err = 0.0f64;
        let mut mismatches = 0;
        let mut decided = 0;
        for _ in 0..samples {
            let lam: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
            let spec = Spectrum::new(lam.clone())?;
            let oracle: Vec<f64> = (1..=n).map(|k| sigma_by_subsets(&lam, k)).collect();
            for k in 1..=n {
                let s = eigen_ops::sigma_k(&spec, k)?;
                sigma_err = sigma_err.max((s - oracle[k - 1]).abs() / scale(oracle[k - 1]));
            }
            for k in 1..=n {
                if oracle[..k].iter().any(|s| s.abs() < 1e-9) {
                    continue;
                }
                decided += 1;
                let inside = oracle[..k].iter().all(|s| *s > 0.0);
                if (Cone::GammaK { k, n }).contains(&spec, 0.0) != inside {
                    mismatches += 1;
                }
            }
        }
        checks.push(CheckResult::new(format!("sigma-recurrence n={n}"), samples, sigma_err, 1e-12));
        checks.push(CheckResult::count(format!("cone-membership n={n}"), decided, mismatches));

        for op in families_for(n) {
            let id = op.id();
            let mut concave = 0.0f64;
            let mut monotone = 0.0f64;
            let mut elliptic = 0usize;
            let mut perm = 0.0f64;
            let mut count = 0;
            for _ in 0..300 {
                let (Some(x), Some(y)) = (sample_in_cone(&mut r, &op), sample_in_cone(&mut r, &op)) else {
                    continue;
                };
                count += 1;
                let (fx, gx) = op.eval_grad(&x)?;
                let (fy, gy) = op.eval_grad(&y)?;
                let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
                let (fm, _) = op.eval_grad(&mid)?;
                concave = concave.max((0.5 * (fx + fy) - fm) / scale(fm));
                let pairing: f64 = gx.iter().zip(&gy).zip(x.iter().zip(&y)).map(|((a, b), (p, q))| (a - b) * (p - q)).sum();
                monotone = monotone.max(pairing / scale(fx.abs() + fy.abs()));
                if gx.iter().any(|g| !(*g > 0.0)) {
                    elliptic += 1;
                }
                let mut shuffled = x.clone();
                shuffled.shuffle(&mut r);
                let (fs, _) = op.eval_grad(&shuffled)?;
                perm = perm.max((fs - fx).abs() / scale(fx));
            }
            checks.push(CheckResult::new(format!("concavity {id} n={n}"), count, concave.max(0.0), 1e-10));
            checks.push(CheckResult::new(format!("monotone-gradient {id} n={n}"), count, monotone.max(0.0), 1e-10));
            checks.push(CheckResult::count(format!("ellipticity {id} n={n}"), count, elliptic));
            checks.push(CheckResult::new(format!("permutation-symmetry {id} n={n}"), count, perm, 1e-12));
        }

        let op = OperatorSpec::parse("log-det", n)?;
        let mut homog = 0.0f64;
        for _ in 0..1000 {
            let lam: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..5.0)).collect();
            let t: f64 = r.gen_range(0.1..10.0);
            let scaled: Vec<f64> = lam.iter().map(|v| t * v).collect();
            let lhs = op.eval_grad(&scaled)?.0;
            let rhs = op.eval_grad(&lam)?.0 + n as f64 * t.ln();
            homog = homog.max((lhs - rhs).abs());
        }
        checks.push(CheckResult::new(format!("log-det homogeneity n={n}"), 1000, homog, 1e-12));
    }
    Ok(SuiteReport::new("operators", seed, checks))
}

fn p_transform_law(seed: u64) -> Result<SuiteReport> {
    let mut r = rng(seed);
    let mut checks = Vec::new();
    for n in 2..=4usize {
        let mut err = 0.0f64;
        for _ in 0..1000 {
            let m = random_hermitian(&mut r, n);
            let lam = linalg::hermitian_eigenvalues(&m);
            let mut expect: Vec<f64> = (0..n)
                .map(|k| (0..n).filter(|&i| i != k).map(|i| lam[i]).sum::<f64>() / (n - 1) as f64)
                .collect();
            expect.sort_by(f64::total_cmp);
            let got = linalg::hermitian_eigenvalues(&eigen_ops::p_transform(&m)?);
            for (a, b) in got.iter().zip(&expect) {
                err = err.max((a - b).abs());
            }
        }
        checks.push(CheckResult::new(format!("p-transform spectrum n={n}"), 1000, err, 1e-10));
    }
    Ok(SuiteReport::new("p-transform", seed, checks))
}

fn form_identities(seed: u64) -> Result<SuiteReport> {
    let mut r = rng(seed);
    let mut checks = Vec::new();
    for n in 2..=4usize {
        let mut star = 0.0f64;
        let mut framed = 0.0f64;
        let mut det = 0.0f64;
        for _ in 0..200 {
            let theta = FormN1N1::new(random_hermitian(&mut r, n))?;
            let back = forms::hodge_star_11(&forms::hodge_star(&theta, true)?, true)?;
            star = star.max(linalg::max_abs_entry(&(&back.coeffs - &theta.coeffs)));

            let omega = random_positive(&mut r, n);
            let frame = Frame::of(&omega)?;
            let local = frame.to_frame_n1(&theta)?;
            let twice = forms::hodge_star_11(&forms::hodge_star(&local, true)?, true)?;
            let global = frame.from_frame_n1(&twice)?;
            framed = framed.max(linalg::max_abs_entry(&(&global.coeffs - &theta.coeffs)) / scale(linalg::max_abs_entry(&theta.coeffs)));

            let power = forms::power_n_minus_1(&omega)?;
            let expect = linalg::det(&omega).re.powi(n as i32 - 1);
            det = det.max((power.det() - expect).abs() / expect.abs());
        }
        checks.push(CheckResult::new(format!("double-star n={n}"), 200, star, 1e-12));
        checks.push(CheckResult::new(format!("double-star general frame n={n}"), 200, framed, 1e-10));
        checks.push(CheckResult::new(format!("power determinant n={n}"), 200, det, 1e-10));
    }
    for n in 2..=3usize {
        let mut volume = 0.0f64;
        for p in 0..n {
            for q in 0..n {
                let e = exterior::Element::monomial(exterior::dz(p), c(1.0, 0.0))
                    .wedge(&exterior::Element::monomial(exterior::dzb(q), c(1.0, 0.0)))
                    .wedge(&exterior::basis_monomial(n, p, q));
                let v = e.coeff(exterior::volume(n)) * forms::sign_convention(p, q);
                volume = volume.max((v - c(1.0, 0.0)).norm());
            }
        }
        checks.push(CheckResult::new(format!("sign convention volume n={n}"), n * n, volume, 1e-15));
        let mut expansion = 0.0f64;
        for _ in 0..20 {
            let omega = random_positive(&mut r, n);
            let oracle = exterior::power_coefficients(&omega, forms::sign_convention);
            let power = forms::power_n_minus_1(&omega)?;
            expansion = expansion.max(linalg::max_abs_entry(&(&oracle - &power.coeffs)) / scale(linalg::max_abs_entry(&oracle)));
        }
        checks.push(CheckResult::new(format!("wedge expansion n={n}"), 20, expansion, 1e-12));
    }
    Ok(SuiteReport::new("forms", seed, checks))
}

/// Wirtinger data of the arctan domain written out from the closed forms
/// `φ_i = (√−1/2)/(1+s_i²)`, `φ_ij̄ = δ_ij s_i/(2(1+s_i²)²)`, `s_i = Im z_i + tan(nπ/(2n+2))`.
fn arctan_closed_form(n: usize, x: &[f64]) -> (Vec<linalg::C64>, CMat) {
    let t = (n as f64 * std::f64::consts::PI / (2.0 * n as f64 + 2.0)).tan();
    let d = (0..n)
        .map(|i| {
            let s = x[n + i] + t;
            c(0.0, 0.5) / (1.0 + s * s)
        })
        .collect();
    let dd = CMat::from_fn(n, n, |i, j| {
        if i != j {
            return c(0.0, 0.0);
        }
        let s = x[n + i] + t;
        c(s / (2.0 * (1.0 + s * s).powi(2)), 0.0)
    });
    (d, dd)
}

fn defining_metric_identities() -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for n in 1..=2usize {
        let nodes = if n == 1 { 41 } else { 11 };
        let cases = [
            ("ball", DefiningFunction::ball(1.0, n)?, -1.1, 1.1),
            ("arctan", DefiningFunction::arctan(n)?, -0.6, 0.6),
        ];
        for (label, phi, lo, hi) in cases {
            let shape = vec![nodes; 2 * n];
            let d = GridDomain::with_defining_function(&shape, &vec![lo; 2 * n], &vec![hi; 2 * n], phi.clone())?;
            let mut inv_err = 0.0f64;
            let mut closed = 0.0f64;
            let mut count = 0;
            for &idx in d.interior() {
                let x = d.coords(idx);
                let g = geometry::defining_metric(&phi, &x)?;
                let gi = geometry::defining_metric_inverse(&phi, &x)?;
                inv_err = inv_err.max(linalg::max_abs_entry(&(&gi * &g - linalg::identity(n))));
                if label == "arctan" {
                    let jet = phi.jet(&x)?;
                    let (dref, ddref) = arctan_closed_form(n, &x);
                    for (a, b) in jet.d.iter().zip(&dref) {
                        closed = closed.max((a - b).norm());
                    }
                    closed = closed.max(linalg::max_abs_entry(&(&jet.dd - &ddref)));
                }
                count += 1;
            }
            checks.push(CheckResult::new(format!("{label} inverse n={n}"), count, inv_err, 1e-10));
            if label == "arctan" {
                checks.push(CheckResult::new(format!("arctan closed form n={n}"), count, closed, 1e-12));
            }
        }
    }
    Ok(SuiteReport::new("defining-metric", 0, checks))
}

fn cutoff_properties() -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for kappa in [0.05, 0.1, 0.12] {
        let a = 1.0 - kappa + kappa * kappa;
        let mut flat = 0.0f64;
        for k in 0..=200 {
            let s = a * k as f64 / 200.0;
            flat = flat.max(geometry::cutoff_f(s, kappa)?.abs());
        }
        checks.push(CheckResult::new(format!("zero before transition kappa={kappa}"), 201, flat, 0.0));
        let mut negative_slope = 0.0f64;
        let mut drops = 0.0f64;
        let mut prev = 0.0;
        let samples = 1000;
        for k in 0..samples {
            let s = 0.999 * k as f64 / (samples - 1) as f64;
            let slope = geometry::cutoff_psi(s, kappa) * geometry::cutoff_profile_derivative(s, kappa);
            negative_slope = negative_slope.max(-slope);
            let v = geometry::cutoff_f(s, kappa)?;
            drops = drops.max(prev - v);
            prev = v;
        }
        checks.push(CheckResult::new(format!("nonnegative derivative kappa={kappa}"), samples, negative_slope.max(0.0), 0.0));
        checks.push(CheckResult::new(format!("monotone values kappa={kappa}"), samples, drops.max(0.0), 1e-12));
    }
    Ok(SuiteReport::new("cutoff", 0, checks))
}

/// Smooth Hermitian perturbation of the identity: `I + amp·M(x)` with `|M_jj| ≤ 1`,
/// `|M_jk| = 1/2`; positive definite for `amp ≤ 0.25` and `n ≤ 3`.
pub fn wavy_metric(n: usize, amp: f64, x: &[f64]) -> CMat {
    CMat::from_fn(n, n, |j, k| {
        if j == k {
            c(1.0 + amp * (x[j] + 2.0 * x[n + j]).sin(), 0.0)
        } else {
            let (p, q) = (j.min(k), j.max(k));
            let z = c(0.0, x[p] - x[n + q]).exp() * (0.5 * amp);
            if j < k {
                z
            } else {
                z.conj()
            }
        }
    })
}

fn linearization(seed: u64) -> Result<SuiteReport> {
    let mut r = rng(seed);
    let n = 2;
    let d = Arc::new(GridDomain::cube(2 * n, 6, -1.0, 1.0)?);
    let alpha = HermitianField::from_fn(d.clone(), |x| wavy_metric(n, 0.2, x)).flag_positive_definite();
    let phases: Vec<f64> = (0..2 * n).map(|_| r.gen_range(0.0..6.0)).collect();
    let u = ScalarField::from_fn(d.clone(), |x| 0.05 * x.iter().zip(&phases).map(|(t, p)| (t + p).sin()).product::<f64>());
    let du = ScalarField::from_values(d.clone(), (0..d.len()).map(|_| r.gen_range(-1.0..1.0)).collect())?;
    let h0 = ScalarField::from_fn(d.clone(), |x| 0.3 * x[0].sin());
    let mut checks = Vec::new();
    for op in families_for(n) {
        let rhs = Rhs::new(h0.clone(), HuSpec::Linear { a: 0.5 })?.with_eps(0.01)?;
        let p = Problem::with_kind(op.clone(), alpha.clone(), alpha.clone(), rhs, HessianKind::Complex)?;
        let (t, eps, s) = (0.7, 0.01, 1e-5);
        let lin = p.linearized_apply(&u.values, t, eps, &du.values)?;
        let shift = |sign: f64| -> Vec<f64> { u.values.iter().zip(&du.values).map(|(a, b)| a + sign * s * b).collect() };
        let plus = p.residual(&shift(1.0), t, eps)?;
        let minus = p.residual(&shift(-1.0), t, eps)?;
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..d.len() {
            let fd = (plus[i] - minus[i]) / (2.0 * s);
            num = num.max((fd - lin[i]).abs());
            den = den.max(lin[i].abs());
        }
        checks.push(CheckResult::new(format!("linearization {}", op.id()), d.len(), num / den, 1e-5));
    }
    Ok(SuiteReport::new("linearization", seed, checks))
}

fn lift() -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for n in 1..=2usize {
        let d = Arc::new(GridDomain::cube(n, 9, -1.0, 1.0)?);
        let g = RealMetricField::from_fn(d.clone(), |_| RMat::identity(n, n))?;
        let u = ScalarField::from_fn(d.clone(), |x| {
            let q: f64 = x.iter().enumerate().map(|(i, t)| (i + 1) as f64 * t * t).sum();
            0.1 * q + 0.05 * x.iter().product::<f64>() + 0.3 * x[0]
        });
        let rep = hessian_affine::lift_check(&u, &g)?;
        checks.push(CheckResult::new(format!("lift factor four, quadratic n={n}"), rep.points, rep.hessian_discrepancy, 1e-12));
        checks.push(CheckResult::new(format!("lift residual, quadratic n={n}"), rep.points, rep.residual_discrepancy, 1e-12));
    }
    Ok(SuiteReport::new("lift", 0, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_enumeration_examples() {
        assert_eq!(sigma_by_subsets(&[1.0, 2.0, 3.0], 2), 11.0);
        assert_eq!(sigma_by_subsets(&[1.0, 2.0, 3.0], 0), 1.0);
    }

    #[test]
    fn wavy_metric_is_hermitian_positive() {
        let x = [0.3, -0.7, 1.1, 0.2, -0.4, 0.9];
        let m = wavy_metric(3, 0.25, &x);
        assert!(linalg::hermitian_defect(&m) < 1e-15);
        assert!(linalg::min_eigenvalue(&m) > 0.0);
    }

    #[test]
    fn fast_suites_pass() {
        for s in ["p-transform", "forms", "cutoff", "lift", "defining-metric"] {
            let rep = run_suite(s, 7).unwrap();
            for c in &rep.checks {
                assert!(c.passed, "{s}: {c:?}");
            }
        }
        assert!(run_suite("nope", 0).is_err());
    }
}
