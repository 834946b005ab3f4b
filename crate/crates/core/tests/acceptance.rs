//! Acceptance criteria, one test per criterion.
//!
//! Each test prints a single `PASS`/`FAIL` line straight to stdout (bypassing the
//! test harness capture) and then asserts. Expected values come from oracles
//! written here independently of the library, or from the library's own
//! end-to-end scenarios where the criterion is about those runs.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use eigenpde::eigen_ops::{self, Cone, OperatorSpec, Spectrum};
use eigenpde::forms::{self, exterior, FormN1N1};
use eigenpde::geometry::{self, DefiningFunction};
use eigenpde::hessian_affine::{self, RMat, RealMetricField};
use eigenpde::linalg::{c, identity, max_abs_entry, CMat};
use eigenpde::scenario::{self, Outcome};
use eigenpde::suites;
use eigenpde::{GridDomain, HermitianField, HuSpec, Problem, Rhs, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Criterion {
    id: u32,
    title: &'static str,
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Criterion {
            id,
            title,
            notes: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        let label = label.into();
        if ok {
            self.notes.push(label);
        } else {
            self.failures.push(label);
        }
    }

    /// `value <= tol`, reported with both numbers.
    fn within(&mut self, label: &str, value: f64, tol: f64) {
        self.check(format!("{label} {value:.2e} <= {tol:.0e}"), value <= tol);
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let detail = if self.failures.is_empty() {
            self.notes.join("; ")
        } else {
            format!("failed: {}", self.failures.join("; "))
        };
        let line = format!("{verdict} [{:>2}] {}: {detail}\n", self.id, self.title);
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(line.as_bytes());
        let _ = out.flush();
        assert!(self.failures.is_empty(), "criterion {} failed: {:?}", self.id, self.failures);
    }
}

fn run_builtin(name: &str) -> Outcome {
    let s = scenario::builtin(name).unwrap_or_else(|| panic!("builtin {name} exists"));
    scenario::run(&s, None).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn result(o: &Outcome) -> &Value {
    &o.report["result"]
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn suite_max(name: &str, seed: u64) -> (bool, f64, usize) {
    let rep = suites::run_suite(name, seed).unwrap();
    let worst = rep.checks.iter().map(|c| c.max_error).fold(0.0, f64::max);
    let samples = rep.checks.iter().map(|c| c.samples).sum();
    (rep.passed, worst, samples)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `σ_k` by expanding `Π (1 + λ_i t)` as a polynomial in `t`.
fn sigma_poly(lambda: &[f64]) -> Vec<f64> {
    let mut e = vec![1.0];
    for &l in lambda {
        let mut next = vec![0.0; e.len() + 1];
        for (k, &v) in e.iter().enumerate() {
            next[k] += v;
            next[k + 1] += l * v;
        }
        e = next;
    }
    e
}

/// `σ_k` by summing over `k`-subsets, and the sum of absolute subset products.
fn sigma_subsets(lambda: &[f64], k: usize) -> (f64, f64) {
    let n = lambda.len();
    let mut sum = 0.0;
    let mut scale = 0.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let p: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| lambda[i]).product();
        sum += p;
        scale += p.abs();
    }
    (sum, scale)
}

fn random_hermitian(r: &mut ChaCha8Rng, n: usize) -> CMat {
    let b = CMat::from_fn(n, n, |_, _| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
    (&b + b.adjoint()) * c(0.5, 0.0)
}

fn random_positive(r: &mut ChaCha8Rng, n: usize) -> CMat {
    let b = CMat::from_fn(n, n, |_, _| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
    let m = &b * b.adjoint() + identity(n) * c(0.5, 0.0);
    (&m + m.adjoint()) * c(0.5, 0.0)
}

fn sorted_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn c01_operator_algebra() {
    let mut cr = Criterion::new(1, "operator algebra");
    let mut r = rng(11);
    let mut recurrence = 0.0f64;
    let mut mismatches = 0usize;
    let mut samples = 0usize;
    for n in 1..=6usize {
        for _ in 0..10_000 {
            let lambda: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..3.0)).collect();
            let spec = Spectrum::new(lambda.clone()).unwrap();
            for k in 1..=n {
                let (exact, scale) = sigma_subsets(&lambda, k);
                let got = eigen_ops::sigma_k(&spec, k).unwrap();
                recurrence = recurrence.max((got - exact).abs() / scale.max(1.0));
                // Γ_k = {σ_1 > 0, …, σ_k > 0}, judged on the subset sums
                let inside = (1..=k).all(|j| sigma_subsets(&lambda, j).0 > 0.0);
                let near_edge = (1..=k).any(|j| {
                    let (v, s) = sigma_subsets(&lambda, j);
                    v.abs() <= 1e-12 * s.max(1.0)
                });
                if !near_edge && inside != (Cone::GammaK { k, n }).contains(&spec, 0.0) {
                    mismatches += 1;
                }
            }
            samples += 1;
        }
    }
    cr.within("sigma_k vs subsets (rel)", recurrence, 1e-12);
    cr.check(format!("cone mismatches {mismatches}/{samples}"), mismatches == 0);

    let mut homogeneity = 0.0f64;
    for n in 1..=6usize {
        let op = OperatorSpec::parse("log-det", n).unwrap();
        for _ in 0..1000 {
            let lambda: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..3.0)).collect();
            let t: f64 = r.gen_range(0.2..5.0);
            let f = op.eval(&Spectrum::new(lambda.clone()).unwrap()).unwrap();
            let ft = op.eval(&Spectrum::new(lambda.iter().map(|l| t * l).collect()).unwrap()).unwrap();
            homogeneity = homogeneity.max((ft - f - n as f64 * t.ln()).abs());
        }
    }
    cr.within("log-det homogeneity", homogeneity, 1e-12);

    let (passed, _, checked) = suite_max("operators", 0);
    cr.check(format!("concavity/monotone gradient/symmetry suite over {checked} samples"), passed);
    cr.finish();
}

#[test]
fn c02_p_transform() {
    let mut cr = Criterion::new(2, "P-transform spectral law");
    let mut r = rng(12);
    let mut worst = 0.0f64;
    for n in 2..=4usize {
        for _ in 0..1000 {
            let m = random_hermitian(&mut r, n);
            let lam = sorted_eigenvalues(&m);
            let total: f64 = lam.iter().sum();
            let mut expected: Vec<f64> = lam.iter().map(|l| (total - l) / (n - 1) as f64).collect();
            expected.sort_by(f64::total_cmp);
            let got = sorted_eigenvalues(&eigen_ops::p_transform(&m).unwrap());
            for (a, b) in got.iter().zip(&expected) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    cr.within("eigenvalues of P(M) vs averaged spectrum, 3000 matrices", worst, 1e-10);
    let (passed, err, _) = suite_max("p-transform", 0);
    cr.check(format!("library suite max {err:.1e}"), passed);
    cr.finish();
}

#[test]
fn c03_form_identities() {
    let mut cr = Criterion::new(3, "(n-1,n-1)-form identities");
    let mut r = rng(13);
    let mut double_star = 0.0f64;
    let mut power_det = 0.0f64;
    let mut expansion = 0.0f64;
    for n in 2..=4usize {
        for _ in 0..200 {
            let theta = FormN1N1::new(random_hermitian(&mut r, n)).unwrap();
            let back = forms::hodge_star_11(&forms::hodge_star(&theta, true).unwrap(), true).unwrap();
            double_star = double_star.max(max_abs_entry(&(&back.coeffs - &theta.coeffs)));

            let g = random_positive(&mut r, n);
            let p = forms::power_n_minus_1(&g).unwrap();
            let det_g = g.determinant().re;
            let expected = det_g.powi(n as i32 - 1);
            power_det = power_det.max((p.det() - expected).abs() / expected.abs());
            if n <= 3 {
                let brute = exterior::power_coefficients(&g, forms::sign_convention);
                expansion = expansion.max(max_abs_entry(&(&brute - &p.coeffs)) / max_abs_entry(&p.coeffs));
            }
        }
    }
    cr.within("double Hodge star", double_star, 1e-12);
    cr.within("det of (n-1)-th power (rel)", power_det, 1e-10);
    cr.within("wedge expansion vs cofactor, n=2,3 (rel)", expansion, 1e-12);
    let (passed, err, _) = suite_max("forms", 0);
    cr.check(format!("library suite max {err:.1e}"), passed);
    cr.finish();
}

/// `g_{ij̄}` of `−log(−φ)` for the ball, `∂_i φ = z̄_i`, `∂_i∂̄_j φ = δ_ij`.
fn ball_metric(r: f64, x: &[f64]) -> CMat {
    let n = x.len() / 2;
    let phi: f64 = x.iter().map(|t| t * t).sum::<f64>() - r * r;
    CMat::from_fn(n, n, |i, j| {
        let zbar_i = c(x[i], -x[n + i]);
        let z_j = c(x[j], x[n + j]);
        let delta = if i == j { 1.0 } else { 0.0 };
        c(-delta / phi, 0.0) + zbar_i * z_j / (phi * phi)
    })
}

/// `g_{ij̄} = ¼ ∂²ψ/∂y_i∂y_j` with `ψ = −log(−φ(y))` for the arctan domain.
fn arctan_metric(x: &[f64]) -> CMat {
    let n = x.len() / 2;
    let t = (n as f64 * PI / (2.0 * n as f64 + 2.0)).tan();
    let off = n as f64 * PI / (2.0 * n as f64 + 2.0);
    let s: Vec<f64> = (0..n).map(|i| x[n + i] + t).collect();
    let phi: f64 = s.iter().map(|s| -s.atan() + off).sum();
    let d1: Vec<f64> = s.iter().map(|s| -1.0 / (1.0 + s * s)).collect();
    let d2: Vec<f64> = s.iter().map(|s| 2.0 * s / ((1.0 + s * s) * (1.0 + s * s))).collect();
    CMat::from_fn(n, n, |i, j| {
        let second = if i == j { d2[i] } else { 0.0 };
        c(0.25 * (-second / phi + d1[i] * d1[j] / (phi * phi)), 0.0)
    })
}

#[test]
fn c04_defining_metric() {
    let mut cr = Criterion::new(4, "defining-function metrics");
    let mut inverse = 0.0f64;
    let mut closed_form = [0.0f64; 2];
    let mut points = 0usize;
    for n in 1..=2usize {
        let nodes = if n == 1 { 41 } else { 11 };
        let cases = [
            (DefiningFunction::ball(1.0, n).unwrap(), -1.05, 1.05, true),
            (DefiningFunction::arctan(n).unwrap(), -0.6, 0.6, false),
        ];
        for (phi, lo, hi, is_ball) in cases {
            let d = GridDomain::cube(2 * n, nodes, lo, hi).unwrap();
            for idx in 0..d.len() {
                let x = d.coords(idx);
                if phi.value(&x).unwrap() >= -1e-3 {
                    continue;
                }
                let g = geometry::defining_metric(&phi, &x).unwrap();
                let ginv = geometry::defining_metric_inverse(&phi, &x).unwrap();
                inverse = inverse.max(max_abs_entry(&(&ginv * &g - identity(n))));
                let oracle = if is_ball { ball_metric(1.0, &x) } else { arctan_metric(&x) };
                let k = usize::from(!is_ball);
                closed_form[k] = closed_form[k].max(max_abs_entry(&(&g - &oracle)) / max_abs_entry(&oracle));
                points += 1;
            }
        }
    }
    cr.within(&format!("inverse times metric over {points} points"), inverse, 1e-10);
    cr.within("ball metric vs closed form (rel)", closed_form[0], 1e-12);
    cr.within("arctan metric vs closed form (rel)", closed_form[1], 1e-12);
    let (passed, err, _) = suite_max("defining-metric", 0);
    cr.check(format!("library suite max {err:.1e}"), passed);
    cr.finish();
}

#[test]
fn c05_linearization() {
    let mut cr = Criterion::new(5, "linearization vs finite differences");
    let mut r = rng(15);
    let n = 2;
    let d = Arc::new(GridDomain::cube(2 * n, 6, -1.0, 1.0).unwrap());
    let alpha = HermitianField::from_fn(d.clone(), |x| {
        let mut m = identity(n);
        m[(0, 0)] += c(0.15 * x[0].sin(), 0.0);
        m[(1, 1)] += c(0.15 * x[3].cos(), 0.0);
        m[(0, 1)] = c(0.1 * x[1].cos(), 0.1 * x[2].sin());
        m[(1, 0)] = m[(0, 1)].conj();
        m
    });
    let u = ScalarField::from_fn(d.clone(), |x| 0.04 * (x[0] + 0.3).sin() * (x[1] - 0.2).cos() * (x[2] * x[3] + 0.5).cos());
    let du: Vec<f64> = (0..d.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let h0 = ScalarField::from_fn(d.clone(), |x| 0.2 * x[1].cos());
    let (t, eps, step) = (0.6, 0.02, 1e-5);
    let mut worst = 0.0f64;
    let mut ids = Vec::new();
    for op in suites::families_for(n) {
        let rhs = Rhs::new(h0.clone(), HuSpec::Linear { a: 0.7 }).unwrap().with_eps(eps).unwrap();
        let p = Problem::new(op.clone(), alpha.clone(), alpha.clone(), rhs).unwrap();
        let lin = p.linearized_apply(&u.values, t, eps, &du).unwrap();
        let shifted = |sign: f64| -> Vec<f64> { u.values.iter().zip(&du).map(|(a, b)| a + sign * step * b).collect() };
        let plus = p.residual(&shifted(1.0), t, eps).unwrap();
        let minus = p.residual(&shifted(-1.0), t, eps).unwrap();
        let scale = lin.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = (0..d.len())
            .map(|i| ((plus[i] - minus[i]) / (2.0 * step) - lin[i]).abs())
            .fold(0.0f64, f64::max);
        worst = worst.max(err / scale);
        ids.push(op.id());
    }
    cr.within(&format!("relative error over {} families ({})", ids.len(), ids.join(", ")), worst, 1e-5);
    let (passed, err, _) = suite_max("linearization", 0);
    cr.check(format!("library suite max {err:.1e}"), passed);
    cr.finish();
}

/// `amp · Π cos(π (x_a − mid_a) / width_a)`, the manufactured profile on a box.
fn cosine_profile(d: &GridDomain, amp: f64, x: &[f64]) -> f64 {
    (0..x.len())
        .map(|a| {
            let lo = d.origin()[a];
            let hi = lo + (d.shape()[a] - 1) as f64 * d.spacing()[a];
            (PI * (x[a] - 0.5 * (lo + hi)) / (hi - lo)).cos()
        })
        .product::<f64>()
        * amp
}

#[test]
fn c06_manufactured_recovery() {
    let mut cr = Criterion::new(6, "manufactured-solution recovery");
    for name in [
        "manufactured-ma-n1",
        "manufactured-ma-n2",
        "manufactured-sigma2-n2",
        "manufactured-quotient-n3",
        "manufactured-nm1-n2",
    ] {
        let o = run_builtin(name);
        let (_, u) = &o.fields[0];
        let d = &u.domain;
        let err = d
            .interior()
            .iter()
            .map(|&idx| (u.values[idx] - cosine_profile(d, 0.1, &d.coords(idx))).abs())
            .fold(0.0f64, f64::max);
        cr.check(
            format!("{name} {:?} sup|u-u*| {err:.1e}", d.shape()),
            err <= 1e-9 && o.failure.is_none(),
        );
    }
    let o = run_builtin("refinement-logdet-n1");
    let errors: Vec<f64> = result(&o)["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| num(&l["error"]))
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = !ratios.is_empty() && ratios.iter().all(|r| (3.5..=4.5).contains(r));
    cr.check(format!("refinement ratios {} in [3.5, 4.5]", fmt_list(&ratios)), ok);
    cr.finish();
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| if x.abs() >= 0.1 { format!("{x:.3}") } else { format!("{x:.2e}") }).collect();
    format!("[{}]", parts.join(", "))
}

#[test]
fn c07_c0_bound() {
    let mut cr = Criterion::new(7, "C0 bound with strictly increasing h");
    // identity background, χ = α: F(α⁻¹χ) = log det I = 0 and h(x, 0) is the cosine
    // profile of amplitude 0.5 with its maximum on the centre node, so the bound is 0.5/1.
    let o = run_builtin("strict-hu-n1");
    let (_, u) = &o.fields[0];
    let sup_u = u.interior_sup_abs();
    cr.check(format!("strict-hu-n1 sup|u| {sup_u:.4} <= 0.5"), sup_u <= 0.5 && o.failure.is_none());

    let mut bounded = 0usize;
    for (name, _) in scenario::BUILTINS {
        let s = scenario::builtin(name).unwrap();
        if s.kind() != "complex-solve" {
            continue;
        }
        let o = scenario::run(&s, None).unwrap();
        for b in result(&o)["bound_diagnostics"].as_array().into_iter().flatten() {
            if b["name"] != "c0-strict-hu" {
                continue;
            }
            bounded += 1;
            let (lhs, rhs) = (num(&b["lhs"]), num(&b["rhs"]));
            let sup_u = o.fields[0].1.interior_sup_abs();
            cr.check(
                format!("{name} {lhs:.4} <= {rhs:.4}"),
                (lhs - sup_u).abs() <= 1e-14 && lhs <= rhs && b["asserted"] == true && o.failure.is_none(),
            );
        }
    }
    cr.check(format!("{bounded} converged scenarios carry the bound"), bounded >= 2);
    cr.finish();
}

#[test]
fn c08_epsilon_limit() {
    let mut cr = Criterion::new(8, "epsilon-limit stability");
    let o = run_builtin("eps-limit-decay");
    let inc: Vec<f64> = result(&o)["eps_increments"]
        .as_array()
        .unwrap()
        .iter()
        .map(num)
        .collect();
    let tail = &inc[inc.len().saturating_sub(3)..];
    let decreasing = tail.len() == 3 && tail.windows(2).all(|w| w[1] < w[0]);
    cr.check(format!("last three increments {} decreasing", fmt_list(tail)), decreasing);
    cr.within("final increment", *inc.last().unwrap_or(&f64::INFINITY), 1e-6);
    cr.finish();
}

#[test]
fn c09_subsolution_gate() {
    let mut cr = Criterion::new(9, "subsolution gate");
    let pass = run_builtin("subsolution-pass");
    cr.check(
        "log-det with chi = alpha passes",
        pass.failure.is_none() && result(&pass)["passed"] == true,
    );
    // lim_{t→∞} (σ_2/σ_1)(t, 1, 1) = lim (2t + 1)/(t + 2) = 2
    let t = 1e9;
    let limit = sigma_poly(&[t, 1.0, 1.0])[2] / sigma_poly(&[t, 1.0, 1.0])[1];
    let expected_gap = 2.0 - 10.0;
    let fail = run_builtin("subsolution-fail");
    let gap = num(&result(&fail)["worst_gap"]);
    let category = fail.failure.as_ref().map(|e| scenario::category_name(e.category()));
    cr.check(
        format!("quotient counterexample fails, limit {limit:.6} < h = 10, gap {gap}"),
        (limit - 2.0).abs() < 1e-8
            && result(&fail)["passed"] == false
            && (gap - expected_gap).abs() < 1e-9
            && category == Some("precondition"),
    );
    cr.finish();
}

fn level_values(o: &Outcome, key: &str) -> Vec<f64> {
    result(o)["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| num(&l[key]))
        .collect()
}

#[test]
fn c10_chern_einstein() {
    let mut cr = Criterion::new(10, "Chern-Einstein residual");
    let o = run_builtin("chern-einstein");
    let residual = level_values(&o, "einstein_residual");
    let stencil = level_values(&o, "stencil_error");
    for (r, s) in residual.iter().zip(&stencil) {
        cr.check(format!("{r:.2e} <= 10 x {s:.2e}"), *r <= 10.0 * s);
    }
    let ratios: Vec<f64> = residual.windows(2).map(|w| w[0] / w[1]).collect();
    cr.check(
        format!("ratios {} in [3.5, 4.5]", fmt_list(&ratios)),
        ratios.len() >= 2 && ratios.iter().all(|r| (3.5..=4.5).contains(r)),
    );
    cr.check("scenario status ok", o.failure.is_none());
    cr.finish();
}

#[test]
fn c11_lift_and_hesse_einstein() {
    let mut cr = Criterion::new(11, "Hessian lift and Hesse-Einstein");
    let mut r = rng(111);
    let mut lift = 0.0f64;
    for n in 1..=3usize {
        let d = Arc::new(GridDomain::cube(n, 7, -1.0, 1.0).unwrap());
        let q = RMat::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
        let q = (&q + q.transpose()) * 0.5;
        let b: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let u = ScalarField::from_fn(d.clone(), |x| {
            let xv = nalgebra::DVector::from_column_slice(x);
            0.05 * (xv.transpose() * &q * &xv)[(0, 0)] + b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
        });
        let g = RealMetricField::from_fn(d.clone(), |x| {
            RMat::from_fn(n, n, |i, j| if i == j { 2.0 + x[i].cos() } else { 0.1 })
        })
        .unwrap();
        let rep = hessian_affine::lift_check(&u, &g).unwrap();
        lift = lift.max(rep.hessian_discrepancy).max(rep.residual_discrepancy);
    }
    cr.within("lift discrepancy on random quadratics, n=1..3", lift, 1e-12);

    let o = run_builtin("hesse-einstein");
    let residual = level_values(&o, "einstein_residual");
    let stencil = level_values(&o, "stencil_error");
    let ratios: Vec<f64> = residual.windows(2).map(|w| w[0] / w[1]).collect();
    cr.check(
        format!("Einstein residual {} ratios {} in [3.5, 4.5]", fmt_list(&residual), fmt_list(&ratios)),
        ratios.len() >= 2 && ratios.iter().all(|r| (3.5..=4.5).contains(r)),
    );
    cr.check(
        "residual <= 10 x stencil error at every level",
        residual.iter().zip(&stencil).all(|(r, s)| *r <= 10.0 * s),
    );
    let gap = level_values(&o, "lift_residual_discrepancy").into_iter().fold(0.0, f64::max);
    cr.within("real vs lifted residual", gap, scenario::LIFT_TOLERANCE);
    cr.check("scenario status ok", o.failure.is_none());
    cr.finish();
}

#[test]
fn c12_cutoff() {
    let mut cr = Criterion::new(12, "cutoff function");
    for kappa in [0.05, 0.1, 0.12] {
        let a = 1.0 - kappa + kappa * kappa;
        let flat = (0..=1000)
            .map(|k| geometry::cutoff_f(a * k as f64 / 1000.0, kappa).unwrap())
            .any(|v| v != 0.0);
        // 𝔉′ = ψ f′; f′ = 2w / (κ (1 − w²)) with w = (τ − 1 + κ)/κ
        let mut negative = 0usize;
        let mut drops = 0.0f64;
        let mut prev = 0.0;
        for k in 0..1000 {
            let s = 0.999 * k as f64 / 999.0;
            let w = (s - 1.0 + kappa) / kappa;
            let f_prime = 2.0 * w / (kappa * (1.0 - w * w));
            if geometry::cutoff_psi(s, kappa) * f_prime < 0.0 {
                negative += 1;
            }
            let v = geometry::cutoff_f(s, kappa).unwrap();
            drops = drops.max(prev - v);
            prev = v;
        }
        cr.check(format!("kappa={kappa}: zero on [0, {a:.4}]"), !flat);
        cr.check(format!("derivative >= 0 ({negative} negative)"), negative == 0 && drops <= 1e-12);
    }
    cr.finish();
}

#[test]
fn c13_determinism() {
    let mut cr = Criterion::new(13, "determinism");
    let mut same = 0usize;
    for (name, _) in scenario::BUILTINS {
        let first = scenario::report_text(&run_builtin(name).report).unwrap();
        let second = scenario::report_text(&run_builtin(name).report).unwrap();
        if first == second {
            same += 1;
        } else {
            cr.check(format!("{name} differs between runs"), false);
        }
    }
    cr.check(format!("{same}/{} builtin reports byte-identical", scenario::BUILTINS.len()), same == scenario::BUILTINS.len());
    cr.finish();
}
