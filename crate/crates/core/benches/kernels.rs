//! Per-point kernels on a 12⁴ grid (n = 2), run on a one-thread pool and on the
//! full pool. Built without the `parallel` feature only the sequential path exists
//! and both variants coincide.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eigenpde::suites::wavy_metric;
use eigenpde::{GridDomain, HermitianField, HuSpec, OperatorSpec, Problem, Rhs, ScalarField, SolverConfig};

fn problem(op: &str, nodes: usize) -> (Problem, Vec<f64>) {
    let n = 2;
    let d = Arc::new(GridDomain::cube(2 * n, nodes, -1.0, 1.0).unwrap());
    let alpha = HermitianField::from_fn(d.clone(), |x| wavy_metric(n, 0.2, x)).flag_positive_definite();
    let h = ScalarField::from_fn(d.clone(), |x| 0.2 * x[0].cos() * x[3].sin());
    let rhs = Rhs::new(h, HuSpec::Linear { a: 1.0 }).unwrap();
    let p = Problem::new(OperatorSpec::parse(op, n).unwrap(), alpha.clone(), alpha, rhs).unwrap();
    let u = (0..d.len())
        .map(|idx| {
            if d.on_edge(idx) {
                0.0
            } else {
                let x = d.coords(idx);
                0.02 * (x[0] + x[1]).sin() * (x[2] - x[3]).cos()
            }
        })
        .collect();
    (p, u)
}

#[cfg(feature = "parallel")]
fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut sizes = vec![1];
    if all > 1 {
        sizes.push(all);
    }
    sizes
        .into_iter()
        .map(|t| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
            (format!("threads={t}"), pool)
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn on_pools(c: &mut Criterion, group: &str, f: impl Fn() -> f64 + Sync) {
    let mut g = c.benchmark_group(group);
    for (label, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(label), |b| b.iter(|| pool.install(|| black_box(f()))));
    }
    g.finish();
}

#[cfg(not(feature = "parallel"))]
fn on_pools(c: &mut Criterion, group: &str, f: impl Fn() -> f64 + Sync) {
    let mut g = c.benchmark_group(group);
    g.bench_function(BenchmarkId::from_parameter("sequential"), |b| b.iter(|| black_box(f())));
    g.finish();
}

fn kernels(c: &mut Criterion) {
    for op in ["log-det", "sigma-k:2", "nm1-ma:log-det"] {
        let (p, u) = problem(op, 12);
        on_pools(c, &format!("residual/{op}"), || p.residual(&u, 1.0, 0.0).unwrap()[0]);
        let du: Vec<f64> = u.iter().map(|v| v * 0.5 + 1e-3).collect();
        on_pools(c, &format!("linearized_apply/{op}"), || p.linearized_apply(&u, 1.0, 0.0, &du).unwrap()[0]);
    }
    let (p, _) = problem("log-det", 10);
    let cfg = SolverConfig::default();
    on_pools(c, "continuity_solve/log-det", || p.continuity_solve(&cfg).unwrap().sup_u);
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);
