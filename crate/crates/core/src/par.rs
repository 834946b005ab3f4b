//! Data-parallel helpers.
//!
//! Every kernel in the crate goes through these functions. With the `parallel`
//! feature they run on the rayon pool, otherwise sequentially. Reductions are
//! performed over fixed-size chunks whose partial results are combined in
//! index order, so the output does not depend on thread count or scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for deterministic reductions.
const CHUNK: usize = 4096;

/// Evaluates `f(i)` for `i in 0..len` and collects in index order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Maps a slice element-wise, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Applies `f` to every element of `out` together with its index.
pub fn for_each_mut<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

/// Deterministic sum of `f(i)` over `0..len`.
pub fn sum_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = map_indexed(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(len);
        (lo..hi).map(&f).sum::<f64>()
    });
    partial.into_iter().sum()
}

/// Deterministic maximum of `f(i)` over `0..len`; `-inf` when empty.
pub fn max_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = map_indexed(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(len);
        (lo..hi).map(&f).fold(f64::NEG_INFINITY, f64::max)
    });
    partial.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_indexed(a.len(), |i| a[i] * b[i])
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sup_norm(a: &[f64]) -> f64 {
    max_indexed(a.len(), |i| a[i].abs()).max(0.0)
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for_each_mut(y, |i, yi| *yi += alpha * x[i]);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reductions_match_sequential() {
        let v: Vec<f64> = (0..10_000).map(|i| ((i * 37) % 101) as f64 - 50.0).collect();
        let seq: f64 = v.iter().map(|x| x * x).sum();
        assert!((dot(&v, &v) - seq).abs() < 1e-9 * seq);
        assert_eq!(sup_norm(&v), 50.0);
        assert_eq!(max_indexed(0, |_| 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn map_keeps_order() {
        let out = map_indexed(9000, |i| i * 2);
        assert!(out.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
