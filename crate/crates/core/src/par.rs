//! Thin data-parallelism layer.
//!
//! With the default `parallel` feature the hot loops (per-building
//! simulation, per-day LP solves, tableau row elimination) run on rayon;
//! without it the same code paths run sequentially. Results are identical
//! either way: work items are independent and outputs are collected in
//! input order, never through unordered floating-point reductions.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, preserving index order in the output.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Runs `f` over mutable row chunks of `data` (each of length `stride`).
///
/// `f` receives the row index and the row slice. Rows shorter than `stride`
/// are not produced; `data.len()` must be a multiple of `stride`.
pub(crate) fn for_each_row<F>(data: &mut [f64], stride: usize, min_parallel_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert_eq!(data.len() % stride, 0);
    #[cfg(feature = "parallel")]
    {
        if data.len() >= min_parallel_len {
            data.par_chunks_mut(stride)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
            return;
        }
    }
    let _ = min_parallel_len;
    for (i, row) in data.chunks_mut(stride).enumerate() {
        f(i, row);
    }
}
