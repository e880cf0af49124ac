//! Row-parallel helpers. With the `parallel` feature the closures run on the
//! rayon pool; without it they run sequentially in row order. Either way each
//! output row depends only on immutable inputs, so results are bit-identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(j, row)` for every row `j` of a row-major buffer of width `n1`.
pub fn for_each_row<F>(out: &mut [f64], n1: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(n1).enumerate().for_each(|(j, row)| f(j, row));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(n1).enumerate().for_each(|(j, row)| f(j, row));
}

/// Like [`for_each_row`] but also reduces a per-row `f64` with `max`.
pub fn for_each_row_max<F>(out: &mut [f64], n1: usize, f: F) -> f64
where
    F: Fn(usize, &mut [f64]) -> f64 + Sync + Send,
{
    // max is order independent, so the parallel reduction is deterministic
    #[cfg(feature = "parallel")]
    return out
        .par_chunks_mut(n1)
        .enumerate()
        .map(|(j, row)| f(j, row))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    #[cfg(not(feature = "parallel"))]
    return out
        .chunks_mut(n1)
        .enumerate()
        .map(|(j, row)| f(j, row))
        .fold(f64::NEG_INFINITY, f64::max);
}

/// Maps independent jobs, preserving input order in the output.
pub fn map_jobs<T, R, F>(jobs: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return jobs.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return jobs.iter().map(f).collect();
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
