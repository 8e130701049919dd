//! Data-parallel helpers with a sequential fallback.
//!
//! Every parallel map collects into a `Vec` in index order, and callers
//! reduce that vector sequentially. Floating-point reductions therefore see
//! the same operand order whether or not the `parallel` feature is enabled,
//! and for any worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..len`, returning results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Maps `f` over a slice, returning results in slice order.
#[cfg(feature = "parallel")]
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Number of worker threads the parallel backend will use (1 when sequential).
pub fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Number of fixed-size chunks needed to cover `total` items.
pub fn chunk_count(total: usize, chunk: usize) -> usize {
    total.div_ceil(chunk)
}

/// Half-open item range of chunk `index`.
pub fn chunk_range(index: usize, total: usize, chunk: usize) -> std::ops::Range<usize> {
    let start = index * chunk;
    start..(start + chunk).min(total)
}
