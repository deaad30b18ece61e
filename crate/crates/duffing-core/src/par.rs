//! Thin indirection between rayon and a sequential fallback.
//!
//! Grid workloads (parameter sweeps, Wigner rasters, multi-start fits) call
//! [`map_collect`]; with the `parallel` feature it fans out over the rayon
//! pool, without it the exact same closure runs in a plain loop. Results are
//! returned in input order either way, so outputs are deterministic.

#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}
