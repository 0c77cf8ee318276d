//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the dispatching functions run on the
//! rayon pool once the work is large enough; otherwise, and always for the
//! `*_seq` variants, they run on the calling thread. Every helper writes each
//! output element from exactly one closure call, so both paths produce
//! bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many scalars a kernel is not worth splitting across threads.
pub const PAR_THRESHOLD: usize = 1 << 13;

/// Whether the crate was built with rayon support.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Calls `f(chunk_index, chunk)` for consecutive `chunk`-sized pieces of `out`.
pub fn for_each_chunk<F>(out: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if out.len() >= PAR_THRESHOLD {
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, piece)| f(c, piece));
        return;
    }
    for_each_chunk_seq(out, chunk, f)
}

pub fn for_each_chunk_seq<F>(out: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    out.chunks_mut(chunk)
        .enumerate()
        .for_each(|(c, piece)| f(c, piece));
}

/// Order-preserving map over independent work items.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}

pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Runs `op` on a dedicated pool with `threads` workers (no-op without rayon).
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}
