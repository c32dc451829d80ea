//! Thin dispatch layer over rayon. With the `parallel` feature disabled every
//! helper falls back to the equivalent sequential iterator, so results are
//! identical in both builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
pub(crate) fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
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
        items.iter().map(f).collect()
    }
}

/// Maps `f` over `0..n`, preserving order.
pub(crate) fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

/// Runs `f(index, chunk)` over consecutive `chunk_len` sized chunks of `data`.
/// Returns the sum of the per-chunk return values.
pub(crate) fn chunks_mut_sum<T, F>(data: &mut [T], chunk_len: usize, f: F) -> u64
where
    T: Send,
    F: Fn(usize, &mut [T]) -> u64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .sum()
    }
}

/// Whether this build dispatches work onto the rayon pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Runs `f` with the data-parallel helpers limited to `threads` workers.
/// Pools are built once per size and reused. Sequential builds ignore the
/// limit.
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        use std::collections::HashMap;
        use std::sync::{Arc, Mutex, OnceLock};

        static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
        let pool = {
            let mut pools = POOLS.get_or_init(Default::default).lock().expect("pool cache poisoned");
            pools
                .entry(threads.max(1))
                .or_insert_with(|| {
                    Arc::new(
                        rayon::ThreadPoolBuilder::new()
                            .num_threads(threads.max(1))
                            .build()
                            .expect("thread pool"),
                    )
                })
                .clone()
        };
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
