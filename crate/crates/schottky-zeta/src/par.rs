//! Data-parallel map helpers. With the default `parallel` feature these fan
//! out over the rayon pool; without it they run sequentially. Results are
//! always collected in index order, so outputs are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use std::sync::Once;

static RUNTIME: Once = Once::new();

const WORKER_STACK: usize = 16 * 1024 * 1024;

/// Process-wide numerical runtime setup, applied once before the first
/// BLAS/LAPACK call or parallel region: the system OpenBLAS must run
/// single-threaded (its threaded LU assumes bigger stacks than worker
/// threads have, and would oversubscribe the cores rayon already uses), and
/// rayon workers get stacks large enough for LAPACK's frames.
pub fn ensure_runtime() {
    RUNTIME.call_once(|| {
        if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
            std::env::set_var("OPENBLAS_NUM_THREADS", "1");
        }
        #[cfg(feature = "parallel")]
        {
            let _ = rayon::ThreadPoolBuilder::new().stack_size(WORKER_STACK).build_global();
        }
    });
}

#[cfg(feature = "parallel")]
pub fn map_indexed<U: Send, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U + Sync + Send,
{
    ensure_runtime();
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U: Send, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U + Sync + Send,
{
    ensure_runtime();
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_slice<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    ensure_runtime();
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    ensure_runtime();
    items.iter().map(f).collect()
}

/// Apply `f` to consecutive chunks of `data`, passing the chunk index.
/// Chunks are disjoint, so the parallel and sequential paths write the same
/// bytes.
#[cfg(feature = "parallel")]
pub fn for_each_chunk<T: Send, F>(data: &mut [T], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk_len == 0 {
        return;
    }
    data.par_chunks_mut(chunk_len).enumerate().for_each(|(i, chunk)| f(i, chunk));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk<T: Send, F>(data: &mut [T], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk_len == 0 {
        return;
    }
    data.chunks_mut(chunk_len).enumerate().for_each(|(i, chunk)| f(i, chunk));
}

/// Cap the global worker pool. A no-op without the `parallel` feature or if
/// the pool is already running.
pub fn configure_jobs(jobs: usize) {
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    #[cfg(feature = "parallel")]
    {
        if jobs > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .stack_size(WORKER_STACK)
                .build_global();
        }
    }
    ensure_runtime();
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
    }
}

/// True when the parallel feature is compiled in.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
