//! Order-preserving map over independent tasks. With the `parallel`
//! feature the work runs on a rayon pool; without it, or with one worker,
//! it runs inline. Output order never depends on the worker count.

/// Maps `f` over `items` on the calling thread.
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Maps `f` over `items` with up to `workers` threads; `0` means the
/// default pool size.
#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if workers == 1 || items.len() <= 1 {
        return map_sequential(items, f);
    }
    let run = || items.par_iter().map(&f).collect();
    if workers == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], _workers: usize, f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    map_sequential(items, f)
}

/// Whether this build can run tasks concurrently.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
